#!/usr/bin/env python3
"""Regenerate the bundled fixtures deterministically.

Writes, under fixtures/:
  iris/iris.json           tiny 2-layer classifier (relu bottleneck, 3 outputs)
  iris/labels.txt          class names, one per line
  iris/samples.csv         raw inputs with their expected labels
  acas/layer5_fragment.json  sparse single-layer documents exercising the
  acas/layer6_fragment.json  record backend's published-fragment shapes
  acas/acas_sample.nnet    synthetic network in the genuine NNet text layout
                           (5 inputs, 6 hidden layers of 50, 5 outputs)
  acas/sample_property.prop  a box property calibrated against the pruned
                           sample network so the interval engine decides fast

Everything is seeded; running this script twice produces identical bytes.
"""

from __future__ import annotations

import os
import random
import sys
from fractions import Fraction

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from checknn.matrix import from_entries  # noqa: E402
from checknn.model_io import model_to_json, parse_nnet, prune  # noqa: E402
from checknn.network import Layer, Network  # noqa: E402
from checknn.scalar import rat_to_decimal_string  # noqa: E402
from checknn.verify import _compile, _propagate  # noqa: E402

HERE = os.path.dirname(os.path.abspath(__file__))
FIXTURES = os.path.join(HERE, "..", "fixtures")

SEED = 20240824
WEIGHT_DENOM = 10**5


def write(path: str, text: str) -> None:
    path = os.path.normpath(path)
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    print("wrote", os.path.relpath(path, os.path.join(HERE, "..")))


def iris_network() -> Network:
    # One relu feature f = relu(petal_len + petal_wid - 3), then three affine
    # class scores of f.  Chosen so the three sample rows classify correctly
    # and f = 5 produces a tie between outputs 1 and 2.
    layer0 = Layer(from_entries(1, 5, {(0, 0): -3, (0, 3): 1, (0, 4): 1}), "relu")
    layer1 = Layer(
        from_entries(
            3,
            2,
            {
                (0, 0): 1,
                (0, 1): -2,
                (1, 1): 1,
                (2, 0): Fraction(-5, 2),
                (2, 1): Fraction(3, 2),
            },
        ),
        "identity",
    )
    return Network((layer0, layer1), 4)


def make_iris() -> None:
    write(os.path.join(FIXTURES, "iris", "iris.json"), model_to_json(iris_network()))
    write(
        os.path.join(FIXTURES, "iris", "labels.txt"),
        "setosa\nversicolor\nvirginica\n",
    )
    write(
        os.path.join(FIXTURES, "iris", "samples.csv"),
        "sepal_length,sepal_width,petal_length,petal_width,label\n"
        "5.1,3.5,1.4,0.2,setosa\n"
        "6.4,3.2,4.5,1.5,versicolor\n"
        "6.3,3.3,6.0,2.5,virginica\n",
    )


def make_layer_fragments() -> None:
    layer5 = Network(
        (Layer(from_entries(50, 51, {(0, 0): 1, (0, 10): -1, (0, 29): -1}), "relu"),),
        50,
    )
    write(os.path.join(FIXTURES, "acas", "layer5_fragment.json"), model_to_json(layer5))
    layer6 = Network(
        (
            Layer(
                from_entries(
                    5,
                    51,
                    {(0, 10): Fraction(2687, 50000), (0, 20): Fraction(227, 4000)},
                ),
                "identity",
            ),
        ),
        50,
    )
    write(os.path.join(FIXTURES, "acas", "layer6_fragment.json"), model_to_json(layer6))


def _token(numerator: int) -> str:
    return rat_to_decimal_string(Fraction(numerator, WEIGHT_DENOM))


def make_acas_nnet() -> str:
    rng = random.Random(SEED)
    sizes = [5, 50, 50, 50, 50, 50, 50, 5]
    lines = [
        "// Synthetic sample network in the NNet text format.",
        "// Architecture mirrors the public ACAS Xu nets: 5 inputs, six",
        "// hidden layers of 50 relu nodes, 5 outputs.  Weights are random;",
        "// regenerate with scripts/make_fixtures.py.",
        "7,5,5,50,",
        ",".join(str(s) for s in sizes) + ",",
        "0,",
        "0,-3.141593,-3.141593,100,0,",
        "60760,3.141593,3.141593,1200,1200,",
        "19791.091,0,0,650,600,7.5188840201,",
        "60261,6.28318530718,6.28318530718,1100,1200,373.94992,",
    ]

    def draw(limit: int) -> int:
        v = 0
        while v == 0:
            v = rng.randrange(-limit, limit + 1)
        return v

    for k in range(len(sizes) - 1):
        n_in, n_out = sizes[k], sizes[k + 1]
        for _ in range(n_out):
            lines.append(",".join(_token(draw(20000)) for _ in range(n_in)) + ",")
        for _ in range(n_out):
            lines.append(_token(draw(8000)) + ",")
    text = "\n".join(lines) + "\n"
    path = os.path.join(FIXTURES, "acas", "acas_sample.nnet")
    write(path, text)
    return path


def make_sample_property(nnet_path: str) -> None:
    net = parse_nnet(nnet_path).network
    pruned = prune(net, Fraction(9, 10))
    radius = Fraction(1, 100)
    box = tuple((-radius, radius) for _ in range(5))
    out = _propagate(_compile(pruned), box)
    # Bounds that propagation proves at the root with a comfortable margin.
    hi0 = out[0][1]
    hi_diff = out[1][1] - out[2][0]
    b0 = (hi0.numerator // hi0.denominator) + 2
    b1 = (hi_diff.numerator // hi_diff.denominator) + 2
    text = "\n".join(
        [
            "checknn-property v1",
            "# Sample property for the synthetic ACAS-style network (after",
            "# pruning at 0.9).  Inputs are in the normalized coordinate space.",
            "name acas-sample-box",
            "input 0 in [-0.01, 0.01]",
            "input 1 in [-0.01, 0.01]",
            "input 2 in [-0.01, 0.01]",
            "input 3 in [-0.01, 0.01]",
            "input 4 in [-0.01, 0.01]",
            f"assert y0 <= {b0}",
            f"assert y1 - y2 <= {b1}",
            "",
        ]
    )
    write(os.path.join(FIXTURES, "acas", "sample_property.prop"), text)


def main() -> None:
    make_iris()
    make_layer_fragments()
    path = make_acas_nnet()
    make_sample_property(path)


if __name__ == "__main__":
    main()
