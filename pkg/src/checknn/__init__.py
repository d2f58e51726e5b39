"""checknn: exact-arithmetic neural network inference and verification.

Weights and inputs are arbitrary-precision rationals (or integers for
quantised networks), matrices come in three interchangeable backends
(dense, lazy, record), and the verification engines trade completeness
against cost while never reporting a wrong verdict.
"""

from .scalar import (
    Rational,
    QuantInt,
    Scalar,
    rat_add,
    rat_mul,
    rat_neg,
    rat_cmp,
    rat_from_decimal_string,
    rat_to_decimal_string,
    format_decimal,
    format_exact,
)
from .matrix import (
    BACKENDS,
    DenseMatrix,
    LazyMatrix,
    RecordMatrix,
    DimensionError,
    dense,
    from_entries,
    from_function,
    zeros,
    convert,
    dot_product,
    materialise,
    elementwise_equal,
    count_ops,
)
from .network import (
    ACTIVATIONS,
    ClassLabel,
    Layer,
    Network,
    argmax_label,
    fc_forward,
    forward,
    input_row,
    output_values,
    convert_network,
    relu,
)
from .model_io import (
    NNetModel,
    load_nnet,
    parse_nnet,
    load_json,
    save_json,
    load_model,
    model_to_json,
    model_from_json,
    normalize_input,
    denormalize_input,
    prune,
    quantize,
    dequantize,
)
from .property import (
    InputBox,
    LinearAtom,
    Property,
    Verdict,
    parse_property,
    load_property,
    eval_postcondition,
    sat_label,
)
from .verify import (
    Budget,
    VerifyStats,
    MonotoneReport,
    interval_affine,
    verify_interval,
    verify_exhaustive_quantised,
    falsify_random,
    check_monotone,
    report_dict,
)

__version__ = "0.1.0"
