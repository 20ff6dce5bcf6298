"""Weight-space symmetry groups and quasi-equivariant metanetworks."""

from .netmodels import (Conv1dParams, MhaBlockParams, MlpParams, Params,
                        SCHEMA_VERSION, SchemaError, conv1d_forward, forward,
                        mha_forward, mlp_forward)
from .symmetry import (GlMhaElement, GroupElement, GroupError,
                       MonomialElement, act, check_functional_equiv, compose,
                       identity_gl, identity_monomial, inverse, sample_gl,
                       sample_monomial)
from .tensor import NumericError, ShapeError, Tensor

__all__ = [
    "Conv1dParams", "GlMhaElement", "GroupElement", "GroupError",
    "MhaBlockParams", "MlpParams", "MonomialElement", "NumericError",
    "Params", "SCHEMA_VERSION", "SchemaError", "ShapeError", "Tensor",
    "act", "check_functional_equiv", "compose", "conv1d_forward", "forward",
    "identity_gl", "identity_monomial", "inverse", "mha_forward",
    "mlp_forward", "sample_gl", "sample_monomial",
]

__version__ = "0.1.0"
