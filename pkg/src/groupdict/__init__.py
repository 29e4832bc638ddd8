"""Dictionary learning for data whose dictionary is invariant under SO(2), O(2) or SO(3)."""

from .harmonics import (
    BlockDiagOperator,
    FourierCoefficients,
    Group,
    GroupElement,
    IrrepTable,
    enumerate_irreps,
    fourier_transform,
    plancherel_norm,
    quadrature_grid,
    synthesize,
)
from .learner import (
    Dictionary,
    FitConfig,
    code_exact,
    code_so3_one_sparse,
    code_so3_sdp,
    dictionary_distance,
    fit,
    fit_baseline_l1,
    normalize,
)
from .lifting import RasterImage, lift_image_to_so3_coeffs, render_atom
from .orbitope import (
    minkowski_o2,
    minkowski_so2,
    so3_operator_norm_relaxed,
    tensor_minkowski_relaxed,
    vandermonde_decompose,
)

__version__ = "0.1.0"
