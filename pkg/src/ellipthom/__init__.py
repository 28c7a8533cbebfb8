"""Homogenization and ellipticity constants for periodic two-phase elastic
composites on pixel grids.

The package computes the homogenized stiffness of a two-phase linear elastic
cell by a periodic Q1 finite element method, together with a family of
coercivity constants (periodic, Bloch-resolved, supercell, shifted/rank-one,
and long-wavelength limits) whose signs and orderings decide whether the
homogenized tensor stays strongly elliptic.  Microstructure generators,
a closed-form laminate oracle, and a small CLI live alongside.
"""

from .errors import (
    ConfigError,
    ConstraintViolation,
    DegenerateCell,
    DimensionMismatch,
    EllipthomError,
    IndefinitenessDetected,
    NonIntegerBandWidth,
    NonPositiveMu,
    NotConverged,
    OddN,
    PackingStalled,
    ShiftExceedsLambda6,
    SingularSystem,
)
from .tensors import (
    GutierrezPair,
    LameParams,
    QuadraticForm4,
    acoustic_tensor,
    identity_form,
    iso_tensor,
    lower_bound_residual,
    make_gutierrez,
    rank_one_min,
    sym_min,
    underline_tensor,
    unvec,
    vec,
)
from .laminate import LaminateSpec, laminate_corrector, laminate_lstar
from .fem import (
    CellOperator,
    CellProblem,
    CorrectorSolution,
    HomogenizedResult,
    apply_operator,
    det_integral,
    element_form,
    element_laplacian,
    homogenized_tensor,
    solve_corrector,
)
from .spectra import (
    BlochField,
    Lambda4Result,
    SpectralReport,
    bloch_min,
    compute_spectral_report,
    lambda1,
    lambda3_supercell,
    lambda4,
    lambda5,
    lambda6,
)

# Imported last: the package attribute `laminate` must be the generator
# function, not the laminate submodule that the import above registered.
from .microstructure import (
    PixelGrid,
    checkerboard,
    classify,
    complement,
    disks,
    grid_from_json_dict,
    grid_to_json_dict,
    grid_to_pbm,
    laminate,
    random_disks,
    volume_fraction,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ConstraintViolation",
    "DegenerateCell",
    "DimensionMismatch",
    "EllipthomError",
    "IndefinitenessDetected",
    "NonIntegerBandWidth",
    "NonPositiveMu",
    "NotConverged",
    "OddN",
    "PackingStalled",
    "ShiftExceedsLambda6",
    "SingularSystem",
    "GutierrezPair",
    "LameParams",
    "QuadraticForm4",
    "acoustic_tensor",
    "identity_form",
    "iso_tensor",
    "lower_bound_residual",
    "make_gutierrez",
    "rank_one_min",
    "sym_min",
    "underline_tensor",
    "unvec",
    "vec",
    "PixelGrid",
    "checkerboard",
    "classify",
    "complement",
    "disks",
    "grid_from_json_dict",
    "grid_to_json_dict",
    "grid_to_pbm",
    "laminate",
    "random_disks",
    "volume_fraction",
    "CellOperator",
    "CellProblem",
    "CorrectorSolution",
    "HomogenizedResult",
    "apply_operator",
    "det_integral",
    "element_form",
    "element_laplacian",
    "homogenized_tensor",
    "solve_corrector",
    "LaminateSpec",
    "laminate_corrector",
    "laminate_lstar",
    "BlochField",
    "Lambda4Result",
    "SpectralReport",
    "bloch_min",
    "compute_spectral_report",
    "lambda1",
    "lambda3_supercell",
    "lambda4",
    "lambda5",
    "lambda6",
    "__version__",
]
