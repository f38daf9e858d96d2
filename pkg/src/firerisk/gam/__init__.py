from .basis import BasisError, bspline_basis, difference_penalty, sum_to_zero, uniform_knots
from .model import (
    GamFit,
    ModelSpec,
    SmoothTerm,
    StratifiedFits,
    TermDiagnostic,
    fit_gam,
    fit_stratified,
    gamma_deviance,
    partial_dependence,
    significance_stars,
    term_significance,
)
