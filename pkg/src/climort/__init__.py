"""Climate-driven stochastic mortality models (DLNM with Lee-Carter or Li-Lee)."""

from .backfit import FittedModel, backfit_lc, backfit_ll, check_equivalence
from .data import DailyClimateSeries, MortalityPanel, build_panel, lag_window
from .dlnm import bootstrap_coeffs, fit_dlnm, lag_slice, overall_cumulative_curve
from .estimators import DlnmLeeCarter, DlnmLiLee, make_model
from .evaluate import CvPlan, run_cv
from .forecast import annualize, climate_loading, fit_index_model, project, simulate_paths
from .lee_carter import fit_lc
from .li_lee import fit_ll
from .synth import SynthConfig, generate
from .splines import CrossBasisTransformer, build_cross_basis, ncs_basis
from .waves import stress, wave_counts, wave_days

__version__ = "0.1.0"

__all__ = [
    "CrossBasisTransformer", "CvPlan", "DailyClimateSeries", "DlnmLeeCarter", "DlnmLiLee",
    "FittedModel", "MortalityPanel", "SynthConfig", "annualize", "backfit_lc", "backfit_ll",
    "bootstrap_coeffs", "build_cross_basis", "build_panel", "check_equivalence",
    "climate_loading", "fit_dlnm", "fit_index_model", "fit_lc", "fit_ll", "generate", "lag_slice",
    "lag_window", "make_model", "ncs_basis", "overall_cumulative_curve", "project", "run_cv",
    "simulate_paths", "stress", "wave_counts", "wave_days",
]
