"""latentcast: forecast large panels of short series through a regularized latent factorization."""

from .forecasters import Forecaster, MethodInapplicable, MethodMenu, default_menu, fit_predict
from .metrics import EvalReport, OwaReport, evaluate_panel, mase, naive2, owa, smape
from .panel import SeriesMatrix, SeriesView, SplitSpec, reconstruct, split
from .pipeline import RunConfig, run
from .rank_selection import ElbowCurve, pick_elbow, sweep
from .selection import FoldPlan, ensemble_forecast, forecast_panel, plan_folds, rank_methods
from .trmf import TrmfConfig, TrmfModel, ar_forecast, reconstruction_error
from .trmf import fit as fit_trmf

__version__ = "0.1.0"

__all__ = [
    "Forecaster",
    "MethodInapplicable",
    "MethodMenu",
    "default_menu",
    "fit_predict",
    "EvalReport",
    "OwaReport",
    "evaluate_panel",
    "mase",
    "naive2",
    "owa",
    "smape",
    "SeriesMatrix",
    "SeriesView",
    "SplitSpec",
    "reconstruct",
    "split",
    "RunConfig",
    "run",
    "ElbowCurve",
    "pick_elbow",
    "sweep",
    "FoldPlan",
    "ensemble_forecast",
    "forecast_panel",
    "plan_folds",
    "rank_methods",
    "TrmfConfig",
    "TrmfModel",
    "ar_forecast",
    "fit_trmf",
    "reconstruction_error",
    "__version__",
]
