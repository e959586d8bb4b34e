"""mmwtrack: desk-scale Monte Carlo comparison of mmWave beam-tracking schemes.

Scheme A refreshes the serving cell and beam pair with a periodic
exhaustive sweep; Scheme B additionally runs local beam refinements
between refreshes.  The package simulates both over a time-varying
directional cluster channel and accounts the UE-side tracking energy.
"""

__version__ = "0.1.0"

from .scenario import ScenarioConfig, Deployment, load_config, deploy, advance_ue
from .engine import run_trial, run_batch, TrialResult, SweepSpec

__all__ = [
    "ScenarioConfig",
    "Deployment",
    "load_config",
    "deploy",
    "advance_ue",
    "run_trial",
    "run_batch",
    "TrialResult",
    "SweepSpec",
    "__version__",
]
