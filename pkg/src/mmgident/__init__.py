"""Grey-box identification of a 3-DoF MMG ship model by CMA-ES."""
import os

import numba

# Prefer OpenMP over TBB unless the user picked a layer: an outdated TBB only
# produces a warning on every parallel launch.
if "NUMBA_THREADING_LAYER" not in os.environ and "NUMBA_THREADING_LAYER_PRIORITY" not in os.environ:
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "tbb", "workqueue"]

from .params import PARAM_NAMES, FixedModelConfig, ground_truth  # noqa: E402
from .objective import Objective, ObjectiveSpec, Trajectory, evaluate_J  # noqa: E402

__version__ = "0.1.0"
__all__ = ["PARAM_NAMES", "FixedModelConfig", "ground_truth", "Objective", "ObjectiveSpec",
           "Trajectory", "evaluate_J", "__version__"]
