from .config import ExperimentConfig, load_config, seed_streams
from .runner import RunState, run_experiment, run_seed, smooth

__all__ = ["ExperimentConfig", "load_config", "seed_streams",
           "RunState", "run_experiment", "run_seed", "smooth"]
