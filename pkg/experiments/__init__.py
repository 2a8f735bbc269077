from .config import ExperimentConfig, InstanceSource, RatioAssertion, ConfigError
from .runner import run_batch, evaluate_source
