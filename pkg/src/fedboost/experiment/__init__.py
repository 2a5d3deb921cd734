from .runner import run_experiment, run_seed
from .spec import ExperimentSpec, SpecError, load_dataset, load_spec, parse_spec

__all__ = ["ExperimentSpec", "SpecError", "load_dataset", "load_spec", "parse_spec",
           "run_experiment", "run_seed"]
