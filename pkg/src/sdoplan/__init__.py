"""Multiobjective sector-duration plan search on synthetic voxel phantoms."""

from .epsilon import EpsConfig, ParetoArchive, build_grid, payoff_table, run_wave
from .kernels import backend_name as kernel_backend
from .model import build_molp, criteria_of_plan, dose_of_plan, dvh, objectives_of_plan
from .phantom import PhantomSpec, SdoInstance, generate_phantom, read_instance, write_instance
from .presets import preset_spec
from .twophase import TwoPhaseConfig, run, run_ml, run_regular

__version__ = "0.1.0"

__all__ = [
    "EpsConfig", "ParetoArchive", "PhantomSpec", "SdoInstance",
    "TwoPhaseConfig", "build_grid", "build_molp", "criteria_of_plan",
    "dose_of_plan", "dvh", "generate_phantom", "kernel_backend",
    "objectives_of_plan", "payoff_table", "preset_spec", "read_instance",
    "run", "run_ml", "run_regular", "run_wave", "write_instance",
    "__version__",
]
