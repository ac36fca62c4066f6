"""Auto-compensating differential phase shift QKD simulator."""

from .harness import (
    ExperimentConfig,
    Stats,
    ablate_mirrors,
    cosine_sweep,
    efficiency_table,
    emit,
    run_experiment,
)
from .optics import TimeBinState, build_scheme

__version__ = "0.1.0"
