"""Configuration, experiment runners, CSV records and plots."""
from .config import ExperimentConfig, default_config, load_config
from .experiments import (
    GPComparison,
    quantum_gp_predict,
    run_elementwise,
    run_end_to_end,
    run_experiment,
    run_fig2,
    run_fig3,
    run_fig4,
)
from .plots import emit_plot
