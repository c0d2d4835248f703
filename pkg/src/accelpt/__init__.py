"""Non-reversible and accelerated parallel tempering."""
from ._backend import backend_name
from .accelerators import (AffineFlowParams, Accelerator, LangevinBridgeParams, PathProposal,
                           accel_cost, flow_work, swap_acceptance)
from .annealing import AnnealingPath, Schedule, uniform_schedule, vp_alpha, vp_mean_scale
from .diagnostics import (RunDiagnostics, compute_normalized, estimate_rejections, global_barrier,
                          round_trip_rate_formula, skl_estimate, summarize)
from .engine import EnsembleState, IndexProcess, SwapRecords, run
from .errors import ConfigError, FitError
from .explorers import HmcSettings, hmc_step
from .free_energy import WorkLog, averaged_estimate, backward_estimate, forward_estimate
from .targets import TargetDensity, build_target

__version__ = "0.1.0"
