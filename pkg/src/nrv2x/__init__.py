"""Analytical and slot-level models of NR-V2X Mode 2 scheduling with re-evaluation."""

from .baseline import BaselineParams, baseline_collision, baseline_latency
from .config import ScenarioConfig, parse_config, preset_config, render_config
from .coupled import CoupledSolution, collision_probability, solve
from .dtmc import SteadyStateVector, TransitionMatrix, balance_residual, steady_state
from .queue_model import QueueParams, mean_latency, queue_matrix, queue_steady_state
from .scheduler import (
    PoolGeometry,
    SchedulerParams,
    estimate_p_csr,
    estimate_p_re,
    rc_bounds,
    scheduler_closed_form,
    scheduler_matrix,
)
from .sim import SimReport, run, run_batch
from .traffic import CamParams, DenmParams, cam_closed_form, cam_matrix, denm_closed_form, denm_matrix

__version__ = "0.1.0"
