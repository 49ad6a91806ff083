"""Rate-distortion map compression for a Seeker/Supporter navigation team."""

from .beliefs import Belief, BlockCov, marginal_blocks, project_estimate, update_compressed, update_own
from .channel import WireMessage, dither_sequence, entropy_code, entropy_decode, frame, parse, quantize, reconstruct
from .gridmap import (
    Cell,
    GridMap,
    block_average_prior,
    complement_indices,
    elevation_to_traversability,
    fov_indices,
    load_map,
    path_weights,
)
from .planner import PlanConfig, cell_cost, plan
from .rdcomp import (
    CompressionPlan,
    NoisyConditionViolated,
    RdSolution,
    bitrate,
    bitrate_direct,
    design_compression,
    effective_weight,
    mrsd,
    noisy_adjust,
    reverse_water_filling,
    rsd,
    schur_terms,
)
from .sim import Metrics, SimConfig, StepRecord, load_config, run_oneshot, run_sequential

__version__ = "0.1.0"
