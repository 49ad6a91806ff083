"""Seeker/Supporter simulations.

Two experiment drivers live here:

* :func:`run_sequential` -- the Seeker walks to its goal, replanning every
  step, while the Supporter flies a fixed route and streams compressed map
  content designed against the Seeker's current path.
* :func:`run_oneshot` -- the Supporter sees the whole map once and sends a
  single compressed message against a block-averaged prior.

Configs are plain ``key = value`` text files (values are Python literals).
"""

from __future__ import annotations

import ast
import csv
import logging
import math
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import channel
from .beliefs import (
    Belief,
    compressed_cov_update,
    own_cov_update,
    project_estimate,
    save_belief,
    update_compressed,
    update_own,
)
from .gridmap import (
    Cell,
    GridMap,
    block_average_prior,
    boustrophedon,
    elevation_to_traversability,
    fov_indices,
    load_map,
    path_weights,
    read_csv_grid,
    waypoint_path,
)
from .planner import PlanConfig, plan, save_path
from .rdcomp import CompressionPlan, DesignResult, RdSolution, design_compression, dump_solution, plan_bitrate

log = logging.getLogger(__name__)

FI_NOISE_VAR = 1e-12
CI_MAX_CELLS = 64 * 64
LN2 = math.log(2.0)

STRATEGIES = ("rd", "fully_informed", "uninformed")
MODES = ("sequential", "oneshot")


class ConfigError(ValueError):
    """Invalid or inconsistent simulation configuration."""


class ReplicationError(AssertionError):
    """Seeker and Supporter derived different compression plans."""


@dataclass
class SimConfig:
    map: str = ""
    map_kind: str = "traversability"
    crop: tuple | None = None
    start: tuple = (0, 0)
    goal: tuple = (0, 0)
    supporter_path: list | None = None
    supporter_waypoints: list | None = None
    supporter_sweep: tuple | None = None
    fov_seeker: tuple = (5, 5)
    fov_supporter: tuple = (7, 7)
    alpha: float = 0.05
    tau: float = 1.4
    sigma: float = 10.0
    weight_floor: float = 1e-6
    weight_offset: float = 0.001
    a: float = 0.025
    epsilon: float = 0.501
    sigma_m_sq: float = 0.01
    prior_mean: Any = 0.5
    prior_var: float = 1.0
    prior_block: int = 8
    session_seed: int = 0
    noise_seed: int = 0
    max_steps: int = 1000
    mode: str = "sequential"
    strategy: str = "rd"
    supporter_noise_var: float | None = None
    snapshot_every: int = 0
    full_scale: bool = False
    base_dir: str = field(default=".", repr=False)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        for name in ("tau", "sigma", "weight_floor", "a", "sigma_m_sq", "prior_var"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.strategy == "rd" and not self.alpha > 0:
            raise ConfigError("alpha must be positive for the rd strategy")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ConfigError("epsilon must lie in [0, 1]")
        if self.max_steps < 0:
            raise ConfigError("max_steps must be nonnegative")
        for name in ("fov_seeker", "fov_supporter"):
            fr, fc = getattr(self, name)
            if fr <= 0 or fc <= 0 or fr % 2 == 0 or fc % 2 == 0:
                raise ConfigError(f"{name} sides must be odd positive integers")
        if self.supporter_noise_var is not None and not self.supporter_noise_var > 0:
            raise ConfigError("supporter_noise_var must be positive")

    @property
    def plan_config(self) -> PlanConfig:
        return PlanConfig(a=self.a, epsilon=self.epsilon)

    def with_overrides(self, **kw) -> "SimConfig":
        return replace(self, **kw)


_FIELD_NAMES = {f.name for f in fields(SimConfig)}


def _literal(text: str):
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text.strip().strip('"').strip("'")


def parse_config_text(text: str) -> dict:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _FIELD_NAMES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = _literal(value)
    return values


def data_path(name: str) -> Path:
    return Path(str(resources.files("ratemap") / "data" / name))


def resolve_config_path(name) -> Path:
    """Config file path; bare names fall back to the bundled configs."""
    p = Path(name)
    if p.is_file():
        return p
    for candidate in (name, f"{name}.tomlish"):
        q = data_path(str(candidate))
        if q.is_file():
            return q
    raise ConfigError(f"config {name!r} not found")


def coerce_overrides(pairs: Sequence[str]) -> dict:
    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"override {pair!r} is not key=value")
        key, value = pair.split("=", 1)
        key = key.strip()
        if key not in _FIELD_NAMES:
            raise ConfigError(f"unknown config key {key!r}")
        out[key] = _literal(value)
    return out


def load_config(path, overrides: dict | None = None) -> SimConfig:
    path = resolve_config_path(path)
    values = parse_config_text(path.read_text())
    values.update(overrides or {})
    values.setdefault("base_dir", str(path.parent))
    try:
        return SimConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def _resolve_file(name: str, base_dir: str) -> Path:
    p = Path(name)
    if p.is_absolute() and p.is_file():
        return p
    for q in (Path(base_dir) / name, data_path(name)):
        if q.is_file():
            return q
    raise ConfigError(f"map file {name!r} not found")


def load_world(cfg: SimConfig) -> GridMap:
    """Ground-truth map for a config (elevation files are converted)."""
    if not cfg.map:
        raise ConfigError("config has no map")
    path = _resolve_file(cfg.map, cfg.base_dir)
    if cfg.map_kind == "elevation":
        elev = read_csv_grid(path)
        if cfg.crop is not None:
            r0, c0, nr, nc = cfg.crop
            elev = elev[r0 : r0 + nr, c0 : c0 + nc]
        world = elevation_to_traversability(elev)
    elif cfg.map_kind == "traversability":
        world = load_map(path)
        if cfg.crop is not None:
            r0, c0, nr, nc = cfg.crop
            world = GridMap.from_array(world.as_array()[r0 : r0 + nr, c0 : c0 + nc])
    else:
        raise ConfigError(f"unknown map_kind {cfg.map_kind!r}")
    if world.size > CI_MAX_CELLS and not cfg.full_scale:
        raise ConfigError(
            f"{world.rows}x{world.cols} map exceeds the default size limit; pass --full-scale"
        )
    return world


def supporter_route(cfg: SimConfig, world: GridMap) -> list[Cell]:
    if cfg.supporter_path:
        route = [Cell(*c) for c in cfg.supporter_path]
    elif cfg.supporter_waypoints:
        route = waypoint_path(cfg.supporter_waypoints)
    elif cfg.supporter_sweep:
        route = boustrophedon(world.rows, world.cols, *cfg.supporter_sweep)
    else:
        route = [Cell(world.rows // 2, world.cols // 2)]
    for cell in route:
        if not world.contains(cell):
            raise ConfigError(f"supporter path cell {tuple(cell)} outside the map")
    return route


def prior_belief(cfg: SimConfig, world: GridMap, diagonal: bool = False) -> Belief:
    if isinstance(cfg.prior_mean, str):
        if cfg.prior_mean != "block":
            raise ConfigError(f"prior_mean must be a number or 'block', got {cfg.prior_mean!r}")
        mean = block_average_prior(world, cfg.prior_block)
    else:
        mean = np.full(world.size, float(cfg.prior_mean))
    return Belief.isotropic(mean, cfg.prior_var, diagonal=diagonal)


# ---------------------------------------------------------------------------
# sequential experiment


@dataclass(frozen=True)
class StepRecord:
    step: int
    seeker: Cell
    supporter: Cell
    rank: int
    surrogate_bits: float
    payload_bits: int
    path_length: int


@dataclass(frozen=True)
class Metrics:
    r_avg: float
    t_reach: int
    c_reach: float
    b_avg: float
    reached: bool


@dataclass
class SequentialResult:
    metrics: Metrics
    records: list[StepRecord]
    frames: list[bytes]
    visited: list[Cell]
    belief: Belief
    plans: list[CompressionPlan]


class SequentialSim:
    """Step-by-step driver of the Seeker/Supporter protocol.

    The Supporter keeps its own replica of the Seeker's covariance, updated
    from the Seeker's positions and its own messages only.  The Seeker
    re-derives every compression plan from its covariance and checks it
    against the one the Supporter used.
    """

    def __init__(self, cfg: SimConfig, world: GridMap | None = None, keep_history: bool = False):
        self.cfg = cfg
        self.world = world if world is not None else load_world(cfg)
        self.route = supporter_route(cfg, self.world)
        self.goal = Cell(*cfg.goal)
        self.seeker = Cell(*cfg.start)
        for cell in (self.goal, self.seeker):
            if not self.world.contains(cell):
                raise ConfigError(f"cell {tuple(cell)} outside the map")
        self.belief = prior_belief(cfg, self.world)
        self.replica_cov = self.belief.cov.copy()
        self.rng = np.random.default_rng(cfg.noise_seed)
        self.t = 0
        self.visited = [self.seeker]
        self.records: list[StepRecord] = []
        self.frames: list[bytes] = []
        self.plans: list[CompressionPlan] = []
        self.supporter_plans: list[CompressionPlan] = []
        self.keep_history = keep_history
        # (P_t, P+_t, P_t+1) per step when keep_history is set
        self.history: list[tuple[np.ndarray, np.ndarray, np.ndarray]] = []
        self.last_design: DesignResult | None = None
        self.v_scale = None if cfg.supporter_noise_var is None else float(cfg.supporter_noise_var)

    @property
    def done(self) -> bool:
        return self.seeker == self.goal or self.t >= self.cfg.max_steps

    def supporter_cell(self) -> Cell:
        return self.route[min(self.t, len(self.route) - 1)]

    def _weights(self, path):
        return path_weights(path, self.cfg.sigma, self.world, self.cfg.weight_floor)

    def _design(self, cov: np.ndarray, sel_b: np.ndarray, path) -> DesignResult | CompressionPlan:
        cfg = self.cfg
        if cfg.strategy == "uninformed":
            return CompressionPlan.empty(sel_b.size)
        if cfg.strategy == "fully_informed":
            n = sel_b.size
            return CompressionPlan(np.full(n, math.sqrt(12.0 * FI_NOISE_VAR)), n,
                                   axes=np.arange(n), lambdas=np.full(n, 1.0 / FI_NOISE_VAR))
        v = None if self.v_scale is None else self.v_scale * np.eye(sel_b.size)
        return design_compression(cov, sel_b, self._weights(path), cfg.alpha, cfg.tau, v)

    def step(self) -> StepRecord:
        cfg, world = self.cfg, self.world
        x = world.values
        t = self.t

        # (1) Seeker observes its own window
        sel_a = fov_indices(self.seeker, *cfg.fov_seeker, world)
        y_a = x[sel_a] + self.rng.normal(0.0, math.sqrt(cfg.sigma_m_sq), sel_a.size)
        cov_before = self.belief.cov
        self.belief = update_own(self.belief, sel_a, y_a, cfg.sigma_m_sq)
        # the Supporter tracks the same covariance from the Seeker's reported position
        self.replica_cov = own_cov_update(self.replica_cov, sel_a, cfg.sigma_m_sq)[1]

        # (2) Seeker plans on the projected estimate
        path = plan(project_estimate(self.belief), world.shape, self.seeker, self.goal, cfg.plan_config)

        # (3) Supporter designs the message against the received path
        sup_cell = self.supporter_cell()
        sel_b = fov_indices(sup_cell, *cfg.fov_supporter, world)
        design = self._design(self.replica_cov, sel_b, path)
        sup_plan = design.plan if isinstance(design, DesignResult) else design

        # (4) Supporter compresses its (optionally noisy) observation and frames it
        x_b = x[sel_b]
        if sup_plan.v is not None:
            x_b = x_b + self.rng.multivariate_normal(np.zeros(sel_b.size), sup_plan.v)
        o = sup_plan.theta @ x_b if sup_plan.rank else np.zeros(0)
        buf, _ = channel.encode_message(t, sup_cell, o, sup_plan.deltas, cfg.session_seed)

        # (5) Seeker re-derives the plan, decodes and fuses
        msg = channel.parse(buf)
        sel_b_seeker = fov_indices(msg.supporter_cell, *cfg.fov_supporter, world)
        seeker_design = self._design(self.belief.cov, sel_b_seeker, path)
        seeker_plan = seeker_design.plan if isinstance(seeker_design, DesignResult) else seeker_design
        if not seeker_plan.same_as(sup_plan):
            raise ReplicationError(f"step {t}: Seeker and Supporter plans differ")
        _, y_b = channel.decode_message(buf, seeker_plan.deltas, cfg.session_seed)
        p_plus = self.belief.cov
        p_bb_plus = p_plus[np.ix_(sel_b_seeker, sel_b_seeker)]
        bits = plan_bitrate(seeker_plan, p_bb_plus) / LN2
        self.belief = update_compressed(self.belief, sel_b_seeker, seeker_plan, y_b)
        self.replica_cov = compressed_cov_update(self.replica_cov, sel_b, sup_plan)[1]
        if self.keep_history:
            self.history.append((cov_before, p_plus, self.belief.cov))
        self.last_design = seeker_design if isinstance(seeker_design, DesignResult) else None

        record = StepRecord(t, self.seeker, sup_cell, seeker_plan.rank, bits,
                            msg.payload_length, len(path))
        self.records.append(record)
        self.frames.append(buf)
        self.plans.append(seeker_plan)
        self.supporter_plans.append(sup_plan)

        # (6) both agents move
        if len(path) > 1:
            self.seeker = path[1]
        self.visited.append(self.seeker)
        self.t += 1
        return record

    def metrics(self) -> Metrics:
        ranks = [r.rank for r in self.records]
        bits = [r.surrogate_bits for r in self.records]
        x = self.world.values
        cost = float(sum(x[self.world.index(c)] for c in self.visited))
        return Metrics(
            r_avg=float(np.mean(ranks)) if ranks else 0.0,
            t_reach=self.t,
            c_reach=cost,
            b_avg=float(np.mean(bits)) if bits else 0.0,
            reached=self.seeker == self.goal,
        )

    def run(self, out_dir=None) -> SequentialResult:
        snap = self.cfg.snapshot_every
        while not self.done:
            self.step()
            if out_dir is not None and snap and self.t % snap == 0:
                save_belief(self.belief, self.world.shape, Path(out_dir) / f"belief_t{self.t:04d}")
        return SequentialResult(self.metrics(), self.records, self.frames, self.visited,
                                self.belief, self.plans)


def step_sequential(sim: SequentialSim) -> StepRecord:
    """Advance ``sim`` by one protocol step."""
    if sim.seeker == sim.goal:
        raise ValueError("Seeker already at its goal")
    return sim.step()


def run_sequential(cfg: SimConfig, world: GridMap | None = None, out_dir=None) -> SequentialResult:
    sim = SequentialSim(cfg, world)
    result = sim.run(out_dir)
    if out_dir is not None:
        write_sequential_outputs(out_dir, result, sim.world.shape)
    return result


# ---------------------------------------------------------------------------
# one-shot experiment


@dataclass
class OneshotResult:
    prior: Belief
    belief: Belief
    plan: CompressionPlan
    solution: RdSolution
    rank_ratio: float
    error_ratio: float
    bits: float


def run_oneshot(cfg: SimConfig, world: GridMap | None = None, out_dir=None) -> OneshotResult:
    """Single compressed transmission of the whole map against a block prior.

    Weights are ``prior mean + weight_offset``; the covariance is kept in
    diagonal storage, so no ``d x d`` matrix is formed.
    """
    world = world if world is not None else load_world(cfg)
    prior = prior_belief(cfg, world, diagonal=True)
    sel_b = np.arange(world.size)
    weights = prior.mean + cfg.weight_offset
    if cfg.supporter_noise_var is not None:
        raise ConfigError("supporter noise is only supported in sequential mode")
    design = design_compression(prior.cov, sel_b, weights, cfg.alpha, cfg.tau)
    plan_ = design.plan
    x = world.values
    o = plan_.theta @ x if plan_.axes is None else x[plan_.axes]
    buf, _ = channel.encode_message(0, (0, 0), o, plan_.deltas, cfg.session_seed)
    _, y = channel.decode_message(buf, plan_.deltas, cfg.session_seed)
    posterior = update_compressed(prior, sel_b, plan_, y)
    bits = plan_bitrate(plan_, prior.cov) / LN2
    err0 = float(np.linalg.norm(x - prior.mean))
    err1 = float(np.linalg.norm(x - posterior.mean))
    result = OneshotResult(prior, posterior, plan_, design.solution, plan_.rank / world.size,
                           err1 / err0 if err0 > 0 else 0.0, bits)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        save_belief(posterior, world.shape, out / "posterior")
        save_belief(prior, world.shape, out / "prior")
        dump_solution(out / "rd_components.csv", design.solution, plan_)
        (out / "messages.bin").write_bytes(buf)
        with (out / "summary.csv").open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["alpha", "rank", "d", "rank_ratio", "error_ratio", "surrogate_bits",
                        "payload_bits"])
            w.writerow([repr(cfg.alpha), plan_.rank, world.size, repr(result.rank_ratio),
                        repr(result.error_ratio), repr(bits), 8 * (len(buf) - channel.HEADER.size)])
    return result


# ---------------------------------------------------------------------------
# outputs


def write_sequential_outputs(out_dir, result: SequentialResult, shape: tuple[int, int]) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    m = result.metrics
    with (out / "metrics.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["r_avg", "t_reach", "c_reach", "b_avg", "reached"])
        w.writerow([repr(m.r_avg), m.t_reach, repr(m.c_reach), repr(m.b_avg), int(m.reached)])
    with (out / "steps.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "seeker_row", "seeker_col", "supporter_row", "supporter_col",
                    "rank", "surrogate_bits", "payload_bits", "path_length"])
        for r in result.records:
            w.writerow([r.step, *r.seeker, *r.supporter, r.rank, repr(r.surrogate_bits),
                        r.payload_bits, r.path_length])
    with (out / "messages.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "rank", "payload_bits", "surrogate_bits", "dither_overhead_bits"])
        for r in result.records:
            w.writerow([r.step, r.rank, r.payload_bits, repr(r.surrogate_bits),
                        repr(channel.dither_kl_nats(r.rank) / LN2)])
    (out / "messages.bin").write_bytes(b"".join(result.frames))
    save_path(out / "trajectory.csv", result.visited)
    save_belief(result.belief, shape, out / f"belief_t{m.t_reach:04d}")
