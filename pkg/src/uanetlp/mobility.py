"""UAV trajectory simulation under four mobility models and the radio
link-weight model that samples weighted topology snapshots.

All randomness flows through one numpy Generator per scenario, so a
(config, seed) pair fully determines the emitted snapshot sequence.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .graphdata import WeightedSnapshot

TICK_SECONDS = 1.0
MODELS = ("RW", "MG", "RPG", "GM")
TWO_PI = 2.0 * math.pi


class ConfigError(Exception):
    """Invalid scenario or run configuration."""


@dataclass
class ScenarioConfig:
    num_uavs: int = 100
    area_km2: float = 100.0
    speed_min: float = 25.0
    speed_max: float = 35.0
    # one global radius is drawn uniformly from this range at seed time
    comm_radius_min: float = 1600.0
    comm_radius_max: float = 2000.0
    duration: float = 800.0
    sampling_interval: float = 10.0
    mobility_model: str = "RW"
    snr_mean: float = 15.0
    snr_std: float = 5.0
    warmup_steps: int = 20
    rng_seed: int = 1
    # RW heading/speed and MG speed redraw period; None means one sampling interval
    epoch_s: float | None = None
    mg_spacing: float = 1000.0
    mg_p_straight: float = 0.5
    mg_p_left: float = 0.25
    mg_p_right: float = 0.25
    rpg_groups: int = 12
    rpg_member_radius: float = 500.0
    gm_alpha: float = 0.75
    gm_mean_speed: float | None = None
    gm_sigma_speed: float = 2.5
    gm_sigma_heading: float = 0.3
    gm_margin: float = 500.0

    @property
    def side(self) -> float:
        """Side of the square area in meters."""
        return math.sqrt(self.area_km2) * 1000.0

    @property
    def epoch_ticks(self) -> int:
        period = self.sampling_interval if self.epoch_s is None else self.epoch_s
        return max(1, int(round(period / TICK_SECONDS)))

    @property
    def interval_ticks(self) -> int:
        return int(round(self.sampling_interval / TICK_SECONDS))

    @property
    def num_snapshots(self) -> int:
        return int(round(self.duration / self.sampling_interval))

    def validate(self) -> None:
        if self.num_uavs < 2:
            raise ConfigError("num_uavs must be at least 2")
        if self.area_km2 <= 0:
            raise ConfigError("area_km2 must be positive")
        if not 0 <= self.speed_min <= self.speed_max:
            raise ConfigError("need 0 <= speed_min <= speed_max")
        if not 0 < self.comm_radius_min <= self.comm_radius_max:
            raise ConfigError("need 0 < comm_radius_min <= comm_radius_max")
        if self.snr_std < 0:
            raise ConfigError("snr_std must be >= 0")
        if self.warmup_steps < 0:
            raise ConfigError("warmup_steps must be >= 0")
        if self.mobility_model not in MODELS:
            raise ConfigError(
                f"unknown mobility model {self.mobility_model!r}; valid: {', '.join(MODELS)}")
        if self.sampling_interval <= 0 or self.interval_ticks < 1:
            raise ConfigError("sampling_interval must cover at least one tick")
        if abs(self.interval_ticks * TICK_SECONDS - self.sampling_interval) > 1e-9:
            raise ConfigError("sampling_interval must be a whole number of 1 s ticks")
        if abs(self.num_snapshots * self.sampling_interval - self.duration) > 1e-6:
            raise ConfigError("sampling_interval must divide duration")
        if self.num_snapshots < 1:
            raise ConfigError("duration must cover at least one sampling interval")
        if self.mobility_model == "MG":
            blocks = self.side / self.mg_spacing
            if abs(blocks - round(blocks)) > 1e-9 or round(blocks) < 1:
                raise ConfigError(
                    f"mg_spacing {self.mg_spacing} does not tile the {self.side:.0f} m area")
            if self.speed_max * TICK_SECONDS > self.mg_spacing:
                raise ConfigError("speed_max must not exceed one street block per tick")
            probs = (self.mg_p_straight, self.mg_p_left, self.mg_p_right)
            if min(probs) < 0 or sum(probs) <= 0:
                raise ConfigError("MG turn probabilities must be non-negative with positive sum")
        if self.mobility_model == "RPG":
            if not 1 <= self.rpg_groups <= self.num_uavs:
                raise ConfigError("rpg_groups must be in [1, num_uavs]")
            if self.rpg_member_radius < 0:
                raise ConfigError("rpg_member_radius must be >= 0")
        if self.mobility_model == "GM":
            if not 0 <= self.gm_alpha <= 1:
                raise ConfigError("gm_alpha must be in [0, 1]")
            if self.gm_sigma_speed < 0 or self.gm_sigma_heading < 0:
                raise ConfigError("GM sigmas must be >= 0")


@dataclass
class SwarmState:
    """Positions, speeds and headings of all UAVs plus per-model state."""

    position: np.ndarray     # (n, 2) meters
    speed: np.ndarray        # (n,) m/s
    heading: np.ndarray      # (n,) radians in [0, 2pi)
    aux: dict = field(default_factory=dict)

    def copy(self) -> "SwarmState":
        aux = {k: (v.copy() if isinstance(v, np.ndarray) else v) for k, v in self.aux.items()}
        return SwarmState(self.position.copy(), self.speed.copy(), self.heading.copy(), aux)


def link_weight(d, r, snr):
    """Distance-margin times log capacity; zero beyond the radius."""
    d = np.asarray(d, dtype=np.float64)
    with np.errstate(invalid="ignore"):
        w = np.where(d <= r, (r - d) / r * np.log2(1.0 + np.asarray(snr)), 0.0)
    return float(w) if w.ndim == 0 else w


def _wrap_heading(h: np.ndarray) -> np.ndarray:
    return np.mod(h, TWO_PI)


def _reflect(pos: np.ndarray, heading: np.ndarray, side: float):
    """Specular reflection into [0, side]^2; mirrors the heading."""
    x, y = pos[:, 0].copy(), pos[:, 1].copy()
    h = heading.copy()

    low, high = x < 0.0, x > side
    x[low] = -x[low]
    x[high] = 2.0 * side - x[high]
    h[low | high] = math.pi - h[low | high]

    low, high = y < 0.0, y > side
    y[low] = -y[low]
    y[high] = 2.0 * side - y[high]
    h[low | high] = -h[low | high]

    return np.stack([x, y], axis=1), _wrap_heading(h)


# ---------------------------------------------------------------------------
# Random Walk

def init_random_walk(cfg: ScenarioConfig, rng: np.random.Generator) -> SwarmState:
    n = cfg.num_uavs
    pos = rng.uniform(0.0, cfg.side, size=(n, 2))
    heading = rng.uniform(0.0, TWO_PI, size=n)
    speed = rng.uniform(cfg.speed_min, cfg.speed_max, size=n)
    return SwarmState(pos, speed, heading, {"epoch_countdown": cfg.epoch_ticks})


def step_random_walk(state: SwarmState, cfg: ScenarioConfig,
                     rng: np.random.Generator) -> SwarmState:
    out = state.copy()
    if out.aux["epoch_countdown"] <= 0:
        out.heading = rng.uniform(0.0, TWO_PI, size=cfg.num_uavs)
        out.speed = rng.uniform(cfg.speed_min, cfg.speed_max, size=cfg.num_uavs)
        out.aux["epoch_countdown"] = cfg.epoch_ticks
    step = out.speed * TICK_SECONDS
    out.position = out.position + np.stack(
        [step * np.cos(out.heading), step * np.sin(out.heading)], axis=1)
    out.position, out.heading = _reflect(out.position, out.heading, cfg.side)
    out.aux["epoch_countdown"] -= 1
    return out


# ---------------------------------------------------------------------------
# Manhattan Grid

_MG_HEADINGS = {(0, 1): 0.0, (1, 1): 0.5 * math.pi, (0, -1): math.pi, (1, -1): 1.5 * math.pi}


def _mg_turn_options(axis: int, direction: int):
    """(straight, left, right) as (axis, direction) pairs."""
    if axis == 0:
        return (0, direction), (1, direction), (1, -direction)
    return (1, direction), (0, -direction), (0, direction)


def init_manhattan_grid(cfg: ScenarioConfig, rng: np.random.Generator) -> SwarmState:
    n, side, spacing = cfg.num_uavs, cfg.side, cfg.mg_spacing
    lines = int(round(side / spacing)) + 1
    axis = rng.integers(0, 2, size=n)
    cross = rng.integers(0, lines, size=n) * spacing
    along = rng.uniform(0.0, side, size=n)
    direction = np.where(rng.random(n) < 0.5, 1, -1)
    direction[along <= 0.0] = 1
    direction[along >= side] = -1
    pos = np.empty((n, 2))
    pos[np.arange(n), axis] = along
    pos[np.arange(n), 1 - axis] = cross
    speed = rng.uniform(cfg.speed_min, cfg.speed_max, size=n)
    heading = np.array([_MG_HEADINGS[(int(a), int(d))] for a, d in zip(axis, direction)])
    return SwarmState(pos, speed, heading, {
        "axis": axis.astype(np.int64),
        "direction": direction.astype(np.int64),
        "epoch_countdown": cfg.epoch_ticks,
    })


def step_manhattan_grid(state: SwarmState, cfg: ScenarioConfig,
                        rng: np.random.Generator) -> SwarmState:
    out = state.copy()
    n, side, spacing = cfg.num_uavs, cfg.side, cfg.mg_spacing
    if out.aux["epoch_countdown"] <= 0:
        out.speed = rng.uniform(cfg.speed_min, cfg.speed_max, size=n)
        out.aux["epoch_countdown"] = cfg.epoch_ticks
    axis, direction = out.aux["axis"], out.aux["direction"]
    probs = np.array([cfg.mg_p_straight, cfg.mg_p_left, cfg.mg_p_right])

    for i in range(n):
        a, d = int(axis[i]), int(direction[i])
        p = out.position[i, a]
        remaining = out.speed[i] * TICK_SECONDS
        while remaining > 1e-12:
            if d > 0:
                boundary = math.floor(p / spacing + 1e-9) * spacing + spacing
                dist = boundary - p
            else:
                boundary = math.ceil(p / spacing - 1e-9) * spacing - spacing
                dist = p - boundary
            if remaining < dist:
                p += d * remaining
                remaining = 0.0
            else:
                p = boundary
                remaining -= dist
                # intersection reached: pick among feasible turns
                point = [0.0, 0.0]
                point[a] = p
                point[1 - a] = out.position[i, 1 - a]
                options = _mg_turn_options(a, d)
                feasible = []
                for oa, od in options:
                    coord = point[oa]
                    if (od > 0 and coord < side - 1e-9) or (od < 0 and coord > 1e-9):
                        feasible.append(True)
                    else:
                        feasible.append(False)
                weights = probs * feasible
                weights = weights / weights.sum()
                choice = int(rng.choice(3, p=weights))
                a, d = options[choice]
                # cross coordinate may change role after a turn
                out.position[i, 0], out.position[i, 1] = point
                p = point[a]
        out.position[i, a] = p
        axis[i], direction[i] = a, d
        out.heading[i] = _MG_HEADINGS[(a, d)]
    out.aux["epoch_countdown"] -= 1
    return out


# ---------------------------------------------------------------------------
# Reference Point Group

def group_sizes(num_uavs: int, groups: int) -> list[int]:
    """Even split; any remainder is spread round-robin over the first groups."""
    base, extra = divmod(num_uavs, groups)
    return [base + (1 if g < extra else 0) for g in range(groups)]


def group_tiles(groups: int, side: float) -> np.ndarray:
    """Per-group patrol rectangles (x0, y0, x1, y1) tiling the area.

    Waypoints stay inside the group's own tile, which keeps the
    aggregate waypoint distribution uniform over the whole area and the
    reference points spread out instead of drifting to the center."""
    rows = 1
    for d in range(1, int(math.isqrt(groups)) + 1):
        if groups % d == 0:
            rows = d
    cols = groups // rows
    w, h = side / cols, side / rows
    tiles = np.empty((groups, 4))
    for g in range(groups):
        r, c = divmod(g, cols)
        tiles[g] = (c * w, r * h, (c + 1) * w, (r + 1) * h)
    return tiles


def _tile_point(tile: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    return np.array([rng.uniform(tile[0], tile[2]), rng.uniform(tile[1], tile[3])])


def _rpg_member_positions(ref_pos, membership, radius, side, rng):
    n = membership.shape[0]
    u = rng.random(n)
    theta = rng.uniform(0.0, TWO_PI, size=n)
    rad = radius * np.sqrt(u)
    offsets = np.stack([rad * np.cos(theta), rad * np.sin(theta)], axis=1)
    return np.clip(ref_pos[membership] + offsets, 0.0, side)


def init_reference_point_group(cfg: ScenarioConfig, rng: np.random.Generator) -> SwarmState:
    g, side = cfg.rpg_groups, cfg.side
    sizes = group_sizes(cfg.num_uavs, g)
    membership = np.repeat(np.arange(g), sizes)
    tiles = group_tiles(g, side)
    ref_pos = np.stack([_tile_point(tiles[gi], rng) for gi in range(g)])
    waypoint = np.stack([_tile_point(tiles[gi], rng) for gi in range(g)])
    ref_speed = rng.uniform(cfg.speed_min, cfg.speed_max, size=g)
    pos = _rpg_member_positions(ref_pos, membership, cfg.rpg_member_radius, side, rng)
    delta = waypoint - ref_pos
    ref_heading = np.arctan2(delta[:, 1], delta[:, 0])
    return SwarmState(pos, ref_speed[membership].copy(),
                      _wrap_heading(ref_heading)[membership].copy(), {
                          "membership": membership,
                          "tiles": tiles,
                          "ref_pos": ref_pos,
                          "waypoint": waypoint,
                          "ref_speed": ref_speed,
                      })


def step_reference_point_group(state: SwarmState, cfg: ScenarioConfig,
                               rng: np.random.Generator) -> SwarmState:
    out = state.copy()
    side = cfg.side
    membership = out.aux["membership"]
    tiles = out.aux["tiles"]
    ref_pos, waypoint = out.aux["ref_pos"], out.aux["waypoint"]
    ref_speed = out.aux["ref_speed"]

    delta = waypoint - ref_pos
    dist = np.hypot(delta[:, 0], delta[:, 1])
    step = ref_speed * TICK_SECONDS
    arrived = dist <= step
    moving = ~arrived & (dist > 0)
    scale = np.zeros_like(dist)
    scale[moving] = step[moving] / dist[moving]
    ref_pos += delta * scale[:, None]
    ref_pos[arrived] = waypoint[arrived]
    for gi in np.flatnonzero(arrived):
        waypoint[gi] = _tile_point(tiles[gi], rng)
        ref_speed[gi] = rng.uniform(cfg.speed_min, cfg.speed_max)

    out.position = _rpg_member_positions(ref_pos, membership, cfg.rpg_member_radius, side, rng)
    delta = waypoint - ref_pos
    ref_heading = _wrap_heading(np.arctan2(delta[:, 1], delta[:, 0]))
    out.speed = ref_speed[membership].copy()
    out.heading = ref_heading[membership].copy()
    return out


# ---------------------------------------------------------------------------
# Gauss-Markov

def init_gauss_markov(cfg: ScenarioConfig, rng: np.random.Generator) -> SwarmState:
    n = cfg.num_uavs
    pos = rng.uniform(0.0, cfg.side, size=(n, 2))
    heading = rng.uniform(0.0, TWO_PI, size=n)
    speed = rng.uniform(cfg.speed_min, cfg.speed_max, size=n)
    return SwarmState(pos, speed, heading, {"mean_heading": heading.copy()})


def _gm_mean_heading(pos: np.ndarray, free_mean: np.ndarray, side: float,
                     margin: float) -> np.ndarray:
    """Free-run mean heading, overridden to point inward near the walls."""
    ix = np.where(pos[:, 0] < margin, 1.0, np.where(pos[:, 0] > side - margin, -1.0, 0.0))
    iy = np.where(pos[:, 1] < margin, 1.0, np.where(pos[:, 1] > side - margin, -1.0, 0.0))
    override = (ix != 0.0) | (iy != 0.0)
    inward = np.arctan2(iy, ix)
    return np.where(override, inward, free_mean)


def step_gauss_markov(state: SwarmState, cfg: ScenarioConfig,
                      rng: np.random.Generator) -> SwarmState:
    out = state.copy()
    n, alpha = cfg.num_uavs, cfg.gm_alpha
    mean_speed = cfg.gm_mean_speed
    if mean_speed is None:
        mean_speed = 0.5 * (cfg.speed_min + cfg.speed_max)
    noise_gain = math.sqrt(1.0 - alpha * alpha)

    speed = (alpha * out.speed + (1.0 - alpha) * mean_speed
             + noise_gain * rng.normal(0.0, cfg.gm_sigma_speed, size=n))
    out.speed = np.clip(speed, cfg.speed_min, cfg.speed_max)

    mean_h = _gm_mean_heading(out.position, out.aux["mean_heading"], cfg.side, cfg.gm_margin)
    # shift the mean to within pi of the previous heading before averaging
    diff = np.mod(mean_h - out.heading + math.pi, TWO_PI) - math.pi
    heading = (alpha * out.heading + (1.0 - alpha) * (out.heading + diff)
               + noise_gain * rng.normal(0.0, cfg.gm_sigma_heading, size=n))
    out.heading = _wrap_heading(heading)

    step = out.speed * TICK_SECONDS
    out.position = out.position + np.stack(
        [step * np.cos(out.heading), step * np.sin(out.heading)], axis=1)
    out.position, out.heading = _reflect(out.position, out.heading, cfg.side)
    return out


_INIT = {
    "RW": init_random_walk,
    "MG": init_manhattan_grid,
    "RPG": init_reference_point_group,
    "GM": init_gauss_markov,
}
_STEP = {
    "RW": step_random_walk,
    "MG": step_manhattan_grid,
    "RPG": step_reference_point_group,
    "GM": step_gauss_markov,
}


def sample_snapshot(state: SwarmState, cfg: ScenarioConfig, rng: np.random.Generator,
                    comm_radius: float) -> WeightedSnapshot:
    """Pairwise link weights with one fresh SNR draw per unordered pair."""
    pos = state.position
    n = pos.shape[0]
    diff = pos[:, None, :] - pos[None, :, :]
    dmat = np.hypot(diff[..., 0], diff[..., 1])
    iu = np.triu_indices(n, k=1)
    snr = np.clip(rng.normal(cfg.snr_mean, cfg.snr_std, size=iu[0].shape[0]), 0.0, None)
    w = np.zeros((n, n))
    w[iu] = link_weight(dmat[iu], comm_radius, snr)
    return WeightedSnapshot(w + w.T)


@dataclass
class SimulationResult:
    snapshots: list
    comm_radius: float


def run_scenario(cfg: ScenarioConfig) -> SimulationResult:
    """Simulate, discard warm-up snapshots, emit duration/interval snapshots."""
    cfg.validate()
    rng = np.random.default_rng(cfg.rng_seed)
    comm_radius = float(rng.uniform(cfg.comm_radius_min, cfg.comm_radius_max))
    state = _INIT[cfg.mobility_model](cfg, rng)
    step = _STEP[cfg.mobility_model]

    snapshots = []
    for k in range(cfg.warmup_steps + cfg.num_snapshots):
        for _ in range(cfg.interval_ticks):
            state = step(state, cfg, rng)
        snap = sample_snapshot(state, cfg, rng, comm_radius)
        if k >= cfg.warmup_steps:
            snapshots.append(snap)
    return SimulationResult(snapshots, comm_radius)


def validate_state(state: SwarmState, cfg: ScenarioConfig) -> None:
    """Invariant check used by tests: everything inside the area and ranges."""
    side = cfg.side
    if (state.position < -1e-9).any() or (state.position > side + 1e-9).any():
        raise AssertionError("position left the simulation area")
    if (state.speed < cfg.speed_min - 1e-9).any() or (state.speed > cfg.speed_max + 1e-9).any():
        raise AssertionError("speed left the configured range")
    if (state.heading < 0.0).any() or (state.heading >= TWO_PI).any():
        raise AssertionError("heading not normalized to [0, 2pi)")
