"""Finite-difference solver for rotationally symmetric graphical MCF.

Substituting u(x) = v(|x|) into u_t = (delta^ij - u^i u^j/(1+|Du|^2)) u_ij gives
Du = v' x/r and D^2u = v'' xx^T/r^2 + (v'/r)(I - xx^T/r^2), hence

    v_t = v_rr / (1 + v_r^2) + (n - 1) v_r / r,

with the limit v_t = n v_rr at r = 0 (v_r(0) = 0, L'Hopital on v_r/r).
The origin uses the even ghost value v(-h) = v(h).

Complete graphs are approximated the usual way: cap the data at a level a,
mollify, fix the outer boundary value and solve; then repeat for a ladder
of increasing a and watch the values settle.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from numba import njit

from .errors import EmptyShadow, InactiveNode, NotComplete, StepRejected

CAP_TOL = 1e-9


class TimeStepper(str, enum.Enum):
    EXPLICIT_EULER = "explicit"
    SEMI_IMPLICIT = "semi-implicit"


@dataclass(frozen=True)
class RadialGrid:
    n: int
    r_max: float
    node_count: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("dimension n must be >= 1")
        if self.node_count < 16:
            raise ValueError("need at least 16 nodes")
        if not self.r_max > 0:
            raise ValueError("r_max must be positive")

    @property
    def h(self) -> float:
        return self.r_max / (self.node_count - 1)

    @property
    def r(self) -> np.ndarray:
        return self.h * np.arange(self.node_count)


@dataclass
class SolverConfig:
    time_stepper: TimeStepper = TimeStepper.EXPLICIT_EULER
    cfl_factor: float = 0.25
    gradient_clamp: float = 1e6
    truncation_schedule: Sequence[float] = (math.inf,)
    mollify_radius: float = 0.0
    max_halvings: int = 10

    def __post_init__(self):
        self.time_stepper = TimeStepper(self.time_stepper)
        if not 0 < self.cfl_factor <= 1:
            raise ValueError("cfl_factor must lie in (0, 1]")
        if self.time_stepper is TimeStepper.EXPLICIT_EULER and self.cfl_factor > 0.5:
            raise ValueError("explicit Euler needs cfl_factor <= 0.5")
        sched = list(self.truncation_schedule)
        if any(b <= a for a, b in zip(sched, sched[1:])):
            raise ValueError("truncation schedule must be increasing")
        self.truncation_schedule = tuple(float(a) for a in sched)


@dataclass
class FlowState:
    """Radial profile u on ``grid`` at time ``t`` with cap level ``a``.

    ``boundary`` gives the Dirichlet value at the last node as a function of
    time; ``None`` keeps the initial value fixed.
    """

    grid: RadialGrid
    t: float
    u: np.ndarray
    a: float = math.inf
    boundary: Callable[[float], float] | None = field(default=None, repr=False)

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        if self.u.shape != (self.grid.node_count,):
            raise ValueError("u must have one value per grid node")

    @property
    def frozen_level(self) -> float:
        """Nodes at or above this value sit on the cap and no longer evolve."""
        return self.a - CAP_TOL * max(1.0, abs(self.a)) if math.isfinite(self.a) else math.inf

    @property
    def active(self) -> np.ndarray:
        """Interior nodes strictly below the cap; these carry solution values."""
        mask = self.u < self.frozen_level
        mask[-1] = False
        return mask

    def gradient(self) -> np.ndarray:
        """Central u_r at interior nodes (0 at the origin by symmetry), one-sided at the edge."""
        u, h = self.u, self.grid.h
        du = np.empty_like(u)
        du[0] = 0.0
        du[1:-1] = (u[2:] - u[:-2]) / (2 * h)
        du[-1] = (u[-1] - u[-2]) / h
        return du

    def copy(self) -> "FlowState":
        return replace(self, u=self.u.copy())


def radial_operator(u: np.ndarray, grid: RadialGrid) -> np.ndarray:
    """u_rr/(1+u_r^2) + (n-1) u_r / r at nodes 0..N-2 (last entry is 0)."""
    h, n = grid.h, grid.n
    out = np.zeros_like(u)
    up, um, uc = u[2:], u[:-2], u[1:-1]
    ur = (up - um) / (2 * h)
    urr = (up - 2 * uc + um) / (h * h)
    r = grid.r[1:-1]
    out[1:-1] = urr / (1 + ur * ur) + (n - 1) * ur / r
    out[0] = n * 2 * (u[1] - u[0]) / (h * h)
    return out


def radial_rhs(state: FlowState, node: int) -> float:
    if not (0 <= node < state.grid.node_count) or not state.active[node]:
        raise InactiveNode(f"node {node} is a boundary node or sits on the cap")
    return float(radial_operator(state.u, state.grid)[node])


def _explicit_dt(state: FlowState, config: SolverConfig) -> float:
    # monotone for the diffusive part: 2 dt/h^2 <= 1 inside, 2 n dt/h^2 <= 1 at the origin
    return config.cfl_factor * state.grid.h**2 / state.grid.n


def _semi_implicit_dt(state: FlowState, config: SolverConfig) -> float:
    return config.cfl_factor * state.grid.h


def default_dt(state: FlowState, config: SolverConfig) -> float:
    if config.time_stepper is TimeStepper.EXPLICIT_EULER:
        return _explicit_dt(state, config)
    return _semi_implicit_dt(state, config)


def _semi_implicit_update(u: np.ndarray, grid: RadialGrid, dt: float) -> np.ndarray:
    """Solve (I - dt L[u^k]) u^{k+1} = u^k with the diffusion coefficient frozen at u^k."""
    from scipy.linalg import solve_banded

    N, h, n = grid.node_count, grid.h, grid.n
    r = grid.r
    ur = np.zeros(N)
    ur[1:-1] = (u[2:] - u[:-2]) / (2 * h)
    D = 1.0 / (1.0 + ur * ur)
    lower = np.zeros(N)   # coefficient of u_{i-1}
    upper = np.zeros(N)   # coefficient of u_{i+1}
    lower[1:-1] = D[1:-1] / h**2 - (n - 1) / (2 * h * r[1:-1])
    upper[1:-1] = D[1:-1] / h**2 + (n - 1) / (2 * h * r[1:-1])
    upper[0] = 2 * n / h**2
    diag = np.ones(N)
    diag[:-1] += dt * (lower[:-1] + upper[:-1])
    ab = np.zeros((3, N))
    ab[0, 1:] = -dt * upper[:-1]
    ab[1] = diag
    ab[2, :-1] = -dt * lower[1:]
    return solve_banded((1, 1), ab, u)


def _advance_once(state: FlowState, config: SolverConfig, dt: float) -> tuple[np.ndarray, float]:
    u = state.u
    for _ in range(config.max_halvings + 1):
        if config.time_stepper is TimeStepper.EXPLICIT_EULER:
            new = u + dt * radial_operator(u, state.grid)
        else:
            new = _semi_implicit_update(u, state.grid, dt)
        t_new = state.t + dt
        new[-1] = state.boundary(t_new) if state.boundary is not None else u[-1]
        frozen = u[:-1] >= state.frozen_level
        new[:-1][frozen] = state.a
        np.minimum(new, state.a, out=new)
        slope = np.abs(new[2:] - new[:-2]) / (2 * state.grid.h)
        if np.all(np.isfinite(new)) and (slope.size == 0 or slope.max() <= config.gradient_clamp):
            break
        dt *= 0.5
    else:
        raise StepRejected(f"gradient clamp exceeded after {config.max_halvings} halvings at t={state.t}")
    jump = np.max(np.abs(new - u))
    if not np.isfinite(jump) or (math.isfinite(state.a) and jump > 10 * abs(state.a)):
        raise StepRejected(f"max |du| = {jump} in one step at t={state.t}")
    return new, t_new


def step(state: FlowState, config: SolverConfig, dt: float | None = None) -> FlowState:
    """One time step.  Values that would exceed the cap a are set to a and
    stay there: capped nodes act as Dirichlet data for their neighbours."""
    dt = default_dt(state, config) if dt is None else dt
    new, t_new = _advance_once(state, config, dt)
    return replace(state, t=t_new, u=new)


@njit(cache=True)
def _explicit_chunk(u, h, n, dt, a, a_frozen, bvals, clamp, jump_limit):
    """Run len(bvals) explicit steps in place.  Returns (steps done, status):
    status 0 ok, 1 gradient clamp or non-finite value, 2 jump limit.
    Nodes with u >= a_frozen stay at a."""
    N = u.shape[0]
    new = np.empty(N)
    inv2h = 1.0 / (2.0 * h)
    invh2 = 1.0 / (h * h)
    for k in range(bvals.shape[0]):
        new[0] = u[0] + dt * n * 2.0 * (u[1] - u[0]) * invh2
        for i in range(1, N - 1):
            ur = (u[i + 1] - u[i - 1]) * inv2h
            urr = (u[i + 1] - 2.0 * u[i] + u[i - 1]) * invh2
            new[i] = u[i] + dt * (urr / (1.0 + ur * ur) + (n - 1) * ur / (i * h))
        new[N - 1] = bvals[k]
        jump = 0.0
        for i in range(N):
            if i < N - 1 and u[i] >= a_frozen:
                new[i] = a
            if new[i] > a:
                new[i] = a
            d = abs(new[i] - u[i])
            if not d < np.inf:
                return k, 1
            if d > jump:
                jump = d
        for i in range(1, N - 1):
            if abs(new[i + 1] - new[i - 1]) * inv2h > clamp:
                return k, 1
        if jump > jump_limit:
            return k, 2
        u[:] = new
    return bvals.shape[0], 0


CHUNK = 4096


def advance(state: FlowState, config: SolverConfig, t_end: float) -> FlowState:
    """Step from state.t to exactly t_end (the last step is shortened)."""
    cur = state.copy()
    dt0 = default_dt(state, config)
    n_full = int(math.floor((t_end - cur.t) / dt0 * (1 + 1e-12)))
    if config.time_stepper is TimeStepper.EXPLICIT_EULER:
        jump_limit = 10 * abs(cur.a) if math.isfinite(cur.a) else math.inf
        t_start, done = cur.t, 0
        while done < n_full:
            m = min(CHUNK, n_full - done)
            times = t_start + dt0 * np.arange(done + 1, done + m + 1)
            if cur.boundary is None:
                bvals = np.full(m, cur.u[-1])
            else:
                bvals = np.array([cur.boundary(float(t)) for t in times])
            k, status = _explicit_chunk(cur.u, cur.grid.h, float(cur.grid.n), dt0,
                                        cur.a, cur.frozen_level, bvals, config.gradient_clamp, jump_limit)
            done += k
            cur.t = t_start + dt0 * done
            if status != 0:
                # redo the offending step with the halving logic
                cur.u, _ = _advance_once(cur, config, dt0)
                done += 1
                cur.t = t_start + dt0 * done
    while cur.t < t_end - 1e-12 * max(1.0, t_end):
        dt = min(dt0, t_end - cur.t)
        cur.u, cur.t = _advance_once(cur, config, dt)
    cur.t = float(t_end)
    return cur


def evolve(state: FlowState, config: SolverConfig, times: Sequence[float]) -> list[FlowState]:
    """Snapshots at the (increasing) requested times."""
    out = []
    cur = state
    for t in times:
        cur = advance(cur, config, t)
        out.append(cur.copy())
    return out


# ---------------------------------------------------------------------------
# truncation ladder
# ---------------------------------------------------------------------------


def sample_profile(u0: Callable, grid: RadialGrid) -> np.ndarray:
    """Evaluate radial data on the grid; NaN and values outside the domain count as +inf."""
    with np.errstate(all="ignore"):
        vals = np.asarray(u0(grid.r), dtype=float)
    return np.where(np.isnan(vals), np.inf, vals)


def mollify(values: np.ndarray, grid: RadialGrid, radius: float) -> np.ndarray:
    """Apply the (1/4, 1/2, 1/4) kernel ceil(radius/h) times; even reflection at 0, last node fixed."""
    v = values.copy()
    for _ in range(int(math.ceil(radius / grid.h - 1e-12)) if radius > 0 else 0):
        left = np.concatenate(([v[1]], v[:-2]))
        v[:-1] = 0.25 * left + 0.5 * v[:-1] + 0.25 * v[1:]
    return v


def initial_state(u0: Callable, grid: RadialGrid, a: float, mollify_radius: float = 0.0,
                  boundary: Callable[[float], float] | None = None) -> FlowState:
    """Truncate u0 at a, mollify, and wrap as a FlowState at t = 0."""
    vals = sample_profile(u0, grid)
    capped = np.minimum(vals, a)
    if not np.all(np.isfinite(capped)):
        raise NotComplete("data is infinite on the grid but no finite cap was given")
    return FlowState(grid, 0.0, mollify(capped, grid, mollify_radius), a, boundary)


def is_complete(u0: Callable, grid: RadialGrid, level: float) -> bool:
    vals = sample_profile(u0, grid)
    return bool(np.any(~np.isfinite(vals) | (vals >= level)))


@dataclass
class LadderResult:
    levels: list[float]
    times: list[float]
    snapshots: list[FlowState]                   # finest level
    origin_values: dict[float, np.ndarray]       # level -> u(0, t) at ``times``
    all_snapshots: dict[float, list[FlowState]]

    def cauchy_increments(self, index: int = 0) -> list[float]:
        """Relative change of u(0, times[index]) between consecutive levels."""
        vals = [self.origin_values[a][index] for a in self.levels]
        return [abs(b - c) / abs(c) for c, b in zip(vals, vals[1:])]


def run_truncation_ladder(
    u0: Callable,
    grid: RadialGrid,
    config: SolverConfig,
    t_end: float,
    snapshot_times: Sequence[float] | None = None,
    require_complete: bool = True,
) -> LadderResult:
    """Solve with caps a from ``config.truncation_schedule`` and collect snapshots.

    Raises NotComplete when ``require_complete`` and u0 stays below the largest
    cap on the whole grid.
    """
    levels = list(config.truncation_schedule)
    if require_complete and not is_complete(u0, grid, levels[-1]):
        raise NotComplete("initial data does not diverge inside the grid")
    times = sorted(set(list(snapshot_times or []) + [t_end]))
    origin = {}
    snaps = {}
    for a in levels:
        state = initial_state(u0, grid, a, config.mollify_radius)
        res = evolve(state, config, times)
        snaps[a] = res
        origin[a] = np.array([s.u[0] for s in res])
    return LadderResult(levels, times, snaps[levels[-1]], origin, snaps)


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------


def shadow_radius(state: FlowState, height_threshold: float) -> float:
    """Largest r with u(r) < threshold, linearly interpolated between nodes."""
    u, r = state.u, state.grid.r
    below = np.nonzero(u < height_threshold)[0]
    if below.size == 0:
        raise EmptyShadow(f"u >= {height_threshold} everywhere at t={state.t}")
    i = int(below[-1])
    if i == u.size - 1:
        return float(r[-1])
    frac = (height_threshold - u[i]) / (u[i + 1] - u[i])
    return float(r[i] + frac * (r[i + 1] - r[i]))


def cylinder_closeness(state: FlowState, height_window: tuple[float, float],
                       threshold: float | None = None) -> float:
    """max over nodes with u in the window of |r - shadow radius| + |1/u_r|.

    The shadow radius is taken at ``threshold`` (default: top of the window).
    """
    lo, hi = height_window
    rs = shadow_radius(state, hi if threshold is None else threshold)
    u, r = state.u, state.grid.r
    ur = state.gradient()
    sel = (u >= lo) & (u <= hi) & state.active
    if not np.any(sel):
        raise EmptyShadow(f"no active node with u in [{lo}, {hi}]")
    with np.errstate(divide="ignore"):
        inv = np.where(ur[sel] != 0, 1.0 / np.abs(ur[sel]), np.inf)
    return float(np.max(np.abs(r[sel] - rs) + inv))


def write_snapshot(state: FlowState, out_dir: Path | str, run_id: str) -> Path:
    """Write ``run-<id>/t<time>.csv`` with header r,u,active."""
    folder = Path(out_dir) / f"run-{run_id}"
    folder.mkdir(parents=True, exist_ok=True)
    path = folder / f"t{state.t:.6f}.csv"
    active = state.active
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["r", "u", "active"])
        for r, u, a in zip(state.grid.r, state.u, active):
            w.writerow([repr(float(r)), repr(float(u)), int(a)])
    return path
