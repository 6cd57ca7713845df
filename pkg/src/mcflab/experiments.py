"""Desk-scale experiments built on the barriers and the radial solver.

* annulus estimate: a flow starting below the annulus barrier stays below it;
* oscillation comb: grim-reaper teeth of growing height force u(0, t) to
  oscillate; verified through the explicit bound arithmetic;
* asymptotics: blow-up rate of u(0, t) near the vanishing time from the
  boundary rate of the data;
* shadow flow: the radius of a level set of a complete graph over a ball.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .barriers import BarrierSpec, FChoice, annulus_domain, barrier_value, f_value, in_domain
from .errors import DomainViolation, EmptyShadow, PreconditionFailed, WindowEmpty
from .solver import (
    FlowState,
    RadialGrid,
    SolverConfig,
    evolve,
    initial_state,
    run_truncation_ladder,
    shadow_radius,
)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        # JSON has no inf/nan; keep them readable
        return v if math.isfinite(v) else repr(v)
    if v is None or isinstance(v, str):
        return v
    return str(v)


@dataclass
class ExperimentReport:
    name: str
    parameters: dict = field(default_factory=dict)
    series: dict = field(default_factory=dict)        # name -> list of (x, y)
    metrics: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)    # metric -> human readable tolerance
    passed: dict = field(default_factory=dict)        # check -> bool

    @property
    def ok(self) -> bool:
        return all(self.passed.values())

    def add_series(self, name: str, xs, ys):
        self.series[name] = [(float(x), float(y)) for x, y in zip(xs, ys)]

    def check(self, name: str, value, ok: bool, tolerance: str):
        self.metrics[name] = value
        self.tolerances[name] = tolerance
        self.passed[name] = bool(ok)

    def to_dict(self) -> dict:
        return _jsonable({
            "name": self.name,
            "parameters": self.parameters,
            "metrics": self.metrics,
            "tolerances": self.tolerances,
            "passed": self.passed,
            "series": {k: [list(p) for p in v] for k, v in self.series.items()},
        })

    def to_json(self) -> str:
        # repr of a float is the shortest string that round-trips (<= 17 digits)
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def write(self, out_dir: Path | str) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = [out / f"{self.name}.json"]
        paths[0].write_text(self.to_json())
        if self.series:
            folder = out / self.name
            folder.mkdir(exist_ok=True)
            for key in sorted(self.series):
                p = folder / f"{key}.csv"
                with p.open("w", newline="") as fh:
                    w = csv.writer(fh, lineterminator="\n")
                    w.writerow(["x", "y"])
                    for x, y in self.series[key]:
                        w.writerow([repr(x), repr(y)])
                paths.append(p)
        return paths

    def summary_lines(self) -> list[str]:
        lines = []
        for key in self.passed:
            v = self.metrics.get(key)
            shown = f"{v:.6g}" if isinstance(v, (float, int)) and not isinstance(v, bool) else str(v)
            lines.append(f"[{'PASS' if self.passed[key] else 'FAIL'}] {self.name}.{key} = {shown} ({self.tolerances[key]})")
        return lines


def _radial_points(r, n):
    r = np.atleast_1d(np.asarray(r, dtype=float))
    x = np.zeros(r.shape + (n,))
    x[..., 0] = r
    return x


def radial_barrier(spec: BarrierSpec, r, t: float) -> np.ndarray:
    """w at radii r and time t; +inf outside the margin-restricted annulus."""
    x = _radial_points(r, spec.n)
    out = np.full(x.shape[0], np.inf)
    ok = in_domain(spec, x, t, need_jet=False)
    if np.any(ok):
        out[ok] = barrier_value(spec, x[ok], t)
    return out


# ---------------------------------------------------------------------------
# annulus estimate
# ---------------------------------------------------------------------------


def annulus_estimate_check(
    spec: BarrierSpec,
    u0: Callable,
    t_samples: Sequence[float],
    grid: RadialGrid,
    cap: float = 100.0,
    config: SolverConfig | None = None,
) -> ExperimentReport:
    """Evolve u0 with the radial solver and compare against w on A_t.

    u0 must lie below the initial barrier on A_0 and A_0 must sit inside the
    active region with a one-node margin; both are checked first.
    """
    if grid.n != spec.n:
        raise ValueError("grid and barrier dimensions differ")
    config = config or SolverConfig()
    t_samples = sorted(float(t) for t in t_samples)
    if any(t < 0 or t > spec.T for t in t_samples):
        raise DomainViolation(f"sample times must lie in I(R) = [0, {spec.T}]")
    h = grid.h
    tol = 10 * h * h
    state = initial_state(u0, grid, cap, config.mollify_radius)

    w0 = radial_barrier(spec, grid.r, 0.0)
    on_a0 = np.isfinite(w0)
    if np.any(state.u[on_a0] > w0[on_a0]):
        raise PreconditionFailed("u0 exceeds the initial barrier on A_0")
    if not _inside_active(state, annulus_domain(spec, 0.0)):
        raise PreconditionFailed("A_0 is not compactly inside the initial active region")

    rep = ExperimentReport(
        "annulus",
        parameters={"n": spec.n, "R": spec.R, "lambda": spec.lam, "f": spec.f_choice.value,
                    "margin": spec.margin, "nodes": grid.node_count, "r_max": grid.r_max, "cap": cap},
    )
    slack, inside, counts = [], [], []
    for snap in evolve(state, config, t_samples):
        w = radial_barrier(spec, grid.r, snap.t)
        sel = np.isfinite(w) & snap.active
        counts.append(int(sel.sum()))
        slack.append(float(np.max(snap.u[sel] - w[sel])) if np.any(sel) else -math.inf)
        inside.append(_inside_active(snap, annulus_domain(spec, snap.t)))
    rep.add_series("slack", t_samples, slack)
    rep.add_series("compared_nodes", t_samples, counts)
    worst = max(slack) if slack else -math.inf
    rep.check("max_slack_u_minus_w", worst, worst <= tol, f"<= 10 h^2 = {tol:.3g}")
    rep.check("annulus_inside_active_region", all(inside), all(inside), "every sampled t")
    rep.metrics["h"] = h
    return rep


def annulus_initial_data(spec: BarrierSpec, r_max: float) -> Callable:
    """Initial barrier minus one on A_0, and a low profile diverging at r_max elsewhere.

    The outer profile stays below the barrier on A_0, so the minimum equals
    w0 - 1 except in thin zones at the edges of A_0 where w0 blows up.
    """

    def u0(r):
        r = np.asarray(r, dtype=float)
        with np.errstate(all="ignore"):
            outer = np.where(r < r_max, -0.5 + 0.01 * r_max**2 * (r_max - r) ** -2.0, np.inf)
        return np.minimum(radial_barrier(spec, r, 0.0) - 1.0, outer)

    return u0


def _inside_active(state: FlowState, dom) -> bool:
    r, h = state.grid.r, state.grid.h
    near = (r <= dom.outer + h) & (r >= dom.inner - h if not dom.is_ball else True)
    return bool(np.all(state.active[near])) and dom.outer + h < state.grid.r_max


# ---------------------------------------------------------------------------
# oscillation comb
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CombSpec:
    """Teeth I_k = ((k-2)/(k-1), (k-1)/k), k >= 2, in dimension n = 2."""

    k_max: int = 40

    def __post_init__(self):
        if self.k_max < 3:
            raise ValueError("k_max must be >= 3")

    n = 2

    @staticmethod
    def interval(k: int) -> tuple[float, float]:
        return (k - 2) / (k - 1), (k - 1) / k

    @staticmethod
    def lam(k: int) -> float:
        return (k - 1) * k * math.pi

    @staticmethod
    def center(k: int) -> float:
        a, b = CombSpec.interval(k)
        return 0.5 * (a + b)

    @staticmethod
    def end_time(k: int) -> float:
        return CombSpec.center(k) ** 2 / 2

    def barrier(self, k: int, f_choice=FChoice.SIMPLE) -> BarrierSpec:
        return BarrierSpec(self.n, self.center(k), self.lam(k), FChoice(f_choice))


def tooth_index(r: float) -> int | None:
    """k with r in the open interval I_k, or None at a tooth boundary."""
    if r < 0 or r >= 1:
        raise DomainViolation("comb functions live on 0 <= r < 1")
    k = int(math.floor(1.0 / (1.0 - r))) + 1
    for cand in (k - 1, k, k + 1):
        if cand >= 2:
            a, b = CombSpec.interval(cand)
            if a < r < b:
                return cand
    return None


def comb_functions(spec: CombSpec, r: float) -> tuple[float, float]:
    """(w_plus, w_minus) at radius r: grim-reaper teeth of height k (even k)
    from above and k^3 (odd k) from below."""
    k = tooth_index(float(r))
    if k is None:
        return math.inf, -math.inf
    lc = math.log(math.cos(spec.lam(k) * (r - spec.center(k)))) / spec.lam(k)
    if k % 2 == 0:
        return -lc + k, -math.inf
    return math.inf, lc + k**3


def comb_growth(spec: CombSpec, k: int, f_choice=FChoice.SIMPLE) -> float:
    """lam_k T_k + f(T_k): the rise of the tooth-k barrier at the origin by time T_k."""
    b = spec.barrier(k, f_choice)
    return b.lam * b.T + f_value(b, b.T)


def _loglog_slope(ks, vals) -> float:
    return float(np.polyfit(np.log(ks), np.log(vals), 1)[0])


def first_interlocking(upper: dict, lower: dict) -> int | None:
    """Smallest even K with lower[k+1] > upper[k] for every even k >= K available."""
    evens = sorted(k for k in upper if k + 1 in lower)
    K = None
    for k in reversed(evens):
        if lower[k + 1] > upper[k]:
            K = k
        else:
            break
    return K


def oscillation_bounds(spec: CombSpec, f_choice=FChoice.SIMPLE) -> ExperimentReport:
    if spec.k_max < 6:
        raise ValueError("k_max must be >= 6 for the growth fits")
    f_choice = FChoice(f_choice)
    ks = range(2, spec.k_max + 1)
    upper = {k: k + comb_growth(spec, k, f_choice) for k in ks if k % 2 == 0}
    lower = {k: k**3 - comb_growth(spec, k, f_choice) for k in ks if k % 2 == 1}

    rep = ExperimentReport("oscillation", parameters={"k_max": spec.k_max, "n": spec.n, "f": f_choice.value})
    rep.add_series("upper_even", list(upper), list(upper.values()))
    rep.add_series("lower_odd", list(lower), list(lower.values()))

    half = spec.k_max / 2
    ku = [k for k in upper if k >= half]
    kl = [k for k in lower if k >= half]
    su = _loglog_slope(ku, [upper[k] for k in ku])
    sl = _loglog_slope(kl, [lower[k] for k in kl])
    rep.check("upper_exponent", su, 1.8 <= su <= 2.2, "in [1.8, 2.2]")
    rep.check("lower_exponent", sl, 2.7 <= sl <= 3.3, "in [2.7, 3.3]")

    ke, ko = max(upper), max(lower)
    ru = upper[ke] / (0.5 * math.pi * ke**2)
    rl = lower[ko] / ko**3
    rep.check("upper_ratio_at_kmax", ru, abs(ru - 1) <= 0.15, f"U_{ke}/((pi/2) k^2) within 15% of 1")
    rep.check("lower_ratio_at_kmax", rl, abs(rl - 1) <= 0.15, f"L_{ko}/k^3 within 15% of 1")

    K = first_interlocking(upper, lower)
    rep.check("interlocking_K", K, K is not None, "L_{k+1} > U_k for all even k >= K, K finite")
    return rep


# ---------------------------------------------------------------------------
# asymptotics near the vanishing time
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AsymptoticsSpec:
    """Model data u0(r) = C (rho - r)^(-alpha) over the ball of radius rho."""

    n: int = 2
    rho: float = 1.0
    alpha: float = 2.0
    C: float = 1.0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be >= 2")
        if not self.alpha > 1:
            raise ValueError("alpha must be > 1")
        if not (self.rho > 0 and self.C > 0):
            raise ValueError("rho and C must be positive")

    @property
    def T(self) -> float:
        return self.rho**2 / (2 * (self.n - 1))

    def u0(self, r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(r < self.rho, self.C * (self.rho - r) ** -self.alpha, np.inf)

    def r_t(self, t: float) -> float:
        return math.sqrt(2 * (self.n - 1) * t)

    def half_width(self, t: float) -> float:
        """pi/(2 lam_t) = (rho - r_t)^((1+alpha)/2)."""
        return (self.rho - self.r_t(t)) ** ((1 + self.alpha) / 2)

    def lam_t(self, t: float) -> float:
        return 0.5 * math.pi / self.half_width(t)

    def valid(self, t: float) -> bool:
        if not 0 < t < self.T:
            return False
        d = self.rho - self.r_t(t)
        hw = self.half_width(t)
        return d > hw and self.r_t(t) > hw

    def model(self, t):
        return self.C * ((self.n - 1) / self.rho * (self.T - np.asarray(t, dtype=float))) ** -self.alpha

    def sandwich(self, t: float) -> tuple[float, float]:
        """(lower, upper) bounds on u(0, t) from the barriers on A(t)."""
        d, hw = self.rho - self.r_t(t), self.half_width(t)
        lam, r = self.lam_t(t), self.r_t(t)
        rise = (lam + math.sqrt(2 * lam / (math.pi * r))) * t
        sup = self.C * (d - hw) ** -self.alpha
        inf = self.C * (d + hw) ** -self.alpha
        return inf - rise, sup + rise


def asymptotics_experiment(
    spec: AsymptoticsSpec,
    t_samples: Sequence[float],
    pde: bool = True,
    nodes: int = 513,
    ladder: Sequence[float] = (10.0, 20.0, 40.0, 80.0),
    pde_times: Sequence[float] | None = None,
    ladder_result=None,
) -> ExperimentReport:
    """Barrier sandwich for u(0, t) and, optionally, the PDE value of u(0, t).

    ``ladder_result`` lets a caller reuse an existing solve of the same data.
    """
    ts = sorted(float(t) for t in t_samples if spec.valid(float(t)))
    if not ts:
        raise WindowEmpty("no sample time lies in the validity window")
    rep = ExperimentReport(
        "asymptotics",
        parameters={"n": spec.n, "rho": spec.rho, "alpha": spec.alpha, "C": spec.C, "T": spec.T},
    )
    lows, ups = zip(*(spec.sandwich(t) for t in ts))
    model = spec.model(ts)
    rep.add_series("upper_ratio", ts, np.array(ups) / model)
    rep.add_series("lower_ratio", ts, np.array(lows) / model)
    ru, rl = ups[-1] / model[-1], lows[-1] / model[-1]
    rep.metrics["latest_valid_t"] = ts[-1]
    rep.check("upper_ratio_latest", ru, abs(ru - 1) <= 0.1, "within 10% of 1")
    rep.check("lower_ratio_latest", rl, abs(rl - 1) <= 0.1, "within 10% of 1")
    ordered = all(lo <= up for lo, up in zip(lows, ups))
    rep.check("sandwich_ordered", ordered, ordered, "lower <= upper at every sample")

    if pde:
        if ladder_result is None:
            grid = RadialGrid(spec.n, spec.rho, nodes)
            times = pde_times if pde_times is not None else list(np.linspace(0, spec.T, 21)[1:-1])
            ladder_result = run_truncation_ladder(
                spec.u0, grid, SolverConfig(truncation_schedule=tuple(ladder)), max(times), times)
        top = ladder_result.levels[-1]
        vals = ladder_result.origin_values[top]
        t_arr = np.array(ladder_result.times)
        # resolvable: away from t = 0 (mollified start) and well below the cap
        window = (t_arr >= 0.2 * spec.T) & (vals < top / 4)
        ratio = vals / spec.model(t_arr)
        rep.add_series("pde_ratio", t_arr[window], ratio[window])
        if np.any(window):
            ok = bool(np.all((ratio[window] >= 0.5) & (ratio[window] <= 2)))
            rep.check("pde_ratio_in_band", float(ratio[window][-1]), ok, "in [0.5, 2] on the resolvable window")
        else:
            rep.check("pde_ratio_in_band", math.nan, False, "resolvable window empty")
    return rep


# ---------------------------------------------------------------------------
# shadow flow of a complete graph over a ball
# ---------------------------------------------------------------------------


def shadow_flow_experiment(
    n: int = 2,
    rho: float = 1.0,
    exponent: float = 2.0,
    ladder: Sequence[float] = (10.0, 20.0, 40.0, 80.0),
    t_samples: Sequence[float] = (0.1, 0.2, 0.3, 0.4),
    nodes: int = 513,
    threshold: float | None = None,
    ladder_result=None,
) -> tuple[ExperimentReport, object]:
    """Shadow radius at height a/2 versus the shrinking sphere sqrt(rho^2 - 2(n-1)t).

    Returns the report and the ladder result (for reuse by other checks).
    """
    u0 = lambda r: np.where(r < rho, (rho - np.asarray(r, dtype=float)) ** -exponent, np.inf)
    grid = RadialGrid(n, rho, nodes)
    if ladder_result is None:
        ladder_result = run_truncation_ladder(
            u0, grid, SolverConfig(truncation_schedule=tuple(ladder)), max(t_samples), t_samples)
    top = ladder_result.levels[-1]
    level = top / 2 if threshold is None else threshold
    T = rho**2 / (2 * (n - 1))
    rep = ExperimentReport("shadow_flow", parameters={
        "n": n, "rho": rho, "exponent": exponent, "ladder": list(ladder), "nodes": nodes, "threshold": level})

    ts, radii, errs = [], [], []
    for t in t_samples:
        snap = next(s for s in ladder_result.snapshots if abs(s.t - t) < 1e-9)
        exact = math.sqrt(max(0.0, rho**2 - 2 * (n - 1) * t))
        try:
            r = shadow_radius(snap, level)
        except EmptyShadow:
            r = math.nan
        ts.append(t)
        radii.append(r)
        errs.append(abs(r - exact) / exact if math.isfinite(r) else math.inf)
    rep.add_series("shadow_radius", ts, radii)
    rep.add_series("sphere_radius", ts, [math.sqrt(max(0.0, rho**2 - 2 * (n - 1) * t)) for t in ts])
    worst = max(errs)
    rep.check("max_relative_radius_error", worst, worst <= 0.02, "<= 2% at every sample")

    good = [(t, r) for t, r in zip(ts, radii) if math.isfinite(r) and r > 0]
    if len(good) >= 2:
        # r^2 is affine in t for a shrinking sphere
        slope, icpt = np.polyfit([g[0] for g in good], [g[1] ** 2 for g in good], 1)
        t_vanish = -icpt / slope if slope < 0 else math.inf
    else:
        t_vanish = math.nan
    rel = abs(t_vanish - T) / T if math.isfinite(t_vanish) else math.inf
    rep.metrics["vanishing_time_extrapolated"] = t_vanish
    rep.check("vanishing_time_relative_error", rel, rel <= 0.05, f"within 5% of T = {T:g}")
    rep.metrics["origin_cauchy_increments_first_sample"] = ladder_result.cauchy_increments(0)
    return rep, ladder_result
