"""Grim reaper and the rotated-grim-reaper barrier over shrinking annuli.

Notation used throughout::

    sq(x, t)  = sqrt(|x|^2 + 2 (n-1) t)
    arg(x, t) = lam * (sq - R)
    w(x, t)   = -(1/lam) log cos(arg) + lam t + f(t)

``w`` lives on ``A_t = {R - pi/(2 lam) < sq < R + pi/(2 lam)}`` for
``t in I(R) = [0, R^2 / (2(n-1))]``.  All evaluations are restricted to
``|arg| < (pi/2)(1 - margin)``; x = 0 is excluded wherever derivatives are
needed.  Functions accept batched points: ``x`` of shape ``(..., n)`` and
``t`` broadcastable to ``x.shape[:-1]``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainViolation, NoRoot, NotMonotone, OriginSingularity, RootBracketFailure
from .geometry import GraphJet2, mcf_operator

HALF_PI = 0.5 * math.pi
TRIG_GUARD = 1e-9
BISECT_MAX_ITER = 200


class FChoice(str, enum.Enum):
    SIMPLE = "simple"
    REFINED = "refined"


@dataclass(frozen=True)
class GrimReaperSpec:
    lam: float
    margin: float = 1e-3

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lam must be positive")

    @property
    def half_width(self) -> float:
        return HALF_PI / self.lam


@dataclass(frozen=True)
class BarrierSpec:
    n: int
    R: float
    lam: float
    f_choice: FChoice = FChoice.SIMPLE
    margin: float = 1e-3

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"barrier requires n >= 2, got n={self.n}")
        if not (self.R > 0 and self.lam > 0):
            raise ValueError("R and lam must be positive")
        if not 0 < self.margin < 1:
            raise ValueError("margin must lie in (0, 1)")
        object.__setattr__(self, "f_choice", FChoice(self.f_choice))

    @property
    def T(self) -> float:
        """End of the time interval I(R)."""
        return self.R**2 / (2 * (self.n - 1))

    @property
    def refined_radius(self) -> float:
        """R + pi/(4 lam), the scale in the refined choice of f."""
        return self.R + math.pi / (4 * self.lam)

    @property
    def outer_radius(self) -> float:
        return self.R + HALF_PI / self.lam


@dataclass(frozen=True)
class AnnulusDomain:
    inner: float
    outer: float

    @property
    def is_ball(self) -> bool:
        return self.inner == 0.0

    def contains(self, r) -> np.ndarray:
        r = np.asarray(r)
        return (r > self.inner) & (r < self.outer) if self.inner > 0 else r < self.outer


def grim_reaper(spec: GrimReaperSpec, x, t):
    """-(1/lam) log cos(lam x) + lam t; the curve translates upward with speed lam."""
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) >= spec.half_width * (1 - spec.margin)):
        raise DomainViolation("grim reaper evaluated outside its margin-restricted interval")
    out = -np.log(np.cos(spec.lam * x)) / spec.lam + spec.lam * np.asarray(t, dtype=float)
    return float(out) if np.ndim(out) == 0 else out


def _check_time(spec: BarrierSpec, t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or np.any(t > spec.T * (1 + 1e-14)):
        raise DomainViolation(f"t outside I(R) = [0, {spec.T}]")
    return np.minimum(t, spec.T)


def annulus_domain(spec: BarrierSpec, t: float) -> AnnulusDomain:
    t = float(_check_time(spec, t))
    shift = 2 * (spec.n - 1) * t
    lo = spec.R - HALF_PI / spec.lam
    inner = math.sqrt(max(0.0, lo * lo - shift)) if lo > 0 else 0.0
    outer = math.sqrt(max(0.0, spec.outer_radius**2 - shift))
    return AnnulusDomain(inner, outer)


def _as_scalar(out):
    return float(out) if np.ndim(out) == 0 else out


def f_value(spec: BarrierSpec, t):
    """Height correction f(t); zero at t = 0 and increasing on I(R)."""
    t = _check_time(spec, t)
    if spec.f_choice is FChoice.SIMPLE:
        out = math.sqrt(2 * spec.lam / (math.pi * spec.R)) * t
    else:
        S = spec.refined_radius
        q = 0.25 * (1 - 2 * (spec.n - 1) * t / S**2)
        out = 2 * S / (spec.n - 1) * (-np.log(np.sin(q)) + math.log(math.sin(0.25)))
    return _as_scalar(out)


def f_derivative(spec: BarrierSpec, t):
    """Exact f'(t).  For the refined choice this is cot(q(t)) / (R + pi/(4 lam))."""
    t = _check_time(spec, t)
    if spec.f_choice is FChoice.SIMPLE:
        out = math.sqrt(2 * spec.lam / (math.pi * spec.R)) * np.ones_like(t)
    else:
        S = spec.refined_radius
        q = 0.25 * (1 - 2 * (spec.n - 1) * t / S**2)
        out = 1.0 / (np.tan(q) * S)
    return _as_scalar(out)


def _geometry(spec: BarrierSpec, x, t, need_jet: bool):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != spec.n:
        raise ValueError(f"points must have {spec.n} components")
    t = np.broadcast_to(_check_time(spec, t), x.shape[:-1])
    r2 = np.sum(x * x, axis=-1)
    sq = np.sqrt(r2 + 2 * (spec.n - 1) * t)
    arg = spec.lam * (sq - spec.R)
    limit = min(HALF_PI * (1 - spec.margin), HALF_PI - TRIG_GUARD)
    if np.any(np.abs(arg) >= limit):
        raise DomainViolation("point outside the margin-restricted annulus A_t")
    if need_jet and np.any(np.sqrt(r2) < spec.margin * spec.R):
        raise OriginSingularity("barrier derivatives requested too close to x = 0")
    return x, t, r2, sq, arg


def in_domain(spec: BarrierSpec, x, t, need_jet: bool = True) -> np.ndarray:
    """Boolean mask of points accepted by the barrier functions."""
    x = np.asarray(x, dtype=float)
    t = np.broadcast_to(np.asarray(t, dtype=float), x.shape[:-1])
    r2 = np.sum(x * x, axis=-1)
    sq = np.sqrt(r2 + 2 * (spec.n - 1) * np.clip(t, 0, None))
    arg = spec.lam * (sq - spec.R)
    limit = min(HALF_PI * (1 - spec.margin), HALF_PI - TRIG_GUARD)
    ok = (t >= 0) & (t <= spec.T) & (np.abs(arg) < limit)
    if need_jet:
        ok &= np.sqrt(r2) >= spec.margin * spec.R
    return ok


def barrier_value(spec: BarrierSpec, x, t):
    x, t, _, _, arg = _geometry(spec, x, t, need_jet=False)
    out = -np.log(np.cos(arg)) / spec.lam + spec.lam * t + f_value(spec, t)
    return _as_scalar(out)


def barrier_jet(spec: BarrierSpec, x, t):
    """Closed-form (w_t, Dw, D^2 w)."""
    x, t, r2, sq, arg = _geometry(spec, x, t, need_jet=True)
    tn = np.tan(arg)
    wdot = tn * (spec.n - 1) / sq + spec.lam + f_derivative(spec, t)
    grad = (tn / sq)[..., None] * x
    xx = x[..., :, None] * x[..., None, :] / (sq**2)[..., None, None]
    eye = np.eye(spec.n)
    hess = (spec.lam * (1 + tn**2))[..., None, None] * xx + (tn / sq)[..., None, None] * (eye - xx)
    return _as_scalar(wdot), grad, hess


def barrier_residual(spec: BarrierSpec, x, t):
    """-w_t + (delta^ij - w^i w^j / (1 + |Dw|^2)) w_ij; non-positive for a supersolution."""
    wdot, grad, hess = barrier_jet(spec, x, t)
    return _as_scalar(-np.asarray(wdot) + mcf_operator(GraphJet2(0.0, grad, hess)))


def reduced_inequality_gap(spec: BarrierSpec, x, t):
    """f'(t) - (tan/sq) / (1 + (tan/sq)^2 |x|^2); non-negative is sufficient for the barrier."""
    x, t, r2, sq, arg = _geometry(spec, x, t, need_jet=True)
    y = np.tan(arg) / sq
    return _as_scalar(f_derivative(spec, t) - y / (1 + y * y * r2))


def _bisect(fun: Callable[[float], float], lo: float, hi: float) -> float:
    """Bisection on a sign change with fun(lo) < 0 < fun(hi); runs to floating-point resolution."""
    for _ in range(BISECT_MAX_ITER):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if fun(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def a_t_residual(spec: BarrierSpec, t: float, a: float) -> float:
    """tan(lam (s - R)) / s - 1/a with s = sqrt(a^2 + 2(n-1)t)."""
    s = math.sqrt(a * a + 2 * (spec.n - 1) * t)
    return math.tan(spec.lam * (s - spec.R)) / s - 1.0 / a


def solve_a_t(spec: BarrierSpec, t: float) -> float:
    """The unique a in J with tan(lam(s - R))/s = 1/a, s = sqrt(a^2 + 2(n-1)t)."""
    t = float(_check_time(spec, t))
    shift = 2 * (spec.n - 1) * t
    lo = math.sqrt(max(0.0, spec.R**2 - shift))
    hi = math.sqrt(spec.outer_radius**2 - shift)

    def g(a):
        # a * s * residual: same sign, no division by a near 0
        s = math.sqrt(a * a + shift)
        return a * math.sin(spec.lam * (s - spec.R)) - s * math.cos(spec.lam * (s - spec.R))

    a_lo = lo + (hi - lo) * 1e-15 if lo > 0 else (hi - lo) * 1e-15
    if not (g(a_lo) < 0 < g(hi)):
        raise RootBracketFailure(f"no sign change for a_t on J = ({lo}, {hi}) at t={t}")
    return _bisect(g, a_lo, hi)


def a_t_refined_bound(spec: BarrierSpec, t: float) -> float:
    """Upper bound on 1/a_t used to build the refined f; equals its derivative."""
    return float(f_derivative(BarrierSpec(spec.n, spec.R, spec.lam, FChoice.REFINED, spec.margin), t))


def lemma_a_bound(y: Callable, interval, samples: int = 257):
    """Return (1/a, a) where y(a) = 1/a for an increasing positive y on ``interval``.

    Then y(r) / (1 + y(r)^2 r^2) <= 1/a for every r in the interval.
    Monotonicity is verified on ``samples`` interior points.
    """
    lo, hi = float(interval[0]), float(interval[1])
    if not (0 <= lo < hi < math.inf):
        raise ValueError("interval must be a bounded subinterval of (0, inf)")
    r = lo + (hi - lo) * (np.arange(samples) + 0.5) / samples
    vals = np.array([float(y(v)) for v in r])
    if np.any(np.diff(vals) < 0):
        raise NotMonotone("sampled y decreases")
    phi = vals - 1.0 / r
    if not (phi[0] < 0 <= phi[-1]):
        raise NoRoot("y(r) - 1/r does not change sign on the sampled interval")
    k = int(np.argmax(phi >= 0))
    if phi[k] == 0:
        a = float(r[k])
    else:
        a = _bisect(lambda v: float(y(v)) - 1.0 / v, float(r[k - 1]), float(r[k]))
    return 1.0 / a, a


def tau_sigma(spec: BarrierSpec, s):
    """tau(s) = s^2 (1 - cot^2(lam(s-R))) and its lower comparison sigma(s).

    ``s`` must lie in [R + pi/(4 lam), R + pi/(2 lam)]; tau is extended
    continuously by its limit at the right endpoint.
    """
    s = np.asarray(s, dtype=float)
    s_lo, s_hi = spec.refined_radius, spec.outer_radius
    tol = 1e-14 * s_hi
    if np.any(s < s_lo - tol) or np.any(s > s_hi + tol):
        raise DomainViolation(f"s outside [{s_lo}, {s_hi}]")
    s = np.clip(s, s_lo, s_hi)
    arg = spec.lam * (s - spec.R)
    with np.errstate(divide="ignore", invalid="ignore"):
        cot = np.cos(arg) / np.sin(arg)
    tau = np.where(s >= s_hi, s_hi**2, s * s * (1 - cot * cot))
    sigma = s * s * (1 + 4 * spec.lam * (s - s_hi))
    return _as_scalar(tau), _as_scalar(sigma)


def sample_domain(spec: BarrierSpec, count: int, rng: np.random.Generator, t_range=None):
    """Random (x, t) inside the margin-restricted domain, away from the origin.

    The cosine argument is drawn uniformly so both blow-up edges are well covered.
    """
    t_lo, t_hi = t_range if t_range is not None else (0.0, spec.T)
    limit = min(HALF_PI * (1 - spec.margin), HALF_PI - TRIG_GUARD)
    xs, ts = [], []
    have = 0
    while have < count:
        m = 2 * (count - have) + 16
        t = rng.uniform(t_lo, t_hi, m)
        arg = rng.uniform(-limit, limit, m) * (1 - 1e-12)
        sq = spec.R + arg / spec.lam
        r2 = sq * sq - 2 * (spec.n - 1) * t
        ok = (sq > 0) & (r2 > (spec.margin * spec.R) ** 2 * (1 + 1e-9))
        r = np.sqrt(r2[ok])
        d = rng.normal(size=(r.size, spec.n))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        xs.append(d * r[:, None])
        ts.append(t[ok])
        have += r.size
    x = np.concatenate(xs)[:count]
    t = np.concatenate(ts)[:count]
    keep = in_domain(spec, x, t)
    return x[keep], t[keep]
