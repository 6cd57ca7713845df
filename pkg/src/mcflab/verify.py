"""Randomized verification suites shared by the CLI and the tests."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import barriers as B
from . import geometry as G
from .experiments import ExperimentReport

# 4th-order central first-derivative stencil
_FD_OFFSETS = np.array([-2.0, -1.0, 1.0, 2.0])
_FD_WEIGHTS = np.array([1.0, -8.0, 8.0, -1.0]) / 12.0


# ---------------------------------------------------------------------------
# geometry
# ---------------------------------------------------------------------------


@dataclass
class _Cubic:
    """phi(x) = x.C.x + T_ijk x_i x_j x_k + amp sin(k.x + phase) with exact derivatives."""

    C: np.ndarray
    T: np.ndarray
    amp: float
    k: np.ndarray
    phase: float

    def value(self, x):
        return x @ self.C @ x + np.einsum("ijk,i,j,k", self.T, x, x, x) + self.amp * np.sin(self.k @ x + self.phase)

    def grad(self, x):
        return 2 * self.C @ x + 3 * np.einsum("ijk,j,k->i", self.T, x, x) + self.amp * np.cos(self.k @ x + self.phase) * self.k

    def hess(self, x):
        return 2 * self.C + 6 * np.einsum("ijk,k->ij", self.T, x) - self.amp * np.sin(self.k @ x + self.phase) * np.outer(self.k, self.k)


def _sym3(a):
    return (a + a.transpose(0, 2, 1) + a.transpose(1, 0, 2) + a.transpose(1, 2, 0)
            + a.transpose(2, 0, 1) + a.transpose(2, 1, 0)) / 6


def random_monge_patch(rng: np.random.Generator, dim: int = 2, spacing: float = 2e-3) -> G.HypersurfacePatch:
    """Curved Monge patch with a smooth random normal height function."""
    C = rng.normal(size=(dim, dim)) * 0.5
    phi = _Cubic(0.5 * (C + C.T), _sym3(rng.normal(size=(dim,) * 3) * 0.3),
                 0.2 * rng.normal(), rng.normal(size=dim), rng.uniform(0, 2 * math.pi))
    u0 = rng.uniform(-0.2, 0.2)
    b = rng.normal(size=dim) * 0.3
    q = rng.normal(size=(dim, dim)) * 0.3
    kk = rng.normal(size=dim) * 2

    def height(x):
        return u0 + b @ x + x @ q @ x + 0.05 * np.sin(kk @ x)

    centre = rng.uniform(-0.3, 0.3, dim)
    return G.HypersurfacePatch.from_monge(phi.value, phi.grad, phi.hess, height, centre, spacing)


def _rel(a, b):
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


def normal_graph_errors(patch: G.HypersurfacePatch, nodes=None) -> tuple[float, float]:
    """Worst relative error of the normal-graph metric and second form vs direct differentiation."""
    em = es = 0.0
    for node in nodes if nodes is not None else patch.interior_nodes():
        g0, h0 = G.parametrized_forms(patch, node)
        em = max(em, _rel(G.normal_graph_metric(patch, node), g0))
        es = max(es, _rel(G.normal_graph_second_ff(patch, node), h0))
    return em, es


def geometry_verification(count: int = 50, seed: int = 0, sphere_dims=(2, 3)) -> ExperimentReport:
    rng = np.random.default_rng(seed)
    rep = ExperimentReport("geometry", parameters={"patches": count, "seed": seed})
    em_all, es_all = [], []
    for i in range(count):
        dim = 2 if i % 5 else 3
        patch = random_monge_patch(rng, dim)
        # every interior node in 2D, the centre node in 3D
        nodes = None if dim == 2 else [tuple(m // 2 for m in patch.shape)]
        em, es = normal_graph_errors(patch, nodes)
        em_all.append(em)
        es_all.append(es)
    rep.add_series("metric_error", range(count), em_all)
    rep.add_series("second_ff_error", range(count), es_all)
    rep.check("metric_max_relative_error", max(em_all), max(em_all) <= 1e-8, "<= 1e-8")
    rep.check("second_ff_max_relative_error", max(es_all), max(es_all) <= 1e-6, "<= 1e-6")

    worst = 0.0
    for n in sphere_dims:
        for radius in (0.2, 0.5, 0.9):
            # the sphere of radius r is reached at time (1 - r^2)/(2n) from the unit sphere
            tau = lambda y, n=n: (1.0 - y @ y) / (2 * n)
            p = np.zeros(n + 1)
            p[0] = radius
            fd = G.arrival_time_A2(tau, p, step=1e-3 * radius)
            exact = G.spacetime_A2(G.shrinking_sphere_jet(n, radius))
            worst = max(worst, abs(fd - exact) / exact)
    rep.check("sphere_spacetime_relative_error", worst, worst <= 1e-4, "<= 1e-4")

    worst = 0.0
    lam = 1.3
    for x in (0.0, 0.3, -0.8):
        tau = lambda z: (z[1] + np.log(np.cos(lam * z[0])) / lam) / lam
        fd = G.arrival_time_A2(tau, np.array([x, 0.4]), 1e-3)
        c, s = math.cos(lam * x), math.sin(lam * x)
        jet = G.SpacetimeJet(A2=(lam * c) ** 2, H=lam * c, gradH2=(lam**2 * s * c) ** 2, dtH=lam**3 * c * s * s)
        exact = G.spacetime_A2(jet)
        worst = max(worst, abs(fd - exact) / exact)
    rep.check("grim_reaper_spacetime_relative_error", worst, worst <= 1e-4, "<= 1e-4")
    return rep


# ---------------------------------------------------------------------------
# barriers
# ---------------------------------------------------------------------------


def _local_scale(spec: B.BarrierSpec, x, t):
    """Length over which w changes appreciably: distance to the blow-up edge, the origin and R."""
    r2 = np.sum(x * x, axis=-1)
    sq = np.sqrt(r2 + 2 * (spec.n - 1) * t)
    edge = (B.HALF_PI - np.abs(spec.lam * (sq - spec.R))) / spec.lam
    return np.minimum.reduce([edge, np.sqrt(r2), np.full_like(sq, spec.R)]), sq


def _value(spec: B.BarrierSpec, x, t):
    """w from its defining formula, without the margin check, so stencils may
    straddle the margin edge."""
    sq = np.sqrt(np.sum(x * x, axis=-1) + 2 * (spec.n - 1) * t)
    return -np.log(np.cos(spec.lam * (sq - spec.R))) / spec.lam + spec.lam * t + B.f_value(spec, t)


def _gradient(spec: B.BarrierSpec, x, t):
    """Dw = tan(lam (sq - R)) x / sq, likewise unchecked."""
    sq = np.sqrt(np.sum(x * x, axis=-1) + 2 * (spec.n - 1) * t)
    return (np.tan(spec.lam * (sq - spec.R)) / sq)[..., None] * x


def jet_fd_errors(spec: B.BarrierSpec, x, t, eps: float = 1e-3):
    """Relative errors (w_t, Dw, D^2w) of the closed-form jet vs central differences.

    w_t and Dw are differenced from the values, D^2w from the gradient formula.
    Errors are relative to max(|closed form|, 1).  Sample times must be interior.
    """
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    wdot, grad, hess = B.barrier_jet(spec, x, t)
    L, sq = _local_scale(spec, x, t)
    hx = eps * L
    # the sq-shift of a time step is (n-1) dt / sq
    ht = np.minimum.reduce([eps * L * sq / (spec.n - 1), 0.25 * t, 0.25 * (spec.T - t)])

    fd_t = sum(w * _value(spec, x, t + o * ht) for o, w in zip(_FD_OFFSETS, _FD_WEIGHTS)) / ht
    fd_g = np.empty_like(grad)
    fd_h = np.empty_like(hess)
    for i in range(spec.n):
        e = np.zeros(spec.n)
        e[i] = 1.0
        shift = hx[:, None] * e
        fd_g[:, i] = sum(w * _value(spec, x + o * shift, t) for o, w in zip(_FD_OFFSETS, _FD_WEIGHTS)) / hx
        fd_h[:, :, i] = sum(w * _gradient(spec, x + o * shift, t) for o, w in zip(_FD_OFFSETS, _FD_WEIGHTS)) / hx[:, None]
    et = np.abs(fd_t - wdot) / np.maximum(np.abs(wdot), 1)
    eg = np.linalg.norm(fd_g - grad, axis=-1) / np.maximum(np.linalg.norm(grad, axis=-1), 1)
    eh = np.linalg.norm(fd_h - hess, axis=(-2, -1)) / np.maximum(np.linalg.norm(hess, axis=(-2, -1)), 1)
    return et, eg, eh


DEFAULT_SWEEP = [(n, R, lam) for n in (2, 3) for R in (0.5, 1.0, 2.0) for lam in (1.0, 10.0, 100.0)]


def barrier_suite(specs, samples: int = 10_000, jet_samples: int = 1000, seed: int = 0) -> ExperimentReport:
    """Supersolution residual, jet consistency, a_t bounds and the tau/sigma comparison."""
    rng = np.random.default_rng(seed)
    rep = ExperimentReport("barrier_check", parameters={
        "specs": [[s.n, s.R, s.lam, s.f_choice.value] for s in specs],
        "samples": samples, "jet_samples": jet_samples, "seed": seed})
    worst_res = -math.inf
    worst_jet = 0.0
    worst_at = 0.0
    at_ok = True
    worst_ts = math.inf
    worst_end = 0.0
    for spec in specs:
        x, t = B.sample_domain(spec, samples, rng)
        wdot = B.barrier_jet(spec, x, t)[0]
        ratio = B.barrier_residual(spec, x, t) / (1e-8 * (1 + np.abs(wdot)))
        worst_res = max(worst_res, float(np.max(ratio)))

        T = spec.T
        xj, tj = B.sample_domain(spec, jet_samples, rng, t_range=(0.01 * T, 0.99 * T))
        worst_jet = max(worst_jet, max(float(np.max(e)) for e in jet_fd_errors(spec, xj, tj)))

        for tt in rng.uniform(0, T, 4):
            a = B.solve_a_t(spec, float(tt))
            at_ok &= a * a >= math.pi * spec.R / (2 * spec.lam) * (1 - 1e-12)
            at_ok &= 1 / a <= B.a_t_refined_bound(spec, float(tt)) * (1 + 1e-12)
            worst_at = max(worst_at, abs(B.a_t_residual(spec, float(tt), a)))

        s = rng.uniform(spec.refined_radius, spec.outer_radius, 1000)
        tau, sigma = B.tau_sigma(spec, s)
        worst_ts = min(worst_ts, float(np.min(tau - sigma)))
        te, se = B.tau_sigma(spec, spec.outer_radius)
        worst_end = max(worst_end, abs(te - se))

    rep.check("residual_over_tolerance_max", worst_res, worst_res <= 1.0,
              "residual <= 1e-8 (1 + |w_t|) at every sample")
    rep.check("jet_relative_error_max", worst_jet, worst_jet <= 1e-6, "<= 1e-6")
    rep.check("a_t_bounds", bool(at_ok), bool(at_ok), "a^2 >= pi R/(2 lam) and 1/a <= refined bound")
    rep.check("a_t_residual_max", worst_at, worst_at <= 1e-10, "<= 1e-10")
    rep.check("tau_minus_sigma_min", worst_ts, worst_ts >= -1e-12, ">= -1e-12")
    rep.check("tau_sigma_endpoint_gap", worst_end, worst_end <= 1e-12, "<= 1e-12")
    return rep
