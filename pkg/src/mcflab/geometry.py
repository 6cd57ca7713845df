"""Curvature formulas for graphs, normal graphs and spacetime tracks.

Conventions (fixed for the whole package):

* A base hypersurface N with unit normal nu has second fundamental form
  ``h_ij = -<N_ij, nu> = <nu_i, N_j>``, so that ``N_ij = Gamma^k_ij N_k - h_ij nu``
  and ``nu_i = h_i^k N_k``.  The Weingarten map is ``A = g^{-1} h`` with
  ``A[k, i] = h_i^k``.  The unit sphere with outward normal has ``h = g``.
* A normal graph over N with height u is ``X = N - u nu``.  Its normal
  ``nu^M`` is chosen with ``<nu^M, nu> >= 0`` and ``h^M_ij = -<X_ij, nu^M>``.
* For a graph over R^n the mean curvature is ``H = div(Du / sqrt(1 + |Du|^2))``,
  so graphical MCF reads ``u_t = sqrt(1 + |Du|^2) H``.  Convex (upward
  opening) graphs have H > 0.

Patch derivatives are 4th-order central differences; only nodes at least two
grid cells away from the patch boundary are valid.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import SingularConfiguration

NEUMANN_TOL = 1e-14
NEUMANN_MAX_TERMS = 100_000
COND_LIMIT = 1e12


@dataclass
class GraphJet2:
    """Value, gradient and Hessian of a height function at a point.

    Arrays may carry leading batch dimensions: ``gradient`` has shape
    ``(..., n)`` and ``hessian`` ``(..., n, n)``.
    """

    value: np.ndarray | float
    gradient: np.ndarray
    hessian: np.ndarray

    def __post_init__(self):
        self.gradient = np.atleast_1d(np.asarray(self.gradient, dtype=float))
        hess = np.asarray(self.hessian, dtype=float)
        if hess.ndim == 0:
            hess = hess.reshape(1, 1)
        n = self.gradient.shape[-1]
        if n < 1 or hess.shape[-2:] != (n, n):
            raise ValueError(f"hessian shape {hess.shape} does not match gradient length {n}")
        self.hessian = 0.5 * (hess + np.swapaxes(hess, -1, -2))
        self.value = np.asarray(self.value, dtype=float)

    @property
    def n(self) -> int:
        return self.gradient.shape[-1]


def _scaled_gradient(p):
    # p = s * q with s >= 1 so that 1 + |p|^2 = s^2 (1/s^2 + |q|^2) never overflows
    s = np.maximum(1.0, np.max(np.abs(p), axis=-1))
    q = p / s[..., None]
    return s, q, 1.0 / s**2 + np.sum(q * q, axis=-1)


def mcf_operator(jet: GraphJet2):
    """(delta^ij - u^i u^j / (1 + |Du|^2)) u_ij, the graphical MCF right-hand side."""
    s, q, w2 = _scaled_gradient(jet.gradient)
    trace = np.trace(jet.hessian, axis1=-2, axis2=-1)
    quad = np.einsum("...i,...ij,...j->...", q, jet.hessian, q)
    out = trace - quad / w2
    return float(out) if np.ndim(out) == 0 else out


def graph_mean_curvature(jet: GraphJet2):
    """Mean curvature of graph(u), i.e. ``mcf_operator / sqrt(1 + |Du|^2)``."""
    s, _, w2 = _scaled_gradient(jet.gradient)
    out = np.asarray(mcf_operator(jet)) / (s * np.sqrt(w2))
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# finite differences on a regular parameter grid
# ---------------------------------------------------------------------------

_D1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_D2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0


def _stencil(f: np.ndarray, axis: int, weights: np.ndarray, scale: float) -> np.ndarray:
    out = np.full(f.shape, np.nan)
    m = f.shape[axis]
    acc = 0.0
    for k, wgt in zip(range(-2, 3), weights):
        if wgt == 0.0:
            continue
        sl = [slice(None)] * f.ndim
        sl[axis] = slice(2 + k, m - 2 + k)
        acc = acc + wgt * f[tuple(sl)]
    sl = [slice(None)] * f.ndim
    sl[axis] = slice(2, m - 2)
    out[tuple(sl)] = acc / scale
    return out


def grid_gradient(f: np.ndarray, spacing: float, dim: int) -> np.ndarray:
    """First partials over the first ``dim`` axes; result has the derivative index last."""
    return np.stack([_stencil(f, a, _D1, spacing) for a in range(dim)], axis=-1)


def grid_hessian(f: np.ndarray, spacing: float, dim: int) -> np.ndarray:
    """Second partials; pure ones use the 5-point stencil, mixed ones nest the first-derivative stencil."""
    rows = []
    for i in range(dim):
        di = _stencil(f, i, _D1, spacing)
        row = []
        for j in range(dim):
            if i == j:
                row.append(_stencil(f, i, _D2, spacing**2))
            else:
                row.append(_stencil(di, j, _D1, spacing))
        rows.append(np.stack(row, axis=-1))
    hess = np.stack(rows, axis=-2)
    return 0.5 * (hess + np.swapaxes(hess, -1, -2))


# ---------------------------------------------------------------------------
# normal graphs
# ---------------------------------------------------------------------------


@dataclass
class HypersurfacePatch:
    """Sampled parametrized patch of a base hypersurface N with a normal-graph height u.

    All per-node arrays are indexed by the parameter grid of shape ``(m,) * n``.
    """

    spacing: float
    params: np.ndarray       # grid + (n,)
    embedding: np.ndarray    # grid + (n+1,)
    normal: np.ndarray       # grid + (n+1,)
    metric: np.ndarray       # grid + (n, n)
    second_ff: np.ndarray    # grid + (n, n)
    height: np.ndarray       # grid
    weingarten: np.ndarray = field(init=False)

    def __post_init__(self):
        norms = np.linalg.norm(self.normal, axis=-1)
        if np.max(np.abs(norms - 1.0)) > 1e-12:
            raise ValueError("normal field is not unit length")
        if np.min(np.linalg.eigvalsh(self.metric)) <= 0:
            raise ValueError("metric is not positive definite")
        self.second_ff = 0.5 * (self.second_ff + np.swapaxes(self.second_ff, -1, -2))
        self.weingarten = np.linalg.solve(self.metric, self.second_ff)

    @property
    def dim(self) -> int:
        return self.params.shape[-1]

    @property
    def shape(self) -> tuple:
        return self.height.shape

    def interior_nodes(self):
        """Index tuples of nodes where all 4th-order stencils are available."""
        return [tuple(i + 2 for i in idx) for idx in np.ndindex(*(m - 4 for m in self.shape))]

    @classmethod
    def from_parametrization(
        cls,
        embed: Callable,
        jacobian: Callable,
        hessian: Callable,
        normal: Callable,
        height: Callable,
        center,
        spacing: float,
        half_width: int = 4,
    ) -> "HypersurfacePatch":
        """Sample N, its exact first/second derivatives and unit normal on a cube grid.

        ``jacobian(x)`` returns the ``(n+1, n)`` matrix of N_i and ``hessian(x)``
        the ``(n+1, n, n)`` array of N_ij.
        """
        center = np.asarray(center, dtype=float)
        n = center.size
        offsets = spacing * np.arange(-half_width, half_width + 1)
        mesh = np.meshgrid(*[center[i] + offsets for i in range(n)], indexing="ij")
        params = np.stack(mesh, axis=-1)
        grid_shape = params.shape[:-1]
        emb = np.empty(grid_shape + (n + 1,))
        nu = np.empty_like(emb)
        g = np.empty(grid_shape + (n, n))
        h = np.empty_like(g)
        u = np.empty(grid_shape)
        for idx in np.ndindex(*grid_shape):
            x = params[idx]
            dn = np.asarray(jacobian(x), dtype=float)
            d2n = np.asarray(hessian(x), dtype=float)
            nv = np.asarray(normal(x), dtype=float)
            emb[idx] = embed(x)
            nu[idx] = nv
            g[idx] = dn.T @ dn
            h[idx] = -np.einsum("a,aij->ij", nv, d2n)
            u[idx] = height(x)
        return cls(spacing, params, emb, nu, g, h, u)

    @classmethod
    def from_monge(cls, phi, grad_phi, hess_phi, height, center, spacing, half_width=4):
        """Patch of N(x) = (x, phi(x)) with the upward normal (-D phi, 1)/W."""

        def embed(x):
            return np.append(x, phi(x))

        def jac(x):
            return np.vstack([np.eye(x.size), np.atleast_2d(grad_phi(x))])

        def hess(x):
            n = x.size
            out = np.zeros((n + 1, n, n))
            out[n] = hess_phi(x)
            return out

        def normal(x):
            v = np.append(-np.asarray(grad_phi(x), dtype=float), 1.0)
            return v / np.linalg.norm(v)

        return cls.from_parametrization(embed, jac, hess, normal, height, center, spacing, half_width)


@dataclass
class _PatchDerivatives:
    du: np.ndarray
    d2u: np.ndarray
    christoffel: np.ndarray   # [k, i, j] = Gamma^k_ij
    cov_dA: np.ndarray        # [j, k, i] = (nabla_j A)^k_i


def _check_interior(patch: HypersurfacePatch, node) -> tuple:
    node = tuple(int(i) for i in np.atleast_1d(node))
    if len(node) != patch.dim:
        raise ValueError(f"node {node} has wrong rank for a {patch.dim}-dimensional patch")
    for i, m in zip(node, patch.shape):
        if i < 2 or i > m - 3:
            raise ValueError(f"node {node} is within two cells of the patch boundary")
    return node


def _patch_derivatives(patch: HypersurfacePatch, node) -> _PatchDerivatives:
    n = patch.dim
    hs = patch.spacing
    du = grid_gradient(patch.height, hs, n)[node]
    d2u = grid_hessian(patch.height, hs, n)[node]
    # dg[..., a, b, l] = d_l g_ab
    dg = grid_gradient(patch.metric, hs, n)[node]
    g_inv = np.linalg.inv(patch.metric[node])
    # first kind: Gamma_{l i j} = 1/2 (d_i g_jl + d_j g_il - d_l g_ij)
    first = 0.5 * (
        np.einsum("jli->lij", dg) + np.einsum("ilj->lij", dg) - np.einsum("ijl->lij", dg)
    )
    gamma = np.einsum("kl,lij->kij", g_inv, first)
    dA = grid_gradient(patch.weingarten, hs, n)[node]   # [k, i, j] = d_j A^k_i
    A = patch.weingarten[node]
    cov = (
        np.einsum("kij->jki", dA)
        + np.einsum("kjl,li->jki", gamma, A)
        - np.einsum("lji,kl->jki", gamma, A)
    )
    return _PatchDerivatives(du, d2u, gamma, cov)


def _resolvent(u: float, A: np.ndarray) -> np.ndarray:
    """B = sum_a (uA)^a, summed until the increment's operator norm drops below NEUMANN_TOL."""
    n = A.shape[0]
    uA = u * A
    M = np.eye(n) - uA
    if np.linalg.cond(M) > COND_LIMIT:
        raise SingularConfiguration("I - uA is numerically singular")
    if np.max(np.abs(np.linalg.eigvals(uA))) >= 1.0:
        raise SingularConfiguration("|u| times the curvature reaches 1; Neumann series diverges")
    B = np.eye(n)
    term = np.eye(n)
    for _ in range(NEUMANN_MAX_TERMS):
        term = term @ uA
        B = B + term
        if np.linalg.norm(term, 2) < NEUMANN_TOL:
            return B
    raise SingularConfiguration("Neumann series for (I - uA)^-1 did not converge")


def normal_graph_metric(patch: HypersurfacePatch, node) -> np.ndarray:
    """g^M_ij = g_ij + u_i u_j - 2 u h_ij + u^2 h_ik h_j^k at an interior node."""
    node = _check_interior(patch, node)
    g = patch.metric[node]
    h = patch.second_ff[node]
    A = patch.weingarten[node]
    u = float(patch.height[node])
    _resolvent(u, A)  # validates the configuration
    du = grid_gradient(patch.height, patch.spacing, patch.dim)[node]
    out = g + np.outer(du, du) - 2.0 * u * h + u * u * (h @ A)
    return 0.5 * (out + out.T)


def normal_graph_second_ff(patch: HypersurfacePatch, node) -> np.ndarray:
    """Second fundamental form of the normal graph X = N - u nu at an interior node.

    ``u_ij`` is the covariant Hessian of u and ``nabla_j h_i^k`` the covariant
    derivative of the Weingarten map; both reduce to plain partials in normal
    coordinates.  Christoffel symbols come from 4th-order differences of the
    sampled metric.
    """
    node = _check_interior(patch, node)
    h = patch.second_ff[node]
    A = patch.weingarten[node]
    g_inv = np.linalg.inv(patch.metric[node])
    u = float(patch.height[node])
    B = _resolvent(u, A)
    d = _patch_derivatives(patch, node)
    hess_u = d.d2u - np.einsum("kij,k->ij", d.christoffel, d.du)
    duB = d.du @ B
    tang = (
        np.einsum("i,kj->ijk", d.du, A)
        + np.einsum("j,ki->ijk", d.du, A)
        + u * np.einsum("jki->ijk", d.cov_dA)
    )
    bracket = h + hess_u - u * (h @ A) + np.einsum("ijk,k->ij", tang, duB)
    scale = np.sqrt(1.0 + duB @ g_inv @ duB)
    out = bracket / scale
    return 0.5 * (out + out.T)


def parametrized_forms(patch: HypersurfacePatch, node) -> tuple[np.ndarray, np.ndarray]:
    """First and second fundamental forms of X = N - u nu by direct differentiation.

    Independent of the normal-graph formulas: X is sampled, differentiated with
    the same 4th-order stencils and its unit normal oriented so <nu^M, nu> >= 0.
    """
    node = _check_interior(patch, node)
    n = patch.dim
    X = patch.embedding - patch.height[..., None] * patch.normal
    dX = grid_gradient(X, patch.spacing, n)[node]        # (n+1, n)
    d2X = grid_hessian(X, patch.spacing, n)[node]        # (n+1, n, n)
    gM = dX.T @ dX
    # unit normal: left singular vector orthogonal to the tangent columns
    U, _, _ = np.linalg.svd(dX, full_matrices=True)
    nuM = U[:, -1]
    if nuM @ patch.normal[node] < 0:
        nuM = -nuM
    hM = -np.einsum("a,aij->ij", nuM, d2X)
    return gM, 0.5 * (hM + hM.T)


# ---------------------------------------------------------------------------
# spacetime track
# ---------------------------------------------------------------------------


@dataclass
class SpacetimeJet:
    """|A|^2, H, |grad H|^2 and the normal time derivative of H for one M_t."""

    A2: float
    H: float
    gradH2: float
    dtH: float
    n: int | None = None

    def __post_init__(self):
        if self.A2 < 0 or self.gradH2 < 0:
            raise ValueError("A2 and gradH2 must be non-negative")
        if self.n is not None and self.A2 < self.H**2 / self.n * (1 - 1e-12):
            raise ValueError("A2 < H^2/n violates Cauchy-Schwarz")


def spacetime_A2(jet: SpacetimeJet) -> float:
    """Squared norm of the second fundamental form of the spacetime track."""
    q = 1.0 + jet.H**2
    return jet.A2 / q + 2.0 * jet.gradH2 / q**2 + jet.dtH**2 / q**3


def graph_A2(grad: np.ndarray, hess: np.ndarray) -> float:
    """|A|^2 of graph(f) from the gradient and Hessian of f."""
    grad = np.asarray(grad, dtype=float)
    g = np.eye(grad.size) + np.outer(grad, grad)
    h = np.asarray(hess, dtype=float) / np.sqrt(1.0 + grad @ grad)
    W = np.linalg.solve(g, h)
    return float(np.trace(W @ W))


def shrinking_sphere_jet(n: int, radius: float) -> SpacetimeJet:
    """Exact data for the round sphere of the given radius in R^{n+1} moving by MCF."""
    return SpacetimeJet(
        A2=n / radius**2, H=n / radius, gradH2=0.0, dtH=n**2 / radius**3, n=n
    )


def arrival_time_A2(tau: Callable, point, step: float = 1e-3) -> float:
    """|A|^2 of graph(tau) at ``point`` via 4th-order central differences of ``tau``."""
    point = np.asarray(point, dtype=float)
    d = point.size
    offsets = step * np.arange(-2, 3)
    mesh = np.meshgrid(*[point[i] + offsets for i in range(d)], indexing="ij")
    samples = np.vectorize(lambda *c: tau(np.array(c)))(*mesh)
    centre = (2,) * d
    grad = grid_gradient(samples, step, d)[centre]
    hess = grid_hessian(samples, step, d)[centre]
    return graph_A2(grad, hess)
