"""Coordinate oracle for Riemannian charts with affine connections.

Everything here is computed from the metric (and vector field) expressions
with exact symbolic derivatives; there are no finite differences.  The
batched ``*_batch`` / ``*_jet`` functions work on an ``(N, n)`` array of
points and put the point axis first; the unbatched operations wrap them for
a single point and return :class:`~dwpverify.tensor.TensorValue`.

Index conventions (frozen, see ``tests/test_conventions.py``):

* ``gamma[k, i, j] = Γ^k_ij`` with ``∇_{∂_i} ∂_j = Γ^k_ij ∂_k``.
* ``R[l, i, j, k]`` is the ``∂_l`` component of ``R(∂_i, ∂_j)∂_k`` where
  ``R(X,Y)Z = ∇_X∇_Y Z − ∇_Y∇_X Z − ∇_[X,Y] Z``.
* Ricci ``S_jk = R^i_{ijk}``, the trace of ``X ↦ R(X, Y)Z``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import exprlang as el
from .exprlang import Expr
from .tensor import MAX_CONDITION, TensorError, TensorValue, contract

__all__ = [
    "GeometryError",
    "ChartManifold",
    "VectorFieldSpec",
    "ConnectionCoeffs",
    "ConnectionField",
    "LeviCivitaField",
    "SSMCField",
    "RICCI_SLOTS",
    "expr_jet",
    "sample_points",
    "check_metric",
    "metric_at",
    "levi_civita",
    "ssmc",
    "torsion",
    "riemann",
    "riemann_batch",
    "riemann_jet",
    "ricci",
    "ricci_batch",
    "scalar",
    "scalar_batch",
    "grad_hess_laplace",
    "grad_hess_laplace_batch",
    "covariant_derivative_ricci",
    "covariant_derivative_ricci_batch",
    "covariant_derivative_vector_batch",
    "covariant_derivative_metric_batch",
    "curvature_relation_rhs_batch",
]

# (up slot, down slot) of R^l_{ijk} contracted to get Ricci
RICCI_SLOTS = (0, 1)
DOMAIN_SHRINK = 0.05


class GeometryError(ValueError):
    pass


# ---------------------------------------------------------------------------
# jets of expression arrays
# ---------------------------------------------------------------------------


def _derivative_tree(exprs: np.ndarray, n: int, order: int, cache: dict) -> list[np.ndarray]:
    """Object arrays of symbolic derivatives: ``D[k][a1..ak, ...] = ∂_{a1}..∂_{ak} e``."""
    levels = cache.setdefault("levels", [exprs])
    while len(levels) <= order:
        prev = levels[-1]
        nxt = np.empty((n,) + prev.shape, dtype=object)
        for a in range(n):
            for idx in np.ndindex(prev.shape):
                nxt[(a,) + idx] = el.differentiate(prev[idx], a)
        levels.append(nxt)
    return levels[: order + 1]


def expr_jet(exprs, n: int, points: np.ndarray, order: int, cache: dict | None = None) -> list[np.ndarray]:
    """Values and partial derivatives of an array of expressions.

    Returns ``[v, dv, d2v, ...]`` with shapes ``(N,) + (n,)*k + shape(exprs)``.
    """
    arr = np.empty(np.shape(exprs), dtype=object)
    arr[...] = exprs
    tree = _derivative_tree(arr, n, order, {} if cache is None else cache)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    return [el.evaluate_many(level, pts) for level in tree]


# ---------------------------------------------------------------------------
# manifolds and vector fields
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class ChartManifold:
    """A single-chart Riemannian manifold.

    ``metric`` is an ``n x n`` nested sequence of expressions in the
    coordinates ``coord_names``; ``domain_box`` gives an open interval per
    coordinate used for sampling.
    """

    coord_names: tuple[str, ...]
    metric: tuple[tuple[Expr, ...], ...]
    domain_box: tuple[tuple[float, float], ...]
    name: str = ""
    _cache: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        self.coord_names = tuple(self.coord_names)
        self.metric = tuple(tuple(row) for row in self.metric)
        self.domain_box = tuple((float(lo), float(hi)) for lo, hi in self.domain_box)
        n = len(self.coord_names)
        if len(set(self.coord_names)) != n:
            raise GeometryError(f"duplicate coordinate names {self.coord_names}")
        if len(self.metric) != n or any(len(row) != n for row in self.metric):
            raise GeometryError(f"metric must be {n}x{n}")
        if len(self.domain_box) != n:
            raise GeometryError(f"domain box needs {n} intervals")
        if any(not lo < hi for lo, hi in self.domain_box):
            raise GeometryError(f"empty domain interval in {self.domain_box}")

    @property
    def n(self) -> int:
        return len(self.coord_names)

    @classmethod
    def from_strings(cls, coords: Sequence[str], metric, domain, name: str = "") -> "ChartManifold":
        """Build from expression strings; ``metric`` is a full matrix or a diagonal list."""
        coords = tuple(coords)
        n = len(coords)
        if len(metric) == n and all(isinstance(row, str) for row in metric):
            rows = [["0"] * n for _ in range(n)]
            for k, entry in enumerate(metric):
                rows[k][k] = entry
            metric = rows
        parsed = tuple(tuple(el.parse(str(c), coords) for c in row) for row in metric)
        return cls(coords, parsed, tuple(tuple(b) for b in domain), name)

    def metric_jet(self, points: np.ndarray, order: int) -> list[np.ndarray]:
        return expr_jet(self.metric, self.n, points, order, self._cache.setdefault("metric", {}))

    def contains(self, point) -> bool:
        p = np.asarray(point, dtype=float)
        return bool(all(lo < x < hi for x, (lo, hi) in zip(p, self.domain_box)))


@dataclass(eq=False)
class VectorFieldSpec:
    """Contravariant vector field components in chart coordinates."""

    components: tuple[Expr, ...]
    _cache: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        self.components = tuple(self.components)

    @classmethod
    def from_strings(cls, components: Sequence[str], coords: Sequence[str]) -> "VectorFieldSpec":
        return cls(tuple(el.parse(str(c), coords) for c in components))

    @classmethod
    def zero(cls, n: int) -> "VectorFieldSpec":
        return cls((el.ZERO,) * n)

    @property
    def n(self) -> int:
        return len(self.components)

    def is_zero(self) -> bool:
        return all(isinstance(c, el.Const) and c.value == 0.0 for c in self.components)

    def jet(self, points: np.ndarray, order: int) -> list[np.ndarray]:
        return expr_jet(self.components, self.n, points, order, self._cache)


def _points(points, n: int) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[-1] != n:
        raise GeometryError(f"point dimension {pts.shape[-1]} does not match chart dimension {n}")
    return pts


def sample_points(m: ChartManifold, count: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform points in the domain box shrunk by 5% per side."""
    lo = np.array([b[0] for b in m.domain_box])
    hi = np.array([b[1] for b in m.domain_box])
    pad = DOMAIN_SHRINK * (hi - lo)
    return rng.uniform(lo + pad, hi - pad, size=(count, m.n))


def check_metric(m: ChartManifold, points) -> None:
    """Raise if the metric is not symmetric positive definite at ``points``."""
    g = m.metric_jet(_points(points, m.n), 0)[0]
    asym = np.abs(g - np.swapaxes(g, -1, -2))
    if np.any(asym > 1e-12 * (1.0 + np.abs(g))):
        raise GeometryError(f"metric of {m.name or 'manifold'} is not symmetric")
    eig = np.linalg.eigvalsh(g)
    if np.min(eig) <= 1e-10:
        raise GeometryError(f"metric of {m.name or 'manifold'} is not positive definite")


def _inverse(g: np.ndarray) -> np.ndarray:
    if np.max(np.linalg.cond(g)) > MAX_CONDITION:
        raise GeometryError("metric is singular (condition number above 1e12)")
    return np.linalg.inv(g)


def metric_at(m: ChartManifold, p) -> TensorValue:
    p = np.asarray(p, dtype=float)
    if not m.contains(p):
        raise GeometryError(f"point {p.tolist()} outside the domain box")
    check_metric(m, p)
    return TensorValue(m.metric_jet(p, 0)[0][0], ("d", "d"))


# ---------------------------------------------------------------------------
# connections
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConnectionCoeffs:
    point: np.ndarray
    gamma: np.ndarray
    kind: str


def _inverse_jet(gj: list[np.ndarray]) -> list[np.ndarray]:
    """Jet of g^{-1} from the jet of g via ∂(g⁻¹) = −g⁻¹ (∂g) g⁻¹."""
    g = gj[0]
    gi = _inverse(g)
    out = [gi]
    if len(gj) > 1:
        dg = gj[1]
        dgi = -np.einsum("...kl,...alm,...mj->...akj", gi, dg, gi)
        out.append(dgi)
    if len(gj) > 2:
        d2g = gj[2]
        t1 = np.einsum("...bkl,...alm,...mj->...bakj", dgi, dg, gi)
        t2 = np.einsum("...kl,...balm,...mj->...bakj", gi, d2g, gi)
        t3 = np.einsum("...kl,...alm,...bmj->...bakj", gi, dg, dgi)
        out.append(-(t1 + t2 + t3))
    return out


def _first_kind(dg: np.ndarray) -> np.ndarray:
    """Christoffel symbols of the first kind ``C_lij`` from ``dg[..., a, p, q]``."""
    return 0.5 * (
        np.einsum("...ijl->...lij", dg) + np.einsum("...jil->...lij", dg) - dg
    )


class ConnectionField:
    """An affine connection as a function of position."""

    kind = "affine"

    def __init__(self, manifold: ChartManifold):
        self.manifold = manifold

    def jet(self, points, order: int = 0) -> list[np.ndarray]:
        """``[Γ, ∂Γ, ∂²Γ]`` up to ``order``; ``∂Γ[..., a, k, i, j] = ∂_a Γ^k_ij``."""
        raise NotImplementedError


class LeviCivitaField(ConnectionField):
    kind = "levi-civita"

    def jet(self, points, order: int = 0) -> list[np.ndarray]:
        pts = _points(points, self.manifold.n)
        gj = self.manifold.metric_jet(pts, order + 1)
        gij = _inverse_jet(gj[: order + 1])
        cj = [_first_kind(gj[k + 1]) for k in range(order + 1)]
        out = [np.einsum("...kl,...lij->...kij", gij[0], cj[0])]
        if order >= 1:
            out.append(
                np.einsum("...akl,...lij->...akij", gij[1], cj[0])
                + np.einsum("...kl,...alij->...akij", gij[0], cj[1])
            )
        if order >= 2:
            out.append(
                np.einsum("...bakl,...lij->...bakij", gij[2], cj[0])
                + np.einsum("...akl,...blij->...bakij", gij[1], cj[1])
                + np.einsum("...bkl,...alij->...bakij", gij[1], cj[1])
                + np.einsum("...kl,...balij->...bakij", gij[0], cj[2])
            )
        # exact symmetry in the lower pair
        return [0.5 * (x + np.swapaxes(x, -1, -2)) for x in out]


class SSMCField(ConnectionField):
    """Semi-symmetric metric connection ``∇_X Y + π(Y)X − g(X,Y)P``.

    ``scale`` (one value per point, constant in the coordinates) multiplies
    ``P``; it realises the connection of a rescaled metric ``c·g`` with the
    same ``P``, which coincides with that of ``g`` and ``c·P``.
    """

    kind = "ssmc"

    def __init__(self, manifold: ChartManifold, P: VectorFieldSpec, scale=None):
        super().__init__(manifold)
        if P.n != manifold.n:
            raise GeometryError(f"vector field has {P.n} components, chart has {manifold.n}")
        self.P = P
        self.scale = scale
        self.levi_civita = LeviCivitaField(manifold)

    def _scaled_p_jet(self, pts, order):
        pj = self.P.jet(pts, order)
        if self.scale is None:
            return pj
        s = np.asarray(self.scale, dtype=float).reshape(-1)
        return [s.reshape((-1,) + (1,) * (x.ndim - 1)) * x for x in pj]

    def jet(self, points, order: int = 0) -> list[np.ndarray]:
        pts = _points(points, self.manifold.n)
        n = self.manifold.n
        lc = self.levi_civita.jet(pts, order)
        gj = self.manifold.metric_jet(pts, order)
        pj = self._scaled_p_jet(pts, order)
        eye = np.eye(n)
        # π_j = g_jl P^l, T^k_ij = g_ij P^k, both differentiated by the product rule
        pij = [np.einsum("...jl,...l->...j", gj[0], pj[0])]
        tj = [np.einsum("...ij,...k->...kij", gj[0], pj[0])]
        if order >= 1:
            pij.append(
                np.einsum("...ajl,...l->...aj", gj[1], pj[0])
                + np.einsum("...jl,...al->...aj", gj[0], pj[1])
            )
            tj.append(
                np.einsum("...aij,...k->...akij", gj[1], pj[0])
                + np.einsum("...ij,...ak->...akij", gj[0], pj[1])
            )
        if order >= 2:
            pij.append(
                np.einsum("...bajl,...l->...baj", gj[2], pj[0])
                + np.einsum("...ajl,...bl->...baj", gj[1], pj[1])
                + np.einsum("...bjl,...al->...baj", gj[1], pj[1])
                + np.einsum("...jl,...bal->...baj", gj[0], pj[2])
            )
            tj.append(
                np.einsum("...baij,...k->...bakij", gj[2], pj[0])
                + np.einsum("...aij,...bk->...bakij", gj[1], pj[1])
                + np.einsum("...bij,...ak->...bakij", gj[1], pj[1])
                + np.einsum("...ij,...bak->...bakij", gj[0], pj[2])
            )
        specs = ["ki,...j->...kij", "ki,...aj->...akij", "ki,...baj->...bakij"]
        out = [lc[k] + np.einsum(specs[k], eye, pij[k]) - tj[k] for k in range(order + 1)]
        return out

    def one_form_jet(self, points, order: int = 0) -> list[np.ndarray]:
        pts = _points(points, self.manifold.n)
        gj = self.manifold.metric_jet(pts, 0)
        pj = self._scaled_p_jet(pts, 0)
        return [np.einsum("...jl,...l->...j", gj[0], pj[0])]


def levi_civita(m: ChartManifold, p) -> ConnectionCoeffs:
    p = np.asarray(p, dtype=float)
    gamma = LeviCivitaField(m).jet(p, 0)[0][0]
    return ConnectionCoeffs(p, gamma, "levi-civita")


def ssmc(m: ChartManifold, P: VectorFieldSpec, p) -> ConnectionCoeffs:
    p = np.asarray(p, dtype=float)
    gamma = SSMCField(m, P).jet(p, 0)[0][0]
    return ConnectionCoeffs(p, gamma, "ssmc")


def torsion(c: ConnectionCoeffs) -> TensorValue:
    """``T^k_ij = Γ^k_ij − Γ^k_ji``."""
    g = np.asarray(c.gamma)
    return TensorValue(g - np.swapaxes(g, -1, -2), ("u", "d", "d"))


# ---------------------------------------------------------------------------
# curvature
# ---------------------------------------------------------------------------


def _riemann_from(gamma, dgamma):
    # R^l_ijk = ∂_iΓ^l_jk − ∂_jΓ^l_ik + Γ^l_im Γ^m_jk − Γ^l_jm Γ^m_ik
    d = np.einsum("...iljk->...lijk", dgamma)
    q = np.einsum("...lim,...mjk->...lijk", gamma, gamma)
    return d - np.swapaxes(d, -3, -2) + q - np.swapaxes(q, -3, -2)


def riemann_batch(field: ConnectionField, points) -> np.ndarray:
    gamma, dgamma = field.jet(points, 1)
    return _riemann_from(gamma, dgamma)


def riemann_jet(field: ConnectionField, points) -> tuple[np.ndarray, np.ndarray]:
    """Riemann tensor and its partial derivatives ``dR[..., a, l, i, j, k]``."""
    gamma, dgamma, ddgamma = field.jet(points, 2)
    R = _riemann_from(gamma, dgamma)
    d = np.einsum("...ailjk->...alijk", ddgamma)
    q = np.einsum("...alim,...mjk->...alijk", dgamma, gamma) + np.einsum(
        "...lim,...amjk->...alijk", gamma, dgamma
    )
    dR = d - np.swapaxes(d, -3, -2) + q - np.swapaxes(q, -3, -2)
    return R, dR


def riemann(field: ConnectionField, p) -> TensorValue:
    R = riemann_batch(field, np.asarray(p, dtype=float))[0]
    return TensorValue(R, ("u", "d", "d", "d"))


def ricci_batch(R: np.ndarray) -> np.ndarray:
    up, down = RICCI_SLOTS
    nlead = R.ndim - 4
    return np.trace(R, axis1=nlead + up, axis2=nlead + down)


def ricci(R: TensorValue) -> TensorValue:
    """Ricci tensor ``S_jk = R^i_{ijk}`` (not assumed symmetric)."""
    if R.rank != 4 or R.variance != ("u", "d", "d", "d"):
        raise TensorError(f"expected R^l_ijk, got rank {R.rank} {R.variance}")
    return contract(R, *RICCI_SLOTS)


def scalar_batch(S: np.ndarray, g: np.ndarray) -> np.ndarray:
    return np.einsum("...jk,...jk->...", _inverse(g), S)


def scalar(S: TensorValue, g: TensorValue) -> float:
    if S.rank != 2 or g.rank != 2:
        raise TensorError("scalar curvature needs rank-2 Ricci and metric")
    return float(scalar_batch(S.data, g.data))


def grad_hess_laplace_batch(m: ChartManifold, phi: Expr, points, order_cache: dict | None = None):
    """Gradient, Hessian and Laplacian of ``phi`` for the Levi-Civita connection."""
    pts = _points(points, m.n)
    _, dphi, d2phi = expr_jet([phi], m.n, pts, 2, order_cache)
    dphi, d2phi = dphi[..., 0], d2phi[..., 0]
    g = m.metric_jet(pts, 0)[0]
    gi = _inverse(g)
    gamma = LeviCivitaField(m).jet(pts, 0)[0]
    grad = np.einsum("...ij,...j->...i", gi, dphi)
    hess = d2phi - np.einsum("...kij,...k->...ij", gamma, dphi)
    lap = np.einsum("...ij,...ij->...", gi, hess)
    return grad, hess, lap


def grad_hess_laplace(m: ChartManifold, phi: Expr, p):
    grad, hess, lap = grad_hess_laplace_batch(m, phi, np.asarray(p, dtype=float))
    return grad[0], TensorValue(hess[0], ("d", "d")), float(lap[0])


def covariant_derivative_vector_batch(field: ConnectionField, P: VectorFieldSpec, points) -> np.ndarray:
    """``nabla[..., i, k] = (∇_{∂_i} P)^k = ∂_i P^k + Γ^k_ij P^j``."""
    pts = _points(points, field.manifold.n)
    p0, p1 = P.jet(pts, 1)
    gamma = field.jet(pts, 0)[0]
    return p1 + np.einsum("...kij,...j->...ik", gamma, p0)


def covariant_derivative_metric_batch(field: ConnectionField, points) -> np.ndarray:
    """``(∇_i g)_jk = ∂_i g_jk − Γ^m_ij g_mk − Γ^m_ik g_jm``."""
    pts = _points(points, field.manifold.n)
    g, dg = field.manifold.metric_jet(pts, 1)
    gamma = field.jet(pts, 0)[0]
    return (
        dg
        - np.einsum("...mij,...mk->...ijk", gamma, g)
        - np.einsum("...mik,...jm->...ijk", gamma, g)
    )


def covariant_derivative_ricci_batch(field: ConnectionField, points) -> tuple[np.ndarray, np.ndarray]:
    """Ricci tensor and ``(∇_i S)_jk = ∂_i S_jk − Γ^m_ij S_mk − Γ^m_ik S_jm``."""
    pts = _points(points, field.manifold.n)
    R, dR = riemann_jet(field, pts)
    S = ricci_batch(R)
    up, down = RICCI_SLOTS
    dS = np.trace(dR, axis1=pts.ndim + up, axis2=pts.ndim + down)
    gamma = field.jet(pts, 0)[0]
    nabla = (
        dS
        - np.einsum("...mij,...mk->...ijk", gamma, S)
        - np.einsum("...mik,...jm->...ijk", gamma, S)
    )
    return S, nabla


def covariant_derivative_ricci(field: ConnectionField, p) -> TensorValue:
    _, nabla = covariant_derivative_ricci_batch(field, np.asarray(p, dtype=float))
    return TensorValue(nabla[0], ("d", "d", "d"))


def curvature_relation_rhs_batch(m: ChartManifold, P: VectorFieldSpec, points) -> np.ndarray:
    """Right-hand side of the Levi-Civita/SSMC curvature relation, as ``R̃^l_ijk``.

    Built only from the Levi-Civita curvature, ``∇P``, ``π`` and ``g``.
    """
    pts = _points(points, m.n)
    lc = LeviCivitaField(m)
    R = riemann_batch(lc, pts)
    g = m.metric_jet(pts, 0)[0]
    p0 = P.jet(pts, 0)[0]
    pi = np.einsum("...jl,...l->...j", g, p0)
    pipi = np.einsum("...j,...j->...", pi, p0)
    nP = covariant_derivative_vector_batch(lc, P, pts)  # [i, l] = (∇_i P)^l
    n = m.n
    eye = np.eye(n)
    # g(Z, ∇_X P) Y − g(Z, ∇_Y P) X, with X=∂i, Y=∂j, Z=∂k
    gzn = np.einsum("...kl,...il->...ik", g, nP)  # g(∂k, ∇_i P)
    t1 = np.einsum("...ik,lj->...lijk", gzn, eye) - np.einsum("...jk,li->...lijk", gzn, eye)
    # g(X,Z) ∇_Y P − g(Y,Z) ∇_X P
    t2 = np.einsum("...ik,...jl->...lijk", g, nP) - np.einsum("...jk,...il->...lijk", g, nP)
    # π(P)(g(X,Z)Y − g(Y,Z)X)
    t3 = pipi[..., None, None, None, None] * (
        np.einsum("...ik,lj->...lijk", g, eye) - np.einsum("...jk,li->...lijk", g, eye)
    )
    # (g(Y,Z)π(X) − g(X,Z)π(Y)) P
    t4 = np.einsum("...jk,...i,...l->...lijk", g, pi, p0) - np.einsum("...ik,...j,...l->...lijk", g, pi, p0)
    # π(Z)(π(Y)X − π(X)Y)
    t5 = np.einsum("...k,...j,li->...lijk", pi, pi, eye) - np.einsum("...k,...i,lj->...lijk", pi, pi, eye)
    return R + t1 + t2 + t3 + t4 + t5
