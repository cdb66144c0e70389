"""Doubly warped products ``B_f ×_h F`` and their closed-form curvature identities.

A :class:`DwpSpec` is assembled into a product chart with coordinates
``(x¹..x^{n1}, y¹..y^{n2})`` and block metric ``f(y)² g_B ⊕ h(x)² g_F``.

Closed forms are evaluated on coordinate basis fields and returned as dense
blocks with the point axis first.  For a vector-valued identity such as
``R(X,V)Y`` the block is ``out[N, l, a, v, b]``: the ``∂_l`` component of
the product-chart vector for ``X=∂_a``, ``V=∂_v``, ``Y=∂_b`` (indices local
to each factor).  The matching oracle block is cut from the coordinate
computation on the assembled chart.

Factor quantities on the warping functions follow a *convention*:

``ambient``
    gradients, norms, Laplacians and ``∇ grad`` use the slice metrics
    ``f² g_B`` and ``h² g_F``; factor semi-symmetric connections are built
    from the slice metric; ``div P`` is the factor trace of ``∇P``.
``factor``
    the same quantities use the bare factor metrics ``g_B`` and ``g_F``.

Hessians, Riemann and Ricci tensors of the factors are unaffected by the
choice.  Factor scalar curvatures are always traces with ``g_B``/``g_F``.
The ambient convention is the one the formulas are written in (calibrated
against the oracle, see ``tests/test_conventions.py``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from . import exprlang as el
from . import geometry as geo
from .exprlang import Expr
from .geometry import ChartManifold, VectorFieldSpec

__all__ = [
    "DwpError",
    "DwpSpec",
    "assemble",
    "lift_vector_field",
    "FactorData",
    "Oracle",
    "ClosedForm",
    "CLOSED_FORMS",
    "CONVENTIONS",
    "DEFAULT_CONVENTION",
    "evaluate_closed_form",
    "lc_connection_closed_form",
    "lc_curvature_closed_form",
    "lc_ricci_closed_form",
    "lc_scalar_closed_form",
    "ssmc_connection_closed_form",
    "ssmc_curvature_closed_form",
    "ssmc_ricci_closed_form",
    "ssmc_scalar_closed_form",
    "mixed_ricci_coefficient_fit",
    "REDUCTIONS",
]

CONVENTIONS = ("ambient", "factor")
DEFAULT_CONVENTION = "ambient"


class DwpError(ValueError):
    pass


@dataclass(eq=False)
class DwpSpec:
    """Base, fiber, warping functions and an optional vector field ``P``.

    ``h`` is an expression in the base coordinates, ``f`` in the fiber
    coordinates.  ``P`` is given in the coordinates of the factor named by
    ``side`` (``"B"`` or ``"F"``); ``side="none"`` means ``P = 0``.
    """

    base: ChartManifold
    fiber: ChartManifold
    h: Expr
    f: Expr
    P: VectorFieldSpec | None = None
    side: str = "none"
    name: str = ""
    _cache: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        if self.side not in ("B", "F", "none"):
            raise DwpError(f"side must be 'B', 'F' or 'none', got {self.side!r}")
        if self.side == "none":
            self.P = None
        else:
            if self.P is None:
                raise DwpError(f"side {self.side!r} needs a vector field")
            factor = self.base if self.side == "B" else self.fiber
            if self.P.n != factor.n:
                raise DwpError(f"P has {self.P.n} components, factor {self.side} has dimension {factor.n}")
        overlap = set(self.base.coord_names) & set(self.fiber.coord_names)
        if overlap:
            raise DwpError(f"base and fiber share coordinate names {sorted(overlap)}")

    @property
    def n1(self) -> int:
        return self.base.n

    @property
    def n2(self) -> int:
        return self.fiber.n

    @property
    def n(self) -> int:
        return self.n1 + self.n2

    def with_P(self, P: VectorFieldSpec | None, side: str) -> "DwpSpec":
        return DwpSpec(self.base, self.fiber, self.h, self.f, P, side, self.name)

    def check_positive(self, points) -> None:
        pts = np.atleast_2d(points)
        hv = el.evaluate(self.h, pts[:, : self.n1])
        fv = el.evaluate(self.f, pts[:, self.n1 :])
        if np.any(hv <= 0) or np.any(fv <= 0):
            raise DwpError(f"warping functions of {self.name or 'spec'} must be positive")

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        return geo.sample_points(assemble(self), count, rng)


def _embed(e: Expr, offset: int, names: tuple[str, ...]) -> Expr:
    if offset == 0:
        return e
    k = len(names)
    return el.reindex(e, {i: i + offset for i in range(k)})


def assemble(spec: DwpSpec) -> ChartManifold:
    """Product chart with metric ``f² g_B ⊕ h² g_F``."""
    hit = spec._cache.get("assembled")
    if hit is not None:
        return hit
    n1, n = spec.n1, spec.n
    coords = spec.base.coord_names + spec.fiber.coord_names
    h = spec.h
    f = _embed(spec.f, n1, spec.fiber.coord_names)
    f2 = el.mul(f, f)
    h2 = el.mul(h, h)
    rows = [[el.ZERO] * n for _ in range(n)]
    for a in range(n1):
        for b in range(n1):
            rows[a][b] = el.mul(f2, spec.base.metric[a][b])
    for v in range(spec.n2):
        for w in range(spec.n2):
            rows[n1 + v][n1 + w] = el.mul(h2, _embed(spec.fiber.metric[v][w], n1, spec.fiber.coord_names))
    box = spec.base.domain_box + spec.fiber.domain_box
    m = ChartManifold(coords, rows, box, spec.name)
    spec._cache["assembled"] = m
    return m


def lift_vector_field(spec: DwpSpec, P: VectorFieldSpec | None = None, side: str | None = None) -> VectorFieldSpec:
    """Embed a factor vector field in the product chart (zero on the other block)."""
    P = spec.P if P is None else P
    side = spec.side if side is None else side
    n1, n = spec.n1, spec.n
    comps = [el.ZERO] * n
    if side == "B":
        comps[:n1] = P.components
    elif side == "F":
        comps[n1:] = [_embed(c, n1, spec.fiber.coord_names) for c in P.components]
    return VectorFieldSpec(tuple(comps))


# ---------------------------------------------------------------------------
# pointwise data
# ---------------------------------------------------------------------------


class Oracle:
    """Coordinate computations on the assembled chart (the ground truth)."""

    def __init__(self, spec: DwpSpec, points, P_side: str | None = None):
        self.spec = spec
        self.points = np.atleast_2d(np.asarray(points, dtype=float))
        self.manifold = assemble(spec)
        side = spec.side if P_side is None else P_side
        use = spec.P is not None and spec.side == side
        self.P = lift_vector_field(spec) if use else VectorFieldSpec.zero(spec.n)

    @cached_property
    def g(self):
        return self.manifold.metric_jet(self.points, 0)[0]

    @cached_property
    def lc(self):
        return geo.LeviCivitaField(self.manifold)

    @cached_property
    def ssmc_field(self):
        return geo.SSMCField(self.manifold, self.P)

    @cached_property
    def gamma(self):
        return self.lc.jet(self.points, 0)[0]

    @cached_property
    def gamma_t(self):
        return self.ssmc_field.jet(self.points, 0)[0]

    @cached_property
    def R(self):
        return geo.riemann_batch(self.lc, self.points)

    @cached_property
    def R_t(self):
        return geo.riemann_batch(self.ssmc_field, self.points)

    @cached_property
    def S(self):
        return geo.ricci_batch(self.R)

    @cached_property
    def S_t(self):
        return geo.ricci_batch(self.R_t)

    @cached_property
    def r(self):
        return geo.scalar_batch(self.S, self.g)

    @cached_property
    def r_t(self):
        return geo.scalar_batch(self.S_t, self.g)


def _block(a: np.ndarray, n1: int, n: int, *sides: str):
    sl = {"B": slice(0, n1), "F": slice(n1, n), ":": slice(None)}
    return a[(Ellipsis,) + tuple(sl[s] for s in sides)]


class FactorData:
    """Factor-side quantities of a DWP at a batch of product points.

    ``P_side`` selects which vector field is active: the spec's ``P`` if it
    lives on that side, otherwise zero.
    """

    def __init__(self, spec: DwpSpec, points, convention: str = DEFAULT_CONVENTION, P_side: str | None = None):
        if convention not in CONVENTIONS:
            raise DwpError(f"unknown convention {convention!r}")
        self.spec = spec
        self.convention = convention
        self.points = np.atleast_2d(np.asarray(points, dtype=float))
        self.n1, self.n2, self.n = spec.n1, spec.n2, spec.n
        self.x = self.points[:, : self.n1]
        self.y = self.points[:, self.n1 :]
        self.P_side = spec.side if P_side is None else P_side
        active = spec.P is not None and spec.side == self.P_side
        self.PB = spec.P if active and self.P_side == "B" else VectorFieldSpec.zero(self.n1)
        self.PF = spec.P if active and self.P_side == "F" else VectorFieldSpec.zero(self.n2)

    # -- warping functions ---------------------------------------------------

    @cached_property
    def _h_jet(self):
        return geo.expr_jet([self.spec.h], self.n1, self.x, 1, self.spec._cache.setdefault("h", {}))

    @cached_property
    def _f_jet(self):
        return geo.expr_jet([self.spec.f], self.n2, self.y, 1, self.spec._cache.setdefault("f", {}))

    @cached_property
    def h(self):
        return self._h_jet[0][:, 0]

    @cached_property
    def f(self):
        return self._f_jet[0][:, 0]

    @cached_property
    def dh(self):
        return self._h_jet[1][..., 0]

    @cached_property
    def df(self):
        return self._f_jet[1][..., 0]

    # -- metrics -------------------------------------------------------------

    @cached_property
    def gB(self):
        return self.spec.base.metric_jet(self.x, 0)[0]

    @cached_property
    def gF(self):
        return self.spec.fiber.metric_jet(self.y, 0)[0]

    @cached_property
    def gBi(self):
        return np.linalg.inv(self.gB)

    @cached_property
    def gFi(self):
        return np.linalg.inv(self.gF)

    @cached_property
    def g(self):
        g = np.zeros((len(self.points), self.n, self.n))
        g[:, : self.n1, : self.n1] = (self.f**2)[:, None, None] * self.gB
        g[:, self.n1 :, self.n1 :] = (self.h**2)[:, None, None] * self.gF
        return g

    @cached_property
    def gXY(self):
        return self.g[:, : self.n1, : self.n1]

    @cached_property
    def gVW(self):
        return self.g[:, self.n1 :, self.n1 :]

    @cached_property
    def sB(self):
        """Inverse scale of the base slice metric relative to ``g_B``."""
        return 1.0 / self.f**2 if self.convention == "ambient" else np.ones_like(self.f)

    @cached_property
    def sF(self):
        return 1.0 / self.h**2 if self.convention == "ambient" else np.ones_like(self.h)

    # -- Levi-Civita of the factors -----------------------------------------

    @cached_property
    def _lcB(self):
        return geo.LeviCivitaField(self.spec.base)

    @cached_property
    def _lcF(self):
        return geo.LeviCivitaField(self.spec.fiber)

    @cached_property
    def GammaB(self):
        return self._lcB.jet(self.x, 0)[0]

    @cached_property
    def GammaF(self):
        return self._lcF.jet(self.y, 0)[0]

    @cached_property
    def RB(self):
        return geo.riemann_batch(self._lcB, self.x)

    @cached_property
    def RF(self):
        return geo.riemann_batch(self._lcF, self.y)

    @cached_property
    def SB(self):
        return geo.ricci_batch(self.RB)

    @cached_property
    def SF(self):
        return geo.ricci_batch(self.RF)

    @cached_property
    def rB(self):
        return np.einsum("...ab,...ab->...", self.gBi, self.SB)

    @cached_property
    def rF(self):
        return np.einsum("...ab,...ab->...", self.gFi, self.SF)

    @cached_property
    def Hh(self):
        return geo.grad_hess_laplace_batch(self.spec.base, self.spec.h, self.x, self.spec._cache.setdefault("h", {}))[1]

    @cached_property
    def Hf(self):
        return geo.grad_hess_laplace_batch(self.spec.fiber, self.spec.f, self.y, self.spec._cache.setdefault("f", {}))[1]

    # -- gradients, norms, Laplacians (convention dependent) ----------------

    def _liftB(self, v):
        out = np.zeros(v.shape[:-1] + (self.n,))
        out[..., : self.n1] = v
        return out

    def _liftF(self, v):
        out = np.zeros(v.shape[:-1] + (self.n,))
        out[..., self.n1 :] = v
        return out

    @cached_property
    def grad_h(self):
        return self._liftB(self.sB[:, None] * np.einsum("...ab,...b->...a", self.gBi, self.dh))

    @cached_property
    def grad_f(self):
        return self._liftF(self.sF[:, None] * np.einsum("...ab,...b->...a", self.gFi, self.df))

    @cached_property
    def norm2_grad_h(self):
        return self.sB * np.einsum("...a,...ab,...b->...", self.dh, self.gBi, self.dh)

    @cached_property
    def norm2_grad_f(self):
        return self.sF * np.einsum("...a,...ab,...b->...", self.df, self.gFi, self.df)

    @cached_property
    def lap_h(self):
        return self.sB * np.einsum("...ab,...ab->...", self.gBi, self.Hh)

    @cached_property
    def lap_f(self):
        return self.sF * np.einsum("...ab,...ab->...", self.gFi, self.Hf)

    @cached_property
    def nabla_grad_h(self):
        """``[N, a, l]``: product components of ``^B∇_{∂a} grad h``."""
        return self._liftB(self.sB[:, None, None] * np.einsum("...cd,...ad->...ac", self.gBi, self.Hh))

    @cached_property
    def nabla_grad_f(self):
        return self._liftF(self.sF[:, None, None] * np.einsum("...cd,...ad->...ac", self.gFi, self.Hf))

    # -- the vector field ----------------------------------------------------

    @cached_property
    def _PB_jet(self):
        return self.PB.jet(self.x, 1)

    @cached_property
    def _PF_jet(self):
        return self.PF.jet(self.y, 1)

    @cached_property
    def P(self):
        return self._liftB(self._PB_jet[0]) + self._liftF(self._PF_jet[0])

    @cached_property
    def pi(self):
        return np.einsum("...jl,...l->...j", self.g, self.P)

    @cached_property
    def piB(self):
        return self.pi[:, : self.n1]

    @cached_property
    def piF(self):
        return self.pi[:, self.n1 :]

    @cached_property
    def piP(self):
        return np.einsum("...j,...j->...", self.pi, self.P)

    @cached_property
    def Ph(self):
        return np.einsum("...a,...a->...", self.dh, self._PB_jet[0])

    @cached_property
    def Pf(self):
        return np.einsum("...a,...a->...", self.df, self._PF_jet[0])

    @cached_property
    def nabla_PB(self):
        """``[N, a, l]``: product components of ``^B∇_{∂a} P`` (Levi-Civita of ``g_B``)."""
        p0, p1 = self._PB_jet
        return self._liftB(p1 + np.einsum("...kij,...j->...ik", self.GammaB, p0))

    @cached_property
    def nabla_PF(self):
        p0, p1 = self._PF_jet
        return self._liftF(p1 + np.einsum("...kij,...j->...ik", self.GammaF, p0))

    @cached_property
    def g_nabla_PB(self):
        """``[N, a, b] = g(∂_b, ^B∇_{∂a} P)``."""
        return np.einsum("...bl,...al->...ab", self.g[:, : self.n1, :], self.nabla_PB)

    @cached_property
    def g_nabla_PF(self):
        return np.einsum("...wl,...vl->...vw", self.g[:, self.n1 :, :], self.nabla_PF)

    @cached_property
    def divP(self):
        div_b = np.trace(self.nabla_PB[:, :, : self.n1], axis1=1, axis2=2)
        div_f = np.trace(self.nabla_PF[:, :, self.n1 :], axis1=1, axis2=2)
        return div_b + div_f

    @cached_property
    def divP_ambient(self):
        """Divergence on the product, ``div P + n2 Ph/h + n1 Pf/f``; the formulas use :attr:`divP`."""
        return self.divP + self.n2 * self.Ph / self.h + self.n1 * self.Pf / self.f

    # -- semi-symmetric connections of the factors --------------------------

    @cached_property
    def _ssmcB(self):
        scale = self.f**2 if self.convention == "ambient" else None
        return geo.SSMCField(self.spec.base, self.PB, scale)

    @cached_property
    def _ssmcF(self):
        scale = self.h**2 if self.convention == "ambient" else None
        return geo.SSMCField(self.spec.fiber, self.PF, scale)

    @cached_property
    def GammaB_t(self):
        return self._ssmcB.jet(self.x, 0)[0]

    @cached_property
    def GammaF_t(self):
        return self._ssmcF.jet(self.y, 0)[0]

    @cached_property
    def RB_t(self):
        return geo.riemann_batch(self._ssmcB, self.x)

    @cached_property
    def RF_t(self):
        return geo.riemann_batch(self._ssmcF, self.y)

    @cached_property
    def SB_t(self):
        return geo.ricci_batch(self.RB_t)

    @cached_property
    def SF_t(self):
        return geo.ricci_batch(self.RF_t)

    @cached_property
    def rB_t(self):
        return np.einsum("...ab,...ab->...", self.gBi, self.SB_t)

    @cached_property
    def rF_t(self):
        return np.einsum("...ab,...ab->...", self.gFi, self.SF_t)

    # -- helpers for closed forms ---------------------------------------------

    @cached_property
    def eye(self):
        return np.eye(self.n)

    @cached_property
    def eB(self):
        """``[l, a]``: product components of ``∂_a`` for base index ``a``."""
        return self.eye[:, : self.n1]

    @cached_property
    def eF(self):
        return self.eye[:, self.n1 :]


def _s(v, ndim):
    """Reshape a per-point array ``(N,)`` to broadcast over ``ndim`` trailing axes."""
    return v.reshape((-1,) + (1,) * ndim)


def _embedB(fd: FactorData, a: np.ndarray) -> np.ndarray:
    """Place a base-only vector block (component axis at position 1) into product components."""
    out = np.zeros(a.shape[:1] + (fd.n,) + a.shape[2:])
    out[:, : fd.n1] = a
    return out


def _embedF(fd: FactorData, a: np.ndarray) -> np.ndarray:
    out = np.zeros(a.shape[:1] + (fd.n,) + a.shape[2:])
    out[:, fd.n1 :] = a
    return out


# ---------------------------------------------------------------------------
# Levi-Civita closed forms
# ---------------------------------------------------------------------------


def _lc_tan_XY(fd):
    # −(grad f / f) g(X,Y)
    return -np.einsum("nl,nab->nlab", fd.grad_f / _s(fd.f, 1), fd.gXY)


def _lc_nor_XY(fd):
    return _embedB(fd, fd.GammaB)


def _lc_XV(fd):
    # [l, a, v] = (Xh/h) V + (Vf/f) X
    return np.einsum("na,lv->nlav", fd.dh / _s(fd.h, 1), fd.eF) + np.einsum(
        "nv,la->nlav", fd.df / _s(fd.f, 1), fd.eB
    )


def _lc_nor_VW(fd):
    return -np.einsum("nl,nvw->nlvw", fd.grad_h / _s(fd.h, 1), fd.gVW)


def _lc_tan_VW(fd):
    return _embedF(fd, fd.GammaF)


def _frame(fd, gblock, left, right):
    """``g(A,C) e_B − g(B,C) e_A`` for the block pattern ``R(A,B)C``: ``[N, l, i, j, k]``."""
    return np.einsum("nik,lj->nlijk", gblock, right) - np.einsum("njk,li->nlijk", gblock, left)


def _lc_RXYZ(fd):
    RB = _embedB(fd, fd.RB)
    return RB + _s(fd.norm2_grad_f / fd.f**2, 4) * _frame(fd, fd.gXY, fd.eB, fd.eB)


def _lc_RXVY(fd):
    # R(X,V)Y = H^h(X,Y)/h V + (1/f) g(X,Y) ∇_V grad f
    return np.einsum("nab,lv->nlavb", fd.Hh / _s(fd.h, 2), fd.eF) + np.einsum(
        "nab,nvl->nlavb", fd.gXY / _s(fd.f, 2), fd.nabla_grad_f
    )


def _lc_RXYV(fd):
    # (Vf/f)((Yh/h) X − (Xh/h) Y)
    vf = fd.df / _s(fd.f, 1)
    xh = fd.dh / _s(fd.h, 1)
    return np.einsum("nv,nb,la->nlabv", vf, xh, fd.eB) - np.einsum("nv,na,lb->nlabv", vf, xh, fd.eB)


def _lc_RXVW(fd):
    # −H^f(V,W)/f X − (1/h) g(V,W) ∇_X grad h
    return -np.einsum("nvw,la->nlavw", fd.Hf / _s(fd.f, 2), fd.eB) - np.einsum(
        "nvw,nal->nlavw", fd.gVW / _s(fd.h, 2), fd.nabla_grad_h
    )


def _lc_RVWX(fd):
    # (Xh/h)((Wf/f) V − (Vf/f) W)
    vf = fd.df / _s(fd.f, 1)
    xh = fd.dh / _s(fd.h, 1)
    return np.einsum("na,nw,lv->nlvwa", xh, vf, fd.eF) - np.einsum("na,nv,lw->nlvwa", xh, vf, fd.eF)


def _lc_RVWU(fd):
    RF = _embedF(fd, fd.RF)
    return RF + _s(fd.norm2_grad_h / fd.h**2, 4) * _frame(fd, fd.gVW, fd.eF, fd.eF)


# The four cases above omit cross terms in (Xh)(Vf); they cancel when both
# factors are one-dimensional and drop out of every Ricci trace.  The oracle
# matches the forms below.


def _lc_RXYZ_full(fd):
    gf = fd.grad_f / _s(fd.h * fd.f, 1)
    t = np.einsum("na,nbc,nl->nlabc", fd.dh, fd.gXY, gf) - np.einsum("nb,nac,nl->nlabc", fd.dh, fd.gXY, gf)
    return _lc_RXYZ(fd) + t


def _lc_RXVY_full(fd):
    hf = _s(fd.h * fd.f, 4)
    t = np.einsum("nb,nv,la->nlavb", fd.dh, fd.df, fd.eB) - np.einsum("nab,nv,nl->nlavb", fd.gXY, fd.df, fd.grad_h)
    return _lc_RXVY(fd) + t / hf


def _lc_RXVW_full(fd):
    hf = _s(fd.h * fd.f, 4)
    t = np.einsum("nvw,na,nl->nlavw", fd.gVW, fd.dh, fd.grad_f) - np.einsum("na,nw,lv->nlavw", fd.dh, fd.df, fd.eF)
    return _lc_RXVW(fd) + t / hf


def _lc_RVWU_full(fd):
    hf = _s(fd.h * fd.f, 4)
    t = np.einsum("nv,nwu,nl->nlvwu", fd.df, fd.gVW, fd.grad_h) - np.einsum("nw,nvu,nl->nlvwu", fd.df, fd.gVW, fd.grad_h)
    return _lc_RVWU(fd) + t / hf


_LC_FULL = {
    "lemma2.RXYZ": (_lc_RXYZ, _lc_RXYZ_full),
    "lemma2.RXVY": (_lc_RXVY, _lc_RXVY_full),
    "lemma2.RXVW": (_lc_RXVW, _lc_RXVW_full),
    "lemma2.RVWU": (_lc_RVWU, _lc_RVWU_full),
}


def _with_full_lc(fn, lc_key, perm=None, sign=1.0, flip=False):
    """Semi-symmetric form with the Levi-Civita part replaced by the full one.

    ``flip`` also reverses the sign of the displayed Levi-Civita part, for a
    form that substituted ``R(X,V)Y`` where ``R(V,X)Y`` was meant.
    """
    shown, full = _LC_FULL[lc_key]

    def corrected(fd):
        a, b = shown(fd), full(fd)
        if perm is not None:
            a, b = np.transpose(a, perm), np.transpose(b, perm)
        if flip:
            return fn(fd) - a + sign * b
        return fn(fd) + sign * (b - a)

    return corrected


def _lc_SXY(fd):
    n1, n2 = fd.n1, fd.n2
    coef = (n1 - 1) * fd.norm2_grad_f / fd.f**2 + fd.lap_f / fd.f
    return fd.SB - n2 * fd.Hh / _s(fd.h, 2) - _s(coef, 2) * fd.gXY


def _lc_SXV(fd):
    return (fd.n - 2) * np.einsum("na,nv->nav", fd.dh, fd.df) / _s(fd.h * fd.f, 2)


def _lc_SVW(fd):
    n1, n2 = fd.n1, fd.n2
    coef = (n2 - 1) * fd.norm2_grad_h / fd.h**2 + fd.lap_h / fd.h
    return fd.SF - n1 * fd.Hf / _s(fd.f, 2) - _s(coef, 2) * fd.gVW


def _lc_r(fd):
    n1, n2 = fd.n1, fd.n2
    return (
        fd.rB / fd.f**2
        + fd.rF / fd.h**2
        - 2 * n1 * fd.lap_f / fd.f
        - 2 * n2 * fd.lap_h / fd.h
        - n1 * (n1 - 1) * fd.norm2_grad_f / fd.f**2
        - n2 * (n2 - 1) * fd.norm2_grad_h / fd.h**2
    )


# ---------------------------------------------------------------------------
# semi-symmetric closed forms, P on the base
# ---------------------------------------------------------------------------


def _pb_eq1(fd):
    return -np.einsum("nl,nab->nlab", fd.grad_f / _s(fd.f, 1), fd.gXY)


def _pb_eq2(fd):
    return _embedB(fd, fd.GammaB_t)


def _pb_eq3(fd):
    return _lc_XV(fd)


def _pb_eq4(fd):
    # [l, v, a] = (Xh/h) V + (Vf/f) X + π(X) V
    base = np.swapaxes(_lc_XV(fd), 2, 3)
    return base + np.einsum("na,lv->nlva", fd.piB, fd.eF)


def _pb_eq5(fd):
    return -np.einsum("nl,nvw->nlvw", fd.grad_h / _s(fd.h, 1) + fd.P, fd.gVW)


def _pb_eq6(fd):
    return _embedF(fd, fd.GammaF_t)


def _pb_RXYZ(fd):
    RBt = _embedB(fd, fd.RB_t)
    # (g(Y,Z)π(X) − g(X,Z)π(Y)) grad f / f
    gf = fd.grad_f / _s(fd.f, 1)
    extra = np.einsum("nbc,na,nl->nlabc", fd.gXY, fd.piB, gf) - np.einsum("nac,nb,nl->nlabc", fd.gXY, fd.piB, gf)
    return RBt + _s(fd.norm2_grad_f / fd.f**2, 4) * _frame(fd, fd.gXY, fd.eB, fd.eB) + extra


def _pb_RVXY(fd):
    # [l, v, a, b]
    h, f = fd.h, fd.f
    coefV = fd.Hh / _s(h, 2) + np.einsum("na,nb->nab", fd.piB, fd.piB) - fd.g_nabla_PB
    t1 = np.einsum("nab,lv->nlvab", coefV, fd.eF)
    t2 = np.einsum("nv,nb,la->nlvab", fd.df / _s(f, 1), fd.piB, fd.eB)
    # −(Vf/f P + Ph/h V + π(P) V − (1/f) ∇_V grad f) g(X,Y)
    inner = (
        np.einsum("nv,nl->nlv", fd.df / _s(f, 1), fd.P)
        + np.einsum("n,lv->nlv", fd.Ph / h + fd.piP, fd.eF)
        - np.einsum("nvl->nlv", fd.nabla_grad_f / _s(f, 2))
    )
    t3 = -np.einsum("nlv,nab->nlvab", inner, fd.gXY)
    return t1 + t2 + t3


def _pb_RXYV(fd):
    vf = fd.df / _s(fd.f, 1)
    c = fd.dh / _s(fd.h, 1) + fd.piB  # Yh/h + π(Y)
    return np.einsum("nv,nb,la->nlabv", vf, c, fd.eB) - np.einsum("nv,na,lb->nlabv", vf, c, fd.eB)


def _pb_RVWX(fd):
    vf = fd.df / _s(fd.f, 1)
    c = fd.dh / _s(fd.h, 1) - fd.piB  # Xh/h − π(X)
    return np.einsum("nw,na,lv->nlvwa", vf, c, fd.eF) - np.einsum("nv,na,lw->nlvwa", vf, c, fd.eF)


def _pb_RXVW(fd):
    # [l, a, v, w]
    h, f = fd.h, fd.f
    t1 = -np.einsum("nvw,la->nlavw", fd.Hf / _s(f, 2), fd.eB)
    t2 = -np.einsum("nw,na,lv->nlavw", fd.df / _s(f, 1), fd.piB, fd.eF)
    inner = (
        np.einsum("nal->nla", fd.nabla_grad_h / _s(h, 2))
        + np.einsum("n,la->nla", fd.Ph / h + fd.piP, fd.eB)
        + np.einsum("nal->nla", fd.nabla_PB)
        - np.einsum("na,nl->nla", fd.piB, fd.P)
        - np.einsum("na,nl->nla", fd.piB, fd.grad_f / _s(f, 1))
    )
    t3 = -np.einsum("nla,nvw->nlavw", inner, fd.gVW)
    return t1 + t2 + t3


def _pb_RUVW(fd):
    RF = _embedF(fd, fd.RF)
    uf = fd.df / _s(fd.f, 1)
    # −(Uf/f) g(V,W) P + (Vf/f) g(U,W) P
    t = -np.einsum("nu,nvw,nl->nluvw", uf, fd.gVW, fd.P) + np.einsum("nv,nuw,nl->nluvw", uf, fd.gVW, fd.P)
    coef = fd.norm2_grad_h / fd.h**2 + 2 * fd.Ph / fd.h + fd.piP
    # −coef (g(V,W) U − g(U,W) V) = coef * (g(U,W) V − g(V,W) U)
    return RF + t + _s(coef, 4) * _frame(fd, fd.gVW, fd.eF, fd.eF)


def _pb_SXY(fd):
    n1, n2 = fd.n1, fd.n2
    coef = (n1 - 1) * fd.norm2_grad_f / fd.f**2 + n2 * fd.piP + n2 * fd.Ph / fd.h + fd.lap_f / fd.f
    return (
        fd.SB_t
        - n2 * fd.Hh / _s(fd.h, 2)
        + n2 * np.einsum("na,nb->nab", fd.piB, fd.piB)
        - n2 * fd.g_nabla_PB
        - _s(coef, 2) * fd.gXY
    )


def _pb_SXV(fd, coef_xh=None):
    c = fd.n1 - 1 if coef_xh is None else coef_xh
    return c * np.einsum("na,nv->nav", fd.dh, fd.df) / _s(fd.h * fd.f, 2) + (fd.n - 2) * np.einsum(
        "nv,na->nav", fd.df / _s(fd.f, 1), fd.piB
    )


def _pb_SVX(fd, coef_xh=None):
    c = fd.n2 - 1 if coef_xh is None else coef_xh
    return c * np.einsum("nv,na->nva", fd.df, fd.dh) / _s(fd.h * fd.f, 2) - (fd.n - 2) * np.einsum(
        "nv,na->nva", fd.df / _s(fd.f, 1), fd.piB
    )


def _pb_SVW(fd):
    n1, n2 = fd.n1, fd.n2
    c1 = fd.divP + fd.lap_h / fd.h + n1 * fd.Ph / fd.h + (n1 - 1) * fd.piP
    c2 = (n2 - 1) * (fd.norm2_grad_h / fd.h**2 + 2 * fd.Ph / fd.h + fd.piP)
    return fd.SF - n1 * fd.Hf / _s(fd.f, 2) - _s(c1 + c2, 2) * fd.gVW


def _pb_r(fd):
    n1, n2, n = fd.n1, fd.n2, fd.n
    return (
        fd.rB_t / fd.f**2
        + fd.rF / fd.h**2
        - n1 * (n1 - 1) * fd.norm2_grad_f / fd.f**2
        - n2 * (n2 - 1) * fd.norm2_grad_h / fd.h**2
        - 2 * n2 * (n - 1) * fd.Ph / fd.h
        - 2 * n1 * fd.lap_f / fd.f
        - 2 * n2 * fd.lap_h / fd.h
        - 2 * n2 * fd.divP
        - n2 * (n + n1 - 3) * fd.piP
    )


# ---------------------------------------------------------------------------
# semi-symmetric closed forms, P on the fiber
# ---------------------------------------------------------------------------


def _pf_eq7(fd):
    return -np.einsum("nl,nab->nlab", fd.grad_f / _s(fd.f, 1) + fd.P, fd.gXY)


def _pf_eq8(fd):
    return _embedB(fd, fd.GammaB_t)


def _pf_eq9(fd):
    return _lc_XV(fd) + np.einsum("nv,la->nlav", fd.piF, fd.eB)


def _pf_eq10(fd):
    return np.swapaxes(_lc_XV(fd), 2, 3)


def _pf_eq11(fd):
    return -np.einsum("nl,nvw->nlvw", fd.grad_h / _s(fd.h, 1), fd.gVW)


def _pf_eq12(fd):
    return _embedF(fd, fd.GammaF_t)


def _pf_RXYZ(fd):
    RB = _embedB(fd, fd.RB)
    xh = fd.dh / _s(fd.h, 1)
    vec = fd.P - fd.grad_f / _s(fd.f, 1)
    # (g(X,Z) Yh/h − g(Y,Z) Xh/h)(P − grad f/f)
    t = np.einsum("nac,nb,nl->nlabc", fd.gXY, xh, vec) - np.einsum("nbc,na,nl->nlabc", fd.gXY, xh, vec)
    coef = fd.norm2_grad_f / fd.f**2 + 2 * fd.Pf / fd.f + fd.piP
    return RB + t + _s(coef, 4) * _frame(fd, fd.gXY, fd.eB, fd.eB)


def _pf_RVXY(fd):
    # [l, v, a, b]
    h, f = fd.h, fd.f
    coefV = fd.Hh / _s(h, 2) + _s(fd.Pf / f + fd.piP, 2) * fd.gXY
    t1 = -np.einsum("nab,lv->nlvab", coefV, fd.eF)
    t2 = -np.einsum("nb,nv,la->nlvab", fd.dh / _s(h, 1), fd.piF, fd.eB)
    inner = (
        np.einsum("nv,nl->nlv", fd.piF, fd.grad_h / _s(h, 1))
        + np.einsum("nv,nl->nlv", fd.piF, fd.P)
        - np.einsum("nvl->nlv", fd.nabla_PF)
        - np.einsum("nvl->nlv", fd.nabla_grad_f / _s(f, 2))
    )
    t3 = np.einsum("nlv,nab->nlvab", inner, fd.gXY)
    return t1 + t2 + t3


def _pf_RXYV(fd):
    xh = fd.dh / _s(fd.h, 1)
    c = fd.df / _s(fd.f, 1) - fd.piF  # Vf/f − π(V)
    return np.einsum("nb,nv,la->nlabv", xh, c, fd.eB) - np.einsum("na,nv,lb->nlabv", xh, c, fd.eB)


def _pf_RVWX(fd):
    xh = fd.dh / _s(fd.h, 1)
    c = fd.df / _s(fd.f, 1) + fd.piF  # Wf/f + π(W)
    return np.einsum("na,nw,lv->nlvwa", xh, c, fd.eF) - np.einsum("na,nv,lw->nlvwa", xh, c, fd.eF)


def _pf_RXVW(fd):
    # [l, a, v, w]
    h, f = fd.h, fd.f
    inner = (
        np.einsum("nal->nla", fd.nabla_grad_h / _s(h, 2))
        + np.einsum("n,la->nla", fd.Pf / f + fd.piP, fd.eB)
        + np.einsum("na,nl->nla", fd.dh / _s(h, 1), fd.P)
    )
    t1 = -np.einsum("nla,nvw->nlavw", inner, fd.gVW)
    coefX = fd.Hf / _s(f, 2) - np.einsum("nv,nw->nvw", fd.piF, fd.piF) + fd.g_nabla_PF
    t2 = -np.einsum("nvw,la->nlavw", coefX, fd.eB)
    t3 = np.einsum("na,nw,lv->nlavw", fd.dh / _s(h, 1), fd.piF, fd.eF)
    return t1 + t2 + t3


def _pf_RUVW(fd):
    RFt = _embedF(fd, fd.RF_t)
    gh = fd.grad_h / _s(fd.h, 1)
    # −‖grad h‖²/h² (g(V,W)U − g(U,W)V) + (π(U)g(V,W) − g(U,W)π(V)) grad h / h
    t = np.einsum("nu,nvw,nl->nluvw", fd.piF, fd.gVW, gh) - np.einsum("nuw,nv,nl->nluvw", fd.gVW, fd.piF, gh)
    return RFt + _s(fd.norm2_grad_h / fd.h**2, 4) * _frame(fd, fd.gVW, fd.eF, fd.eF) + t


def _pf_SXY(fd):
    n1, n2, n = fd.n1, fd.n2, fd.n
    c1 = (n1 - 1) * (fd.norm2_grad_f / fd.f**2 + 2 * fd.Pf / fd.f)
    c2 = fd.lap_f / fd.f + (n - 2) * fd.piP + n2 * fd.Pf / fd.f + fd.divP
    return fd.SB - n2 * fd.Hh / _s(fd.h, 2) - _s(c1 + c2, 2) * fd.gXY


def _pf_SXV(fd, coef_vf=None):
    c = fd.n1 - 1 if coef_vf is None else coef_vf
    return c * np.einsum("na,nv->nav", fd.dh, fd.df) / _s(fd.h * fd.f, 2) - (fd.n - 2) * np.einsum(
        "na,nv->nav", fd.dh / _s(fd.h, 1), fd.piF
    )


def _pf_SVW(fd):
    n1, n2 = fd.n1, fd.n2
    c = fd.lap_h / fd.h + n1 * fd.Pf / fd.f + (n2 - 1) * fd.norm2_grad_h / fd.h**2 + n1 * fd.piP
    return (
        fd.SF_t
        - n1 * fd.g_nabla_PF
        - n1 * fd.Hf / _s(fd.f, 2)
        + n1 * np.einsum("nv,nw->nvw", fd.piF, fd.piF)
        - _s(c, 2) * fd.gVW
    )


def _pf_r(fd):
    n1, n2, n = fd.n1, fd.n2, fd.n
    return (
        fd.rB / fd.f**2
        + fd.rF_t / fd.h**2
        - n1 * (n1 - 1) * fd.norm2_grad_f / fd.f**2
        - n2 * (n2 - 1) * fd.norm2_grad_h / fd.h**2
        - 2 * n1 * (n - 1) * fd.Pf / fd.f
        - 2 * n1 * fd.lap_f / fd.f
        - 2 * n2 * fd.lap_h / fd.h
        - 2 * n1 * fd.divP
        - n1 * (n + n2 - 3) * fd.piP
    )


# ---------------------------------------------------------------------------
# registry of closed forms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClosedForm:
    """One closed-form identity and the oracle block it is compared with.

    ``slots`` names the factor of each argument (``"B"``/``"F"``); ``oracle``
    is ``(quantity, component_block, *arg_blocks)`` where ``quantity`` is an
    :class:`Oracle` attribute.  ``also`` lists extra argument orders that the
    same closed form must match (``∇_X V = ∇_V X``).
    """

    key: str
    case: str  # "lc", "PB" or "PF"
    formula: str
    slots: tuple[str, ...]
    fn: Callable
    oracle: tuple[str, ...]
    status: str = "verified"
    also: tuple[tuple[int, ...], ...] = ()
    corrected: Callable | None = None
    correction: str = ""
    output: str = "vector"  # "vector", "covector" (rank-2 form) or "scalar"


def _cf(key, case, formula, slots, fn, oracle, **kw):
    return ClosedForm(key, case, formula, tuple(slots), fn, tuple(oracle), **kw)


CLOSED_FORMS: dict[str, ClosedForm] = {
    cf.key: cf
    for cf in [
        # Levi-Civita connection
        _cf("lemma1.tanXY", "lc", "tan ∇_X Y = −(grad f / f) g(X,Y)", "BB", _lc_tan_XY, ("gamma", "F", "B", "B")),
        _cf("lemma1.norXY", "lc", "nor ∇_X Y = lift of ^B∇_X Y", "BB", _lc_nor_XY, ("gamma", "B", "B", "B")),
        _cf(
            "lemma1.XV",
            "lc",
            "∇_X V = ∇_V X = (Xh/h) V + (Vf/f) X",
            "BF",
            _lc_XV,
            ("gamma", ":", "B", "F"),
            also=((1, 0),),
        ),
        _cf("lemma1.norVW", "lc", "nor ∇_V W = −(grad h / h) g(V,W)", "FF", _lc_nor_VW, ("gamma", "B", "F", "F")),
        _cf("lemma1.tanVW", "lc", "tan ∇_V W = lift of ^F∇_V W", "FF", _lc_tan_VW, ("gamma", "F", "F", "F")),
        # Levi-Civita curvature
        _cf(
            "lemma2.RXYZ",
            "lc",
            "R(X,Y)Z = ^BR(X,Y)Z + ‖grad f‖²/f² (g(X,Z)Y − g(Y,Z)X)",
            "BBB",
            _lc_RXYZ,
            ("R", ":", "B", "B", "B"),
            status="errata-candidate",
            corrected=_lc_RXYZ_full,
            correction="+ ((Xh) g(Y,Z) − (Yh) g(X,Z)) grad f / (hf)",
        ),
        _cf(
            "lemma2.RXVY",
            "lc",
            "R(X,V)Y = H^h_B(X,Y)/h V + (1/f) g(X,Y) ^F∇_V grad f",
            "BFB",
            _lc_RXVY,
            ("R", ":", "B", "F", "B"),
            status="errata-candidate",
            corrected=_lc_RXVY_full,
            correction="+ (Yh)(Vf)/(hf) X − g(X,Y)(Vf) grad h / (hf)",
        ),
        _cf(
            "lemma2.RXYV",
            "lc",
            "R(X,Y)V = (Vf/f)((Yh/h) X − (Xh/h) Y)",
            "BBF",
            _lc_RXYV,
            ("R", ":", "B", "B", "F"),
        ),
        _cf(
            "lemma2.RXVW",
            "lc",
            "R(X,V)W = −H^f_F(V,W)/f X − (1/h) g(V,W) ^B∇_X grad h",
            "BFF",
            _lc_RXVW,
            ("R", ":", "B", "F", "F"),
            status="errata-candidate",
            corrected=_lc_RXVW_full,
            correction="− (Xh)(Wf)/(hf) V + g(V,W)(Xh) grad f / (hf)",
        ),
        _cf(
            "lemma2.RVWX",
            "lc",
            "R(V,W)X = (Xh/h)((Wf/f) V − (Vf/f) W)",
            "FFB",
            _lc_RVWX,
            ("R", ":", "F", "F", "B"),
        ),
        _cf(
            "lemma2.RVWU",
            "lc",
            "R(V,W)U = ^FR(V,W)U + ‖grad h‖²/h² (g(V,U)W − g(W,U)V)",
            "FFF",
            _lc_RVWU,
            ("R", ":", "F", "F", "F"),
            status="errata-candidate",
            corrected=_lc_RVWU_full,
            correction="+ ((Vf) g(W,U) − (Wf) g(V,U)) grad h / (hf)",
        ),
        # Levi-Civita Ricci and scalar
        _cf(
            "lemma3.SXY",
            "lc",
            "S(X,Y) = ^BS − (n2/h) H^h_B − g(X,Y)((n1−1)‖grad f‖²/f² + Δ_F f / f)",
            "BB",
            _lc_SXY,
            ("S", "B", "B"),
            output="covector",
        ),
        _cf(
            "lemma3.SXV",
            "lc",
            "S(X,V) = (n−2)(Xh)(Vf)/(hf)",
            "BF",
            _lc_SXV,
            ("S", "B", "F"),
            output="covector",
        ),
        _cf(
            "lemma3.SVW",
            "lc",
            "S(V,W) = ^FS − (n1/f) H^f_F − g(V,W)((n2−1)‖grad h‖²/h² + Δ_B h / h)",
            "FF",
            _lc_SVW,
            ("S", "F", "F"),
            output="covector",
        ),
        _cf(
            "lemma4.r",
            "lc",
            "r = ^Br/f² + ^Fr/h² − 2n1 Δf/f − 2n2 Δh/h − n1(n1−1)‖grad f‖²/f² − n2(n2−1)‖grad h‖²/h²",
            "",
            _lc_r,
            ("r",),
            output="scalar",
        ),
        # semi-symmetric connection, P on B
        _cf("prop-ssmc-conn-PB.eq1", "PB", "tan ∇̃_X Y = −(1/f) g(X,Y) grad f", "BB", _pb_eq1, ("gamma_t", "F", "B", "B")),
        _cf("prop-ssmc-conn-PB.eq2", "PB", "nor ∇̃_X Y = lift of ^B∇̃_X Y", "BB", _pb_eq2, ("gamma_t", "B", "B", "B")),
        _cf("prop-ssmc-conn-PB.eq3", "PB", "∇̃_X V = (Xh/h) V + (Vf/f) X", "BF", _pb_eq3, ("gamma_t", ":", "B", "F")),
        _cf(
            "prop-ssmc-conn-PB.eq4",
            "PB",
            "∇̃_V X = (Xh/h) V + (Vf/f) X + π(X) V",
            "FB",
            _pb_eq4,
            ("gamma_t", ":", "F", "B"),
        ),
        _cf(
            "prop-ssmc-conn-PB.eq5",
            "PB",
            "nor ∇̃_V W = −(grad h / h + P) g(V,W)",
            "FF",
            _pb_eq5,
            ("gamma_t", "B", "F", "F"),
        ),
        _cf("prop-ssmc-conn-PB.eq6", "PB", "tan ∇̃_V W = lift of ^F∇̃_V W", "FF", _pb_eq6, ("gamma_t", "F", "F", "F")),
        # semi-symmetric connection, P on F
        _cf(
            "prop-ssmc-conn-PF.eq7",
            "PF",
            "tan ∇̃_X Y = −(grad f / f + P) g(X,Y)",
            "BB",
            _pf_eq7,
            ("gamma_t", "F", "B", "B"),
        ),
        _cf("prop-ssmc-conn-PF.eq8", "PF", "nor ∇̃_X Y = lift of ^B∇̃_X Y", "BB", _pf_eq8, ("gamma_t", "B", "B", "B")),
        _cf(
            "prop-ssmc-conn-PF.eq9",
            "PF",
            "∇̃_X V = (Xh/h) V + (Vf/f) X + π(V) X",
            "BF",
            _pf_eq9,
            ("gamma_t", ":", "B", "F"),
        ),
        _cf("prop-ssmc-conn-PF.eq10", "PF", "∇̃_V X = (Xh/h) V + (Vf/f) X", "FB", _pf_eq10, ("gamma_t", ":", "F", "B")),
        _cf(
            "prop-ssmc-conn-PF.eq11",
            "PF",
            "nor ∇̃_V W = −(grad h / h) g(V,W)",
            "FF",
            _pf_eq11,
            ("gamma_t", "B", "F", "F"),
        ),
        _cf("prop-ssmc-conn-PF.eq12", "PF", "tan ∇̃_V W = lift of ^F∇̃_V W", "FF", _pf_eq12, ("gamma_t", "F", "F", "F")),
        # semi-symmetric curvature, P on B
        _cf(
            "prop-ssmc-curv-PB.RXYZ",
            "PB",
            "R̃(X,Y)Z = ^BR̃(X,Y)Z + ‖grad f‖²/f² (g(X,Z)Y − g(Y,Z)X) + (g(Y,Z)π(X) − g(X,Z)π(Y)) grad f / f",
            "BBB",
            _pb_RXYZ,
            ("R_t", ":", "B", "B", "B"),
            status="errata-candidate",
            corrected=_with_full_lc(_pb_RXYZ, "lemma2.RXYZ"),
            correction="Levi-Civita part as in the full R(X,Y)Z",
        ),
        _cf(
            "prop-ssmc-curv-PB.RVXY",
            "PB",
            "R̃(V,X)Y = (H^h_B(X,Y)/h + π(X)π(Y) − g(Y,^B∇_X P)) V + (Vf/f) π(Y) X"
            " − ((Vf/f) P + (Ph/h) V + π(P) V − (1/f) ^F∇_V grad f) g(X,Y)",
            "FBB",
            _pb_RVXY,
            ("R_t", ":", "F", "B", "B"),
            status="errata-candidate",
            corrected=_with_full_lc(_pb_RVXY, "lemma2.RXVY", (0, 1, 3, 2, 4), -1.0, flip=True),
            correction="Levi-Civita part is −R(X,V)Y with the full R(X,V)Y",
        ),
        _cf(
            "prop-ssmc-curv-PB.RXYV",
            "PB",
            "R̃(X,Y)V = ((Vf)(Yh)/(hf) + (Vf/f) π(Y)) X − ((Vf)(Xh)/(hf) + (Vf/f) π(X)) Y",
            "BBF",
            _pb_RXYV,
            ("R_t", ":", "B", "B", "F"),
        ),
        _cf(
            "prop-ssmc-curv-PB.RVWX",
            "PB",
            "R̃(V,W)X = ((Wf)(Xh)/(hf) − (Wf/f) π(X)) V − ((Vf)(Xh)/(hf) − (Vf/f) π(X)) W",
            "FFB",
            _pb_RVWX,
            ("R_t", ":", "F", "F", "B"),
        ),
        _cf(
            "prop-ssmc-curv-PB.RXVW",
            "PB",
            "R̃(X,V)W = −H^f_F(V,W)/f X − (Wf/f) π(X) V − g(V,W)(^B∇_X grad h / h + (Ph/h) X"
            " + ^B∇_X P + π(P) X − π(X) P − π(X) grad f / f)",
            "BFF",
            _pb_RXVW,
            ("R_t", ":", "B", "F", "F"),
            status="errata-candidate",
            corrected=_with_full_lc(_pb_RXVW, "lemma2.RXVW"),
            correction="Levi-Civita part as in the full R(X,V)W",
        ),
        _cf(
            "prop-ssmc-curv-PB.RUVW",
            "PB",
            "R̃(U,V)W = ^FR(U,V)W − (Uf/f) g(V,W) P + (Vf/f) g(U,W) P"
            " − (‖grad h‖²/h² + 2Ph/h + π(P))(g(V,W)U − g(U,W)V)",
            "FFF",
            _pb_RUVW,
            ("R_t", ":", "F", "F", "F"),
            status="errata-candidate",
            corrected=_with_full_lc(_pb_RUVW, "lemma2.RVWU"),
            correction="Levi-Civita part as in the full R(V,W)U",
        ),
        # semi-symmetric curvature, P on F
        _cf(
            "prop-ssmc-curv-PF.RXYZ",
            "PF",
            "R̃(X,Y)Z = ^BR(X,Y)Z + (g(X,Z) Yh/h − g(Y,Z) Xh/h)(P − grad f / f)"
            " + (‖grad f‖²/f² + 2Pf/f + π(P))(g(X,Z)Y − g(Y,Z)X)",
            "BBB",
            _pf_RXYZ,
            ("R_t", ":", "B", "B", "B"),
        ),
        _cf(
            "prop-ssmc-curv-PF.RVXY",
            "PF",
            "R̃(V,X)Y = −(H^h_B(X,Y)/h + (Pf/f) g(X,Y) + π(P) g(X,Y)) V − (Yh/h) π(V) X"
            " + g(X,Y)(π(V) grad h / h + π(V) P − ^F∇_V P − (1/f) ^F∇_V grad f)",
            "FBB",
            _pf_RVXY,
            ("R_t", ":", "F", "B", "B"),
            status="errata-candidate",
            corrected=_with_full_lc(_pf_RVXY, "lemma2.RXVY", (0, 1, 3, 2, 4), -1.0),
            correction="Levi-Civita part is −R(X,V)Y with the full R(X,V)Y",
        ),
        _cf(
            "prop-ssmc-curv-PF.RXYV",
            "PF",
            "R̃(X,Y)V = ((Vf)(Yh)/(hf) − (Yh/h) π(V)) X − ((Vf)(Xh)/(hf) − (Xh/h) π(V)) Y",
            "BBF",
            _pf_RXYV,
            ("R_t", ":", "B", "B", "F"),
        ),
        _cf(
            "prop-ssmc-curv-PF.RVWX",
            "PF",
            "R̃(V,W)X = ((Wf)(Xh)/(hf) + (Xh/h) π(W)) V − ((Vf)(Xh)/(hf) + (Xh/h) π(V)) W",
            "FFB",
            _pf_RVWX,
            ("R_t", ":", "F", "F", "B"),
        ),
        _cf(
            "prop-ssmc-curv-PF.RXVW",
            "PF",
            "R̃(X,V)W = −g(V,W)(^B∇_X grad h / h + (Pf/f) X + π(P) X + (Xh/h) P)"
            " − (H^f_F(V,W)/f − π(V)π(W) + g(W,^F∇_V P)) X + (Xh/h) π(W) V",
            "BFF",
            _pf_RXVW,
            ("R_t", ":", "B", "F", "F"),
            status="errata-candidate",
            corrected=_with_full_lc(_pf_RXVW, "lemma2.RXVW"),
            correction="Levi-Civita part as in the full R(X,V)W",
        ),
        _cf(
            "prop-ssmc-curv-PF.RUVW",
            "PF",
            "R̃(U,V)W = ^FR̃(U,V)W − ‖grad h‖²/h² (g(V,W)U − g(U,W)V) + (π(U) g(V,W) − g(U,W) π(V)) grad h / h",
            "FFF",
            _pf_RUVW,
            ("R_t", ":", "F", "F", "F"),
            status="errata-candidate",
            corrected=_with_full_lc(_pf_RUVW, "lemma2.RVWU"),
            correction="Levi-Civita part as in the full R(V,W)U",
        ),
        # Ricci, P on B
        _cf(
            "cor-ricci-PB.SXY",
            "PB",
            "S̃(X,Y) = ^BS̃ − (n2/h) H^h_B + n2 π(X)π(Y) − n2 g(Y,^B∇_X P)"
            " − ((n1−1)‖grad f‖²/f² + n2 π(P) + n2 Ph/h + Δf/f) g(X,Y)",
            "BB",
            _pb_SXY,
            ("S_t", "B", "B"),
            output="covector",
        ),
        _cf(
            "cor-ricci-PB.SXV",
            "PB",
            "S̃(X,V) = (n1−1)(Vf)(Xh)/(hf) + (n−2)(Vf/f) π(X)",
            "BF",
            _pb_SXV,
            ("S_t", "B", "F"),
            status="errata-candidate",
            corrected=lambda fd: _pb_SXV(fd, fd.n - 2),
            correction="warping coefficient (n1−1) → (n−2)",
            output="covector",
        ),
        _cf(
            "cor-ricci-PB.SVX",
            "PB",
            "S̃(V,X) = (n2−1)(Vf)(Xh)/(hf) − (n−2)(Vf/f) π(X)",
            "FB",
            _pb_SVX,
            ("S_t", "F", "B"),
            status="errata-candidate",
            corrected=lambda fd: _pb_SVX(fd, fd.n - 2),
            correction="warping coefficient (n2−1) → (n−2)",
            output="covector",
        ),
        _cf(
            "cor-ricci-PB.SVW",
            "PB",
            "S̃(V,W) = ^FS − (n1/f) H^f_F − (div P + Δh/h + n1 Ph/h + (n1−1)π(P)) g(V,W)"
            " − (n2−1)(‖grad h‖²/h² + 2Ph/h + π(P)) g(V,W)",
            "FF",
            _pb_SVW,
            ("S_t", "F", "F"),
            output="covector",
        ),
        # Ricci, P on F
        _cf(
            "cor-ricci-PF.SXY",
            "PF",
            "S̃(X,Y) = ^BS − n2 H^h_B/h − (n1−1)(‖grad f‖²/f² + 2Pf/f) g(X,Y)"
            " − (Δf/f + (n−2)π(P) + n2 Pf/f + div P) g(X,Y)",
            "BB",
            _pf_SXY,
            ("S_t", "B", "B"),
            output="covector",
        ),
        _cf(
            "cor-ricci-PF.SXV",
            "PF",
            "S̃(X,V) = (n1−1)(Vf)(Xh)/(hf) − (n−2)(Xh/h) π(V)",
            "BF",
            _pf_SXV,
            ("S_t", "B", "F"),
            status="errata-candidate",
            corrected=lambda fd: _pf_SXV(fd, fd.n - 2),
            correction="warping coefficient (n1−1) → (n−2)",
            output="covector",
        ),
        _cf(
            "cor-ricci-PF.SVW",
            "PF",
            "S̃(V,W) = ^FS̃ − n1 g(W,^F∇_V P) − (n1/f) H^f_F + n1 π(V)π(W)"
            " − (Δh/h + n1 Pf/f + (n2−1)‖grad h‖²/h² + n1 π(P)) g(V,W)",
            "FF",
            _pf_SVW,
            ("S_t", "F", "F"),
            output="covector",
        ),
        # scalar curvature
        _cf(
            "cor-scalar-PB.r",
            "PB",
            "r̃ = ^Br̃/f² + ^Fr/h² − n1(n1−1)‖grad f‖²/f² − n2(n2−1)‖grad h‖²/h² − 2n2(n−1)Ph/h"
            " − 2n1 Δf/f − 2n2 Δh/h − 2n2 div P − n2(n+n1−3)π(P)",
            "",
            _pb_r,
            ("r_t",),
            output="scalar",
        ),
        _cf(
            "cor-scalar-PF.r",
            "PF",
            "r̃ = ^Br/f² + ^Fr̃/h² − n1(n1−1)‖grad f‖²/f² − n2(n2−1)‖grad h‖²/h² − 2n1(n−1)Pf/f"
            " − 2n1 Δf/f − 2n2 Δh/h − 2n1 div P − n1(n+n2−3)π(P)",
            "",
            _pf_r,
            ("r_t",),
            output="scalar",
        ),
    ]
}

# SSMC identity -> (Levi-Civita identity, axis permutation of the LC block, sign)
# used to check that every SSMC closed form collapses onto Levi-Civita at P = 0
REDUCTIONS: dict[str, tuple[str, tuple[int, ...] | None, float]] = {
    "prop-ssmc-conn-PB.eq1": ("lemma1.tanXY", None, 1.0),
    "prop-ssmc-conn-PB.eq2": ("lemma1.norXY", None, 1.0),
    "prop-ssmc-conn-PB.eq3": ("lemma1.XV", None, 1.0),
    "prop-ssmc-conn-PB.eq4": ("lemma1.XV", (0, 1, 3, 2), 1.0),
    "prop-ssmc-conn-PB.eq5": ("lemma1.norVW", None, 1.0),
    "prop-ssmc-conn-PB.eq6": ("lemma1.tanVW", None, 1.0),
    "prop-ssmc-conn-PF.eq7": ("lemma1.tanXY", None, 1.0),
    "prop-ssmc-conn-PF.eq8": ("lemma1.norXY", None, 1.0),
    "prop-ssmc-conn-PF.eq9": ("lemma1.XV", None, 1.0),
    "prop-ssmc-conn-PF.eq10": ("lemma1.XV", (0, 1, 3, 2), 1.0),
    "prop-ssmc-conn-PF.eq11": ("lemma1.norVW", None, 1.0),
    "prop-ssmc-conn-PF.eq12": ("lemma1.tanVW", None, 1.0),
    "prop-ssmc-curv-PB.RXYZ": ("lemma2.RXYZ", None, 1.0),
    "prop-ssmc-curv-PB.RVXY": ("lemma2.RXVY", (0, 1, 3, 2, 4), -1.0),
    "prop-ssmc-curv-PB.RXYV": ("lemma2.RXYV", None, 1.0),
    "prop-ssmc-curv-PB.RVWX": ("lemma2.RVWX", None, 1.0),
    "prop-ssmc-curv-PB.RXVW": ("lemma2.RXVW", None, 1.0),
    "prop-ssmc-curv-PB.RUVW": ("lemma2.RVWU", None, 1.0),
    "prop-ssmc-curv-PF.RXYZ": ("lemma2.RXYZ", None, 1.0),
    "prop-ssmc-curv-PF.RVXY": ("lemma2.RXVY", (0, 1, 3, 2, 4), -1.0),
    "prop-ssmc-curv-PF.RXYV": ("lemma2.RXYV", None, 1.0),
    "prop-ssmc-curv-PF.RVWX": ("lemma2.RVWX", None, 1.0),
    "prop-ssmc-curv-PF.RXVW": ("lemma2.RXVW", None, 1.0),
    "prop-ssmc-curv-PF.RUVW": ("lemma2.RVWU", None, 1.0),
    "cor-ricci-PB.SXY": ("lemma3.SXY", None, 1.0),
    "cor-ricci-PB.SXV": ("lemma3.SXV", None, 1.0),
    "cor-ricci-PB.SVX": ("lemma3.SXV", (0, 2, 1), 1.0),
    "cor-ricci-PB.SVW": ("lemma3.SVW", None, 1.0),
    "cor-ricci-PF.SXY": ("lemma3.SXY", None, 1.0),
    "cor-ricci-PF.SXV": ("lemma3.SXV", None, 1.0),
    "cor-ricci-PF.SVW": ("lemma3.SVW", None, 1.0),
    "cor-scalar-PB.r": ("lemma4.r", None, 1.0),
    "cor-scalar-PF.r": ("lemma4.r", None, 1.0),
}


def _p_side(cf: ClosedForm) -> str | None:
    return {"PB": "B", "PF": "F"}.get(cf.case)


def oracle_block(cf: ClosedForm, oracle: Oracle, order: tuple[int, ...] | None = None) -> np.ndarray:
    """Cut the oracle block matching ``cf`` (optionally with permuted argument order)."""
    quantity, *blocks = cf.oracle
    arr = getattr(oracle, quantity)
    n1, n = oracle.spec.n1, oracle.spec.n
    if not blocks:
        return arr
    if order is None:
        return _block(arr, n1, n, *blocks)
    # vector-valued: first block is the component; permute the argument slots
    comp, args = blocks[0], blocks[1:]
    permuted_args = [args[k] for k in order]
    cut = _block(arr, n1, n, comp, *permuted_args)
    inverse = np.argsort(order)
    return np.moveaxis(cut, [2 + k for k in range(len(order))], [2 + int(i) for i in inverse])


def evaluate_closed_form(
    key: str,
    spec: DwpSpec,
    points,
    convention: str = DEFAULT_CONVENTION,
    corrected: bool = False,
    factor_data: FactorData | None = None,
    full: bool = False,
) -> np.ndarray:
    """The closed-form block for identity ``key`` at ``points``.

    Vector-valued blocks keep only the components the oracle block covers
    (tangential or normal part) unless ``full`` is set.
    """
    cf = CLOSED_FORMS[key]
    side = _p_side(cf)
    if side is not None and spec.side not in (side, "none"):
        raise DwpError(f"{key} needs P on {side}, spec has P on {spec.side}")
    fd = factor_data or FactorData(spec, points, convention, side)
    fn = cf.corrected if corrected and cf.corrected is not None else cf.fn
    out = fn(fd)
    if cf.output == "vector" and not full:
        out = _block(np.moveaxis(out, 1, -1), spec.n1, spec.n, cf.oracle[1])
        out = np.moveaxis(out, -1, 1)
    return out


def _apply_args(block: np.ndarray, cf: ClosedForm, spec: DwpSpec, args) -> np.ndarray:
    args = [np.asarray(a, dtype=float) for a in args]
    if len(args) != len(cf.slots):
        raise DwpError(f"{cf.key} takes {len(cf.slots)} arguments, got {len(args)}")
    for a, slot in zip(args, cf.slots):
        want = spec.n1 if slot == "B" else spec.n2
        if a.shape != (want,):
            raise DwpError(f"{cf.key}: argument for a {slot}-slot needs {want} components")
    out = block[0]
    offset = 1 if cf.output == "vector" else 0
    for a in args:
        out = np.tensordot(out, a, axes=([offset], [0]))
    return out


def _point_eval(key, case_prefix, spec, which, args, p, convention):
    key = which if which.startswith(case_prefix) else f"{case_prefix}.{which}"
    if key not in CLOSED_FORMS:
        raise DwpError(f"unknown identity {key!r}")
    block = evaluate_closed_form(key, spec, np.atleast_2d(p), convention, full=True)
    cf = CLOSED_FORMS[key]
    if cf.output == "scalar":
        return float(block[0])
    return _apply_args(block, cf, spec, args)


def lc_connection_closed_form(spec, which, args, p, convention=DEFAULT_CONVENTION):
    return _point_eval(None, "lemma1", spec, which, args, p, convention)


def lc_curvature_closed_form(spec, which, args, p, convention=DEFAULT_CONVENTION):
    return _point_eval(None, "lemma2", spec, which, args, p, convention)


def lc_ricci_closed_form(spec, which, args, p, convention=DEFAULT_CONVENTION) -> float:
    return float(_point_eval(None, "lemma3", spec, which, args, p, convention))


def lc_scalar_closed_form(spec, p, convention=DEFAULT_CONVENTION) -> float:
    return _point_eval(None, "lemma4", spec, "lemma4.r", (), p, convention)


def _case_prefix(kind: str, case: str) -> str:
    if case not in ("PB", "PF"):
        raise DwpError(f"case must be 'PB' or 'PF', got {case!r}")
    return f"{kind}-{case}"


def ssmc_connection_closed_form(spec, case, which, args, p, convention=DEFAULT_CONVENTION):
    return _point_eval(None, _case_prefix("prop-ssmc-conn", case), spec, which, args, p, convention)


def ssmc_curvature_closed_form(spec, case, which, args, p, convention=DEFAULT_CONVENTION):
    return _point_eval(None, _case_prefix("prop-ssmc-curv", case), spec, which, args, p, convention)


def ssmc_ricci_closed_form(spec, case, which, args, p, convention=DEFAULT_CONVENTION) -> float:
    return float(_point_eval(None, _case_prefix("cor-ricci", case), spec, which, args, p, convention))


def ssmc_scalar_closed_form(spec, case, p, convention=DEFAULT_CONVENTION) -> float:
    prefix = _case_prefix("cor-scalar", case)
    return _point_eval(None, prefix, spec, f"{prefix}.r", (), p, convention)


def mixed_ricci_coefficient_fit(key: str, spec: DwpSpec, points, oracle: Oracle | None = None) -> float | None:
    """Least-squares coefficient of the ``(Xh)(Vf)/(hf)`` term in a mixed SSMC Ricci component.

    The ``π`` term of the displayed formula is kept; the coefficient of the
    warping term is fitted to the oracle.  Returns ``None`` when the warping
    term vanishes at every point (nothing to fit).
    """
    cf = CLOSED_FORMS[key]
    if cf.corrected is None:
        raise DwpError(f"{key} has no fitted coefficient")
    side = _p_side(cf)
    oracle = oracle or Oracle(spec, points, side)
    fd = FactorData(spec, points, DEFAULT_CONVENTION, side)
    fn = {"cor-ricci-PB.SXV": _pb_SXV, "cor-ricci-PB.SVX": _pb_SVX, "cor-ricci-PF.SXV": _pf_SXV}[key]
    at0 = fn(fd, 0.0)
    unit = fn(fd, 1.0) - at0
    target = oracle_block(cf, oracle) - at0
    denom = float(np.sum(unit * unit))
    if denom < 1e-24:
        return None
    return float(np.sum(unit * target) / denom)
