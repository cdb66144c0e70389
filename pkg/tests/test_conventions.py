"""One-time calibration of the conventions the closed forms are written in.

Each test computes the candidates that the formulas leave open and checks
that the frozen choice is the one the oracle confirms while the alternative
is clearly rejected.
"""

import numpy as np
import pytest

from dwpverify import dwp
from dwpverify import geometry as geo
from dwpverify.dwp import FactorData, Oracle

from .helpers import make_dwp, plane


def quadratic(side="none", P=None):
    return make_dwp(
        plane(("x1", "x2")),
        plane(("y1", "y2")),
        "1 + (x1^2 + x2^2)/8 + 0.1*x1*x2",
        "1 + (y1^2 + y2^2)/8 + 0.2*sin(y1)",
        P,
        side,
        "quadratic",
    )


def residual(key, spec, pts, fd=None, convention="ambient"):
    cf = dwp.CLOSED_FORMS[key]
    side = dwp._p_side(cf)
    fd = fd or FactorData(spec, pts, convention, side)
    value = dwp.evaluate_closed_form(key, spec, pts, convention, factor_data=fd)
    return float(np.max(np.abs(value - dwp.oracle_block(cf, Oracle(spec, pts, side)))))


@pytest.fixture
def pts():
    return quadratic().sample(30, np.random.default_rng(5))


class TestRicciContraction:
    def test_first_slots_match_the_ricci_formula(self, pts):
        spec = quadratic()
        R = Oracle(spec, pts).R
        closed = dwp.evaluate_closed_form("lemma3.SXY", spec, pts)
        candidates = {
            (0, 1): np.einsum("...iijk->...jk", R),
            (0, 2): np.einsum("...ijik->...jk", R),
        }
        res = {k: np.max(np.abs(v[:, :2, :2] - closed)) for k, v in candidates.items()}
        assert res[(0, 1)] <= 1e-12
        assert res[(0, 2)] > 1e-2
        assert geo.RICCI_SLOTS == (0, 1)

    def test_riemann_sign(self, pts):
        # an overall sign flip of R would flip every curvature case
        spec = quadratic()
        cf = dwp.CLOSED_FORMS["lemma2.RXYV"]
        closed = dwp.evaluate_closed_form("lemma2.RXYV", spec, pts)
        target = dwp.oracle_block(cf, Oracle(spec, pts))
        assert np.max(np.abs(closed - target)) <= 1e-12
        assert np.max(np.abs(closed + target)) > 1e-2


class TestFactorQuantities:
    @pytest.mark.parametrize(
        "key", ["lemma1.tanXY", "lemma1.norVW", "lemma3.SXY", "lemma3.SVW", "lemma4.r"]
    )
    def test_ambient_scaling_matches(self, pts, key):
        spec = quadratic()
        assert residual(key, spec, pts, convention="ambient") <= 1e-12
        assert residual(key, spec, pts, convention="factor") > 1e-3

    def test_pi_uses_the_product_metric(self, pts):
        spec = quadratic("B", ["1", "0"])
        fd = FactorData(spec, pts, "ambient", "B")
        g = dwp.assemble(spec).metric_jet(pts, 0)[0]
        np.testing.assert_allclose(fd.piB[:, 0], g[:, 0, 0], rtol=1e-15)

    def test_divergence_is_the_factor_trace(self):
        spec = quadratic("B", ["1 + 0.3*x2", "x1*x2"])
        pts = spec.sample(30, np.random.default_rng(6))
        assert residual("cor-scalar-PB.r", spec, pts) <= 1e-10
        fd = FactorData(spec, pts, "ambient", "B")
        fd.__dict__["divP"] = fd.divP_ambient
        assert residual("cor-scalar-PB.r", spec, pts, fd) > 1e-3

    def test_base_scalar_is_a_factor_metric_trace(self):
        spec = quadratic("B", ["1 + 0.3*x2", "x1*x2"])
        pts = spec.sample(30, np.random.default_rng(7))
        assert residual("cor-scalar-PB.r", spec, pts) <= 1e-10
        fd = FactorData(spec, pts, "ambient", "B")
        fd.__dict__["rB_t"] = fd.rB_t / fd.f**2
        assert residual("cor-scalar-PB.r", spec, pts, fd) > 1e-3

    def test_slice_connection_scale(self):
        # the base semi-symmetric connection is built from the slice metric f² g_B
        spec = quadratic("B", ["1 + 0.3*x2", "x1*x2"])
        pts = spec.sample(30, np.random.default_rng(8))
        assert residual("cor-ricci-PB.SXY", spec, pts) <= 1e-10
        assert residual("cor-ricci-PB.SXY", spec, pts, convention="factor") > 1e-3
