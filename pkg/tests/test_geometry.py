import math

import numpy as np
import pytest

from dwpverify import dwp
from dwpverify import exprlang as el
from dwpverify import geometry as geo
from dwpverify.geometry import ChartManifold, VectorFieldSpec
from dwpverify.tensor import TensorValue

from .helpers import plane, sphere

HYPERBOLIC = ChartManifold.from_strings(["t", "y"], ["1", "exp(2*t)"], [[-1, 1], [-1, 1]], "hyperbolic")
CURVED = ChartManifold.from_strings(
    ["x1", "x2", "x3"],
    [["1 + 0.1*x2^2", "0.2*x1", "0"], ["0.2*x1", "1.5 + sin(x3)/4", "0.1*x3"], ["0", "0.1*x3", "2 + x1*x2/5"]],
    [[-1, 1], [-1, 1], [-1, 1]],
    "curved",
)
CURVED_P = VectorFieldSpec.from_strings(["1 + 0.3*x2", "x1*x3", "cos(x1)"], CURVED.coord_names)


def metric_fd_christoffel(m, p, step=1e-5):
    """Christoffel symbols from central differences of the metric."""
    n = m.n
    dg = np.zeros((n, n, n))
    for a in range(n):
        e = np.zeros(n)
        e[a] = step
        dg[a] = (m.metric_jet(p + e, 0)[0][0] - m.metric_jet(p - e, 0)[0][0]) / (2 * step)
    gi = np.linalg.inv(m.metric_jet(p, 0)[0][0])
    first = 0.5 * (np.einsum("ijl->lij", dg) + np.einsum("jil->lij", dg) - np.einsum("lij->lij", dg))
    return np.einsum("kl,lij->kij", gi, first)


def fd_riemann(field, p, step=1e-5):
    """Riemann tensor from central differences of the connection coefficients."""
    n = len(p)
    gamma = field.jet(p, 0)[0][0]
    dgamma = np.zeros((n, n, n, n))
    for a in range(n):
        e = np.zeros(n)
        e[a] = step
        dgamma[a] = (field.jet(p + e, 0)[0][0] - field.jet(p - e, 0)[0][0]) / (2 * step)
    return geo._riemann_from(gamma, dgamma)


class TestMetric:
    def test_euclidean(self):
        np.testing.assert_array_equal(geo.metric_at(plane(), [0.2, 0.3]).data, np.eye(2))

    def test_sphere_equator(self):
        g = geo.metric_at(sphere(), [math.pi / 2, 1.0]).data
        np.testing.assert_allclose(g, np.eye(2), atol=1e-16)

    def test_hyperbolic(self):
        g = geo.metric_at(HYPERBOLIC, [0.5, 0.0]).data
        assert g[1, 1] == pytest.approx(math.e, rel=1e-15)

    def test_outside_domain(self):
        with pytest.raises(geo.GeometryError):
            geo.metric_at(plane(), [2.0, 0.0])

    def test_not_positive_definite(self):
        m = ChartManifold.from_strings(["x", "y"], ["1", "x"], [[-1, 1], [-1, 1]])
        with pytest.raises(geo.GeometryError):
            geo.metric_at(m, [-0.5, 0.0])

    def test_malformed_chart(self):
        with pytest.raises(geo.GeometryError):
            ChartManifold.from_strings(["x", "x"], ["1", "1"], [[-1, 1], [-1, 1]])
        with pytest.raises(geo.GeometryError):
            ChartManifold.from_strings(["x"], ["1"], [[1, -1]])

    def test_sampling_stays_inside_shrunk_box(self, rng):
        pts = geo.sample_points(sphere(), 500, rng)
        assert np.all(pts[:, 0] > 0.3 + 0.05 * 2.5) and np.all(pts[:, 0] < 2.8 - 0.05 * 2.5)


class TestLeviCivita:
    def test_flat(self):
        assert np.all(geo.levi_civita(plane(), [0.1, 0.2]).gamma == 0)

    def test_sphere_hand_formula(self):
        gamma = geo.levi_civita(sphere(), [1.0, 0.5]).gamma
        assert gamma[0, 1, 1] == pytest.approx(-math.sin(1) * math.cos(1), rel=1e-14)
        assert gamma[1, 0, 1] == pytest.approx(math.cos(1) / math.sin(1), rel=1e-14)

    def test_symmetric(self, rng):
        c = geo.levi_civita(CURVED, rng.uniform(-0.9, 0.9, 3))
        assert np.all(geo.torsion(c).data == 0)

    def test_against_metric_differences(self, rng):
        for p in rng.uniform(-0.9, 0.9, size=(5, 3)):
            gamma = geo.levi_civita(CURVED, p).gamma
            assert np.max(np.abs(gamma - metric_fd_christoffel(CURVED, p))) <= 1e-8

    def test_derivative_jet_against_differences(self, rng):
        field = geo.LeviCivitaField(CURVED)
        p = rng.uniform(-0.9, 0.9, 3)
        _, dgamma, ddgamma = field.jet(p, 2)
        for a in range(3):
            e = np.zeros(3)
            e[a] = 1e-5
            fd = (field.jet(p + e, 1)[1][0] - field.jet(p - e, 1)[1][0]) / 2e-5
            assert np.max(np.abs(ddgamma[0, a] - fd)) <= 1e-7
            fd1 = (field.jet(p + e, 0)[0][0] - field.jet(p - e, 0)[0][0]) / 2e-5
            assert np.max(np.abs(dgamma[0, a] - fd1)) <= 1e-8


class TestSSMC:
    def test_zero_field_is_levi_civita(self, rng):
        p = rng.uniform(-0.9, 0.9, 3)
        lc = geo.levi_civita(CURVED, p).gamma
        assert np.max(np.abs(geo.ssmc(CURVED, VectorFieldSpec.zero(3), p).gamma - lc)) <= 1e-12

    def test_euclidean_components(self):
        P = VectorFieldSpec.from_strings(["1", "0"], ("x1", "x2"))
        gamma = geo.ssmc(plane(), P, [0.3, 0.1]).gamma
        assert gamma[0, 0, 0] == 0.0
        assert gamma[1, 1, 0] == 1.0

    def test_torsion_law(self, rng):
        for p in rng.uniform(-0.9, 0.9, size=(20, 3)):
            T = geo.torsion(geo.ssmc(CURVED, CURVED_P, p)).data
            pi = CURVED.metric_jet(p, 0)[0][0] @ CURVED_P.jet(p, 0)[0][0]
            eye = np.eye(3)
            expected = np.einsum("ki,j->kij", eye, pi) - np.einsum("kj,i->kij", eye, pi)
            assert np.max(np.abs(T - expected)) <= 1e-12

    def test_levi_civita_torsion_free(self):
        assert np.all(geo.torsion(geo.levi_civita(sphere(), [1.0, 1.0])).data == 0)

    def test_metric_compatible(self, rng):
        pts = rng.uniform(-0.9, 0.9, size=(20, 3))
        for field in (geo.LeviCivitaField(CURVED), geo.SSMCField(CURVED, CURVED_P)):
            assert np.max(np.abs(geo.covariant_derivative_metric_batch(field, pts))) <= 1e-12

    def test_scale_realises_rescaled_metric(self, rng):
        p = rng.uniform(-0.9, 0.9, size=(4, 3))
        scaled = [[el.mul(el.const(3.0), c) for c in row] for row in CURVED.metric]
        m3 = ChartManifold(CURVED.coord_names, scaled, CURVED.domain_box)
        a = geo.SSMCField(m3, CURVED_P).jet(p, 0)[0]
        b = geo.SSMCField(CURVED, CURVED_P, np.full(4, 3.0)).jet(p, 0)[0]
        assert np.max(np.abs(a - b)) <= 1e-13

    def test_dimension_mismatch(self):
        with pytest.raises(geo.GeometryError):
            geo.SSMCField(CURVED, VectorFieldSpec.zero(2))


class TestCurvature:
    def test_flat(self):
        R = geo.riemann(geo.LeviCivitaField(plane()), [0.1, 0.2])
        assert np.all(R.data == 0)

    def test_sphere_sectional_curvature(self):
        p = [1.0, 0.4]
        R = geo.riemann(geo.LeviCivitaField(sphere()), p).data
        # R(∂θ,∂φ)∂φ = K g_φφ ∂θ
        assert R[0, 0, 1, 1] / math.sin(1) ** 2 == pytest.approx(1.0, abs=1e-9)
        g = geo.metric_at(sphere(), p).data
        eye = np.eye(2)
        constant = np.einsum("jk,li->lijk", g, eye) - np.einsum("ik,lj->lijk", g, eye)
        assert np.max(np.abs(R - constant)) <= 1e-12

    def test_sphere_ricci_and_scalar(self, rng):
        m = sphere()
        pts = geo.sample_points(m, 50, rng)
        S = geo.ricci_batch(geo.riemann_batch(geo.LeviCivitaField(m), pts))
        g = m.metric_jet(pts, 0)[0]
        assert np.max(np.abs(S - g)) <= 1e-9
        assert np.max(np.abs(geo.scalar_batch(S, g) - 2.0)) <= 1e-9

    def test_hyperbolic_scalar(self, rng):
        pts = geo.sample_points(HYPERBOLIC, 50, rng)
        S = geo.ricci_batch(geo.riemann_batch(geo.LeviCivitaField(HYPERBOLIC), pts))
        assert np.max(np.abs(geo.scalar_batch(S, HYPERBOLIC.metric_jet(pts, 0)[0]) + 2.0)) <= 1e-9

    def test_pointwise_wrappers(self):
        field = geo.LeviCivitaField(sphere())
        R = geo.riemann(field, [1.2, 0.3])
        S = geo.ricci(R)
        assert geo.scalar(S, geo.metric_at(sphere(), [1.2, 0.3])) == pytest.approx(2.0, abs=1e-12)
        with pytest.raises(Exception):
            geo.ricci(TensorValue(np.eye(2), ("d", "d")))

    @pytest.mark.parametrize("with_p", [False, True])
    def test_first_pair_antisymmetry(self, rng, with_p):
        field = geo.SSMCField(CURVED, CURVED_P) if with_p else geo.LeviCivitaField(CURVED)
        R = geo.riemann_batch(field, rng.uniform(-0.9, 0.9, size=(20, 3)))
        assert np.max(np.abs(R + np.swapaxes(R, -3, -2))) <= 1e-12

    @pytest.mark.parametrize("with_p", [False, True])
    def test_against_connection_differences(self, rng, with_p):
        field = geo.SSMCField(CURVED, CURVED_P) if with_p else geo.LeviCivitaField(CURVED)
        p = rng.uniform(-0.9, 0.9, 3)
        assert np.max(np.abs(geo.riemann_batch(field, p)[0] - fd_riemann(field, p))) <= 1e-8

    def test_riemann_derivative_against_differences(self, rng):
        field = geo.SSMCField(CURVED, CURVED_P)
        p = rng.uniform(-0.9, 0.9, 3)
        _, dR = geo.riemann_jet(field, p)
        for a in range(3):
            e = np.zeros(3)
            e[a] = 1e-5
            fd = (geo.riemann_batch(field, p + e)[0] - geo.riemann_batch(field, p - e)[0]) / 2e-5
            assert np.max(np.abs(dR[0, a] - fd)) <= 1e-7

    def test_ssmc_ricci_not_symmetric(self, catalog):
        spec = catalog.manifolds["curved-PB"]
        pts = spec.sample(10, np.random.default_rng(0))
        S = dwp.Oracle(spec, pts).S_t
        assert np.max(np.abs(S - np.swapaxes(S, -1, -2))) > 1e-3

    def test_curvature_relation(self, rng):
        pts = rng.uniform(-0.9, 0.9, size=(30, 3))
        R_t = geo.riemann_batch(geo.SSMCField(CURVED, CURVED_P), pts)
        rhs = geo.curvature_relation_rhs_batch(CURVED, CURVED_P, pts)
        assert np.max(np.abs(R_t - rhs)) <= 1e-10


class TestCalculus:
    def test_constant(self):
        grad, H, lap = geo.grad_hess_laplace(plane(), el.const(2.0), [0.1, 0.2])
        assert np.all(grad == 0) and np.all(H.data == 0) and lap == 0

    def test_euclidean_quadratic(self):
        phi = el.parse("x1^2 + x2^2", ("x1", "x2"))
        grad, H, lap = geo.grad_hess_laplace(plane(), phi, [0.3, -0.4])
        np.testing.assert_allclose(grad, [0.6, -0.8])
        np.testing.assert_allclose(H.data, 2 * np.eye(2))
        assert lap == 4.0

    def test_spherical_laplacian_against_divergence_form(self):
        m = sphere()
        phi = el.parse("cos(theta)", m.coord_names)
        theta = 0.7
        _, _, lap = geo.grad_hess_laplace(m, phi, [theta, 1.0])
        assert lap == pytest.approx(-2 * math.cos(theta), abs=1e-9)

        # (1/√g) ∂_θ(√g ∂_θ φ) by central differences
        def flux(t):
            return math.sin(t) * -math.sin(t)

        step = 1e-5
        div = (flux(theta + step) - flux(theta - step)) / (2 * step) / math.sin(theta)
        assert lap == pytest.approx(div, abs=1e-8)


class TestCovariantDerivatives:
    def test_flat(self):
        _, nabla = geo.covariant_derivative_ricci_batch(geo.LeviCivitaField(plane()), [[0.1, 0.2]])
        assert np.all(nabla == 0)

    def test_sphere_ricci_parallel(self, rng):
        m = sphere()
        pts = geo.sample_points(m, 20, rng)
        _, nabla = geo.covariant_derivative_ricci_batch(geo.LeviCivitaField(m), pts)
        assert np.max(np.abs(nabla)) <= 1e-8
        cyclic = nabla + np.einsum("...ijk->...jki", nabla) + np.einsum("...ijk->...kij", nabla)
        assert np.max(np.abs(cyclic)) <= 1e-8

    def test_against_ricci_differences(self, rng):
        field = geo.SSMCField(CURVED, CURVED_P)
        p = rng.uniform(-0.9, 0.9, 3)
        S, nabla = geo.covariant_derivative_ricci_batch(field, p)
        gamma = field.jet(p, 0)[0][0]
        ref = np.zeros((3, 3, 3))
        for a in range(3):
            e = np.zeros(3)
            e[a] = 1e-5
            dS = (geo.ricci_batch(geo.riemann_batch(field, p + e)) - geo.ricci_batch(geo.riemann_batch(field, p - e)))[0] / 2e-5
            ref[a] = dS - gamma[:, a, :].T @ S[0] - S[0] @ gamma[:, a, :]
        assert np.max(np.abs(nabla[0] - ref)) <= 1e-7

    def test_vector_derivative(self):
        m = plane()
        P = VectorFieldSpec.from_strings(["x1*x2", "x2^2"], m.coord_names)
        nabla = geo.covariant_derivative_vector_batch(geo.LeviCivitaField(m), P, [[0.5, 2.0]])[0]
        np.testing.assert_allclose(nabla, [[2.0, 0.0], [0.5, 4.0]])
