import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dwpverify.tensor import TensorError, TensorValue, contract, max_abs_diff, raise_lower, within_tolerance

finite = st.floats(-10, 10, allow_nan=False)


def random_spd(rng, n):
    a = rng.normal(size=(n, n))
    return a @ a.T + n * np.eye(n)


class TestTensorValue:
    def test_rank_and_dim(self):
        t = TensorValue(np.zeros((3, 3, 3)), ("u", "d", "d"))
        assert t.rank == 3 and t.dim == 3

    def test_rejects_bad_variance(self):
        with pytest.raises(TensorError):
            TensorValue(np.zeros((2, 2)), ("u",))
        with pytest.raises(TensorError):
            TensorValue(np.zeros((2, 2)), ("u", "x"))

    def test_rejects_ragged_dims(self):
        with pytest.raises(TensorError):
            TensorValue(np.zeros((2, 3)), ("u", "d"))

    def test_arithmetic_keeps_variance(self):
        a = TensorValue(np.ones((2, 2)), ("u", "d"))
        assert (a + 2.0 * a).variance == ("u", "d")
        with pytest.raises(TensorError):
            a + TensorValue(np.ones((2, 2)), ("d", "d"))


class TestContract:
    def test_trace_of_identity(self):
        out = contract(TensorValue(np.eye(3), ("u", "d")), 0, 1)
        assert out.rank == 0 and float(out) == 3.0

    def test_dot_product(self):
        u, v = np.array([1.0, 2.0, 3.0]), np.array([4.0, -1.0, 0.5])
        out = contract(TensorValue(np.outer(u, v), ("u", "d")), 0, 1)
        assert float(out) == pytest.approx(u @ v)

    def test_against_loops(self, rng):
        data = rng.normal(size=(4, 4, 4))
        out = contract(TensorValue(data, ("u", "d", "d")), 0, 1)
        ref = np.zeros(4)
        for k in range(4):
            for i in range(4):
                ref[k] += data[i, i, k]
        assert out.variance == ("d",)
        assert np.max(np.abs(out.data - ref)) <= 1e-13

    def test_equal_variance_needs_metric(self, rng):
        t = TensorValue(rng.normal(size=(3, 3)), ("d", "d"))
        with pytest.raises(TensorError):
            contract(t, 0, 1)
        g = random_spd(rng, 3)
        assert float(contract(t, 0, 1, g)) == pytest.approx(np.sum(np.linalg.inv(g) * t.data))

    def test_slot_errors(self):
        t = TensorValue(np.eye(2), ("u", "d"))
        with pytest.raises(TensorError):
            contract(t, 0, 0)
        with pytest.raises(TensorError):
            contract(t, 0, 2)

    @given(arrays(float, (3, 3, 3), elements=finite), arrays(float, (3, 3, 3), elements=finite), finite, finite)
    @settings(max_examples=50, deadline=None)
    def test_linear(self, a, b, alpha, beta):
        var = ("u", "d", "d")
        lhs = contract(TensorValue(alpha * a + beta * b, var), 0, 2)
        rhs = alpha * contract(TensorValue(a, var), 0, 2) + beta * contract(TensorValue(b, var), 0, 2)
        assert max_abs_diff(lhs, rhs) <= 1e-13 * (1 + np.max(np.abs(lhs.data)))


class TestRaiseLower:
    def test_identity_metric(self, rng):
        t = TensorValue(rng.normal(size=(3, 3)), ("u", "d"))
        out = raise_lower(t, 0, np.eye(3), "down")
        np.testing.assert_array_equal(out.data, t.data)
        assert out.variance == ("d", "d")

    def test_diagonal_lowering(self):
        out = raise_lower(TensorValue([1.0, 0.0], ("u",)), 0, np.diag([4.0, 9.0]), "down")
        np.testing.assert_array_equal(out.data, [4.0, 0.0])

    def test_round_trip(self, rng):
        g = random_spd(rng, 4)
        t = TensorValue(rng.normal(size=(4, 4, 4)), ("d", "u", "d"))
        back = raise_lower(raise_lower(t, 2, g, "up"), 2, g, "down")
        assert max_abs_diff(back, t) <= 1e-12

    def test_singular_metric(self):
        g = np.array([[1.0, 1.0], [1.0, 1.0]])
        with pytest.raises(TensorError):
            raise_lower(TensorValue([1.0, 0.0], ("d",)), 0, g, "up")

    def test_wrong_direction(self):
        with pytest.raises(TensorError):
            raise_lower(TensorValue([1.0, 0.0], ("u",)), 0, np.eye(2), "up")
        with pytest.raises(TensorError):
            raise_lower(TensorValue([1.0, 0.0], ("u",)), 0, np.eye(2), "sideways")


class TestComparison:
    def test_equal_inputs(self, rng):
        t = TensorValue(rng.normal(size=(3, 3)), ("d", "d"))
        assert max_abs_diff(t, t) == 0.0

    def test_single_entry(self):
        b = np.zeros((2, 2))
        b[1, 0] = 1e-3
        assert max_abs_diff(TensorValue(np.zeros((2, 2)), ("d", "d")), TensorValue(b, ("d", "d"))) == 1e-3

    def test_against_loops(self, rng):
        a, b = rng.normal(size=(3, 3, 3)), rng.normal(size=(3, 3, 3))
        ref = max(abs(a[i, j, k] - b[i, j, k]) for i in range(3) for j in range(3) for k in range(3))
        assert max_abs_diff(TensorValue(a, ("u", "d", "d")), TensorValue(b, ("u", "d", "d"))) == ref

    def test_shape_mismatch(self):
        with pytest.raises(TensorError):
            max_abs_diff(TensorValue(np.eye(2), ("d", "d")), TensorValue(np.eye(3), ("d", "d")))

    def test_relative_floor(self):
        assert within_tolerance(1.5e-6, 1e3, 1e-6, 1e-9)
        assert not within_tolerance(1.5e-6, 1.0, 1e-6, 1e-9)
