import numpy as np

from dwpverify import exprlang as el
from dwpverify.dwp import DwpSpec
from dwpverify.geometry import ChartManifold, VectorFieldSpec


def line(name="x", lo=-1.0, hi=1.0):
    return ChartManifold.from_strings([name], ["1"], [[lo, hi]], name)


def plane(names=("x1", "x2")):
    return ChartManifold.from_strings(list(names), ["1", "1"], [[-1, 1], [-1, 1]], "".join(names))


def sphere():
    return ChartManifold.from_strings(["theta", "phi"], ["1", "sin(theta)^2"], [[0.3, 2.8], [0, 6]], "sphere")


def make_dwp(base, fiber, h, f, P=None, side="none", name="dwp"):
    Pv = None if P is None else VectorFieldSpec.from_strings(P, (base if side == "B" else fiber).coord_names)
    return DwpSpec(base, fiber, el.parse(h, base.coord_names), el.parse(f, fiber.coord_names), Pv, side, name)


VARS = ("x1", "x2", "x3")

# wrappers that keep every argument inside the function's domain
_UNARY = (
    "sin({})",
    "cos({})",
    "tanh({})",
    "exp(tanh({}))",
    "log(1.5 + sin({}))",
    "sqrt(1 + ({})^2)",
    "tan(0.5*sin({}))",
    "sinh(0.5*sin({}))",
    "cosh(0.5*cos({}))",
    "-({})",
    "({})^2",
    "(1.5 + cos({}))^0.5",
)
_BINARY = ("({}) + ({})", "({}) - ({})", "({}) * ({})", "({}) / (2 + cos({}))")


def random_expression(rng, depth=5):
    """A random expression string over ``VARS`` that is finite on ``[-1, 1]^3``."""
    if depth == 0 or rng.random() < 0.2:
        if rng.random() < 0.7:
            return VARS[rng.integers(len(VARS))]
        return repr(float(np.round(rng.uniform(-3, 3), int(rng.integers(1, 17)))))
    if rng.random() < 0.5:
        return _UNARY[rng.integers(len(_UNARY))].format(random_expression(rng, depth - 1))
    a, b = random_expression(rng, depth - 1), random_expression(rng, depth - 1)
    return _BINARY[rng.integers(len(_BINARY))].format(a, b)


def central_difference(e, i, p):
    step = 1e-5 * (1 + abs(p[i]))
    dp = np.zeros_like(p)
    dp[i] = step
    return (el.evaluate(e, p + dp) - el.evaluate(e, p - dp)) / (2 * step)
