"""Coupling nonlinearities and the sup/min functional entering the K_U bound."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kernels import COUPLING_CODES


@dataclass(frozen=True)
class CouplingFunction:
    """Odd coupling nonlinearity normalised to unit slope at the origin.

    ``satisfies_a2`` declares the function continuously differentiable, odd and
    increasing; ``asymptotic_curvature`` declares that its curvature has a
    fixed sign beyond some point. Both are declarations; ``validate_a2``
    checks the first one numerically.
    """

    name: str
    f_max: float
    satisfies_a2: bool
    asymptotic_curvature: bool

    @property
    def code(self) -> int:
        return COUPLING_CODES[self.name]

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.f_max)

    def __call__(self, x):
        return evaluate(self, x)


LINEAR = CouplingFunction("linear", math.inf, True, True)
TANH = CouplingFunction("tanh", 1.0, True, True)
# sin is not increasing past pi/2 and changes curvature forever.
SIN = CouplingFunction("sin", 1.0, False, False)

CATALOG = {f.name: f for f in (LINEAR, TANH, SIN)}


def get_coupling(name: str) -> CouplingFunction:
    try:
        return CATALOG[name]
    except KeyError:
        raise ValueError(f"unknown coupling function {name!r}; "
                         f"choose from {sorted(CATALOG)}") from None


def evaluate(f: CouplingFunction, x):
    """Apply ``f`` component-wise."""
    x = np.asarray(x, dtype=float)
    if f.name == "tanh":
        out = np.tanh(x)
    elif f.name == "sin":
        out = np.sin(x)
    else:
        out = x.copy()
    return out if out.ndim else float(out)


def slope_ratio(f: CouplingFunction, x):
    """``f(x)/x`` with the value ``f'(0) = 1`` at the origin."""
    x = np.asarray(x, dtype=float)
    out = np.ones_like(x)
    nz = x != 0
    out[nz] = evaluate(f, x[nz]) / x[nz]
    return out


@dataclass(frozen=True)
class A2Report:
    ok: bool
    reason: str = ""
    x: float | None = None

    def __bool__(self):
        return self.ok


def validate_a2(f: CouplingFunction, half_width=6.0, points=4001, h=1e-5) -> A2Report:
    """Numerically check oddness, strict monotonicity and unit slope at 0.

    Returns the first violating sample, if any.
    """
    x = np.linspace(-half_width, half_width, points)
    y = evaluate(f, x)
    odd_err = np.abs(y + evaluate(f, -x))
    if odd_err.max() > 1e-12:
        k = int(np.argmax(odd_err > 1e-12))
        return A2Report(False, "not odd", float(x[k]))
    step = np.diff(y)
    if np.any(step <= 0):
        k = int(np.argmax(step <= 0))
        return A2Report(False, "not increasing", float(x[k]))
    slope0 = (evaluate(f, h) - evaluate(f, -h)) / (2 * h)
    if abs(slope0 - 1.0) > 1e-6:
        return A2Report(False, f"f'(0) = {slope0:.8g}, expected 1", 0.0)
    return A2Report(True)


def _a_times_min_ratio(f, a, inner_points):
    x = np.linspace(0.0, 2.0 * a, inner_points)
    return a * float(slope_ratio(f, x).min())


def compute_g_numeric(f: CouplingFunction, a_min=1e-3, a_max=1e3,
                      outer_points=400, inner_points=2048, refine_iters=60) -> float:
    """Grid estimate of sup_a a * min_{x in [0, 2a]} f(x)/x.

    Log-spaced outer grid over ``a`` followed by golden-section refinement
    in the bracketing cells; the inner minimum is taken on a uniform grid
    that includes the limit value 1 at x = 0.
    """
    grid = np.geomspace(a_min, a_max, outer_points)
    vals = np.array([_a_times_min_ratio(f, a, inner_points) for a in grid])
    k = int(np.argmax(vals))
    lo = grid[max(k - 1, 0)]
    hi = grid[min(k + 1, outer_points - 1)]
    best = float(vals[k])
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    c = hi - inv_phi * (hi - lo)
    d = lo + inv_phi * (hi - lo)
    fc = _a_times_min_ratio(f, c, inner_points)
    fd = _a_times_min_ratio(f, d, inner_points)
    for _ in range(refine_iters):
        if fc > fd:
            hi, d, fd = d, c, fc
            c = hi - inv_phi * (hi - lo)
            fc = _a_times_min_ratio(f, c, inner_points)
        else:
            lo, c, fc = c, d, fd
            d = lo + inv_phi * (hi - lo)
            fd = _a_times_min_ratio(f, d, inner_points)
    return max(best, fc, fd)


def compute_g(f: CouplingFunction) -> float:
    """The g functional; ``inf`` for unbounded increasing couplings.

    Closed form ``f_max / 2`` when the function is declared increasing with
    eventually fixed curvature, grid search otherwise.
    """
    if f.satisfies_a2 and f.asymptotic_curvature:
        return math.inf if not f.bounded else f.f_max / 2.0
    return compute_g_numeric(f)


def g_is_certified(f: CouplingFunction) -> bool:
    return f.satisfies_a2
