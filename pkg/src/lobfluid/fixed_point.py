"""Fixed points of the fluid system, by two independent algorithms.

The stationary equations for (x*, y*) are, level by level (1-based):

    lambda_b       = (beta+alpha) x*_1 + gamma min(x*_1, y*_1)
    alpha x*_{k-1} = (beta+alpha) x*_k + gamma min(x*_k, y*_k)   1 < k <= N
    alpha y*_{k+1} = (beta+alpha) y*_k + gamma min(x*_k, y*_k)   1 <= k < N
    lambda_s       = (beta+alpha) y*_N + gamma min(x*_N, y*_N)

Every solution interleaves strictly (x* decreasing, y* increasing), so the
sign of x*-y* crosses at most once; the crossing index ell classifies the
parameter regime (buyers dominate everywhere, sellers dominate everywhere,
or one interior crossing).

The shooting solver exploits the geometry behind that structure: the first
equation confines (v_1, w_1) = (x*_1, y*_1) to a broken line (a vertical ray
above the diagonal plus a slanted segment below it), the middle equations
push that line forward level by level, and the last equation cuts the image
with a second broken line. Slopes only steepen under the forward map, which
makes the cut function monotone along the traversal and the intersection
unique; bisection runs separately on the ray and segment pieces so the root
coordinate keeps full floating-point resolution near w_1 = 0.

The recursive solver sweeps the equations with a monotone Gauss-Seidel
iteration started from the decoupled under/over-estimates x(0), y(0). Each
scalar update solves its own piecewise-linear equation exactly (its min term
is implicit), which keeps every iterate nonnegative and the sweep globally
convergent; the variant with all min terms frozen at the previous iterate is
retained as scheme="frozen" but can oscillate divergently once
gamma > alpha + beta, so it is not the default.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    BracketFailure,
    NoConvergence,
    NonMonotoneInput,
    OnKink,
)
from .model import ModelParams

__all__ = [
    "FixedPoint",
    "BrokenLinePoint",
    "SlopeCheck",
    "step_map",
    "map_jacobian_check",
    "solve_shooting",
    "solve_recursive",
    "classify_regime",
    "trade_volume",
    "fixed_point_residual",
    "regime_ii_x_chain",
]

DEFAULT_TOL = 1e-12


@dataclass(frozen=True)
class BrokenLinePoint:
    """Auxiliary (v, w) coordinates at level k (1-based) along the
    forward construction; v plays the buyer role, w the seller role."""

    v: float
    w: float
    k: int


@dataclass(frozen=True)
class FixedPoint:
    """Solved stationary point with regime metadata.

    ell counts the levels with x*_i > y*_i (strict; exact ties fall on the
    other side and sit on a measure-zero regime boundary). regime is "i"
    (ell = N), "ii" (ell = 0) or "iii" (interior crossing). residual is the
    sup-norm defect over all 2N stationary equations.
    """

    x_star: np.ndarray
    y_star: np.ndarray
    ell: int
    regime: str
    trade_volume: float
    solver: str
    residual: float
    iterations: int


def _advance(v: float, w: float, p: ModelParams) -> tuple[float, float]:
    """One forward step of the broken-line map (level k -> k+1).

    w' is explicit; v' is the root of the strictly increasing piecewise
    linear u -> (beta+alpha) u + gamma min(u, w'), found by testing which
    linear branch contains it. The root exists for any v >= 0 because the
    function vanishes at 0 and is unbounded.
    """
    a, b, g = p.alpha, p.beta, p.gamma
    w2 = ((a + b) * w + g * min(v, w)) / a
    u = a * v / (a + b + g)
    if u <= w2:
        v2 = u
    else:
        v2 = (a * v - g * w2) / (a + b)
        assert v2 >= 0.0, "branch solve escaped the nonnegative orthant"
    return v2, w2


def step_map(point: BrokenLinePoint, params: ModelParams) -> BrokenLinePoint:
    """Push a broken-line point from level k to level k+1."""
    if point.k >= params.n_levels:
        raise ValueError(f"level {point.k} is already the last level")
    if point.v < 0 or point.w < 0:
        raise ValueError("broken-line coordinates must be nonnegative")
    v2, w2 = _advance(point.v, point.w, params)
    return BrokenLinePoint(v2, w2, point.k + 1)


@dataclass(frozen=True)
class SlopeCheck:
    """Finite-difference verification of the slope-propagation factor."""

    case: int            # 1: below->below, 2: below->above, 3: above->above
    slope_in: float
    slope_out: float     # measured via finite differences
    factor_numeric: float
    factor_analytic: float
    rel_diff: float


def _case_factor(case: int, p: ModelParams, slope_in: float) -> float:
    """Exact multiplicative factor slope_out / slope_in for each case.

    Case 2 is the constant (alpha+beta+gamma)^2 / alpha^2. Cases 1 and 3
    depend on the incoming slope and can equivalently be written as
    A * (alpha+beta+gamma) / alpha^2 with A = alpha + beta +
    gamma * (dw_{k+1}/dv_{k+1}) for case 1, and with the analogous B built
    from dv_k/dw_k for case 3. A straight segment maps to a straight
    segment in every case, so the factor is constant along it.
    """
    a, b, g = p.alpha, p.beta, p.gamma
    if case == 1:
        return (a + b) * (a + b + g) / (a * a - g * (a + b + g) * slope_in)
    if case == 2:
        return (a + b + g) ** 2 / (a * a)
    if case == 3:
        return (a + b + g) * ((a + b) + g / slope_in) / (a * a)
    raise ValueError(f"no such case: {case}")


def map_jacobian_check(
    point: BrokenLinePoint,
    params: ModelParams,
    h: float = 1e-7,
    slope_in: float | None = None,
) -> SlopeCheck:
    """Differentiate the forward map along a tangent direction and compare
    the induced slope ratio with the analytic case factor.

    slope_in is the direction dw/dv at the input point (default: the slope
    of the initial segment, -(alpha+beta)/gamma). The point must lie strictly
    inside a case region: a tie v = w at input or image raises OnKink.
    """
    p = params
    if slope_in is None:
        slope_in = -(p.alpha + p.beta) / p.gamma
    v, w = point.v, point.w
    scale = max(abs(v), abs(w), 1.0)
    if abs(v - w) <= h * scale * max(1.0, abs(slope_in)):
        raise OnKink(f"input point sits on the diagonal: v={v}, w={w}")
    v2, w2 = _advance(v, w, p)
    if abs(v2 - w2) <= h * scale * max(1.0, abs(slope_in)):
        raise OnKink(f"image point sits on the diagonal: v={v2}, w={w2}")
    if v > w:
        case = 1 if v2 > w2 else 2
    else:
        if v2 > w2:
            raise AssertionError("map cannot cross the diagonal downward")
        case = 3
    va, wa = _advance(v + h, w + h * slope_in, p)
    dv = (va - v2) / h
    dw = (wa - w2) / h
    slope_out = dw / dv
    numeric = slope_out / slope_in
    analytic = _case_factor(case, p, slope_in)
    rel = abs(numeric - analytic) / abs(analytic)
    return SlopeCheck(case, slope_in, slope_out, numeric, analytic, rel)


def fixed_point_residual(
    x: np.ndarray, y: np.ndarray, params: ModelParams
) -> float:
    """Sup-norm defect of (x, y) over all 2N stationary equations."""
    p = params
    n = p.n_levels
    bpa = p.beta + p.alpha
    m = np.minimum(x, y)
    rx = np.empty(n)
    ry = np.empty(n)
    rx[0] = p.lambda_b - bpa * x[0] - p.gamma * m[0]
    if n > 1:
        rx[1:] = p.alpha * x[:-1] - bpa * x[1:] - p.gamma * m[1:]
        ry[:-1] = p.alpha * y[1:] - bpa * y[:-1] - p.gamma * m[:-1]
    ry[n - 1] = p.lambda_s - bpa * y[n - 1] - p.gamma * m[n - 1]
    return float(max(np.abs(rx).max(), np.abs(ry).max()))


def _classify(x: np.ndarray, y: np.ndarray) -> tuple[int, str]:
    """Crossing index and regime label; validates the interleaving."""
    n = x.shape[0]
    scale = max(float(np.abs(x).max()), float(np.abs(y).max()), 1.0)
    slack = 1e-9 * scale
    if n > 1:
        if (x[1:] >= x[:-1] + slack).any():
            raise NonMonotoneInput("x* is not strictly decreasing")
        if (y[1:] <= y[:-1] - slack).any():
            raise NonMonotoneInput("y* is not strictly increasing")
    above = x > y
    ell = int(above.sum())
    if above[:ell].sum() != ell or above[ell:].any():
        raise NonMonotoneInput("sign pattern of x*-y* crosses more than once")
    label = "i" if ell == n else ("ii" if ell == 0 else "iii")
    return ell, label


def classify_regime(fp: FixedPoint) -> tuple[int, str]:
    """Recompute (ell, regime label) from a fixed point's coordinates."""
    return _classify(fp.x_star, fp.y_star)


def trade_volume(fp: FixedPoint, params: ModelParams) -> float:
    """Stationary trade throughput gamma * sum_k min(x*_k, y*_k)."""
    return float(params.gamma * np.minimum(fp.x_star, fp.y_star).sum())


def _package(
    x: np.ndarray, y: np.ndarray, params: ModelParams, solver: str, iters: int
) -> FixedPoint:
    ell, label = _classify(x, y)
    vol = float(params.gamma * np.minimum(x, y).sum())
    res = fixed_point_residual(x, y, params)
    return FixedPoint(x, y, ell, label, vol, solver, res, iters)


def solve_shooting(params: ModelParams, tol: float = DEFAULT_TOL) -> FixedPoint:
    """Locate the fixed point by the forward broken-line construction.

    The scalar unknown is w_1 = y*_1. The cut function
    g(w_1) = (beta+alpha) w_N + gamma min(v_N, w_N) - lambda_s is continuous
    and strictly increasing along the traversal of the first broken line
    (the image slopes stay steeper than the sloped piece of the cut locus),
    so a sign-changing bracket pins the root; bisection runs until
    |g| <= tol * max(1, lambda_s) or the bracket collapses to adjacent
    floats.
    """
    p = params
    n = p.n_levels
    a, b, g_, ls = p.alpha, p.beta, p.gamma, p.lambda_s
    anchor = p.lambda_b / (a + b + g_)  # bisectrix corner of the first line

    def cut(w1: float, on_ray: bool) -> float:
        v = anchor if on_ray else (p.lambda_b - g_ * w1) / (a + b)
        w = w1
        for _ in range(n - 1):
            v, w = _advance(v, w, p)
        return (a + b) * w + g_ * min(v, w) - ls

    g_anchor = cut(anchor, True)
    if g_anchor >= 0.0:
        on_ray = False
        lo, hi = 0.0, anchor  # cut(0) = -lambda_s < 0 <= cut(anchor)
        g_lo, g_hi = -ls, g_anchor
    else:
        on_ray = True
        lo, g_lo = anchor, g_anchor
        hi = 2.0 * max(anchor, ls / (a + b))
        g_hi = cut(hi, True)
        grow = 0
        while g_hi <= 0.0:  # cannot persist: w_N >= w_1 (alpha+beta)/alpha
            hi *= 2.0
            g_hi = cut(hi, True)
            grow += 1
            if grow > 200:  # pragma: no cover - guarded impossibility
                raise BracketFailure(
                    f"no sign change up to w_1 = {hi:.3e}; "
                    "the cut function should cross by construction"
                )

    g_scale = max(1.0, ls)
    best_w, best_g = (lo, abs(g_lo)) if abs(g_lo) < abs(g_hi) else (hi, abs(g_hi))
    iters = 0
    while best_g > tol * g_scale:
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi or iters >= 600:
            break
        iters += 1
        g_mid = cut(mid, on_ray)
        if abs(g_mid) < best_g:
            best_w, best_g = mid, abs(g_mid)
        if g_mid < 0.0:
            lo = mid
        else:
            hi = mid

    w = best_w
    v = anchor if on_ray else (p.lambda_b - g_ * w) / (a + b)
    xs = np.empty(n)
    ys = np.empty(n)
    xs[0], ys[0] = v, w
    for k in range(1, n):
        v, w = _advance(v, w, p)
        xs[k], ys[k] = v, w
    return _package(xs, ys, p, "shooting", iters)


def _pw_root(rhs: float, cap: float, p: ModelParams) -> float:
    """Root of (beta+alpha) u + gamma min(u, cap) = rhs for u >= 0."""
    u = rhs / (p.beta + p.alpha + p.gamma)
    if u <= cap:
        return u
    return (rhs - p.gamma * cap) / (p.beta + p.alpha)


def _warm_start(p: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """Decoupled starting chains: x(0) underestimates (min terms at their
    largest), y(0) overestimates (min terms dropped)."""
    n = p.n_levels
    x = np.empty(n)
    y = np.empty(n)
    x[0] = p.lambda_b / (p.beta + p.alpha + p.gamma)
    for i in range(1, n):
        x[i] = p.alpha * x[i - 1] / (p.beta + p.alpha + p.gamma)
    y[n - 1] = p.lambda_s / (p.beta + p.alpha)
    for i in range(n - 2, -1, -1):
        y[i] = p.alpha * y[i + 1] / (p.beta + p.alpha)
    return x, y


def solve_recursive(
    params: ModelParams,
    tol: float = DEFAULT_TOL,
    max_iter: int = 10000,
    scheme: str = "implicit",
) -> FixedPoint:
    """Monotone sweep iteration for the fixed point.

    scheme="implicit" (default): each scalar equation is solved exactly with
    its own min term implicit, sweeping x forward against the previous y and
    then y backward against the fresh x. Iterates increase in x, decrease in
    y, and stay nonnegative; the sweep converges for all parameters.

    scheme="frozen": min terms frozen at the previous iterate (x-lines
    against the old pair, y-lines against fresh x and old y). The frozen
    sweep oscillates around the answer with gain gamma/(alpha+beta) wherever
    the y-branch of a min stays active, so it is not monotone and can
    diverge once gamma > alpha + beta; NoConvergence is raised when the
    oscillation escapes. Kept for comparison, not as a default.

    Stops when the sup-norm change drops below tol.
    """
    if scheme not in ("implicit", "frozen"):
        raise ValueError(f"unknown scheme {scheme!r}")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    p = params
    n = p.n_levels
    bpa = p.beta + p.alpha
    x, y = _warm_start(p)
    mono_slack = 1e-9 * max(1.0, float(y.max()))
    for it in range(1, max_iter + 1):
        xn = np.empty(n)
        yn = np.empty(n)
        if scheme == "implicit":
            xn[0] = _pw_root(p.lambda_b, y[0], p)
            for i in range(1, n):
                xn[i] = _pw_root(p.alpha * xn[i - 1], y[i], p)
            yn[n - 1] = _pw_root(p.lambda_s, xn[n - 1], p)
            for i in range(n - 2, -1, -1):
                yn[i] = _pw_root(p.alpha * yn[i + 1], xn[i], p)
        else:
            with np.errstate(over="ignore", invalid="ignore"):
                xn[0] = (p.lambda_b - p.gamma * min(x[0], y[0])) / bpa
                for i in range(1, n):
                    xn[i] = (p.alpha * xn[i - 1]
                             - p.gamma * min(x[i], y[i])) / bpa
                yn[n - 1] = (p.lambda_s
                             - p.gamma * min(xn[n - 1], y[n - 1])) / bpa
                for i in range(n - 2, -1, -1):
                    yn[i] = (p.alpha * yn[i + 1]
                             - p.gamma * min(xn[i], y[i])) / bpa
        if not (np.isfinite(xn).all() and np.isfinite(yn).all()):
            raise NoConvergence(f"{scheme} sweep lost finiteness at iteration {it}")
        if scheme == "implicit" and (
            (xn < x - mono_slack).any() or (yn > y + mono_slack).any()
        ):
            raise AssertionError("implicit sweep lost monotonicity")
        change = max(float(np.abs(xn - x).max()), float(np.abs(yn - y).max()))
        x, y = xn, yn
        if change < tol:
            return _package(x, y, p, f"recursive-{scheme}", it)
    raise NoConvergence(
        f"sup-norm change still {change:.3e} after {max_iter} sweeps"
    )


def regime_ii_x_chain(params: ModelParams) -> np.ndarray:
    """The decoupled buyer chain that x* solves whenever sellers dominate at
    every level (min = x throughout); independent of lambda_s."""
    p = params
    n = p.n_levels
    x = np.empty(n)
    x[0] = p.lambda_b / (p.beta + p.alpha + p.gamma)
    for i in range(1, n):
        x[i] = p.alpha * x[i - 1] / (p.beta + p.alpha + p.gamma)
    return x
