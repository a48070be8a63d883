"""Fluid-limit ODE system: right-hand side, integration, comparison checks.

The scaled occupancies obey, for levels k = 1..N (1-based here, 0-based in
code):

    dx_1/dtau = lambda_b - (beta+alpha) x_1 - gamma min(x_1, y_1)
    dx_k/dtau = alpha x_{k-1} - (beta+alpha) x_k - gamma min(x_k, y_k)
    dy_k/dtau = alpha y_{k+1} - (beta+alpha) y_k - gamma min(x_k, y_k)
    dy_N/dtau = lambda_s - (beta+alpha) y_N - gamma min(x_N, y_N)

The right-hand side is piecewise linear, continuous, and globally Lipschitz,
so an explicit adaptive Runge-Kutta pair with tight tolerances is entirely
adequate; the min kinks only bend the derivative, never the state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .errors import HypothesisViolated, NegativeState, StepUnderflow
from .model import FluidState, ModelParams

__all__ = ["OdeSolution", "ComparisonReport", "rhs", "integrate",
           "integrate_until_stationary", "check_comparison", "uniform_grid"]

DEFAULT_TOL = 1e-9


def uniform_grid(stop: float, step: float) -> np.ndarray:
    """Grid 0, step, 2*step, ... ending at stop; the last point is clamped
    so float round-up cannot push it past the integration span."""
    if step <= 0 or stop < 0:
        raise ValueError("need step > 0 and stop >= 0")
    m = int(np.floor(stop / step + 1e-9))
    grid = np.arange(m + 1) * step
    grid[-1] = min(grid[-1], stop)
    return grid


def rhs(state: FluidState, params: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate (dx/dtau, dy/dtau) at a fluid state."""
    z = np.concatenate([state.x, state.y])
    d = _rhs_flat(0.0, z, params)
    n = params.n_levels
    return d[:n], d[n:]


def _rhs_flat(t: float, z: np.ndarray, p: ModelParams) -> np.ndarray:
    n = p.n_levels
    x = z[:n]
    y = z[n:]
    m = np.minimum(x, y)
    out = np.empty(2 * n)
    dx = out[:n]
    dy = out[n:]
    bpa = p.beta + p.alpha
    dx[0] = p.lambda_b - bpa * x[0] - p.gamma * m[0]
    if n > 1:
        dx[1:] = p.alpha * x[:-1] - bpa * x[1:] - p.gamma * m[1:]
        dy[:-1] = p.alpha * y[1:] - bpa * y[:-1] - p.gamma * m[:-1]
    dy[n - 1] = p.lambda_s - bpa * y[n - 1] - p.gamma * m[n - 1]
    return out


@dataclass
class OdeSolution:
    """Numerical solution on a strictly increasing tau grid."""

    taus: np.ndarray
    x: np.ndarray  # shape (len(taus), N)
    y: np.ndarray
    rtol: float
    atol: float
    n_rhs_evals: int

    def state_at(self, i: int) -> FluidState:
        return FluidState(self.x[i], self.y[i])

    @property
    def final(self) -> FluidState:
        return FluidState(self.x[-1], self.y[-1])


def _clamp(states: np.ndarray, tol: float) -> np.ndarray:
    """Zero small negative round-off; anything below -100*tol is a real bug."""
    floor = -100.0 * tol
    low = states.min()
    if low < floor:
        raise NegativeState(f"solution component reached {low:.3e}")
    return np.maximum(states, 0.0)


def integrate(
    x0: np.ndarray,
    y0: np.ndarray,
    params: ModelParams,
    tau_max: float,
    tol: float = DEFAULT_TOL,
    grid: np.ndarray | None = None,
) -> OdeSolution:
    """Integrate the fluid system over [0, tau_max] with rtol = atol = tol.

    With `grid` given, states are reported on it (it must start at 0 and end
    at tau_max); otherwise the integrator's accepted steps form the grid.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    y0 = np.asarray(y0, dtype=np.float64)
    n = params.n_levels
    if x0.shape != (n,) or y0.shape != (n,):
        raise ValueError("initial data dimension does not match n_levels")
    if (x0 < 0).any() or (y0 < 0).any():
        raise ValueError("initial data must be nonnegative")
    z0 = np.concatenate([x0, y0])
    if tau_max == 0.0:
        return OdeSolution(np.array([0.0]), x0[None, :].copy(),
                           y0[None, :].copy(), tol, tol, 0)
    sol = solve_ivp(
        _rhs_flat, (0.0, tau_max), z0, args=(params,), method="RK45",
        rtol=tol, atol=tol, t_eval=grid, dense_output=False,
    )
    if not sol.success:
        raise StepUnderflow(sol.message)
    states = _clamp(sol.y.T, tol)
    return OdeSolution(sol.t, states[:, :n], states[:, n:], tol, tol,
                       sol.nfev)


def integrate_until_stationary(
    params: ModelParams,
    x0: np.ndarray,
    y0: np.ndarray,
    rhs_tol: float = 1e-10,
    tau_block: float = 50.0,
    tau_max: float = 2000.0,
    tol: float = DEFAULT_TOL,
) -> tuple[FluidState, bool, float]:
    """Run the flow in blocks of tau_block until sup-norm of the right-hand
    side drops below rhs_tol or the tau budget is exhausted.

    Returns (state, converged, tau_used); converged=False means the budget
    ran out first, which near the fixed point usually reflects the integrator
    noise floor rather than a real transient.
    """
    state = FluidState(np.asarray(x0, dtype=np.float64),
                       np.asarray(y0, dtype=np.float64))
    tau = 0.0
    while True:
        dx, dy = rhs(state, params)
        if max(np.abs(dx).max(), np.abs(dy).max()) < rhs_tol:
            return state, True, tau
        if tau >= tau_max:
            return state, False, tau
        sol = integrate(state.x, state.y, params, tau_block, tol=tol,
                        grid=np.array([0.0, tau_block]))
        state = sol.final
        tau += tau_block


@dataclass
class ComparisonReport:
    """Outcome of the two-trajectory ordering check on a shared grid."""

    taus: np.ndarray
    x_ok: np.ndarray  # per level: x_a <= x_b + tol at every grid point
    y_ok: np.ndarray  # per level: y_a >= y_b - tol at every grid point
    max_violation: float

    @property
    def ok(self) -> bool:
        return bool(self.x_ok.all() and self.y_ok.all())


def _rhs_pair(t: float, z: np.ndarray, p: ModelParams) -> np.ndarray:
    half = z.shape[0] // 2
    return np.concatenate([_rhs_flat(t, z[:half], p), _rhs_flat(t, z[half:], p)])


def check_comparison(
    pair_a: FluidState,
    pair_b: FluidState,
    params: ModelParams,
    tau_max: float,
    tol: float = 1e-8,
    n_grid: int = 201,
) -> ComparisonReport:
    """Verify the comparison principle: componentwise x_a <= x_b, y_a >= y_b
    at tau = 0 must propagate to every later time.

    Raises HypothesisViolated when the initial ordering fails. Both systems
    are integrated jointly (one stacked solve, shared adaptive steps) at a
    tolerance two orders below tol, so apparent ordering violations reflect
    the dynamics rather than independent discretization noise.
    """
    if (pair_a.x > pair_b.x).any() or (pair_a.y < pair_b.y).any():
        raise HypothesisViolated(
            "need x_a <= x_b and y_a >= y_b componentwise at tau = 0"
        )
    grid = np.linspace(0.0, tau_max, n_grid)
    z0 = np.concatenate([pair_a.x, pair_a.y, pair_b.x, pair_b.y])
    itol = min(tol / 100.0, DEFAULT_TOL)
    sol = solve_ivp(_rhs_pair, (0.0, tau_max), z0, args=(params,),
                    method="RK45", rtol=itol, atol=itol, t_eval=grid)
    if not sol.success:
        raise StepUnderflow(sol.message)
    n = params.n_levels
    states = sol.y.T
    x_gap = states[:, :n] - states[:, 2 * n:3 * n]          # should stay <= 0
    y_gap = states[:, 3 * n:] - states[:, n:2 * n]
    x_ok = (x_gap <= tol).all(axis=0)
    y_ok = (y_gap <= tol).all(axis=0)
    max_violation = float(max(x_gap.max(), y_gap.max(), 0.0))
    return ComparisonReport(grid, x_ok, y_ok, max_violation)
