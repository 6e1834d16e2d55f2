"""Stationary solutions (density profile, activity) of the network model.

For a candidate activity m the stationary transport equation integrates to
an exponential profile with cumulative rate A(x, eps*m); the activity is
fixed by a scalar consistency equation.  Smooth families use a bracketed
bisection on psi(eps, m) - 1, the step family uses the damped fixed point
m = 1 / (1 + sigma(eps*m)).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .errors import BracketError, ConvergenceError
from .params import ModelParams
from .rates import ConstantRate, StepRate, decay_modulus

__all__ = [
    "SteadyState",
    "psi_eval",
    "solve_steady",
    "steady_residual",
    "discrete_stationary",
    "MultipleRootsWarning",
]

_SCAN_INTERVALS = 256


class MultipleRootsWarning(UserWarning):
    """More than one stationary activity detected on the scan grid."""


@dataclass
class SteadyState:
    """Stationary density on the age grid with its activity and diagnostics."""

    x: np.ndarray
    f: np.ndarray
    m: float
    eps: float
    kappa: float | None
    sigma_eps: float | None
    residual: float
    roots: list[float] = field(default_factory=list)
    envelope_constant: float = 0.0
    multiple_roots: bool = False

    @property
    def dx(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def mass(self) -> float:
        return float(self.f.sum() * self.dx)


def psi_eval(model, eps: float, m: float, x_max: float = 20.0) -> float:
    """m times the truncated integral of exp(-A(x, eps*m)) over [0, x_max]."""
    if m < 0:
        raise ValueError("candidate activity must be nonnegative")
    if m == 0.0:
        return 0.0
    val, _ = quad(lambda x: np.exp(-float(model.cumulative(x, eps * m))),
                  0.0, x_max, epsabs=1e-13, epsrel=1e-13, limit=400)
    return m * val


def _scan_roots(fun, lo: float, hi: float, tol: float) -> list[float]:
    """Bisection roots of fun on every sign-change subinterval of [lo, hi]."""
    grid = np.linspace(lo, hi, _SCAN_INTERVALS + 1)
    vals = np.array([fun(g) for g in grid])
    roots = []
    for i in range(_SCAN_INTERVALS):
        a, b, fa, fb = grid[i], grid[i + 1], vals[i], vals[i + 1]
        if fa == 0.0:
            roots.append(a)
            continue
        if fa * fb >= 0:
            continue
        while b - a > tol:
            c = 0.5 * (a + b)
            fc = fun(c)
            if fc == 0.0:
                a = b = c
                break
            if fa * fc < 0:
                b, fb = c, fc
            else:
                a, fa = c, fc
        roots.append(0.5 * (a + b))
    return roots


def _step_fixed_point(model: StepRate, eps: float, tol: float) -> float:
    m = 1.0 / (1.0 + model.sigma_plus)
    damping = 0.5
    for _ in range(10_000):
        target = 1.0 / (1.0 + float(model.sigma(eps * m)))
        m_next = (1.0 - damping) * m + damping * target
        if abs(m_next - m) <= max(tol * 1e-2, 1e-16):
            # a few undamped sweeps polish the residual to roundoff
            for _ in range(4):
                m_next = 1.0 / (1.0 + float(model.sigma(eps * m_next)))
            return m_next
        m = m_next
    raise ConvergenceError("step-rate fixed point did not converge in 10^4 iterations")


def solve_steady(model, eps: float, params: ModelParams) -> SteadyState:
    """Construct the stationary state at connectivity eps.

    The grid profile is the sampled exponential of the cumulative rate,
    renormalized to exact unit discrete mass.  All roots found on a
    256-subinterval scan are reported; the smallest is canonical and a
    warning is emitted when there is more than one.
    """
    x = params.grid()
    tol = params.tol_root

    if isinstance(model, StepRate):
        m = _step_fixed_point(model, eps, tol)
        roots = _scan_roots(lambda v: v * (1.0 + float(model.sigma(eps * v))) - 1.0,
                            0.0, model.a_max + 1.0, tol)
        sigma_eps = float(model.sigma(eps * m))
        f = np.where(x <= sigma_eps, m, m * np.exp(-(x - sigma_eps)))
        kappa = None
    else:
        fun = lambda v: psi_eval(model, eps, v, params.x_max) - 1.0
        hi = model.a_max + 1.0
        if fun(0.0) * fun(hi) > 0:
            raise BracketError(f"no sign change of the activity equation on [0, {hi}]")
        roots = _scan_roots(fun, 0.0, hi, tol)
        if not roots:
            raise BracketError("scan found no stationary activity")
        m = roots[0]
        sigma_eps = None
        f = m * np.exp(-np.asarray(model.cumulative(x, eps * m), dtype=float))
        kappa = None

    if len(roots) > 1:
        warnings.warn(
            f"{len(roots)} stationary activities detected at eps={eps}; "
            "the smallest is canonical", MultipleRootsWarning)

    # exact unit discrete mass; downstream invariants rely on it
    f = f / (f.sum() * params.dx)

    if not isinstance(model, StepRate):
        apf = eps * np.asarray(model.rate_dmu(x, eps * m), dtype=float) * f
        kappa = float(apf.sum() * params.dx)

    state = SteadyState(
        x=x, f=f, m=float(m), eps=eps, kappa=kappa, sigma_eps=sigma_eps,
        residual=0.0, roots=[float(r) for r in roots],
        multiple_roots=len(roots) > 1)
    state.envelope_constant = float(np.max(f * np.exp(0.5 * model.a_min * x)))
    state.residual = steady_residual(state, model, eps)
    return state


def steady_residual(state: SteadyState, model, eps: float) -> float:
    """L1 norm of the upwind stationarity defect D+ F + a F.

    First-order in the grid spacing.  For the step family the cell
    containing the threshold is excluded: the jump is not resolvable at
    first order.
    """
    x, f, dx = state.x, state.f, state.dx
    rates = np.asarray(model.rate(x, eps * state.m), dtype=float)
    defect = (f[1:] - f[:-1]) / dx + rates[1:] * f[1:]
    keep = np.ones(len(defect), dtype=bool)
    if isinstance(model, StepRate) and state.sigma_eps is not None:
        jump = (x[:-1] <= state.sigma_eps) & (x[1:] > state.sigma_eps)
        keep &= ~jump
    return float(np.abs(defect[keep]).sum() * dx)


def discrete_stationary(model, eps: float, params: ModelParams,
                        m_init: float | None = None) -> tuple[np.ndarray, float]:
    """Exact fixed point of the transport scheme: profile and activity.

    The scheme's stationary profile is the running product of the per-cell
    decay factors; the activity solves the plain-quadrature consistency
    equation on that profile.  Used as the reference for perturbation decay
    experiments, where the O(dx) offset of the sampled profile would mask
    the exponential tail.
    """
    x = params.grid()
    dx = params.dx

    def profile(m: float) -> np.ndarray:
        rates = np.asarray(model.rate(x, eps * m), dtype=float)
        decay = np.exp(-rates[:-1] * dx)
        prof = np.concatenate([[1.0], np.cumprod(decay)])
        return prof / (prof.sum() * dx)

    def activity_of(m: float) -> float:
        prof = profile(m)
        rates = np.asarray(model.rate(x, eps * m), dtype=float)
        return float((rates * prof).sum() * dx)

    m = m_init if m_init is not None else solve_steady(model, eps, params).m
    if isinstance(model, ConstantRate):
        return profile(model.a0), float(model.a0)
    for _ in range(10_000):
        m_next = 0.5 * m + 0.5 * activity_of(m)
        if abs(m_next - m) <= max(params.tol_fixed_point * 1e-2, 1e-16):
            m = m_next
            break
        m = m_next
    else:
        raise ConvergenceError("discrete stationary activity did not converge")
    return profile(m), float(m)
