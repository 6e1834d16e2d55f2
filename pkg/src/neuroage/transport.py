"""Time integration of the nonlinear density equation along characteristics.

The time step equals the age step, so transport is an exact one-cell shift
and the only per-step physics is the discharge exponential and the activity
closure.  Conservation is enforced structurally: the inflow cell receives
exactly the mass discharged during the step (plus the truncation-tail
outflow), so the discrete mass is constant up to float roundoff and the
per-step renormalization factor stays within ulps of one.

The recorded discharge series p(t) uses the plain quadrature of the rate
against the updated density; with an instantaneous kernel the closure
activity equals that p, so the no-delay model and the Dirac-kernel path are
the same code.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ClosureError, DomainError, IntegratorError
from .kernels import DiracKernel, discrete_weights
from .params import ModelParams
from .rates import StepRate

__all__ = [
    "DensityState",
    "ActivityHistory",
    "Trajectory",
    "activity_no_delay",
    "activity_delay",
    "step_advance",
    "run",
    "contraction_probe",
]

_MAX_CLOSURE_ITER = 1000


@dataclass
class DensityState:
    """Grid density with its time stamp."""

    x: np.ndarray
    f: np.ndarray
    t: float = 0.0

    @property
    def dx(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def mass(self) -> float:
        return float(self.f.sum() * self.dx)


class ActivityHistory:
    """Ring buffer of past discharge values with kernel quadrature weights.

    Slot k holds p(t - k*dt); the buffer covers the truncated kernel
    horizon.  Fresh buffers are filled with a constant pre-history value
    (the stationary activity when starting near equilibrium, otherwise the
    closure value of the initial density).
    """

    def __init__(self, kernel, dt: float, prehistory: float):
        self.kernel = kernel
        self.dt = dt
        self.y, self.weights = discrete_weights(kernel, dt)
        self.values = np.full(len(self.y), float(prehistory))

    def push(self, p: float) -> None:
        self.values = np.roll(self.values, 1)
        self.values[0] = p

    @property
    def current(self) -> float:
        return float(self.values[0])

    def tail_contribution(self) -> float:
        """Weighted sum over strictly past slots, as seen from the next step."""
        if len(self.weights) == 1:
            return 0.0
        return float(self.weights[1:] @ self.values[:-1])


def activity_delay(history: ActivityHistory, kernel=None) -> float:
    """Network activity from the discharge history: sum_k w_k p(t - y_k).

    A Dirac kernel short-circuits to the newest discharge value.
    """
    if isinstance(history.kernel, DiracKernel):
        return history.current
    return float(history.weights @ history.values)


def _plain_activity(f: np.ndarray, x: np.ndarray, dx: float, model, eps: float, m: float) -> float:
    rates = np.asarray(model.rate(x, eps * m), dtype=float)
    return float((rates * f).sum() * dx)


def _solve_scalar_closure(fun, warm: float, upper: float, tol: float,
                          is_step: bool, context: str) -> tuple[float, int]:
    """Solve m = fun(m) on [0, upper], warm-started.

    Smooth rates use a damped fixed point; the step rate's jump function is
    handled by bisection on fun(m) - m, with a scan fallback that picks the
    sign change nearest the warm start when there are several.
    """
    if not is_step:
        m = min(max(warm, 0.0), upper)
        damping = 0.6
        for it in range(1, _MAX_CLOSURE_ITER + 1):
            m_next = (1.0 - damping) * m + damping * fun(m)
            if abs(m_next - m) <= max(tol * max(1.0, abs(m_next)), 1e-16):
                return m_next, it
            m = m_next
        raise ClosureError(
            f"{context}: fixed point did not converge in {_MAX_CLOSURE_ITER} iterations "
            f"(last m={m})")

    # step rate: the residual is piecewise linear with slope -1 between
    # threshold/grid crossings, so the undamped fixed point lands on the
    # exact piece root in a couple of sweeps whenever the indicator
    # pattern stabilizes; scan + bisection only on cycling.
    m = min(max(warm, 0.0), upper)
    for it in range(1, 13):
        m_next = fun(m)
        if abs(m_next - m) <= max(tol * max(1.0, abs(m_next)), 1e-16):
            return m_next, it + 1
        m = m_next

    h = lambda v: fun(v) - v
    lo, hi = 0.0, upper
    f_lo, f_hi = h(lo), h(hi)
    if f_lo < 0 or f_hi > 0:
        raise ClosureError(f"{context}: no sign change on [0, {upper}]")
    evals = 15
    # scan for multiple crossings; continuation picks the one nearest warm
    grid = np.linspace(lo, hi, 65)
    vals = np.array([h(g) for g in grid])
    evals += len(grid)
    brackets = [(grid[i], grid[i + 1]) for i in range(64) if vals[i] >= 0 > vals[i + 1]]
    if not brackets:
        brackets = [(lo, hi)]
    roots = []
    for a, b in brackets:
        fa = h(a)
        while b - a > max(tol, 1e-15):
            c = 0.5 * (a + b)
            fc = h(c)
            evals += 1
            if fa >= 0 and fc < 0:
                b = c
            elif fc >= 0:
                a, fa = c, fc
            else:
                b = c
        roots.append(0.5 * (a + b))
    m = min(roots, key=lambda r: abs(r - warm))
    return m, evals


def activity_no_delay(state: DensityState, model, eps: float,
                      params: ModelParams, warm: float | None = None) -> float:
    """Activity m solving m = integral of a(x, eps*m) against the density.

    The quadrature is the plain cell sum shared with the mass functional,
    so a constant rate on a unit-mass density returns the rate exactly.
    """
    if state.mass <= 0:
        raise DomainError("density must have positive mass")
    x, f, dx = state.x, state.f, state.dx
    fun = lambda m: _plain_activity(f, x, dx, model, eps, m)
    upper = model.a_max * state.mass + 1.0
    warm_val = warm if warm is not None else fun(0.0)
    m, _ = _solve_scalar_closure(fun, warm_val, upper, params.tol_fixed_point,
                                 isinstance(model, StepRate), "activity closure")
    return m


@dataclass
class StepDiagnostics:
    m: float
    p: float
    mass_before_renorm: float
    renorm_factor: float
    closure_evals: int


def _advance(f: np.ndarray, x: np.ndarray, dx: float, model, eps: float, m: float
             ) -> np.ndarray:
    """One exact-transport update at closure activity m.

    Interior cells shift right with the per-cell discharge exponential; the
    inflow cell receives exactly the discharged mass plus the tail outflow,
    which makes the update conservative by telescoping.
    """
    rates = np.asarray(model.rate(x, eps * m), dtype=float)
    decay = np.exp(-rates * dx)
    f_new = np.empty_like(f)
    f_new[1:] = f[:-1] * decay[:-1]
    discharged = float((f[:-1] * (1.0 - decay[:-1])).sum() * dx) + float(f[-1] * dx)
    f_new[0] = discharged / dx
    return f_new


def step_advance(state: DensityState, history: ActivityHistory, model, eps: float,
                 params: ModelParams, warm: float | None = None
                 ) -> tuple[DensityState, StepDiagnostics]:
    """Advance one step: solve the closure at the new time, update, renormalize.

    The closure activity m* satisfies m = w0 * p_new(m) + (history terms),
    where p_new(m) is the plain-quadrature discharge of the provisionally
    updated density; with a Dirac kernel this is exactly m = p_new(m).
    """
    x, f, dx = state.x, state.f, state.dx
    w0 = float(history.weights[0])
    hist = history.tail_contribution()

    def closure_rhs(m: float) -> float:
        f_new = _advance(f, x, dx, model, eps, m)
        return w0 * _plain_activity(f_new, x, dx, model, eps, m) + hist

    upper = model.a_max * state.mass + hist + 1.0
    warm_val = warm if warm is not None else history.current
    m_star, evals = _solve_scalar_closure(
        closure_rhs, warm_val, upper, params.tol_fixed_point,
        isinstance(model, StepRate), f"step closure at t={state.t + dx:.6g}")

    f_new = _advance(f, x, dx, model, eps, m_star)
    mass_raw = float(f_new.sum() * dx)
    if not np.isfinite(mass_raw) or np.any(f_new < 0) or not np.isfinite(m_star):
        raise IntegratorError(f"invalid state at t={state.t + dx:.6g}")
    factor = state.mass / mass_raw
    f_new = f_new * factor
    p_new = _plain_activity(f_new, x, dx, model, eps, m_star)
    history.push(p_new)
    next_state = DensityState(x=x, f=f_new, t=state.t + dx)
    return next_state, StepDiagnostics(m_star, p_new, mass_raw, factor, evals)


@dataclass
class Trajectory:
    """Time series and snapshots recorded by a run."""

    t: np.ndarray
    m: np.ndarray
    p: np.ndarray
    mass_raw: np.ndarray
    renorm: np.ndarray
    dist: np.ndarray | None
    snapshot_t: list[float] = field(default_factory=list)
    snapshots: list[np.ndarray] = field(default_factory=list)
    f_final: np.ndarray | None = None
    f_min: float = 0.0
    f_max: float = 0.0
    closure_evals: list[int] = field(default_factory=list)
    fault: str | None = None

    @property
    def cumulative_renorm(self) -> float:
        return float(np.prod(self.renorm))

    @property
    def max_mass_drift(self) -> float:
        return float(np.max(np.abs(self.mass_raw - 1.0))) if len(self.mass_raw) else 0.0


def run(f0: np.ndarray, model, kernel, eps: float, params: ModelParams, *,
        steady=None, reference: np.ndarray | None = None,
        prehistory: float | None = None, snapshot_stride: int = 0,
        t_end: float | None = None) -> Trajectory:
    """Integrate to the horizon, recording m, p, mass and distance series.

    f0 is projected to exact unit mass.  Step-rate runs require 0 <= f0 <= 1
    before projection.  When a stationary state (or an explicit reference
    density) is supplied, the L1 distance to it is recorded per step.  Any
    step fault aborts the run with the last valid state persisted on the
    raised error.
    """
    x = params.grid()
    f0 = np.asarray(f0, dtype=float)
    if f0.shape != x.shape:
        raise DomainError(f"f0 must live on the {len(x)}-point age grid")
    if np.any(f0 < 0):
        raise DomainError("f0 must be nonnegative")
    if isinstance(model, StepRate) and np.any(f0 > 1.0 + 1e-10):
        raise DomainError("step-rate runs require 0 <= f0 <= 1")
    f0 = f0 / (f0.sum() * params.dx)

    if reference is None and steady is not None:
        reference = steady.f
    state = DensityState(x=x, f=f0.copy(), t=0.0)

    if prehistory is None:
        prehistory = steady.m if steady is not None else activity_no_delay(
            state, model, eps, params)
    history = ActivityHistory(kernel, params.dt, prehistory)

    n = params.n_steps(t_end)
    t_arr = np.empty(n + 1)
    m_arr = np.empty(n + 1)
    p_arr = np.empty(n + 1)
    mass_arr = np.empty(n + 1)
    renorm_arr = np.ones(n + 1)
    dist_arr = np.empty(n + 1) if reference is not None else None

    p0 = _plain_activity(state.f, x, params.dx, model, eps, prehistory)
    t_arr[0], m_arr[0], p_arr[0], mass_arr[0] = 0.0, prehistory, p0, state.mass
    if dist_arr is not None:
        dist_arr[0] = float(np.abs(state.f - reference).sum() * params.dx)

    traj = Trajectory(t=t_arr, m=m_arr, p=p_arr, mass_raw=mass_arr,
                      renorm=renorm_arr, dist=dist_arr)
    traj.f_min, traj.f_max = float(state.f.min()), float(state.f.max())
    if snapshot_stride > 0:
        traj.snapshot_t.append(0.0)
        traj.snapshots.append(state.f.copy())

    warm = m_arr[0]
    for k in range(1, n + 1):
        try:
            state, diag = step_advance(state, history, model, eps, params, warm=warm)
        except (ClosureError, IntegratorError) as exc:
            traj.t = t_arr[:k]
            traj.m = m_arr[:k]
            traj.p = p_arr[:k]
            traj.mass_raw = mass_arr[:k]
            traj.renorm = renorm_arr[:k]
            if dist_arr is not None:
                traj.dist = dist_arr[:k]
            traj.f_final = state.f.copy()
            traj.fault = str(exc)
            raise IntegratorError(str(exc), record=traj) from exc
        warm = diag.m
        t_arr[k], m_arr[k], p_arr[k] = state.t, diag.m, diag.p
        mass_arr[k], renorm_arr[k] = diag.mass_before_renorm, diag.renorm_factor
        if dist_arr is not None:
            dist_arr[k] = float(np.abs(state.f - reference).sum() * params.dx)
        traj.closure_evals.append(diag.closure_evals)
        traj.f_min = min(traj.f_min, float(state.f.min()))
        traj.f_max = max(traj.f_max, float(state.f.max()))
        if snapshot_stride > 0 and k % snapshot_stride == 0:
            traj.snapshot_t.append(state.t)
            traj.snapshots.append(state.f.copy())

    traj.f_final = state.f.copy()
    return traj


def contraction_probe(model, eps: float, f0: np.ndarray, T: float,
                      samples: int, params: ModelParams, kernel=None,
                      seed: int = 0) -> float:
    """Max ratio ||J(m1)-J(m2)||_inf / ||m1-m2||_inf over random path pairs.

    J maps an activity path to the delayed discharge it induces when the
    density is transported along characteristics under that path.  Paths
    are piecewise constant on the step grid, bounded above by the maximal
    rate and below by half the rest-input discharge of f0: the closure
    iteration only ever visits that band, and the rate's input sensitivity
    is unbounded near zero input at strong connectivity, so sampling
    unreachable near-zero activities would not witness the contraction.
    A constant rate gives ratio zero exactly since the discharge does not
    depend on the path.
    """
    from ._rng import stream

    if samples < 1:
        raise ValueError("samples >= 1 required")
    x = params.grid()
    dx = params.dx
    n = max(1, min(8, int(round(T / dx))))
    f0 = np.asarray(f0, dtype=float)
    f0 = f0 / (f0.sum() * dx)
    if kernel is None:
        kernel = DiracKernel()
    _, weights = discrete_weights(kernel, dx)

    def discharge_path(m_path: np.ndarray) -> np.ndarray:
        f = f0.copy()
        p = np.empty(n)
        for i in range(n):
            m_i = m_path[i]
            rates = np.asarray(model.rate(x, eps * m_i), dtype=float)
            decay = np.exp(-rates * dx)
            f_shift = np.empty_like(f)
            f_shift[1:] = f[:-1] * decay[:-1]
            f_shift[0] = 0.0
            # renewal cell appears on both sides of the quadrature
            inflow_gain = 1.0 - rates[0] * dx
            p_i = float((rates[1:] * f_shift[1:]).sum() * dx) / max(inflow_gain, 1e-12)
            f_shift[0] = p_i
            f = f_shift
            p[i] = p_i
        return p

    def delayed(p: np.ndarray) -> np.ndarray:
        out = np.empty(n)
        for i in range(n):
            acc = 0.0
            for k in range(min(i + 1, len(weights))):
                acc += weights[k] * p[i - k]
            out[i] = acc
        return out

    rest_rates = np.asarray(model.rate(x, 0.0), dtype=float)
    lo = 0.5 * float((rest_rates * f0).sum() * dx)
    hi = model.a_max * float(f0.sum() * dx)

    rng = stream(seed, 3)
    ratio = 0.0
    for _ in range(samples):
        m1 = rng.uniform(lo, hi, n)
        m2 = rng.uniform(lo, hi, n)
        denom = float(np.max(np.abs(m1 - m2)))
        if denom == 0.0:
            continue
        j1 = delayed(discharge_path(m1))
        j2 = delayed(discharge_path(m2))
        ratio = max(ratio, float(np.max(np.abs(j1 - j2))) / denom)
    return ratio
