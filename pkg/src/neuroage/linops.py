"""Discretized linearized generators around a stationary state and their spectra.

Assembly conventions shared with the transport solver: upwind differences,
plain cell-sum quadrature for the activity functionals, Dirac inflows as
1/dx sources into the first cell, and reinjection of the age-truncation
outflow into the renewal row.  With the feedback gain computed by the same
discrete quadrature, the column sums of every mass-conserving kind vanish
exactly, so the zero mode is structural rather than approximate.
"""

from __future__ import annotations

import tempfile
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ConvergenceError, RegimeError
from .kernels import DiracKernel, discrete_weights
from .params import ModelParams
from .rates import StepRate
from .steady import SteadyState

__all__ = [
    "OperatorMatrix",
    "SpectrumReport",
    "assemble_smooth_nodelay",
    "assemble_delay_block",
    "assemble_step",
    "assemble",
    "dissipative_part",
    "compute_spectrum",
    "semigroup_decay_probe",
    "constants_adjoint_defect",
    "kernel_direction_defect",
]

_DENSE_LIMIT = 4096


@dataclass
class OperatorMatrix:
    """Dense generator on the age grid (optionally extended by a delay-age grid)."""

    matrix: np.ndarray
    kind: str
    eps: float
    kappa: float | None
    sigma_eps: float | None
    delta_weight: float
    x: np.ndarray
    y: np.ndarray | None
    n_age: int
    norm_weights: np.ndarray
    steady_f: np.ndarray | None = None

    @property
    def dx(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def _norm_weights(x: np.ndarray, y: np.ndarray | None, delta: float) -> np.ndarray:
    dx = float(x[1] - x[0])
    w = np.full(len(x), dx)
    if y is not None:
        dy = float(y[1] - y[0]) if len(y) > 1 else dx
        w = np.concatenate([w, np.exp(-delta * y) * dy])
    return w


def _transport_absorption(x: np.ndarray, rates: np.ndarray) -> np.ndarray:
    n = len(x)
    dx = float(x[1] - x[0])
    mat = np.zeros((n, n))
    idx = np.arange(n)
    mat[idx, idx] = -1.0 / dx - rates
    mat[idx[1:], idx[:-1]] += 1.0 / dx
    return mat


def assemble_smooth_nodelay(steady: SteadyState, model, eps: float,
                            params: ModelParams) -> OperatorMatrix:
    """Generator of the no-delay variation equation for a differentiable rate.

    Requires the discrete feedback gain kappa < 1; the boundary variation is
    the renewal functional scaled by 1/(1-kappa), entering cell 0 with
    weight 1/dx.
    """
    x = params.grid()
    dx = params.dx
    rates = np.asarray(model.rate(x, eps * steady.m), dtype=float)
    apf = eps * np.asarray(model.rate_dmu(x, eps * steady.m), dtype=float) * steady.f
    kappa = float(apf.sum() * dx)
    if kappa >= 1.0:
        raise RegimeError(f"feedback gain kappa={kappa:.4g} >= 1: "
                          "boundary closure undefined at this connectivity")
    mvec = rates * dx / (1.0 - kappa)
    mat = _transport_absorption(x, rates)
    mat -= np.outer(apf, mvec)
    mat[0, :] += mvec / dx
    mat[0, -1] += 1.0 / dx  # truncation outflow reinjected into the renewal row
    delta = params.delta_weight if params.delta_weight is not None else 1.0
    return OperatorMatrix(mat, "smooth_nodelay", eps, kappa, None, delta, x, None,
                          len(x), _norm_weights(x, None, delta), steady.f.copy())


def assemble_delay_block(steady: SteadyState, model, kernel, eps: float,
                         params: ModelParams) -> OperatorMatrix:
    """Generator of the coupled (density variation, activity-age) system.

    A Dirac kernel eliminates the activity block exactly (the delayed
    activity equals the boundary variation), so it returns the no-delay
    assembly unchanged.
    """
    if isinstance(kernel, DiracKernel):
        return assemble_smooth_nodelay(steady, model, eps, params)
    x = params.grid()
    dx = params.dx
    y, weights = discrete_weights(kernel, dx)
    n, k = len(x), len(y)
    rates = np.asarray(model.rate(x, eps * steady.m), dtype=float)
    apf = eps * np.asarray(model.rate_dmu(x, eps * steady.m), dtype=float) * steady.f
    kappa = float(apf.sum() * dx)

    mat = np.zeros((n + k, n + k))
    mat[:n, :n] = _transport_absorption(x, rates)
    mat[0, n - 1] += 1.0 / dx
    mat[:n, n:] -= np.outer(apf, weights)
    # boundary variation: renewal functional plus kappa times delayed activity
    mat[0, :n] += rates
    mat[0, n:] += kappa * weights / dx
    dy = float(y[1] - y[0]) if k > 1 else dx
    idx = np.arange(k)
    mat[n + idx, n + idx] -= 1.0 / dy
    mat[n + idx[1:], n + idx[:-1]] += 1.0 / dy
    mat[n, :n] += rates
    mat[n, n:] += kappa * weights / dy
    delta = params.delta_weight if params.delta_weight is not None else kernel.delta
    return OperatorMatrix(mat, "smooth_delay_block", eps, kappa, None, delta, x, y,
                          n, _norm_weights(x, y, delta), steady.f.copy())


def assemble_step(steady: SteadyState, model: StepRate, eps: float,
                  params: ModelParams, with_delay: bool = False,
                  kernel=None) -> OperatorMatrix:
    """Generator of the step-rate linear system around its stationary state.

    The drift has no activity coupling (the threshold motion is a nonlinear
    remainder), so the optional activity block is driven by the density
    block only and the system is block triangular.
    """
    x = params.grid()
    dx = params.dx
    sigma_eps = steady.sigma_eps if steady.sigma_eps is not None else float(
        model.sigma(eps * steady.m))
    rates = (x > sigma_eps).astype(float)
    if not with_delay or kernel is None or isinstance(kernel, DiracKernel):
        mat = _transport_absorption(x, rates)
        mat[0, :] += rates
        mat[0, -1] += 1.0 / dx
        delta = params.delta_weight if params.delta_weight is not None else 1.0
        return OperatorMatrix(mat, "step_nodelay", eps, None, sigma_eps, delta, x,
                              None, len(x), _norm_weights(x, None, delta),
                              steady.f.copy())
    y, _ = discrete_weights(kernel, dx)
    n, k = len(x), len(y)
    mat = np.zeros((n + k, n + k))
    mat[:n, :n] = _transport_absorption(x, rates)
    mat[0, n - 1] += 1.0 / dx
    mat[0, :n] += rates
    dy = float(y[1] - y[0]) if k > 1 else dx
    idx = np.arange(k)
    mat[n + idx, n + idx] -= 1.0 / dy
    mat[n + idx[1:], n + idx[:-1]] += 1.0 / dy
    mat[n, :n] += rates
    delta = params.delta_weight if params.delta_weight is not None else kernel.delta
    return OperatorMatrix(mat, "step_delay_block", eps, None, sigma_eps, delta, x, y,
                          n, _norm_weights(x, y, delta), steady.f.copy())


def assemble(steady: SteadyState, model, kernel, eps: float,
             params: ModelParams) -> OperatorMatrix:
    """Dispatch on the model family and kernel."""
    if isinstance(model, StepRate):
        return assemble_step(steady, model, eps, params,
                             with_delay=not isinstance(kernel, DiracKernel),
                             kernel=kernel)
    return assemble_delay_block(steady, model, kernel, eps, params)


def dissipative_part(steady: SteadyState, model, eps: float, params: ModelParams,
                     kernel=None) -> OperatorMatrix:
    """Transport plus absorption only: sources, couplings and reinjection removed."""
    x = params.grid()
    dx = params.dx
    if isinstance(model, StepRate):
        sigma_eps = steady.sigma_eps if steady.sigma_eps is not None else float(
            model.sigma(eps * steady.m))
        rates = (x > sigma_eps).astype(float)
        sig = sigma_eps
    else:
        rates = np.asarray(model.rate(x, eps * steady.m), dtype=float)
        sig = None
    if kernel is None or isinstance(kernel, DiracKernel):
        mat = _transport_absorption(x, rates)
        delta = params.delta_weight if params.delta_weight is not None else 1.0
        return OperatorMatrix(mat, "dissipative", eps, None, sig, delta, x, None,
                              len(x), _norm_weights(x, None, delta))
    y, _ = discrete_weights(kernel, dx)
    n, k = len(x), len(y)
    mat = np.zeros((n + k, n + k))
    mat[:n, :n] = _transport_absorption(x, rates)
    dy = float(y[1] - y[0]) if k > 1 else dx
    idx = np.arange(k)
    mat[n + idx, n + idx] -= 1.0 / dy
    mat[n + idx[1:], n + idx[:-1]] += 1.0 / dy
    delta = params.delta_weight if params.delta_weight is not None else kernel.delta
    return OperatorMatrix(mat, "dissipative_block", eps, None, sig, delta, x, y,
                          n, _norm_weights(x, y, delta))


@dataclass
class SpectrumReport:
    """Eigenvalues sorted by descending real part with gap diagnostics."""

    eigenvalues: np.ndarray
    zero_mode_error: float
    gap: float
    zero_eigvec_vs_f: float | None = None
    kind: str = ""
    n: int = 0

    @property
    def leading(self) -> complex:
        return complex(self.eigenvalues[0])


def compute_spectrum(op: OperatorMatrix) -> SpectrumReport:
    """Full dense eigendecomposition with zero-mode and gap extraction.

    The gap excludes a guard ball of radius 10x the zero-mode error around
    the leading eigenvalue.  For no-delay kinds the leading eigenvector is
    compared to the stationary profile in L1.
    """
    if op.dim > _DENSE_LIMIT:
        raise ValueError(f"matrix dimension {op.dim} exceeds the dense budget {_DENSE_LIMIT}")
    try:
        eigvals, eigvecs = scipy.linalg.eig(op.matrix)
    except np.linalg.LinAlgError as exc:
        path = tempfile.mktemp(prefix="neuroage_matrix_", suffix=".npy")
        np.save(path, op.matrix)
        raise ConvergenceError(f"eigensolver failed ({exc}); matrix dumped to {path}") from exc
    order = np.argsort(-eigvals.real)
    eigvals = eigvals[order]
    eigvecs = eigvecs[:, order]

    lam0 = eigvals[0]
    zme = float(abs(lam0))
    radius = max(10.0 * zme, 1e-10)
    rest = eigvals[np.abs(eigvals - lam0) > radius]
    gap = float(-np.max(rest.real)) if len(rest) else float("inf")

    dist = None
    if op.steady_f is not None and op.kind in ("smooth_nodelay", "step_nodelay"):
        vec = eigvecs[:op.n_age, 0]
        if np.max(np.abs(vec.imag)) < 1e-8 * max(np.max(np.abs(vec.real)), 1e-300):
            v = vec.real
            mass = float(v.sum() * op.dx)
            if abs(mass) > 1e-12:
                v = v / mass
                dist = float(np.abs(v - op.steady_f).sum() * op.dx)
    return SpectrumReport(eigenvalues=eigvals, zero_mode_error=zme, gap=gap,
                          zero_eigvec_vs_f=dist, kind=op.kind, n=op.dim)


@dataclass
class DecayEnvelope:
    constant: float
    alpha: float
    r2: float
    t: np.ndarray = field(default_factory=lambda: np.empty(0))
    envelope: np.ndarray = field(default_factory=lambda: np.empty(0))


def semigroup_decay_probe(op: OperatorMatrix, horizon: float = 5.0,
                          samples: int = 20, seed: int = 0,
                          n_record: int = 64) -> DecayEnvelope:
    """Fitted decay envelope of the dissipative semigroup on random data.

    Propagates exp(t * B) by repeated application of the one-step matrix
    exponential, records the worst normalized norm over the samples, and
    fits a line to its log on the trailing 80% of the horizon.
    """
    from ._rng import stream

    h = horizon / n_record
    prop = scipy.linalg.expm(op.matrix * h)
    rng = stream(seed, 7)
    w = op.norm_weights
    norms = np.zeros((samples, n_record + 1))
    for s in range(samples):
        g = rng.standard_normal(op.dim)
        norms[s, 0] = float(np.abs(g) @ w)
        for i in range(1, n_record + 1):
            g = prop @ g
            norms[s, i] = float(np.abs(g) @ w)
    env = np.max(norms / norms[:, :1], axis=0)
    t = np.arange(n_record + 1) * h
    mask = (t >= 0.2 * horizon) & (env > 1e-290)
    slope, intercept = np.polyfit(t[mask], np.log(env[mask]), 1)
    pred = slope * t[mask] + intercept
    resid = np.log(env[mask]) - pred
    ss_tot = float(np.sum((np.log(env[mask]) - np.log(env[mask]).mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return DecayEnvelope(constant=float(np.exp(intercept)), alpha=float(slope),
                         r2=r2, t=t, envelope=env)


def constants_adjoint_defect(op: OperatorMatrix) -> float:
    """Max norm of the mass functional composed with the generator.

    Tests the discrete counterpart of the adjoint identity on constants
    (the (1,0) direction for block kinds): exact zero for the built-in
    assemblies up to roundoff.
    """
    col = op.norm_weights[:op.n_age] @ op.matrix[:op.n_age, :]
    return float(np.max(np.abs(col)))


def kernel_direction_defect(op: OperatorMatrix, steady: SteadyState) -> float:
    """Weighted L1 norm of the generator applied to the stationary direction.

    For block kinds the activity component is the constant stationary
    activity on the delay-age grid.  For step kinds the cell containing the
    threshold is excluded, as in the steady residual: the profile kink is
    not resolvable at first order and its contribution depends on grid
    alignment rather than resolution.
    """
    if op.y is None:
        vec = steady.f
    else:
        vec = np.concatenate([steady.f, np.full(len(op.y), steady.m)])
    defect = np.abs(op.matrix @ vec) * op.norm_weights
    if op.sigma_eps is not None:
        x = op.x
        jump = np.zeros(op.dim, dtype=bool)
        jump[: op.n_age] = np.concatenate(
            [[False], (x[:-1] <= op.sigma_eps) & (x[1:] > op.sigma_eps)])
        defect = defect[~jump]
    return float(defect.sum())
