"""Firing-rate families.

Each family maps (elapsed time x, effective input u) to a nonnegative
discharge rate a(x, u), where u is the connectivity-scaled activity.
All families are immutable and evaluation is pure, so instances are safe
to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .errors import DomainError, UnsupportedOperationError

__all__ = [
    "ConstantRate",
    "SmoothRate",
    "StepRate",
    "RateModel",
    "AssumptionCheck",
    "AssumptionReport",
    "validate_assumptions",
]


def _check_domain(x, u) -> None:
    if np.any(np.asarray(x) < 0) or np.any(np.asarray(u) < 0):
        raise DomainError("elapsed time and input must be nonnegative")


@dataclass(frozen=True)
class ConstantRate:
    """Rate independent of age and input: a(x, u) = a0 > 0."""

    a0: float = 1.0

    def __post_init__(self):
        if self.a0 <= 0:
            raise DomainError("a0 must be positive")

    @property
    def a_min(self) -> float:
        return self.a0

    @property
    def a_max(self) -> float:
        return self.a0

    def rate(self, x, u):
        _check_domain(x, u)
        return np.full(np.broadcast_shapes(np.shape(x), np.shape(u)), self.a0)

    def rate_dmu(self, x, u):
        _check_domain(x, u)
        return np.zeros(np.broadcast_shapes(np.shape(x), np.shape(u)))

    def cumulative(self, x, u):
        _check_domain(x, u)
        return self.a0 * np.asarray(x, dtype=float)


@dataclass(frozen=True)
class SmoothRate:
    """Saturating rate a(x,u) = a0 + (a1-a0)*(1-exp(-x/x_scale))*u/(mu_scale+u).

    Nondecreasing in both arguments, a(x,0) -> a0 and a(x,u) -> a1 as
    x,u -> infinity, with bounded first partials.
    """

    a0: float = 1.0
    a1: float = 2.0
    x_scale: float = 1.0
    mu_scale: float = 1.0

    def __post_init__(self):
        if self.a0 <= 0:
            raise DomainError("a0 must be positive")
        if self.a1 < self.a0:
            raise DomainError("a1 >= a0 required")
        if self.x_scale <= 0 or self.mu_scale <= 0:
            raise DomainError("x_scale and mu_scale must be positive")

    @property
    def a_min(self) -> float:
        return self.a0

    @property
    def a_max(self) -> float:
        return self.a1

    def _saturation(self, u):
        u = np.asarray(u, dtype=float)
        return u / (self.mu_scale + u)

    def rate(self, x, u):
        _check_domain(x, u)
        x = np.asarray(x, dtype=float)
        return self.a0 + (self.a1 - self.a0) * (-np.expm1(-x / self.x_scale)) * self._saturation(u)

    def rate_dmu(self, x, u):
        _check_domain(x, u)
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        return (
            (self.a1 - self.a0)
            * (-np.expm1(-x / self.x_scale))
            * self.mu_scale
            / (self.mu_scale + u) ** 2
        )

    def cumulative(self, x, u):
        # Antiderivative in x is available in closed form; it meets the
        # 1e-12 error budget exactly and is cross-checked against brute
        # quadrature in the test suite.
        _check_domain(x, u)
        x = np.asarray(x, dtype=float)
        ramp = x - self.x_scale * (-np.expm1(-x / self.x_scale))
        return self.a0 * x + (self.a1 - self.a0) * self._saturation(u) * ramp

    def cumulative_quad(self, x: float, u: float) -> float:
        """Adaptive-quadrature fallback for the cumulative rate."""
        _check_domain(x, u)
        val, _ = quad(lambda s: float(self.rate(s, u)), 0.0, float(x),
                      epsabs=1e-13, epsrel=1e-13, limit=200)
        return val


@dataclass(frozen=True)
class StepRate:
    """Hard-threshold rate a(x,u) = 1_{x > sigma(u)}.

    The threshold sigma(u) = sigma_minus + (sigma_plus - sigma_minus) *
    exp(-u/u_scale) decreases from sigma_plus at rest to sigma_minus under
    strong input; 0 <= sigma_minus < sigma_plus < 1 is required.
    """

    sigma_plus: float = 0.5
    sigma_minus: float = 0.25
    u_scale: float = 1.0

    def __post_init__(self):
        if not (0 <= self.sigma_minus < self.sigma_plus < 1):
            raise DomainError("sigma_minus < sigma_plus required, both in [0, 1)")
        if self.u_scale <= 0:
            raise DomainError("u_scale must be positive")

    @property
    def a_min(self) -> float:
        return 0.0

    @property
    def a_max(self) -> float:
        return 1.0

    def sigma(self, u):
        _check_domain(0.0, u)
        u = np.asarray(u, dtype=float)
        return self.sigma_minus + (self.sigma_plus - self.sigma_minus) * np.exp(-u / self.u_scale)

    def sigma_prime(self, u):
        u = np.asarray(u, dtype=float)
        return -(self.sigma_plus - self.sigma_minus) / self.u_scale * np.exp(-u / self.u_scale)

    def rate(self, x, u):
        _check_domain(x, u)
        x = np.asarray(x, dtype=float)
        return (x > self.sigma(u)).astype(float)

    def rate_dmu(self, x, u):
        raise UnsupportedOperationError("step rate has no classical input derivative")

    def cumulative(self, x, u):
        _check_domain(x, u)
        x = np.asarray(x, dtype=float)
        return np.maximum(x - self.sigma(u), 0.0)


RateModel = ConstantRate | SmoothRate | StepRate


def decay_modulus(model, eps: float, mu: float) -> float:
    """eps-scaled sensitivity of the rate to the input, sup over age.

    For smooth families this is eps * sup_x d_mu a(x, eps*mu); for the step
    family it is eps * |sigma'(eps*mu)|.  Vanishes as eps -> infinity.
    """
    if isinstance(model, StepRate):
        return float(eps * abs(model.sigma_prime(eps * mu)))
    if isinstance(model, ConstantRate):
        return 0.0
    x_probe = np.linspace(0.0, 60.0, 601)
    return float(eps * np.max(model.rate_dmu(x_probe, eps * mu)))


@dataclass
class AssumptionCheck:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class AssumptionReport:
    checks: list[AssumptionCheck] = field(default_factory=list)
    zeta_at_unit_mu: list[float] = field(default_factory=list)
    zeta_at_steady_mu: list[float] = field(default_factory=list)

    @property
    def violations(self) -> list[AssumptionCheck]:
        return [c for c in self.checks if not c.passed]

    @property
    def all_passed(self) -> bool:
        return not self.violations


def validate_assumptions(model, eps_grid, x_max: float = 20.0) -> AssumptionReport:
    """Sample the structural requirements on a rate model and report violations.

    Checks monotonicity in age and input on a lattice, the rest/saturation
    limits, boundedness of first partials, and the decay of the modulus
    eps * sup_x d_mu a along eps_grid.  The modulus is evaluated both at
    unit activity and at a steady-activity proxy, since the two
    quantifications differ; both columns are reported.  Report-only: no
    exceptions are raised for violations.
    """
    report = AssumptionReport()
    xs = np.linspace(0.0, x_max, 41)
    us = np.linspace(0.0, 50.0, 26)

    if isinstance(model, StepRate):
        s0 = float(model.sigma(0.0))
        s_inf = float(model.sigma(1e6))
        report.checks.append(AssumptionCheck(
            "threshold_limits",
            abs(s0 - model.sigma_plus) < 1e-12 and abs(s_inf - model.sigma_minus) < 1e-9,
            f"sigma(0)={s0}, sigma(inf)={s_inf}"))
        sp = model.sigma_prime(us)
        report.checks.append(AssumptionCheck(
            "threshold_nonincreasing", bool(np.all(sp <= 0.0)), "sigma' <= 0"))
        report.checks.append(AssumptionCheck(
            "threshold_window",
            0 <= model.sigma_minus < model.sigma_plus < 1,
            "0 <= sigma_minus < sigma_plus < 1"))
    else:
        vals = model.rate(xs[:, None], us[None, :])
        dx_mono = np.all(np.diff(vals, axis=0) >= -1e-12)
        du_mono = np.all(np.diff(vals, axis=1) >= -1e-12)
        report.checks.append(AssumptionCheck(
            "nondecreasing_in_age", bool(dx_mono),
            "a(x,u) sampled on a 41x26 lattice"))
        report.checks.append(AssumptionCheck(
            "nondecreasing_in_input", bool(du_mono),
            "a(x,u) sampled on a 41x26 lattice"))
        a_rest = float(model.rate(x_max * 4, 0.0))
        a_sat = float(model.rate(x_max * 4, 1e9))
        lim_ok = (a_rest > 0) and (a_sat >= a_rest) and np.isfinite(a_sat)
        if isinstance(model, (ConstantRate, SmoothRate)):
            lim_ok = lim_ok and abs(a_rest - model.a_min) < 1e-6 and abs(a_sat - model.a_max) < 1e-6
        report.checks.append(AssumptionCheck(
            "rest_and_saturation_limits", bool(lim_ok),
            f"a(inf,0)={a_rest}, a(inf,inf)={a_sat}"))
        # bounded first partials, crude finite differences
        h = 1e-5
        dax = (np.asarray(model.rate(xs[:, None] + h, us[None, :])) - vals) / h
        dau = (np.asarray(model.rate(xs[:, None], us[None, :] + h)) - vals) / h
        report.checks.append(AssumptionCheck(
            "bounded_partials",
            bool(np.all(np.isfinite(dax)) and np.max(np.abs(dax)) < 1e3
                 and np.max(np.abs(dau)) < 1e3),
            "finite-difference partials bounded"))

    eps_grid = list(eps_grid)
    if eps_grid:
        from .steady import solve_steady  # local import to avoid a cycle
        from .params import ModelParams
        params = ModelParams(x_max=x_max, n_cells=256)
        for eps in eps_grid:
            report.zeta_at_unit_mu.append(decay_modulus(model, eps, 1.0))
            try:
                m_proxy = solve_steady(model, eps, params).m
            except Exception:
                m_proxy = 1.0
            report.zeta_at_steady_mu.append(decay_modulus(model, eps, m_proxy))
        z = report.zeta_at_unit_mu
        tail_ok = len(z) < 3 or (z[-1] <= z[-2] + 1e-12 and z[-1] <= max(z) + 1e-12)
        report.checks.append(AssumptionCheck(
            "modulus_decays", bool(tail_ok),
            f"zeta over eps_grid at mu=1: {z}"))
    return report
