"""Delay kernels: probability distributions of signal-propagation delays.

Kernels are truncated at a horizon where the tail mass is below 1e-8 and
renormalized to unit mass, so finite history buffers suffice.  Each kernel
carries an exponential-moment exponent delta used by the weighted norms in
the spectral diagnostics; the moment integral at that exponent must be
finite (the certificate).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.stats import gamma as gamma_dist

from .errors import ConfigError, InfeasibleDeltaError

__all__ = [
    "DiracKernel",
    "ExponentialKernel",
    "GammaKernel",
    "TabulatedKernel",
    "DelayKernel",
    "MomentCertificate",
    "kernel_moment_check",
    "discrete_weights",
]

_TAIL_TARGET = 1e-9  # keeps truncated tail mass strictly below 1e-8


@dataclass(frozen=True)
class DiracKernel:
    """Instantaneous coupling: all mass at zero delay."""

    delta: float = 1.0

    @property
    def y_max(self) -> float:
        return 0.0


@dataclass(frozen=True)
class ExponentialKernel:
    """b(y) = lam * exp(-lam * y) on y >= 0."""

    lam: float = 2.0
    delta: float = 1.0
    y_max: float | None = None

    def __post_init__(self):
        if self.lam <= 0:
            raise ConfigError("lambda must be positive")
        if self.delta <= 0:
            raise ConfigError("delta must be positive")
        if self.y_max is None:
            object.__setattr__(self, "y_max", -math.log(_TAIL_TARGET) / self.lam)

    def _renorm(self) -> float:
        return 1.0 / -math.expm1(-self.lam * self.y_max)

    def density(self, y):
        y = np.asarray(y, dtype=float)
        return self._renorm() * self.lam * np.exp(-self.lam * y)

    def density_prime(self, y):
        y = np.asarray(y, dtype=float)
        return -self._renorm() * self.lam**2 * np.exp(-self.lam * y)


@dataclass(frozen=True)
class GammaKernel:
    """Gamma(shape, scale) delay density."""

    shape: float = 2.0
    scale: float = 0.5
    delta: float = 1.0
    y_max: float | None = None

    def __post_init__(self):
        if self.shape < 1:
            raise ConfigError("shape >= 1 required for an integrable density slope")
        if self.scale <= 0:
            raise ConfigError("scale must be positive")
        if self.delta <= 0:
            raise ConfigError("delta must be positive")
        if self.y_max is None:
            object.__setattr__(
                self, "y_max", float(gamma_dist(a=self.shape, scale=self.scale).isf(_TAIL_TARGET)))

    def _renorm(self) -> float:
        return 1.0 / float(gamma_dist(a=self.shape, scale=self.scale).cdf(self.y_max))

    def density(self, y):
        y = np.asarray(y, dtype=float)
        return self._renorm() * gamma_dist(a=self.shape, scale=self.scale).pdf(y)

    def density_prime(self, y):
        y = np.asarray(y, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            factor = np.where(y > 0, (self.shape - 1) / np.where(y > 0, y, 1.0) - 1.0 / self.scale, 0.0)
        return factor * self.density(y)


@dataclass(frozen=True)
class TabulatedKernel:
    """Density samples on a uniform delay grid, renormalized to unit mass."""

    y: tuple = ()
    b: tuple = ()
    delta: float = 1.0

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if y.ndim != 1 or y.shape != b.shape or len(y) < 2:
            raise ConfigError("tabulated kernel needs matching 1-d y and b samples")
        steps = np.diff(y)
        if np.any(steps <= 0) or np.max(np.abs(steps - steps[0])) > 1e-9 * steps[0]:
            raise ConfigError("tabulated kernel grid must be uniform and increasing")
        if np.any(b < 0):
            raise ConfigError("tabulated kernel density must be nonnegative")
        mass = np.trapezoid(b, y)
        if mass <= 0:
            raise ConfigError("tabulated kernel has zero mass")
        object.__setattr__(self, "y", tuple(y))
        object.__setattr__(self, "b", tuple(b / mass))

    @property
    def y_max(self) -> float:
        return self.y[-1]

    def density(self, y):
        return np.interp(np.asarray(y, dtype=float), self.y, self.b, left=0.0, right=0.0)

    def density_prime(self, y):
        ys = np.asarray(self.y)
        bs = np.asarray(self.b)
        slopes = np.gradient(bs, ys)
        return np.interp(np.asarray(y, dtype=float), ys, slopes, left=0.0, right=0.0)


DelayKernel = DiracKernel | ExponentialKernel | GammaKernel | TabulatedKernel


@dataclass
class MomentCertificate:
    value: float
    bounded: bool
    delta: float
    mass: float = 1.0
    detail: str = ""


def kernel_moment_check(kernel) -> MomentCertificate:
    """Quadrature of exp(delta*y) * (b + |b'|) over the truncated support.

    Divergent combinations (exponential kernel with delta >= lambda, gamma
    kernel with delta >= 1/scale) raise before any quadrature is attempted.
    """
    if isinstance(kernel, DiracKernel):
        return MomentCertificate(1.0, True, kernel.delta, 1.0, "point mass at zero delay")
    if isinstance(kernel, ExponentialKernel) and kernel.delta >= kernel.lam:
        raise InfeasibleDeltaError(
            f"delta={kernel.delta} >= lambda={kernel.lam}: moment diverges")
    if isinstance(kernel, GammaKernel) and kernel.delta >= 1.0 / kernel.scale:
        raise InfeasibleDeltaError(
            f"delta={kernel.delta} >= 1/scale={1.0 / kernel.scale}: moment diverges")

    def integrand(y):
        return math.exp(kernel.delta * y) * (
            float(kernel.density(y)) + abs(float(kernel.density_prime(y))))

    value, _ = quad(integrand, 0.0, kernel.y_max, limit=400)
    mass, _ = quad(lambda y: float(kernel.density(y)), 0.0, kernel.y_max, limit=400)
    return MomentCertificate(float(value), bool(np.isfinite(value)), kernel.delta, float(mass))


def discrete_weights(kernel, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature nodes and weights for history convolutions against the kernel.

    Composite trapezoid on the uniform delay grid with spacing dt, then
    renormalized so the weights sum to one exactly (the discrete analogue of
    the unit-mass invariant).  A Dirac kernel collapses to a single unit
    weight at zero delay.
    """
    if isinstance(kernel, DiracKernel):
        return np.array([0.0]), np.array([1.0])
    n = max(1, math.ceil(kernel.y_max / dt - 1e-12))
    y = np.arange(n + 1) * dt
    w = np.full(n + 1, dt)
    w[0] = w[-1] = dt / 2.0
    weights = w * np.asarray(kernel.density(y), dtype=float)
    total = weights.sum()
    if total <= 0:
        raise ConfigError("kernel weights vanish on the discrete grid")
    return y, weights / total
