"""Discretization and solver parameters shared across modules."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

__all__ = ["ModelParams"]


@dataclass(frozen=True)
class ModelParams:
    """Grid, horizon and tolerance settings.

    The time step always equals the age step (unit CFL), so transport along
    characteristics is exact and dt is never set independently.
    """

    eps: float = 1.0
    x_max: float = 20.0
    n_cells: int = 512
    t_end: float = 50.0
    tol_fixed_point: float = 1e-12
    tol_root: float = 1e-12
    delta_weight: float | None = None  # defaults to the kernel's delta at use sites

    def __post_init__(self):
        if self.x_max <= 0:
            raise ConfigError("x_max must be positive")
        if self.n_cells < 16:
            raise ConfigError("n_cells >= 16 required")
        if self.t_end < 0:
            raise ConfigError("t_end must be nonnegative")
        if self.eps < 0:
            raise ConfigError("eps must be nonnegative")
        for name in ("tol_fixed_point", "tol_root"):
            tol = getattr(self, name)
            if not (0 < tol <= 1e-4):
                raise ConfigError(f"{name} must lie in (0, 1e-4]")
        if self.delta_weight is not None and self.delta_weight <= 0:
            raise ConfigError("delta_weight must be positive")

    @property
    def dx(self) -> float:
        return self.x_max / self.n_cells

    @property
    def dt(self) -> float:
        return self.dx

    def grid(self) -> np.ndarray:
        return np.linspace(0.0, self.x_max, self.n_cells + 1)

    def n_steps(self, t_end: float | None = None) -> int:
        horizon = self.t_end if t_end is None else t_end
        return max(1, int(round(horizon / self.dt)))
