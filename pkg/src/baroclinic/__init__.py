"""Baroclinic instability of the shear flow U = (z, 0, 0) in rotating Boussinesq dynamics.

Closed-form linear theory (``dispersion``), a pseudo-spectral solver for the
geostrophic-limit model (``qg_core``), the first-order Rossby-number
expansion (``asymptotics``) and its residual in the full equations
(``residual``).
"""

__version__ = "0.1.0"

from .dispersion import (  # noqa: E402
    DomainError,
    ModeSpec,
    Params,
    critical_q,
    critical_Q,
    eigenmode_profile,
    growth_rate,
    max_growth,
    phase_speed,
)
from .grid import Grid  # noqa: E402
from .qg_core import QGModel, QGState  # noqa: E402

__all__ = [
    "DomainError",
    "ModeSpec",
    "Params",
    "critical_q",
    "critical_Q",
    "eigenmode_profile",
    "growth_rate",
    "max_growth",
    "phase_speed",
    "Grid",
    "QGModel",
    "QGState",
]
