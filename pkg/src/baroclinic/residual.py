"""Defect of an approximate solution in the full rotating Boussinesq system.

The basic state U = (z, 0, 0), Theta = -y, P = -y z enters only through its
derivatives (dU/dz = 1, dP/dy = -z, dTheta/dy = -1, dP/dz - Theta = 0), so
the unbounded coordinate y never appears.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .dispersion import DomainError, Params

__all__ = [
    "EQUATIONS",
    "ResidualReport",
    "residual_fields",
    "boussinesq_residual",
    "fit_slope",
    "scaling_study",
    "write_residual_csv",
    "write_slopes_csv",
    "write_ppm",
]

EQUATIONS = ("momentum_x", "momentum_y", "momentum_z", "momentum_z_unscaled", "temperature", "divergence")


@dataclass
class ResidualReport:
    Ro: float
    l2: dict
    linf: dict
    fields: dict = field(default_factory=dict, repr=False)

    def __getattr__(self, name):
        # r_momentum_x etc. read the L2 norms
        if name.startswith("r_") and name[2:] in EQUATIONS:
            return self.l2[name[2:]]
        raise AttributeError(name)

    def rows(self):
        return [(self.Ro, eq, self.l2[eq], self.linf[eq]) for eq in EQUATIONS]


def residual_fields(fields: dict, rates: dict, grid, params: Params) -> dict:
    """Pointwise residual of each equation for total perturbation fields.

    ``fields``/``rates`` hold u, v, w, theta, p (the perturbation about the
    basic state) and their time derivatives.
    """
    for key in ("u", "v", "w", "theta", "p"):
        if key not in fields:
            raise DomainError(f"missing field {key!r}")
        if key != "p" and key not in rates:
            raise DomainError(f"missing tendency for {key!r}")
    g = grid
    Ro, B, H = params.Ro, params.B, params.H
    prod, Z = g.prod, g.zcol
    u, v, w, th, p = (fields[k] for k in ("u", "v", "w", "theta", "p"))
    U = Z  # basic flow speed
    dUdz, dPdy, dThdy = 1.0, -Z, -1.0

    def material(f, ft):
        """d/dt + (U + u) d/dx + v d/dy + Ro w d/dz, with dealiased products."""
        fx, fy, fz = g.ddx(f), g.ddy(f), g.ddz(f)
        return ft + U * fx + prod(u, fx) + prod(v, fy) + Ro * prod(w, fz)

    mz = material(w, rates["w"])
    out = dict(
        momentum_x=Ro * (material(u, rates["u"]) + Ro * w * dUdz) - v + g.ddx(p),
        momentum_y=Ro * material(v, rates["v"]) + (U + u) + (dPdy + g.ddy(p)),
        momentum_z=Ro**2 * H**2 * mz - g.ddz(p) + th,
        temperature=material(th, rates["theta"]) + v * dThdy + B * w,
        divergence=g.ddx(u) + g.ddy(v) + Ro * g.ddz(w),
    )
    if Ro > 0:
        out["momentum_z_unscaled"] = out["momentum_z"] / (Ro**2 * H**2)
    else:
        out["momentum_z_unscaled"] = mz + (th - g.ddz(p))
    return out


def boussinesq_residual(sol, params: Params | None = None, keep_fields: bool = False) -> ResidualReport:
    """L2 and max norms of the residual of ``sol`` (an ``ApproxSolution``)."""
    params = params or sol.params
    if params.Ro <= 0:
        raise DomainError("residual evaluation needs Ro > 0")
    if not sol.rates:
        raise DomainError("solution carries no tendencies")
    sol = sol.with_Ro(params.Ro) if params.Ro != sol.Ro else sol
    fields, rates = sol.assembled()
    res = residual_fields(fields, rates, sol.grid, replace_params(sol.params, params))
    l2 = {k: sol.grid.l2(res[k]) for k in EQUATIONS}
    linf = {k: float(np.max(np.abs(res[k]))) for k in EQUATIONS}
    return ResidualReport(params.Ro, l2, linf, res if keep_fields else {})


def replace_params(a: Params, b: Params) -> Params:
    if (a.B, a.H) != (b.B, b.H):
        raise DomainError("solution was built for a different B or H")
    return b


def fit_slope(x, y) -> float:
    """Least-squares slope of log y against log x."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    if len(x) < 3:
        raise DomainError(f"need at least 3 points, got {len(x)}")
    if np.any(x <= 0) or np.any(y <= 0):
        return math.nan
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def scaling_study(solutions, Ro_values=None, order: int = 1):
    """Residual reports for each Ro and the fitted log-log slope per equation.

    ``solutions`` is either one ``ApproxSolution`` (its fields are independent
    of Ro and are reassembled for every value in ``Ro_values``) or a list of
    solutions, one per Ro.
    """
    if not isinstance(solutions, (list, tuple)):
        if Ro_values is None:
            raise DomainError("Ro_values required with a single solution")
        solutions = [solutions.with_Ro(r) for r in Ro_values]
    if len(solutions) < 3:
        raise DomainError(f"need at least 3 Ro values, got {len(solutions)}")
    reports = [boussinesq_residual(s.truncated(order)) for s in solutions]
    Ros = [r.Ro for r in reports]
    slopes = {eq: fit_slope(Ros, [r.l2[eq] for r in reports]) for eq in EQUATIONS}
    return reports, slopes


def write_residual_csv(path, reports) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["Ro", "eq", "l2", "linf"])
        for rep in reports:
            for Ro, eq, l2, linf in rep.rows():
                w.writerow([format(Ro, ".17g"), eq, format(l2, ".17g"), format(linf, ".17g")])


def write_slopes_csv(path, slopes: dict) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["eq", "slope"])
        for eq, s in slopes.items():
            w.writerow([eq, format(s, ".17g")])


def write_ppm(path, image: np.ndarray) -> None:
    """Binary greyscale P6 pixmap of a 2-D array, linearly scaled to 0..255."""
    a = np.asarray(image, dtype=float)
    if a.ndim != 2:
        raise DomainError("heatmap needs a 2-D array")
    lo, hi = float(np.min(a)), float(np.max(a))
    span = hi - lo
    grey = np.zeros(a.shape, np.uint8) if span == 0 else np.round(255 * (a - lo) / span).astype(np.uint8)
    rgb = np.repeat(grey[::-1, :, None], 3, axis=2)
    with open(path, "wb") as fh:
        fh.write(f"P6\n{a.shape[1]} {a.shape[0]}\n255\n".encode("ascii"))
        fh.write(rgb.tobytes())
