"""Closed-form linear theory of the sheared Eady-type basic state.

The basic state is U = (z, 0, 0), Theta = -y on 0 <= z <= 1.  Perturbations of
the geostrophic-limit model of the form p_hat(z) exp(i xi.x + lambda t) obey

    p_hat'' = B |xi|^2 p_hat,    (z - c) p_hat' = p_hat  at z = 0, 1,

with lambda = -i xi_1 c.  Everything here is a pure function of its inputs.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

__all__ = [
    "DomainError",
    "Params",
    "ModeSpec",
    "ModeResult",
    "MaxGrowth",
    "coth",
    "discriminant",
    "phase_speed",
    "critical_q",
    "critical_Q",
    "growth_rate",
    "growth_rates",
    "max_growth",
    "eigenmode_profile",
    "stability_map",
    "write_stability_csv",
    "nondim_params",
]

BRANCHES = ("plus", "minus")
_BRACKET = (1e-6, 10.0)


class DomainError(ValueError):
    """Input outside the domain of an operation."""


@dataclass(frozen=True)
class Params:
    """Dimensionless constants of the rotating Boussinesq system.

    Parameters
    ----------
    B : float
        Burger number, > 0.
    Ro : float
        Rossby number, >= 0.
    H : float
        Aspect constant multiplying the hydrostatic line, > 0.
    """

    B: float = 1.0
    Ro: float = 0.0
    H: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.B) and self.B > 0):
            raise DomainError(f"B must be positive, got {self.B}")
        if not (math.isfinite(self.Ro) and self.Ro >= 0):
            raise DomainError(f"Ro must be non-negative, got {self.Ro}")
        if not (math.isfinite(self.H) and self.H > 0):
            raise DomainError(f"H must be positive, got {self.H}")


@dataclass(frozen=True)
class ModeSpec:
    xi1: float
    xi2: float = 0.0
    branch: str = "plus"

    def __post_init__(self):
        if self.branch not in BRANCHES:
            raise DomainError(f"branch must be one of {BRANCHES}, got {self.branch!r}")
        if self.xi1 == 0 and self.xi2 == 0:
            raise DomainError("wavenumber (0, 0) has no normal mode")

    @property
    def norm(self) -> float:
        return math.hypot(self.xi1, self.xi2)

    def q(self, B: float) -> float:
        return 0.5 * math.sqrt(B) * self.norm


@dataclass(frozen=True)
class ModeResult:
    """A normal mode p_hat(z) = R cosh(2qz) + S sinh(2qz)."""

    spec: ModeSpec
    q: float
    c: complex
    lambda_: complex
    R: complex
    S: complex

    def pressure(self, z):
        z = np.asarray(z, dtype=float)
        m = 2.0 * self.q
        return self.R * np.cosh(m * z) + self.S * np.sinh(m * z)

    def dpressure(self, z):
        z = np.asarray(z, dtype=float)
        m = 2.0 * self.q
        return m * (self.R * np.sinh(m * z) + self.S * np.cosh(m * z))

    def d2pressure(self, z):
        return (2.0 * self.q) ** 2 * self.pressure(z)

    def boundary_residuals(self) -> tuple[complex, complex]:
        """Residuals of c p'(0) + p(0) = 0 and (1 - c) p'(1) - p(1) = 0."""
        r0 = self.c * self.dpressure(0.0) + self.pressure(0.0)
        r1 = (1.0 - self.c) * self.dpressure(1.0) - self.pressure(1.0)
        return complex(r0), complex(r1)


@dataclass(frozen=True)
class MaxGrowth:
    lambda_max: float
    argmax: ModeSpec
    unstable: bool


def coth(x):
    """Hyperbolic cotangent with a series branch for |x| < 1e-4."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-4
    safe = np.where(small, 1.0, x)
    out = 1.0 / np.tanh(safe)
    xs = np.where(small, x, 1.0)
    series = 1.0 / xs + xs / 3.0 - xs**3 / 45.0
    out = np.where(small, series, out)
    return out[()] if out.ndim == 0 else out


def _xcothx_minus_one(x):
    # x coth x - 1, series below 0.1 to avoid cancellation
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 0.1
    xs = np.where(small, x, 0.0)
    x2 = xs * xs
    series = x2 / 3.0 - x2**2 / 45.0 + 2.0 * x2**3 / 945.0 - x2**4 / 4725.0
    xl = np.where(small, 1.0, x)
    direct = xl * coth(xl) - 1.0
    return np.where(small, series, direct)


def discriminant(q):
    """D(q) = q^2 + 1 - 2q coth(2q); negative exactly on the unstable window."""
    q = np.asarray(q, dtype=float)
    out = q * q - _xcothx_minus_one(2.0 * q)
    return out[()] if out.ndim == 0 else out


def _csqrt(d):
    # sqrt of a real radicand; negative -> +i |d|^(1/2)
    d = np.asarray(d, dtype=float)
    out = np.where(d >= 0, np.sqrt(np.abs(d)) + 0j, 1j * np.sqrt(np.abs(d)))
    return out[()] if out.ndim == 0 else out


def _sign(branch: str) -> float:
    if branch not in BRANCHES:
        raise DomainError(f"branch must be one of {BRANCHES}, got {branch!r}")
    return 1.0 if branch == "plus" else -1.0


def phase_speed(q, branch: str = "plus"):
    """Complex phase speed c = 1/2 +- D(q)^(1/2) / (2q)."""
    q_arr = np.asarray(q, dtype=float)
    if not np.all(np.isfinite(q_arr)) or np.any(q_arr <= 0):
        raise DomainError(f"q must be positive and finite, got {q}")
    c = 0.5 + _sign(branch) * _csqrt(discriminant(q_arr)) / (2.0 * q_arr)
    return complex(c) if np.ndim(c) == 0 else c


def _bisect(f, tol: float) -> float:
    if not tol > 0:
        raise DomainError(f"tol must be positive, got {tol}")
    lo, hi = _BRACKET
    grid = np.geomspace(lo, hi, 400)
    vals = np.array([f(x) for x in grid])
    changes = np.nonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))[0]
    if len(changes) != 1:
        raise RuntimeError(f"expected one sign change on {_BRACKET}, found {len(changes)}")
    a, b = grid[changes[0]], grid[changes[0] + 1]
    fa = f(a)
    while b - a > tol:
        mid = 0.5 * (a + b)
        fm = f(mid)
        if fm == 0:
            return float(mid)
        if np.sign(fm) == np.sign(fa):
            a, fa = mid, fm
        else:
            b = mid
    return float(0.5 * (a + b))


def critical_q(tol: float = 1e-12) -> float:
    """Positive root of q^2 + 1 - 2q coth(2q), bisected to width ``tol``."""
    return _bisect(lambda q: float(q * q + 1.0 - 2.0 * q * coth(2.0 * q)), tol)


def critical_Q(tol: float = 1e-12) -> float:
    """Positive root of 8Q coth(2Q) - 4Q^2 - 4."""
    return _bisect(lambda Q: float(8.0 * Q * coth(2.0 * Q) - 4.0 * Q * Q - 4.0), tol)


def growth_rate(spec: ModeSpec, params: Params) -> complex:
    """Complex growth rate of the mode exp(i xi.x + lambda t).

    lambda = -i xi_1/2 +- |xi_1| sqrt(-B|xi|^2 - 4 + 4 sqrt(B)|xi| coth(sqrt(B)|xi|)) / (2 sqrt(B)|xi|)
    """
    return complex(growth_rates(spec.xi1, spec.xi2, params, spec.branch))


def growth_rates(xi1, xi2, params: Params, branch: str = "plus"):
    """Vectorised ``growth_rate`` over arrays of wavenumbers."""
    xi1 = np.asarray(xi1, dtype=float)
    xi2 = np.asarray(xi2, dtype=float)
    m = np.sqrt(params.B) * np.hypot(xi1, xi2)
    if np.any(m == 0):
        raise DomainError("|xi| must be positive")
    root = _csqrt(-4.0 * discriminant(0.5 * m))
    lam = -0.5j * xi1 + _sign(branch) * np.abs(xi1) * root / (2.0 * m)
    return lam[()] if np.ndim(lam) == 0 else lam


def _re_growth(xi1, xi2, B):
    xi1 = np.asarray(xi1, dtype=float)
    xi2 = np.asarray(xi2, dtype=float)
    m = np.sqrt(B) * np.hypot(xi1, xi2)
    d = discriminant(0.5 * np.where(m > 0, m, 1.0))
    re = np.abs(xi1) * np.sqrt(np.maximum(-4.0 * d, 0.0)) / (2.0 * np.where(m > 0, m, 1.0))
    return np.where(m > 0, re, 0.0)


def max_growth(
    params: Params,
    xi1_range: tuple[float, float],
    xi2_range: tuple[float, float] | float = 0.0,
    samples: int = 401,
    xtol: float = 1e-8,
) -> MaxGrowth:
    """Largest Re(lambda) over a rectangle (or a segment when ``xi2_range`` is a number).

    A dense pre-scan picks the best sample; golden-section search then refines
    along the ray through it (i.e. in |xi| at fixed direction).
    """
    x1 = np.linspace(xi1_range[0], xi1_range[1], samples)
    if np.ndim(xi2_range) == 0:
        x2 = np.array([float(xi2_range)])
    else:
        x2 = np.linspace(xi2_range[0], xi2_range[1], samples)
    X1, X2 = np.meshgrid(x1, x2, indexing="ij")
    vals = _re_growth(X1, X2, params.B)
    i, j = np.unravel_index(np.argmax(vals), vals.shape)
    best = float(vals[i, j])
    if best <= 0.0:
        spec = ModeSpec(float(X1[i, j]) or 1.0, float(X2[i, j]))
        return MaxGrowth(best, spec, False)

    p0 = np.array([X1[i, j], X2[i, j]])
    r0 = float(np.hypot(*p0))
    direction = p0 / r0
    step = max(x1[1] - x1[0] if len(x1) > 1 else 0.0, x2[1] - x2[0] if len(x2) > 1 else 0.0)
    lo, hi = max(r0 - step, 1e-12), r0 + step

    def neg(r):
        return -float(_re_growth(r * direction[0], r * direction[1], params.B))

    res = minimize_scalar(neg, bracket=(lo, r0, hi), method="golden", tol=xtol)
    r_best = float(res.x) if -res.fun >= best else r0
    value = max(-float(res.fun), best)
    spec = ModeSpec(float(r_best * direction[0]), float(r_best * direction[1]))
    return MaxGrowth(value, spec, True)


def eigenmode_profile(spec: ModeSpec, params: Params, z_nodes: Sequence[float]):
    """Normal mode of wavenumber ``spec`` and its pressure profile at ``z_nodes``.

    Normalised so that max |p_hat| = 1 on [0, 1] with p_hat(0) real and
    non-negative (p_hat'(0) when p_hat(0) vanishes).
    """
    z_nodes = np.asarray(z_nodes, dtype=float)
    if np.any(z_nodes < 0) or np.any(z_nodes > 1):
        raise DomainError("z_nodes must lie in [0, 1]")
    q = spec.q(params.B)
    c = phase_speed(q, spec.branch)
    m = 2.0 * q
    # z=0 row: c m S + R = 0
    if c == 0:
        raise DomainError("degenerate boundary system")
    S = 1.0 + 0j
    R = -m * c * S

    dense = np.linspace(0.0, 1.0, 2001)
    trial = ModeResult(spec, q, c, -1j * spec.xi1 * c, R, S)
    peak = np.max(np.abs(trial.pressure(np.concatenate([dense, z_nodes]))))
    anchor = trial.pressure(0.0)
    if abs(anchor) < 1e-14 * peak:
        anchor = trial.dpressure(0.0)
    phase = np.conj(anchor) / abs(anchor)
    scale = phase / peak
    mode = ModeResult(spec, q, c, -1j * spec.xi1 * c, R * scale, S * scale)
    return mode, mode.pressure(z_nodes)


def stability_map(
    B_values: Iterable[float], q_values: Iterable[float], angle: float = 0.0
) -> list[dict]:
    """Rows (B, xi1, xi2, q, re_lambda, im_lambda) with Re lambda maximised over branch.

    The wavenumber of each cell has |xi| = 2q / sqrt(B) and direction ``angle``.
    """
    B_values = [float(b) for b in B_values]
    q_values = [float(q) for q in q_values]
    if not B_values or not q_values:
        raise DomainError("empty grid")
    rows = []
    for B in B_values:
        params = Params(B=B)
        for q in q_values:
            if q <= 0:
                raise DomainError("q must be positive")
            k = 2.0 * q / math.sqrt(B)
            xi1, xi2 = k * math.cos(angle), k * math.sin(angle)
            lams = [growth_rate(ModeSpec(xi1, xi2, b), params) for b in BRANCHES]
            lam = max(lams, key=lambda v: v.real)
            rows.append(dict(B=B, xi1=xi1, xi2=xi2, q=q, re_lambda=lam.real, im_lambda=lam.imag))
    return rows


STABILITY_HEADER = ("B", "xi1", "xi2", "q", "re_lambda", "im_lambda")


def write_stability_csv(rows: Iterable[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(STABILITY_HEADER)
        for r in rows:
            w.writerow([format(r[k], ".17g") for k in STABILITY_HEADER])


def nondim_params(V, Omega, gamma, g, H_dim, theta_bar) -> tuple[float, float]:
    """Rossby and Burger numbers, Ro = V / 2 Omega and B = gamma g H theta_bar / 4 Omega^2."""
    if not Omega > 0:
        raise DomainError(f"Omega must be positive, got {Omega}")
    for name, val in dict(V=V, gamma=gamma, g=g, H_dim=H_dim, theta_bar=theta_bar).items():
        if not val > 0:
            raise DomainError(f"{name} must be positive, got {val}")
    return V / (2.0 * Omega), gamma * g * H_dim * theta_bar / (4.0 * Omega**2)
