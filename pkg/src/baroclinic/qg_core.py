"""Pseudo-spectral solver for the nonlinear geostrophic-limit (Ro = 0) model.

Prognostic variables are the potential vorticity U_B = B (p_xx + p_yy) + p_zz
at every collocation node and the boundary temperatures theta = p_z at z = 0
and z = 1.  They evolve by

    d/dt U_B   = -z U_B_x - J(p, U_B)
    d/dt theta = -z theta_x + p_x - J(p, theta)     (z = 0, 1)

with p recovered from (U_B, theta_bot, theta_top) by a Neumann solve per
horizontal wavenumber.
"""

from __future__ import annotations

import csv
import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .dispersion import DomainError, ModeSpec, Params, eigenmode_profile
from .grid import Grid

__all__ = [
    "InversionError",
    "BlowUpError",
    "QGState",
    "QGModel",
    "TimeSeries",
    "RunConfig",
    "RunResult",
    "jacobian",
    "invert_delta_B",
    "mode_state",
    "noise_state",
    "zero_state",
    "fit_growth_rate",
    "run",
]

log = logging.getLogger(__name__)

COMPATIBILITY_TOL = 1e-8


class InversionError(RuntimeError):
    pass


class BlowUpError(RuntimeError):
    """Non-finite values after a step; ``state`` is the last finite state."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


@dataclass
class QGState:
    t: float
    q_int: np.ndarray
    theta_bot: np.ndarray
    theta_top: np.ndarray

    def arrays(self):
        return self.q_int, self.theta_bot, self.theta_top

    def axpy(self, a: float, other: "QGState") -> "QGState":
        """self + a * other (time of self kept)."""
        return QGState(
            self.t,
            self.q_int + a * other.q_int,
            self.theta_bot + a * other.theta_bot,
            self.theta_top + a * other.theta_top,
        )

    def scaled(self, a: float) -> "QGState":
        return QGState(self.t, a * self.q_int, a * self.theta_bot, a * self.theta_top)

    def copy(self) -> "QGState":
        return QGState(self.t, self.q_int.copy(), self.theta_bot.copy(), self.theta_top.copy())

    def isfinite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays())

    def norm(self) -> float:
        return math.sqrt(sum(float(np.sum(a * a)) for a in self.arrays()))


def zero_state(grid: Grid, t: float = 0.0) -> QGState:
    return QGState(t, np.zeros(grid.shape), np.zeros(grid.hshape), np.zeros(grid.hshape))


class QGModel:
    """Operators of the limit model on a fixed grid.

    The per-wavenumber inverse collocation matrices are built once and shared
    read-only by every call.
    """

    def __init__(self, grid: Grid, params: Params, filter_strength: float = 0.0, filter_order: int = 8):
        self.grid = grid
        self.params = params
        self.filter_strength = float(filter_strength)
        self.filter_order = int(filter_order)
        self.last_compatibility_residual = 0.0
        self._build_inverse()

    # -- elliptic inversion ----------------------------------------------

    def _build_inverse(self):
        g, B = self.grid, self.params.B
        n = g.Nz
        uniq, idx = np.unique(np.round(g.k2, 10), return_inverse=True)
        ops = np.empty((len(uniq), n, n))
        eye = np.eye(n)
        for a, kk in enumerate(uniq):
            M = g.D2z - B * kk * eye
            M[0] = g.Dz[0]
            M[-1] = g.Dz[-1]
            if kk == 0:
                M[-1] = g.weights  # gauge: vertical mean of p vanishes
            cond = np.linalg.cond(M)
            if not np.isfinite(cond) or cond > 1e14:
                raise RuntimeError(f"singular collocation matrix at |k|^2={kk} (cond={cond:.3g})")
            ops[a] = np.linalg.inv(M)
        self._inv = np.ascontiguousarray(ops[idx.reshape(g.k2.shape)])

    def compatibility_residual(self, qh, tbh, tth) -> complex:
        """mean(theta_top) - mean(theta_bot) - int_0^1 mean(U_B) dz, from spectra."""
        g = self.grid
        norm = g.Nx * g.Ny
        return (tth[0, 0] - tbh[0, 0] - self.grid.interior_weights @ qh[1:-1, 0, 0]) / norm

    def invert_hat(self, qh, tbh, tth, project: bool = False):
        g = self.grid
        r = self.compatibility_residual(qh, tbh, tth)
        norm = g.Nx * g.Ny
        scale = max(1.0, abs(tth[0, 0]) / norm, abs(tbh[0, 0]) / norm)
        self.last_compatibility_residual = abs(r)
        if abs(r) > COMPATIBILITY_TOL * scale:
            if not project:
                raise InversionError(f"compatibility violated: residual {abs(r):.3e}")
            log.debug("projecting compatibility residual %.3e onto theta_top", abs(r))
        rhs = qh.copy()
        rhs[0] = tbh
        rhs[-1] = tth
        rhs[-1, 0, 0] = 0.0
        r_t = np.moveaxis(rhs, 0, -1)[..., None]
        out = self._inv @ r_t.real + 1j * (self._inv @ r_t.imag)
        return np.moveaxis(out[..., 0], -1, 0)

    def invert(self, state: QGState, project: bool = False) -> np.ndarray:
        """Pressure p = Delta_B^{-1} U_B with Neumann data theta_bot, theta_top."""
        g = self.grid
        g.check(state.q_int, state.theta_bot, state.theta_top)
        ph = self.invert_hat(g.fft(state.q_int), g.fft(state.theta_bot), g.fft(state.theta_top), project)
        return g.ifft(ph)

    def apply_delta_B(self, p: np.ndarray) -> np.ndarray:
        g = self.grid
        return self.params.B * g.lap_h(p) + g.d2dz(p)

    # -- tendencies --------------------------------------------------------

    def _hat(self, state):
        g = self.grid
        return g.fft(state.q_int), g.fft(state.theta_bot), g.fft(state.theta_top)

    def _jac_hat(self, ph, fh):
        """Dealiased J(psi, f) for stacks of planes given as spectra."""
        g = self.grid
        ph = ph * g.mask
        fh = fh * g.mask
        px, py = g.ifft(1j * g.kx * ph), g.ifft(1j * g.ky * ph)
        fx, fy = g.ifft(1j * g.kx * fh), g.ifft(1j * g.ky * fh)
        return g.fft(px * fy - py * fx) * g.mask

    def _linear_hat(self, qh, tbh, tth, ph):
        g = self.grid
        ikx = 1j * g.kx
        dq = -ikx * g.zcol * qh
        dtb = ikx * ph[0]
        dtt = -ikx * tth + ikx * ph[-1]
        return dq, dtb, dtt

    def _advect_hat(self, ph, qh, tbh, tth):
        """-J(p, .) applied to the interior PV and to both boundary fields."""
        planes_p = np.concatenate([ph, ph[:1], ph[-1:]])
        planes_f = np.concatenate([qh, tbh[None], tth[None]])
        J = self._jac_hat(planes_p, planes_f)
        return -J[:-2], -J[-2], -J[-1]

    def _finish(self, t, parts):
        g = self.grid
        out = []
        for h in parts:
            h = h.copy()
            h[..., 0, 0] = 0.0  # horizontal means are conserved exactly
            out.append(g.ifft(h))
        return QGState(t, *out)

    def tendency(self, state: QGState) -> QGState:
        """d/dt of the prognostic state (time field set to ``state.t``)."""
        qh, tbh, tth = self._hat(state)
        ph = self.invert_hat(qh, tbh, tth)
        lin = self._linear_hat(qh, tbh, tth, ph)
        adv = self._advect_hat(ph, qh, tbh, tth)
        return self._finish(state.t, [a + b for a, b in zip(lin, adv)])

    def linear_tendency(self, state: QGState) -> QGState:
        """Tendency linearised about the basic state (nonlinear terms dropped)."""
        qh, tbh, tth = self._hat(state)
        ph = self.invert_hat(qh, tbh, tth)
        return self._finish(state.t, self._linear_hat(qh, tbh, tth, ph))

    def linearized_tendency(self, base: QGState, pert: QGState, project: bool = False) -> QGState:
        """Derivative of ``tendency`` at ``base`` in the direction ``pert``."""
        bq, bb, bt = self._hat(base)
        vq, vb, vt = self._hat(pert)
        pb = self.invert_hat(bq, bb, bt, project=True)
        pv = self.invert_hat(vq, vb, vt, project=project)
        lin = self._linear_hat(vq, vb, vt, pv)
        a1 = self._advect_hat(pb, vq, vb, vt)
        a2 = self._advect_hat(pv, bq, bb, bt)
        return self._finish(base.t, [a + b + c for a, b, c in zip(lin, a1, a2)])

    def nonlinear_boundary_terms(self, state: QGState):
        """-p_y p_xz + p_x p_yz at z = 0 and z = 1 (equal to J(p, theta) there)."""
        g = self.grid
        p = self.invert(state)
        out = []
        for k, th in ((0, state.theta_bot), (-1, state.theta_top)):
            out.append(g.jac(p[k], th))
        return out

    # -- time stepping -----------------------------------------------------

    def _filter(self, state: QGState) -> QGState:
        if self.filter_strength <= 0:
            return state
        g = self.grid
        kmax = math.sqrt(float(np.max(g.k2 * g.mask)))
        sigma = np.exp(-self.filter_strength * (np.sqrt(g.k2) / kmax) ** self.filter_order)
        return QGState(state.t, *(g.ifft(g.fft(a) * sigma) for a in state.arrays()))

    def step_rk4(self, state: QGState, dt: float, rhs=None) -> QGState:
        """Classical RK4 step of length ``dt``."""
        if dt == 0:
            return state.copy()
        f = rhs or self.tendency
        k1 = f(state)
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                k2 = f(state.axpy(0.5 * dt, k1))
                k3 = f(state.axpy(0.5 * dt, k2))
                k4 = f(state.axpy(dt, k3))
        except InversionError as err:
            # stage states overflowed far enough to break the mean balance
            raise BlowUpError(f"stage inversion failed in step from t={state.t:.6g}: {err}", state=state) from err
        with np.errstate(over="ignore", invalid="ignore"):
            parts = zip(state.arrays(), k1.arrays(), k2.arrays(), k3.arrays(), k4.arrays())
            new = QGState(state.t + dt, *(a + dt / 6.0 * (b1 + 2 * b2 + 2 * b3 + b4) for a, b1, b2, b3, b4 in parts))
        new = self._filter(new)
        if not new.isfinite():
            raise BlowUpError(f"non-finite state after step to t={new.t:.6g}", state=state)
        return new

    def cfl_dt(self, state: QGState, cfl: float = 0.4) -> float:
        g = self.grid
        p = self.invert(state)
        grad = np.sqrt(g.ddx(p) ** 2 + g.ddy(p) ** 2)
        return cfl * min(g.dx, g.dy) / max(1.0, float(np.max(grad)))

    # -- diagnostics -------------------------------------------------------

    def diagnostics(self, state: QGState) -> dict:
        g, B = self.grid, self.params.B
        p = self.invert(state, project=True)
        px, py, pz = g.ddx(p), g.ddy(p), g.ddz(p)
        return dict(
            energy=0.5 * g.integrate(B * (px**2 + py**2) + pz**2),
            boundary_variance_bot=g.l2(state.theta_bot),
            boundary_variance_top=g.l2(state.theta_top),
            interior_enstrophy=0.5 * g.integrate(state.q_int**2),
        )

    def mode_amplitudes(self, state: QGState) -> np.ndarray:
        """Vertical L2 norm of each pressure Fourier coefficient, shape (Ny, Nx//2+1)."""
        g = self.grid
        ph = self.invert_hat(*self._hat(state), project=True) / (g.Nx * g.Ny)
        return np.sqrt(np.tensordot(g.weights, np.abs(ph) ** 2, axes=(0, 0)))

    def mode_amplitude(self, state: QGState, m: int, n: int, spectrum=None) -> float:
        amps = self.mode_amplitudes(state) if spectrum is None else spectrum
        if m < 0 or (m == 0 and n < 0):
            m, n = -m, -n
        return float(amps[n % self.grid.Ny, m])


def jacobian(grid: Grid, psi: np.ndarray, f: np.ndarray) -> np.ndarray:
    """J(psi, f) = psi_x f_y - psi_y f_x, pseudo-spectral with 2/3 dealiasing."""
    if np.shape(psi) != np.shape(f):
        raise DomainError(f"grid mismatch: {np.shape(psi)} vs {np.shape(f)}")
    return grid.jac(psi, f)


def invert_delta_B(state: QGState, grid: Grid, params: Params) -> np.ndarray:
    return QGModel(grid, params).invert(state)


# -- initial conditions -----------------------------------------------------


def mode_state(
    grid: Grid,
    params: Params,
    m: int,
    n: int,
    amplitude: float = 1e-6,
    branch: str = "plus",
    structure: str = "plane",
    t: float = 0.0,
):
    """Normal-mode state of integer wavenumber (m, n) and its ``ModeResult``.

    ``structure="plane"`` realises p = A Re[p_hat(z) exp(i(xi1 x + xi2 y))];
    ``"standing"`` realises A Re[p_hat(z) exp(i xi1 x)] sin(xi2 y).  The
    interior PV of a normal mode vanishes identically.
    """
    xi1 = 2 * math.pi * m / grid.Lx
    xi2 = 2 * math.pi * n / grid.Ly
    mode, _ = eigenmode_profile(ModeSpec(xi1, xi2, branch), params, grid.z)
    x, y = grid.mesh()
    if structure == "plane":
        phase = np.exp(1j * (xi1 * x + xi2 * y))
        shape = lambda a: amplitude * np.real(a * phase)  # noqa: E731
    elif structure == "standing":
        phase = np.exp(1j * xi1 * x)
        shape = lambda a: amplitude * np.real(a * phase) * np.sin(xi2 * y)  # noqa: E731
    else:
        raise DomainError(f"unknown mode structure {structure!r}")
    state = QGState(
        t,
        np.zeros(grid.shape),
        shape(mode.dpressure(0.0)),
        shape(mode.dpressure(1.0)),
    )
    return state, mode


def mode_pressure(grid: Grid, mode, amplitude: float, structure: str = "plane") -> np.ndarray:
    """Analytic pressure of a ``mode_state`` on the grid nodes."""
    x, y = grid.mesh()
    prof = mode.pressure(grid.z)[:, None, None]
    if structure == "plane":
        return amplitude * np.real(prof * np.exp(1j * (mode.spec.xi1 * x + mode.spec.xi2 * y)))
    return amplitude * np.real(prof * np.exp(1j * mode.spec.xi1 * x)) * np.sin(mode.spec.xi2 * y)


def _random_plane(grid: Grid, rng, k0: float, count: int = 1):
    shape = (count, grid.Ny, grid.Nx // 2 + 1)
    coef = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    coef *= np.exp(-0.5 * grid.k2 / k0**2) * grid.mask
    coef[..., 0, 0] = 0.0
    f = grid.ifft(coef)
    return grid.ifft(grid.fft(f) * grid.mask)


def noise_state(
    grid: Grid,
    amplitude: float = 1e-6,
    k0: float = 2.0,
    seed: int = 0,
    interior: bool = True,
    vertical_modes: int = 4,
    t: float = 0.0,
) -> QGState:
    """Band-limited random state with spectrum ~ exp(-|k|^2 / k0^2).

    Each field is rescaled to RMS ``amplitude``; the interior PV is a sum of
    the first ``vertical_modes`` Chebyshev polynomials in z with random
    horizontal coefficients.  Horizontal means are zero (compatible).
    """
    rng = np.random.default_rng(seed)

    def rms(a):
        return math.sqrt(float(np.mean(a * a))) or 1.0

    tb = _random_plane(grid, rng, k0)[0]
    tt = _random_plane(grid, rng, k0)[0]
    q = np.zeros(grid.shape)
    if interior:
        planes = _random_plane(grid, rng, k0, vertical_modes)
        xs = 2.0 * grid.z - 1.0
        T = np.polynomial.chebyshev.chebvander(xs, vertical_modes - 1)
        q = np.tensordot(T, planes, axes=(1, 0))
        q *= amplitude / rms(q)
    return QGState(t, q, tb * amplitude / rms(tb), tt * amplitude / rms(tt))


# -- runs -------------------------------------------------------------------


@dataclass
class TimeSeries:
    times: list = field(default_factory=list)
    amplitudes: list = field(default_factory=list)
    modes: dict = field(default_factory=dict)

    def append(self, t, amp, mode_amps=None):
        if self.times and t <= self.times[-1]:
            raise DomainError("times must be strictly increasing")
        self.times.append(float(t))
        self.amplitudes.append(float(amp))
        for key, val in (mode_amps or {}).items():
            self.modes.setdefault(key, []).append(float(val))

    def mode(self, m, n) -> np.ndarray:
        return np.asarray(self.modes[(m, n)])

    def write_csv(self, path) -> None:
        keys = list(self.modes)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "amplitude"] + [f"mode_{m}_{n}" for m, n in keys])
            for i, t in enumerate(self.times):
                row = [t, self.amplitudes[i]] + [self.modes[k][i] for k in keys]
                w.writerow([format(v, ".17g") for v in row])

    @classmethod
    def read_csv(cls, path) -> "TimeSeries":
        ts = cls()
        with open(path, newline="") as fh:
            r = csv.reader(fh)
            header = next(r)
            keys = []
            for name in header[2:]:
                _, m, n = name.split("_")
                keys.append((int(m), int(n)))
            for row in r:
                vals = [float(v) for v in row]
                ts.append(vals[0], vals[1], dict(zip(keys, vals[2:])))
        return ts


def fit_growth_rate(times: Sequence[float], amplitudes: Sequence[float], window=None):
    """Least-squares slope of log(amplitude) against time on ``window``.

    Returns ``(slope, r_squared)``.
    """
    t = np.asarray(times, dtype=float)
    a = np.asarray(amplitudes, dtype=float)
    if window is not None:
        sel = (t >= window[0]) & (t <= window[1])
        t, a = t[sel], a[sel]
    if len(t) < 4:
        raise DomainError(f"need at least 4 samples in the window, got {len(t)}")
    if np.any(a <= 0):
        raise DomainError("amplitudes must be positive on the window")
    y = np.log(a)
    slope, icpt = np.polyfit(t, y, 1)
    ss_res = float(np.sum((y - (slope * t + icpt)) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), r2


@dataclass
class RunConfig:
    grid: Grid
    params: Params
    seed_type: str = "mode"  # mode | noise | snapshot
    mode: tuple = (1, 0)
    branch: str = "plus"
    structure: str = "plane"
    amplitude: float = 1e-6
    noise_k0: float = 2.0
    noise_seed: int = 0
    noise_interior: bool = True
    snapshot_path: str | None = None
    t_end: float = 5.0
    dt: float | None = None
    cfl: float = 0.4
    output_every: float = 0.1
    snapshot_every: float | None = None
    track_modes: tuple = ()
    filter_strength: float = 0.0


@dataclass
class RunResult:
    series: TimeSeries
    state: QGState
    dt: float
    snapshots: list = field(default_factory=list)


def initial_state(config: RunConfig) -> QGState:
    if config.seed_type == "mode":
        m, n = config.mode
        state, _ = mode_state(config.grid, config.params, m, n, config.amplitude, config.branch, config.structure)
    elif config.seed_type == "noise":
        state = noise_state(config.grid, config.amplitude, config.noise_k0, config.noise_seed, config.noise_interior)
    elif config.seed_type == "snapshot":
        from .snapshots import read_qg_snapshot

        state, grid, _ = read_qg_snapshot(config.snapshot_path)
        if grid.shape != config.grid.shape:
            raise DomainError("snapshot grid does not match the configured grid")
    else:
        raise DomainError(f"unknown seed type {config.seed_type!r}")
    return state


def time_step(model: QGModel, state: QGState, config) -> float:
    dt = config.dt or model.cfl_dt(state, config.cfl)
    sub = max(1, math.ceil(config.output_every / dt - 1e-9))
    return config.output_every / sub


def _record(series, model, state, modes):
    spec = model.mode_amplitudes(state)
    amp = math.sqrt(max(model.diagnostics(state)["energy"], 0.0))
    series.append(state.t, amp, {mn: model.mode_amplitude(state, *mn, spectrum=spec) for mn in modes})


def run(config: RunConfig, output_dir=None, state: QGState | None = None) -> RunResult:
    """Integrate from the configured initial condition to ``t_end``.

    Records the amplitude series every ``output_every`` and, when
    ``output_dir`` is given, writes BQGS snapshots every ``snapshot_every``
    plus the final state.  On blow-up the last finite state is saved and the
    error re-raised.
    """
    from .snapshots import write_qg_snapshot

    model = QGModel(config.grid, config.params, config.filter_strength)
    state = initial_state(config) if state is None else state
    dt = time_step(model, state, config)
    sub = round(config.output_every / dt)
    n_out = round(config.t_end / config.output_every)
    out = Path(output_dir) if output_dir is not None else None
    snap_every = None
    if config.snapshot_every:
        snap_every = max(1, round(config.snapshot_every / config.output_every))

    series = TimeSeries()
    snapshots = []
    modes = [tuple(mn) for mn in config.track_modes]

    def save(s, tag):
        if out is None:
            return
        path = out / f"snapshot_{tag}.bqgs"
        write_qg_snapshot(path, s, config.grid, config.params)
        snapshots.append(path)

    _record(series, model, state, modes)
    if snap_every:
        save(state, "00000")
    try:
        for i in range(1, n_out + 1):
            for _ in range(sub):
                state = model.step_rk4(state, dt)
            state.t = i * config.output_every
            _record(series, model, state, modes)
            if snap_every and i % snap_every == 0:
                save(state, f"{i:05d}")
    except BlowUpError as err:
        err.series = series
        save(err.state, "blowup")
        raise
    if not (snap_every and n_out % snap_every == 0):
        save(state, "final")
    return RunResult(series, state, dt, snapshots)


def check_amplitude(state: QGState, reference: float, cap: float) -> None:
    """Warn when ``state`` exceeds ``cap`` times ``reference`` in norm."""
    if reference > 0 and state.norm() > cap * reference:
        warnings.warn(f"amplitude {state.norm():.3e} exceeds {cap:g} x reference {reference:.3e}")
