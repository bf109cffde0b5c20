"""First-order Rossby-number expansion around the geostrophic-limit solution.

Given the limit-model state s_N (pressure p_N) the zeroth-order fields are

    u_N = -p_y,  v_N = p_x,  theta_N = p_z,
    w_N = (p_x - (d/dt + z d/dx) theta_N - J(p_N, theta_N)) / B,

and the first-order correction p_e1 obeys the tangent-linear limit model
forced by the defect terms L3, L4:

    d/dt G = -z G_x - J(p_N, G) - J(p_e1, U_B) - B L3 - d/dz L4,   G = Delta_B p_e1,
    d/dt theta_e1 = -z theta_e1_x + p_e1_x - J(p_N, theta_e1) - J(p_e1, theta_N) - L4

at z = 0, 1.  All time derivatives come from the model tendency and its
exact linearisation, never from differences of stored states.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from types import SimpleNamespace

import numpy as np

from .dispersion import DomainError, Params
from .grid import Grid
from .qg_core import BlowUpError, QGModel, QGState, zero_state
from .snapshots import APPROX_FIELDS

__all__ = [
    "ApproxSolution",
    "qg_fields",
    "L_terms",
    "first_order_forcing",
    "first_order_tendency",
    "step_first_order",
    "assemble_approximate",
    "w_first_order",
    "w_first_order_thermal",
    "flow_derivative",
    "ExpansionRun",
    "expand",
]


def _zeroth(model: QGModel, s: QGState) -> SimpleNamespace:
    """Every zeroth-order quantity needed downstream, with first and second time derivatives."""
    g, B = model.grid, model.params.B
    prod, jac = g.prod, g.jac
    ddx, ddy, ddz = g.ddx, g.ddy, g.ddz
    Z = g.zcol

    F = model.tendency(s)
    Fd = model.linearized_tendency(s, F)
    p = model.invert(s, project=True)
    pt = model.invert(F, project=True)
    ptt = model.invert(Fd, project=True)

    u, v, th = -ddy(p), ddx(p), ddz(p)
    ut, vt, tht = -ddy(pt), ddx(pt), ddz(pt)
    utt, vtt, thtt = -ddy(ptt), ddx(ptt), ddz(ptt)
    zeta, zetat = g.lap_h(p), g.lap_h(pt)

    w = (v - tht - Z * ddx(th) - jac(p, th)) / B
    wt = (vt - thtt - Z * ddx(tht) - jac(pt, th) - jac(p, tht)) / B

    L1 = ut + Z * ddx(u) + jac(p, u)
    L2 = vt + Z * ddx(v) + jac(p, v)
    L1t = utt + Z * ddx(ut) + jac(pt, u) + jac(p, ut)
    L2t = vtt + Z * ddx(vt) + jac(pt, v) + jac(p, vt)
    div = ddx(L1) + ddy(L2)
    divt = ddx(L1t) + ddy(L2t)
    zx, zy = ddx(zeta), ddy(zeta)
    L3 = (
        divt
        + Z * ddx(div)
        + jac(p, div)
        - prod(L2, zx)
        + prod(L1, zy)
        + prod(ddy(L1) - ddx(L2), zeta)
        + ddx(prod(w, ddz(v)))
        - ddy(prod(w, ddz(u)) + w)
    )
    L4 = -prod(L2, ddx(th)) + prod(L1, ddy(th)) + prod(w, ddz(th)) - L1
    return SimpleNamespace(
        state=s, F=F, p=p, pt=pt, ptt=ptt, u=u, v=v, th=th, ut=ut, vt=vt, tht=tht,
        zeta=zeta, zetat=zetat, w=w, wt=wt, L1=L1, L2=L2, L1t=L1t, L2t=L2t, L3=L3, L4=L4,
    )


def qg_fields(model: QGModel, state: QGState):
    """(u_N, v_N, theta_N, w_N) of a limit-model state."""
    if model.params.B <= 0:
        raise DomainError("B must be positive")
    Z = _zeroth(model, state)
    return Z.u, Z.v, Z.th, Z.w


def w_vorticity_route(model: QGModel, state: QGState) -> np.ndarray:
    """w_N from integrating d/dz w_N = (d/dt + z d/dx) zeta_N + J(p_N, zeta_N) upward from w_N(0) = 0."""
    g = model.grid
    Z = _zeroth(model, state)
    dwdz = Z.zetat + g.zcol * g.ddx(Z.zeta) + g.jac(Z.p, Z.zeta)
    return g.int_z(dwdz)


def L_terms(model: QGModel, state: QGState):
    """(L1, L2, L3, L4) of a limit-model state."""
    Z = _zeroth(model, state)
    return Z.L1, Z.L2, Z.L3, Z.L4


def first_order_forcing(model: QGModel, Z) -> QGState:
    """Forcing of the p_e1 system: -(B L3 + d/dz L4) inside, -L4 on the boundaries."""
    g, B = model.grid, model.params.B
    return QGState(Z.state.t, -(B * Z.L3 + g.ddz(Z.L4)), -Z.L4[0], -Z.L4[-1])


def first_order_tendency(model: QGModel, base: QGState, pert: QGState, forcing: bool = True, Z=None) -> QGState:
    """d/dt of the p_e1 prognostic state (G, theta_e1 at z = 0 and 1)."""
    out = model.linearized_tendency(base, pert, project=True)
    if forcing:
        Z = Z or _zeroth(model, base)
        out = out.axpy(1.0, first_order_forcing(model, Z))
    return out


def step_first_order(model: QGModel, base: QGState, pert: QGState, dt: float, forcing: bool = True):
    """One RK4 step of the base flow and p_e1 together; returns the advanced pair."""
    if dt == 0:
        return base.copy(), pert.copy()

    def rhs(b, e):
        return model.tendency(b), first_order_tendency(model, b, e, forcing)

    k1 = rhs(base, pert)
    k2 = rhs(base.axpy(dt / 2, k1[0]), pert.axpy(dt / 2, k1[1]))
    k3 = rhs(base.axpy(dt / 2, k2[0]), pert.axpy(dt / 2, k2[1]))
    k4 = rhs(base.axpy(dt, k3[0]), pert.axpy(dt, k3[1]))
    out = []
    for s, ks in zip((base, pert), zip(k1, k2, k3, k4)):
        a, b, c, d = ks
        new = s.axpy(dt / 6, a).axpy(dt / 3, b).axpy(dt / 3, c).axpy(dt / 6, d)
        new.t = s.t + dt
        if not new.isfinite():
            raise BlowUpError(f"non-finite expansion state after step to t={new.t:.6g}", state=s)
        out.append(new)
    return tuple(out)


def _first(model: QGModel, Z, pert: QGState, F1: QGState):
    g = model.grid
    p1 = model.invert(pert, project=True)
    p1t = model.invert(F1, project=True)
    return SimpleNamespace(
        p=p1,
        pt=p1t,
        u=-Z.L2 - g.ddy(p1),
        v=Z.L1 + g.ddx(p1),
        th=g.ddz(p1),
        ut=-Z.L2t - g.ddy(p1t),
        vt=Z.L1t + g.ddx(p1t),
        tht=g.ddz(p1t),
    )


def _w1_integrand(model, Z, p1, p1t):
    g = model.grid
    zeta1 = g.lap_h(p1)
    return g.lap_h(p1t) + g.zcol * g.ddx(zeta1) + g.jac(Z.p, zeta1) + g.jac(p1, Z.zeta) + Z.L3


def w_first_order(model: QGModel, base: QGState, pert: QGState, forcing: bool = True) -> np.ndarray:
    """w_e1 by upward integration of its vorticity relation from w_e1(0) = 0."""
    Z = _zeroth(model, base)
    F1 = first_order_tendency(model, base, pert, forcing, Z)
    p1 = model.invert(pert, project=True)
    p1t = model.invert(F1, project=True)
    return model.grid.int_z(_w1_integrand(model, Z, p1, p1t))


def w_first_order_thermal(model: QGModel, base: QGState, pert: QGState, forcing: bool = True) -> np.ndarray:
    """w_e1 read off the first-order temperature equation (independent check)."""
    g, B = model.grid, model.params.B
    Z = _zeroth(model, base)
    F1 = first_order_tendency(model, base, pert, forcing, Z)
    E = _first(model, Z, pert, F1)
    rest = E.tht + g.zcol * g.ddx(E.th) + g.jac(Z.p, E.th) + g.jac(E.p, Z.th) - g.ddx(E.p) + Z.L4
    return -rest / B


def flow_derivative(fn, base: QGState, pert: QGState, dbase: QGState, dpert: QGState, h: float | None = None):
    """Derivative of fn(base, pert) along the direction (dbase, dpert).

    Five-point central stencil in the line parameter; exact (to round-off)
    whenever fn is a polynomial of degree <= 4 in the state, which holds for
    every field built here.
    """
    if h is None:
        size = math.hypot(base.norm(), pert.norm())
        speed = math.hypot(dbase.norm(), dpert.norm())
        h = 1.0 if speed == 0 or size == 0 else min(1.0, size / speed)

    def at(s):
        return fn(base.axpy(s * h, dbase), pert.axpy(s * h, dpert))

    return (at(-2) - 8 * at(-1) + 8 * at(1) - at(2)) / (12 * h)


@dataclass
class ApproxSolution:
    """Zeroth- and first-order fields with their time derivatives.

    ``fields`` and ``rates`` map the names in ``APPROX_FIELDS`` to arrays of
    shape (Nz, Ny, Nx).  The fields do not depend on Ro; ``Ro`` only enters
    when they are combined by ``assembled``.
    """

    grid: Grid
    params: Params
    t: float
    fields: dict
    rates: dict
    diagnostics: dict = field(default_factory=dict)

    @property
    def Ro(self) -> float:
        return self.params.Ro

    def with_Ro(self, Ro: float) -> "ApproxSolution":
        return replace(self, params=replace(self.params, Ro=Ro))

    def truncated(self, order: int = 0) -> "ApproxSolution":
        """Copy with the first-order fields removed when ``order`` is 0."""
        if order not in (0, 1):
            raise DomainError(f"order must be 0 or 1, got {order}")
        if order == 1:
            return self
        f, r = dict(self.fields), dict(self.rates)
        for k in APPROX_FIELDS[5:]:
            f[k] = np.zeros_like(f[k])
            r[k] = np.zeros_like(r[k])
        return replace(self, fields=f, rates=r)

    def assembled(self):
        """(fields, rates) of u_a = u_N + Ro u_e1 and likewise for v, w, theta, p."""
        Ro = self.Ro
        out, rate = {}, {}
        for name in ("u", "v", "w", "theta", "p"):
            out[name] = self.fields[f"{name}_N"] + Ro * self.fields[f"{name}_e1"]
            rate[name] = self.rates[f"{name}_N"] + Ro * self.rates[f"{name}_e1"]
        return out, rate


def assemble_approximate(model: QGModel, base: QGState, pert: QGState, Ro: float, forcing: bool = True) -> ApproxSolution:
    """Build every zeroth- and first-order field (and its rate) at the current time."""
    g = model.grid
    if base.q_int.shape != g.shape or pert.q_int.shape != g.shape:
        raise DomainError("states do not match the model grid")
    if Ro < 0:
        raise DomainError("Ro must be non-negative")
    Z = _zeroth(model, base)
    F1 = first_order_tendency(model, base, pert, forcing, Z)
    E = _first(model, Z, pert, F1)
    w1 = g.int_z(_w1_integrand(model, Z, E.p, E.pt))

    def w1_map(b, e):
        Zb = _zeroth(model, b)
        Fb = first_order_tendency(model, b, e, forcing, Zb)
        return g.int_z(_w1_integrand(model, Zb, model.invert(e, project=True), model.invert(Fb, project=True)))

    w1t = flow_derivative(w1_map, base, pert, Z.F, F1)

    fields = dict(
        p_N=Z.p, u_N=Z.u, v_N=Z.v, w_N=Z.w, theta_N=Z.th,
        p_e1=E.p, u_e1=E.u, v_e1=E.v, w_e1=w1, theta_e1=E.th,
    )
    rates = dict(
        p_N=Z.pt, u_N=Z.ut, v_N=Z.vt, w_N=Z.wt, theta_N=Z.tht,
        p_e1=E.pt, u_e1=E.ut, v_e1=E.vt, w_e1=w1t, theta_e1=E.tht,
    )
    scale_w = float(np.max(np.abs(w1))) or 1.0
    scale_wN = float(np.max(np.abs(Z.w))) or 1.0
    diag = dict(
        w_e1_top_mismatch=float(np.max(np.abs(w1[-1]))) / scale_w,
        w_N_boundary=float(max(np.max(np.abs(Z.w[0])), np.max(np.abs(Z.w[-1])))) / scale_wN,
        compatibility_residual=model.last_compatibility_residual,
    )
    return ApproxSolution(g, replace(model.params, Ro=Ro), base.t, fields, rates, diag)


@dataclass
class ExpansionRun:
    solutions: list
    base: QGState
    pert: QGState
    dt: float


def expand(
    model: QGModel,
    base: QGState,
    times,
    Ro: float,
    dt: float,
    pert: QGState | None = None,
    forcing: bool = True,
    amplitude_cap: float = 1e3,
) -> ExpansionRun:
    """Co-step base flow and p_e1 from ``base.t`` and assemble at each time in ``times``.

    Each target time must be reachable in whole steps of ``dt`` (the step is
    shortened to land on it).  A warning is issued when the correction
    exceeds ``amplitude_cap`` times the initial base amplitude.
    """
    g = model.grid
    pert = zero_state(g, base.t) if pert is None else pert
    ref = base.norm()
    sols = []
    for target in sorted(times):
        span = target - base.t
        if span < -1e-12:
            raise DomainError(f"time {target} lies before the current time {base.t}")
        n = max(0, math.ceil(span / dt - 1e-9))
        h = span / n if n else 0.0
        for _ in range(n):
            base, pert = step_first_order(model, base, pert, h, forcing)
        base.t = pert.t = target
        if ref > 0 and pert.norm() > amplitude_cap * ref:
            warnings.warn(
                f"first-order correction {pert.norm():.3e} exceeds {amplitude_cap:g} x initial base amplitude {ref:.3e}"
            )
        sols.append(assemble_approximate(model, base, pert, Ro, forcing))
    return ExpansionRun(sols, base, pert, dt)
