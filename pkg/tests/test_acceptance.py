"""Acceptance criteria, one test each, at the stated tolerances and runtime budgets.

Each test prints a single ``ACCEPTANCE <name>: PASS|FAIL`` line.
"""

import math
import time

import numpy as np
import pytest

from baroclinic.asymptotics import expand
from baroclinic.dispersion import ModeSpec, Params, critical_Q, critical_q, growth_rate, growth_rates, phase_speed
from baroclinic.grid import Grid
from baroclinic.qg_core import (
    QGModel,
    QGState,
    RunConfig,
    fit_growth_rate,
    jacobian,
    mode_state,
    noise_state,
    run,
    time_step,
)
from baroclinic.residual import scaling_study


@pytest.fixture
def report(capsys):
    def emit(name, ok, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE {name}: {'PASS' if ok else 'FAIL'} ({detail})")
        assert ok, detail

    return emit


def test_critical_parameter(report):
    t0 = time.perf_counter()
    qc, Qc = critical_q(1e-12), critical_Q(1e-12)
    dt = time.perf_counter() - t0
    ok = abs(qc - 1.2) <= 0.05 and abs(qc - Qc) < 1e-10 and dt < 1.0
    report("critical_parameter", ok, f"q_c={qc:.12f} |q_c-Q_c|={abs(qc - Qc):.1e} time={dt:.3f}s")


def test_formula_cross_consistency(report):
    t0 = time.perf_counter()
    A, Bt = np.meshgrid(np.linspace(0.05, 3.0, 50), np.linspace(-3.0, 3.0, 50), indexing="ij")
    worst = 0.0
    for B in (0.5, 1.0, 2.0):
        lam = growth_rates(A, Bt, Params(B)).real
        ref = A * phase_speed(0.5 * np.sqrt(B) * np.hypot(A, Bt), "plus").imag
        diff = np.abs(lam - ref)
        nz = diff > 0
        if nz.any():
            worst = max(worst, float(np.max(diff[nz] / np.abs(ref[nz]))))
    # spot-check the scalar entry point against the vectorised one
    assert growth_rate(ModeSpec(A[7, 9], Bt[7, 9]), Params(2.0)) == growth_rates(A, Bt, Params(2.0))[7, 9]
    dt = time.perf_counter() - t0
    ok = worst <= 1e-12 and dt < 1.0
    report("formula_cross_consistency", ok, f"max rel diff={worst:.1e} time={dt:.3f}s")


def test_linear_growth_reproduction(report):
    t0 = time.perf_counter()
    g, P = Grid(64, 64, 48), Params(1.0)
    res = run(RunConfig(g, P, mode=(1, 1), amplitude=1e-6, t_end=5.0, output_every=0.1, track_modes=((1, 1),)))
    slope, r2 = fit_growth_rate(res.series.times, res.series.mode(1, 1), (1.0, 5.0))
    lam = growth_rate(ModeSpec(1.0, 1.0), P).real
    dt = time.perf_counter() - t0
    err = abs(slope / lam - 1)
    ok = err < 0.02 and dt < 120
    report("linear_growth", ok, f"fitted={slope:.8f} Re lambda={lam:.8f} rel err={err:.1e} time={dt:.1f}s")


def test_single_mode_exactness(report):
    t0 = time.perf_counter()
    g, P = Grid(64, 64, 48), Params(1.0)
    model = QGModel(g, P)
    s, _ = mode_state(g, P, 1, 1, 1e-6)
    p = model.invert(s)
    lin = model.linear_tendency(s)
    scale = max(np.max(np.abs(a)) for a in lin.arrays())
    # U_B implied by the inverted pressure, relative to B |k|^2 p (the size of the cancelling terms).
    # Clenshaw-Curtis L2 norm; the max norm is reported too (round-off of the nodal second
    # derivative at Nz = 48 concentrates next to the walls).
    U = model.apply_delta_B(p)
    U[[0, -1]] = 0.0
    interior = g.l2(U) / g.l2(P.B * 2 * p)
    interior_max = np.max(np.abs(U)) / (P.B * 2 * np.max(np.abs(p)))
    prognostic = np.max(np.abs(s.q_int))
    th = g.ddz(p)
    boundary = max(
        np.max(np.abs(-g.ddy(p[k]) * g.ddx(th[k]) + g.ddx(p[k]) * g.ddy(th[k]))) for k in (0, -1)
    ) / scale
    full = model.tendency(s)
    tend = max(np.max(np.abs(a - b)) for a, b in zip(full.arrays(), lin.arrays())) / scale
    dt = time.perf_counter() - t0
    ok = prognostic == 0 and interior < 1e-10 and boundary < 1e-10 and tend < 1e-8 and dt < 10
    report(
        "single_mode_exactness",
        ok,
        f"interior U_B: state={prognostic:.1e} implied L2={interior:.1e} (max {interior_max:.1e}); boundary terms={boundary:.1e} tendency diff={tend:.1e} time={dt:.1f}s",
    )


def test_general_perturbation(report):
    """B = 3.2 on the 2 pi torus: (+-1, 0) is the only unstable wavenumber."""
    t0 = time.perf_counter()
    g, P = Grid(32, 32, 16), Params(3.2)
    model = QGModel(g, P)
    s = noise_state(g, 1e-6, k0=2.0, seed=1)
    lam = growth_rate(ModeSpec(1.0, 0.0), P).real
    assert growth_rate(ModeSpec(1.0, 1.0), P).real == 0.0

    def split(state):
        a = model.mode_amplitudes(state)
        target = a[0, 1]
        total = math.sqrt(float(np.sum(g.hermitian_weight * a**2)))
        return target, math.sqrt(max(total**2 - 2 * target**2, 0.0))

    a0, r0 = split(s)
    cfg = RunConfig(g, P, output_every=0.1)
    dt = time_step(model, s, cfg)
    times, amps, gain, peak = [], [], 0.0, 0.0
    for i in range(1, 801):
        for _ in range(round(0.1 / dt)):
            s = model.step_rk4(s, dt)
        a, r = split(s)
        times.append(i * 0.1)
        amps.append(a)
        gain = (a / r) / (a0 / r0)
        peak = max(peak, a)
        if gain >= 1e3:
            break
    t_end = times[-1]
    slope, _ = fit_growth_rate(times, amps, (t_end / 2, t_end))
    err = abs(slope / lam - 1)
    wall = time.perf_counter() - t0
    linear = peak < 1e-3
    ok = err < 0.05 and gain >= 1e3 and linear and wall < 180
    report(
        "general_perturbation",
        ok,
        f"fitted={slope:.6f} Re lambda={lam:.6f} rel err={err:.1e} share gain={gain:.3g} at t={t_end:.1f} "
        f"peak amplitude={peak:.1e} time={wall:.1f}s",
    )


def test_numerical_hygiene(report):
    rng = np.random.default_rng(2024)
    g = Grid(32, 32, 32)
    f, psi = g.truncate(rng.standard_normal(g.hshape)), g.truncate(rng.standard_normal(g.hshape))
    J = jacobian(g, psi, f)
    skew = max(abs(np.sum(f * J)) / np.sum(np.abs(f * J)), abs(np.sum(psi * J)) / np.sum(np.abs(psi * J)))

    P = Params(1.0)
    model = QGModel(g, P)
    x, y = g.mesh()
    Z = g.zcol
    p = np.cos(x + 2 * y) * np.exp(Z) * Z**2 + np.sin(3 * y) * np.cos(2 * Z) + Z**3 - Z**4 / 2
    p = p - g.weights @ np.mean(p, axis=(1, 2))
    th = g.ddz(p)
    s = QGState(0.0, model.apply_delta_B(p), th[0], th[-1])
    p2 = model.invert(s)
    q2 = model.apply_delta_B(p2)
    th2 = g.ddz(p2)
    round_trip = max(
        np.max(np.abs(q2[1:-1] - s.q_int[1:-1])) / np.max(np.abs(s.q_int)),
        np.max(np.abs(th2[[0, -1]] - th[[0, -1]])) / np.max(np.abs(th)),
        np.max(np.abs(p2 - p)) / np.max(np.abs(p)),
    )

    gs = Grid(16, 16, 16)
    ms = QGModel(gs, P)
    s0 = noise_state(gs, 0.2, k0=1.5, seed=9)

    def integrate(dt, T=1.0):
        st = s0
        for _ in range(round(T / dt)):
            st = ms.step_rk4(st, dt)
        return st

    a, b, c = integrate(0.1), integrate(0.05), integrate(0.025)
    d1 = math.sqrt(sum(np.sum((u - v) ** 2) for u, v in zip(a.arrays(), b.arrays())))
    d2 = math.sqrt(sum(np.sum((u - v) ** 2) for u, v in zip(b.arrays(), c.arrays())))
    order = math.log2(d1 / d2)
    ok = skew < 1e-10 and round_trip < 1e-10 and order >= 3.7
    report("numerical_hygiene", ok, f"skew={skew:.1e} round trip={round_trip:.1e} RK4 order={order:.3f}")


def test_residual_scaling(report):
    t0 = time.perf_counter()
    g, P = Grid(32, 32, 24), Params(1.0)
    model = QGModel(g, P)
    base = noise_state(g, 0.05, k0=1.5, seed=3)
    dt = time_step(model, base, RunConfig(g, P, output_every=0.1))
    sol = expand(model, base, [1.0], Ro=0.1, dt=dt).solutions[0]
    Ros = [0.1, 0.05, 0.025]
    _, s0 = scaling_study(sol, Ros, order=0)
    _, s1 = scaling_study(sol, Ros, order=1)
    wall = time.perf_counter() - t0
    eqs = ("momentum_x", "momentum_y")
    ok = all(s0[e] >= 0.8 for e in eqs) and all(s1[e] >= 1.8 for e in eqs) and wall < 600
    report(
        "residual_scaling",
        ok,
        "zeroth-order slopes x={:.3f} y={:.3f}; first-order slopes x={:.3f} y={:.3f}; time={:.1f}s".format(
            s0["momentum_x"], s0["momentum_y"], s1["momentum_x"], s1["momentum_y"], wall
        ),
    )
