"""Command-line front end: ``baroclinic {dispersion,simulate,expand,residual}``.

Exit codes: 0 success, 2 usage or configuration error, 3 numerical blow-up,
4 I/O error.  Every command that produces files also writes a manifest
listing them with SHA-256 hashes.

Config keys (flat ``key = value``, ``#`` comments, unknown keys rejected):

simulate
    Nx, Ny, Nz, Lx, Ly, B, Ro, H            grid and parameters
    seed_type = mode | noise | snapshot
    mode_m, mode_n, branch, structure, amplitude
    noise_k0, noise_seed, noise_interior, snapshot_path
    t_end, dt (auto), cfl, output_every, snapshot_every
    track_modes = m,n;m,n    fit_window = t0,t1
    filter_strength, output_dir, figures
expand
    base_config (required), ro_list, snapshot_times, forcing,
    amplitude_cap, dt (auto), output_dir
residual
    snapshots (required, comma list), output_dir, order = 0 | 1,
    heatmaps, heatmap_level, figures
"""

from __future__ import annotations

import argparse
import math
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .asymptotics import ApproxSolution, expand
from .config import ConfigError, load_config, write_manifest
from .dispersion import (
    DomainError,
    ModeSpec,
    Params,
    critical_Q,
    critical_q,
    growth_rate,
    max_growth,
    stability_map,
    write_stability_csv,
)
from .grid import Grid
from .qg_core import BlowUpError, InversionError, QGModel, RunConfig, fit_growth_rate, initial_state, run, time_step
from .residual import EQUATIONS, scaling_study, write_ppm, write_residual_csv, write_slopes_csv
from .snapshots import SnapshotError, read_approx_snapshot, write_approx_snapshot

__all__ = ["main"]

EXIT_OK, EXIT_USAGE, EXIT_BLOWUP, EXIT_IO = 0, 2, 3, 4


class UsageError(Exception):
    pass


def _emit(key, value):
    if isinstance(value, float):
        value = format(value, ".17g")
    print(f"{key} = {value}")


def _manifest(out_dir: Path, command, entries, files, started):
    out_dir.mkdir(parents=True, exist_ok=True)
    head = dict(command=command, version=__version__, duration_s=time.perf_counter() - started)
    write_manifest(out_dir / "manifest.txt", {**head, **entries}, files)


# -- dispersion ----------------------------------------------------------------


def cmd_dispersion(args) -> int:
    started = time.perf_counter()
    qc, Qc = critical_q(args.tol), critical_Q(args.tol)
    _emit("q_c", qc)
    _emit("Q_c", Qc)
    _emit("root_difference", abs(qc - Qc))
    if args.critical_only:
        return EXIT_OK
    if args.steps < 1 or not (0 < args.q_min < args.q_max) or not args.B:
        raise UsageError("empty or invalid wavenumber grid (need 0 < q-min < q-max and steps >= 1)")
    if any(b <= 0 for b in args.B):
        raise UsageError("B values must be positive")
    q = np.linspace(args.q_min, args.q_max, args.steps + 1)
    rows = stability_map(args.B, q, args.angle)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    files = [out]
    write_stability_csv(rows, out)
    for B in args.B:
        kmax = 2 * args.q_max / math.sqrt(B)
        best = max_growth(Params(B=B), (max(1e-6, 2 * args.q_min / math.sqrt(B)), kmax))
        _emit(f"max_growth[B={B:g}]", best.lambda_max)
        _emit(f"argmax_xi1[B={B:g}]", best.argmax.xi1)
        _emit(f"unstable[B={B:g}]", best.unstable)
    if args.figures:
        from .plotting import plot_stability_map

        files.append(plot_stability_map(rows, out.with_suffix(".png"), qc))
    _emit("csv", str(out))
    _manifest(out.parent, "dispersion", dict(B=args.B, q_min=args.q_min, q_max=args.q_max, steps=args.steps), files, started)
    return EXIT_OK


# -- simulate ------------------------------------------------------------------


def _grid_params(cfg):
    grid = Grid(cfg["Nx"], cfg["Ny"], cfg["Nz"], cfg["Lx"], cfg["Ly"])
    params = Params(B=cfg["B"], Ro=cfg["Ro"], H=cfg["H"])
    return grid, params


def _run_config(cfg) -> RunConfig:
    grid, params = _grid_params(cfg)
    if cfg["seed_type"] not in ("mode", "noise", "snapshot"):
        raise ConfigError(f"seed_type must be mode, noise or snapshot, got {cfg['seed_type']!r}")
    if cfg["seed_type"] == "snapshot" and not cfg["snapshot_path"]:
        raise ConfigError("seed_type = snapshot needs snapshot_path")
    if cfg["t_end"] <= 0 or cfg["output_every"] <= 0:
        raise ConfigError("t_end and output_every must be positive")
    modes = cfg["track_modes"] or ([(cfg["mode_m"], cfg["mode_n"])] if cfg["seed_type"] == "mode" else [])
    return RunConfig(
        grid=grid,
        params=params,
        seed_type=cfg["seed_type"],
        mode=(cfg["mode_m"], cfg["mode_n"]),
        branch=cfg["branch"],
        structure=cfg["structure"],
        amplitude=cfg["amplitude"],
        noise_k0=cfg["noise_k0"],
        noise_seed=cfg["noise_seed"],
        noise_interior=cfg["noise_interior"],
        snapshot_path=cfg["snapshot_path"] or None,
        t_end=cfg["t_end"],
        dt=cfg["dt"],
        cfl=cfg["cfl"],
        output_every=cfg["output_every"],
        snapshot_every=cfg["snapshot_every"],
        track_modes=tuple(modes),
        filter_strength=cfg["filter_strength"],
    )


def cmd_simulate(args) -> int:
    started = time.perf_counter()
    cfg = load_config(args.config, "simulate")
    rc = _run_config(cfg)
    out = Path(cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    series_path = out / "series.csv"
    files = []
    entries = dict(cfg, seed=cfg["noise_seed"])
    try:
        result = run(rc, out)
    except BlowUpError as err:
        if getattr(err, "series", None) is not None:
            err.series.write_csv(series_path)
        files = [series_path, *sorted(out.glob("snapshot_*.bqgs"))]
        _manifest(out, "simulate", {**entries, "status": "blowup"}, files, started)
        raise
    result.series.write_csv(series_path)
    files = [series_path, *result.snapshots]
    _emit("dt", result.dt)
    _emit("t_final", result.state.t)
    _emit("series", str(series_path))
    window = cfg["fit_window"]
    if len(window) == 2 and rc.track_modes:
        m, n = rc.track_modes[0]
        slope, r2 = fit_growth_rate(result.series.times, result.series.mode(m, n), window)
        _emit(f"fitted_rate[{m},{n}]", slope)
        _emit("fit_r2", r2)
        xi = ModeSpec(2 * math.pi * m / rc.grid.Lx, 2 * math.pi * n / rc.grid.Ly)
        lam = growth_rate(xi, rc.params).real
        _emit(f"predicted_rate[{m},{n}]", lam)
        entries.update(fitted_rate=slope, predicted_rate=lam)
    if cfg["figures"]:
        from .plotting import plot_growth

        rate = entries.get("predicted_rate")
        files.append(plot_growth(result.series, out / "growth.png", rate, window or None))
    _manifest(out, "simulate", {**entries, "status": "ok"}, files, started)
    return EXIT_OK


# -- expand ----------------------------------------------------------------------


def cmd_expand(args) -> int:
    started = time.perf_counter()
    cfg = load_config(args.config, "expand")
    if not Path(cfg["base_config"]).is_file():
        raise ConfigError(f"base config {cfg['base_config']} not found")
    base_cfg = load_config(cfg["base_config"], "simulate")
    rc = _run_config(base_cfg)
    if len(cfg["ro_list"]) == 0 or any(r <= 0 for r in cfg["ro_list"]):
        raise ConfigError("ro_list must hold positive values")
    if any(t < 0 for t in cfg["snapshot_times"]):
        raise ConfigError("snapshot_times must be non-negative")
    model = QGModel(rc.grid, rc.params, rc.filter_strength)
    state = initial_state(rc)
    dt = cfg["dt"] or time_step(model, state, rc)
    out = Path(cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    files = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        res = expand(model, state, cfg["snapshot_times"], cfg["ro_list"][0], dt,
                     forcing=cfg["forcing"], amplitude_cap=cfg["amplitude_cap"])
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    for sol in res.solutions:
        _emit(f"w_e1_top_mismatch[t={sol.t:g}]", sol.diagnostics["w_e1_top_mismatch"])
        _emit(f"w_N_boundary[t={sol.t:g}]", sol.diagnostics["w_N_boundary"])
        for Ro in cfg["ro_list"]:
            path = out / f"approx_t{sol.t:g}_Ro{Ro:g}.bapx"
            write_approx_snapshot(path, sol.fields, sol.rates, sol.grid, replace_ro(sol.params, Ro), sol.t)
            files.append(path)
    _emit("snapshots", len(files))
    _manifest(out, "expand", dict(cfg, seed=base_cfg["noise_seed"], dt=dt), files, started)
    return EXIT_OK


def replace_ro(params: Params, Ro: float) -> Params:
    return Params(B=params.B, Ro=Ro, H=params.H)


# -- residual --------------------------------------------------------------------


def cmd_residual(args) -> int:
    started = time.perf_counter()
    cfg = load_config(args.config, "residual")
    if cfg["order"] not in (0, 1):
        raise ConfigError("order must be 0 or 1")
    missing = [p for p in cfg["snapshots"] if not Path(p).is_file()]
    if missing:
        raise ConfigError(f"missing snapshots: {', '.join(missing)}")
    sols = []
    for p in cfg["snapshots"]:
        fields, rates, grid, params, t = read_approx_snapshot(p)
        sols.append(ApproxSolution(grid, params, t, fields, rates))
    if len({s.t for s in sols}) != 1:
        raise ConfigError("snapshots must share one time")
    if len(sols) < 3:
        raise ConfigError("need at least 3 snapshots (Ro values)")
    sols.sort(key=lambda s: -s.Ro)
    reports, slopes = scaling_study(sols, order=cfg["order"])
    out = Path(cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    files = [out / "residuals.csv", out / "slopes.csv"]
    write_residual_csv(files[0], reports)
    write_slopes_csv(files[1], slopes)
    for eq in EQUATIONS:
        _emit(f"slope[{eq}]", slopes[eq])
    if cfg["heatmaps"]:
        from .residual import boussinesq_residual

        for s in sols:
            rep = boussinesq_residual(s.truncated(cfg["order"]), keep_fields=True)
            k = int(np.argmin(np.abs(s.grid.z - cfg["heatmap_level"])))
            for eq in EQUATIONS:
                path = out / f"residual_{eq}_Ro{s.Ro:g}.ppm"
                write_ppm(path, rep.fields[eq][k])
                files.append(path)
    if cfg["figures"]:
        from .plotting import plot_residual_scaling

        files.append(plot_residual_scaling(reports, slopes, out / "residual_scaling.png"))
    _manifest(out, "residual", dict(cfg, seed=0), files, started)
    return EXIT_OK


# -- entry point -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="baroclinic", description=__doc__.split("\n\n")[0],
                                 epilog=__doc__.split("\n\n", 2)[2],
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    d = sub.add_parser("dispersion", help="stability map CSV and critical parameters")
    d.add_argument("--B", type=float, nargs="+", default=[1.0], help="Burger number(s)")
    d.add_argument("--q-min", type=float, default=0.05)
    d.add_argument("--q-max", type=float, default=2.0)
    d.add_argument("--steps", type=int, default=200, help="number of q intervals")
    d.add_argument("--angle", type=float, default=0.0, help="wavevector direction (radians)")
    d.add_argument("--tol", type=float, default=1e-12, help="bisection tolerance")
    d.add_argument("--critical-only", action="store_true", help="only print q_c and Q_c")
    d.add_argument("--out", default="stability_map.csv")
    d.add_argument("--figures", action="store_true", help="also write a PNG next to the CSV")
    d.set_defaults(func=cmd_dispersion)

    for name, func, text in (
        ("simulate", cmd_simulate, "integrate the limit model"),
        ("expand", cmd_expand, "build first-order approximate solutions"),
        ("residual", cmd_residual, "residual scaling study from BAPX snapshots"),
    ):
        p = sub.add_parser(name, help=text)
        p.add_argument("config", help="key = value config file")
        p.set_defaults(func=func)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ConfigError, DomainError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (BlowUpError, InversionError) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_BLOWUP
    except (SnapshotError, OSError) as err:
        print(f"I/O error: {err}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
