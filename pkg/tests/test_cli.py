import hashlib
from pathlib import Path

import pytest

from baroclinic.cli import main
from baroclinic.config import ConfigError, parse_config
from baroclinic.dispersion import critical_q

SIM = """# unstable zonal mode
Nx = 16
Ny = 16
Nz = 12
B = 1.0
mode_m = 1
mode_n = 0
t_end = 5
track_modes = 1,0
fit_window = 1,5
output_dir = sim
"""


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def manifest_ok(path):
    lines = Path(path).read_text().splitlines()
    files = [l.split() for l in lines if l.startswith("file ")]
    for _, f, h in files:
        assert hashlib.sha256(Path(f).read_bytes()).hexdigest() == h
    return dict(l.split(" = ", 1) for l in lines if " = " in l), files


def test_dispersion_map(tmp_path, capsys):
    out = tmp_path / "m" / "map.csv"
    assert main(["dispersion", "--B", "1", "--q-min", "0.05", "--q-max", "2", "--steps", "200", "--out", str(out), "--figures"]) == 0
    rows = [l.split(",") for l in out.read_text().splitlines()[1:]]
    qc = critical_q()
    signs = [(float(r[3]), float(r[4]) > 0) for r in rows]
    assert all(pos for q, pos in signs if q < qc - 1e-9) and not any(pos for q, pos in signs if q > qc)
    assert (tmp_path / "m" / "map.png").stat().st_size > 0
    entries, files = manifest_ok(tmp_path / "m" / "manifest.txt")
    assert entries["command"] == "dispersion" and len(files) == 2


def test_dispersion_critical_only(capsys):
    assert main(["dispersion", "--critical-only"]) == 0
    out = dict(l.split(" = ") for l in capsys.readouterr().out.splitlines())
    assert abs(float(out["q_c"]) - float(out["Q_c"])) < 1e-10


def test_dispersion_empty_grid(tmp_path):
    assert main(["dispersion", "--q-min", "1", "--q-max", "1", "--out", str(tmp_path / "x.csv")]) == 2
    with pytest.raises(SystemExit) as e:
        main(["dispersion", "--steps", "many"])
    assert e.value.code == 2


def test_simulate_and_determinism(tmp_path, capsys):
    cfg = write(tmp_path, "a.cfg", SIM)
    assert main(["simulate", str(cfg)]) == 0
    out = dict(l.split(" = ") for l in capsys.readouterr().out.splitlines())
    assert abs(float(out["fitted_rate[1,0]"]) / float(out["predicted_rate[1,0]"]) - 1) < 0.02
    first = (tmp_path / "sim" / "series.csv").read_bytes()
    manifest_ok(tmp_path / "sim" / "manifest.txt")
    assert main(["simulate", str(cfg)]) == 0
    assert (tmp_path / "sim" / "series.csv").read_bytes() == first


def test_simulate_stable(tmp_path, capsys):
    cfg = write(tmp_path, "s.cfg", SIM.replace("mode_m = 1", "mode_m = 3").replace("1,0", "3,0").replace("t_end = 5", "t_end = 10"))
    assert main(["simulate", str(cfg)]) == 0
    rows = (tmp_path / "sim" / "series.csv").read_text().splitlines()[1:]
    amps = [float(r.split(",")[2]) for r in rows]
    assert max(amps) / min(amps) < 2


def test_simulate_config_errors(tmp_path):
    assert main(["simulate", str(tmp_path / "nope.cfg")]) == 2
    assert main(["simulate", str(write(tmp_path, "u.cfg", SIM + "colour = red\n"))]) == 2
    assert main(["simulate", str(write(tmp_path, "v.cfg", SIM.replace("Nx = 16", "Nx = 12")))]) == 2


def test_simulate_blowup(tmp_path):
    cfg = write(tmp_path, "b.cfg", SIM.replace("t_end = 5", "t_end = 1\ndt = 1e308\noutput_every = 1e308\n"))
    text = cfg.read_text().replace("t_end = 1\n", "t_end = 1e308\n")
    cfg.write_text(text)
    assert main(["simulate", str(cfg)]) == 3
    entries, files = manifest_ok(tmp_path / "sim" / "manifest.txt")
    assert entries["status"] == "blowup"
    assert any(f[1].endswith("snapshot_blowup.bqgs") for f in files)


def test_expand_and_residual(tmp_path, capsys):
    write(tmp_path, "base.cfg", SIM.replace("mode_m = 1", "seed_type = noise\namplitude = 0.05\nmode_m = 1").replace("Nz = 12", "Nz = 16"))
    cfg = write(tmp_path, "e.cfg", "base_config = base.cfg\nsnapshot_times = 0.5\n")
    assert main(["expand", str(cfg)]) == 0
    names = sorted(p.name for p in (tmp_path / "expand_out").glob("*.bapx"))
    assert names == ["approx_t0.5_Ro0.025.bapx", "approx_t0.5_Ro0.05.bapx", "approx_t0.5_Ro0.1.bapx"]
    manifest_ok(tmp_path / "expand_out" / "manifest.txt")
    snaps = ", ".join(f"expand_out/{n}" for n in names)
    for order, lo in ((1, 1.8), (0, 0.8)):
        rc = write(tmp_path, "r.cfg", f"snapshots = {snaps}\norder = {order}\nheatmaps = true\nfigures = true\n")
        capsys.readouterr()
        assert main(["residual", str(rc)]) == 0
        out = dict(l.split(" = ") for l in capsys.readouterr().out.splitlines())
        assert float(out["slope[momentum_x]"]) >= lo and float(out["slope[momentum_y]"]) >= lo
    res = tmp_path / "residual_out"
    assert (res / "residuals.csv").exists() and (res / "slopes.csv").exists()
    assert (res / "residual_momentum_x_Ro0.1.ppm").read_bytes().startswith(b"P6")
    assert (res / "residual_scaling.png").exists()
    manifest_ok(res / "manifest.txt")


def test_expand_zero_base(tmp_path, capsys):
    write(tmp_path, "base.cfg", SIM.replace("mode_m = 1", "amplitude = 0\nmode_m = 1"))
    cfg = write(tmp_path, "e.cfg", "base_config = base.cfg\nsnapshot_times = 0.2\nro_list = 0.1\n")
    assert main(["expand", str(cfg)]) == 0
    from baroclinic.snapshots import read_approx_snapshot

    fields, rates, *_ = read_approx_snapshot(tmp_path / "expand_out" / "approx_t0.2_Ro0.1.bapx")
    assert all(not v.any() for v in fields.values())


def test_expand_missing_base(tmp_path):
    assert main(["expand", str(write(tmp_path, "e.cfg", "base_config = missing.cfg\n"))]) == 2
    assert main(["expand", str(write(tmp_path, "f.cfg", "snapshot_times = 1\n"))]) == 2


def test_residual_missing_snapshots(tmp_path):
    assert main(["residual", str(write(tmp_path, "r.cfg", "snapshots = a.bapx, b.bapx, c.bapx\n"))]) == 2


def test_config_parser():
    cfg = parse_config("Nx = 64  # comment\n\ntrack_modes = 1,0;1,1\nfigures = yes\n", "simulate")
    assert cfg["Nx"] == 64 and cfg["track_modes"] == [(1, 0), (1, 1)] and cfg["figures"] is True
    for bad in ("Nx 64", "Nx = sixty", "Nx = 1\nNx = 2", "bogus = 1"):
        with pytest.raises(ConfigError):
            parse_config(bad, "simulate")
