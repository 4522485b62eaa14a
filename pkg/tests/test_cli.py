import json
import math

import numpy as np
import pytest

from pilotsim import cli
from pilotsim.cli import (
    CSV_HEADER,
    ConfigError,
    RunManifest,
    format_config,
    main,
    parse_config,
    read_csv,
    render_plot,
    write_csv,
)
from pilotsim.harness import SimConfig, SurfaceResult, SweepResult, SweepRow

QUICK = ["--n-slots", "600", "--n-realizations", "2", "--burn-in", "100", "--workers", "1"]


def row(name="ls", v=3.0, mse=0.123456789123, **kw):
    base = dict(estimator=name, v_kmh=v, sir_db=2.21848749616, mse=mse, std_err=0.0012, n_samples=19000, seed=0)
    base.update(kw)
    return SweepRow(**base)


def test_empty_config_gives_reference_defaults():
    cfg = parse_config()
    assert cfg == SimConfig()
    assert (cfg.sigma_n2, cfg.L, cfg.K, cfg.tau, cfg.mu, cfg.nu) == (0.2, 7, 96, 96, 1e-5, 100)
    assert (cfg.f_c, cfg.N_s, cfg.t_s, cfg.a0) == (1.8e9, 20, 5e-4, 0.5)


def test_sir_flag_sets_contamination():
    assert parse_config(overrides={"sir_db": "0"}).contamination_power == 1.0


def test_conflicting_contamination_flags(tmp_path):
    with pytest.raises(ConfigError, match="sigma_c2"):
        parse_config(overrides={"sigma_c2": "0.6", "sir_db": "0"})
    f = tmp_path / "c.cfg"
    f.write_text("sigma_c2 = 0.6\n")
    with pytest.raises(ConfigError):
        parse_config(f, {"sir_db": 3})


def test_bad_keys_and_values_name_the_key(tmp_path):
    f = tmp_path / "c.cfg"
    f.write_text("# comment\nnot_a_key = 3\n")
    with pytest.raises(ConfigError, match="not_a_key"):
        parse_config(f)
    with pytest.raises(ConfigError, match="n_slots"):
        parse_config(overrides={"n_slots": "many"})
    with pytest.raises(ConfigError, match="K"):
        parse_config(overrides={"K": "2.5"})
    f.write_text("K\n")
    with pytest.raises(ConfigError, match="key = value"):
        parse_config(f)


def test_config_file_values(tmp_path):
    f = tmp_path / "c.cfg"
    f.write_text("v_kmh = 3, 30\nestimators = ls modkalman\nmode = explicit\nhopping = no  # fixed\n"
                 "h_hat0 = 0.1+0.2j\nsigma_c2 = 0.3\n")
    cfg = parse_config(f, {"n_slots": 2000})
    assert cfg.v_kmh == (3.0, 30.0) and cfg.estimators == ("ls", "modkalman")
    assert cfg.mode == "explicit" and cfg.hopping is False
    assert cfg.h_hat0 == 0.1 + 0.2j and cfg.sigma_c2 == 0.3 and cfg.n_slots == 2000


def test_config_round_trips(tmp_path):
    cfg = SimConfig(sir_db=3.0, v_kmh=(3.0,), estimators=("mmse", "predictor"), h_hat0=0.5j, hopping=False)
    text = tmp_path / "c.cfg"
    text.write_text(format_config(cfg))
    assert parse_config(text) == cfg
    manifest = tmp_path / "m.json"
    manifest.write_text(RunManifest(cfg, "sweep-sir", {}).to_json())
    assert parse_config(manifest) == cfg


def test_csv_header_only(tmp_path):
    path = tmp_path / "empty.csv"
    write_csv(SweepResult(), path)
    assert path.read_text() == ",".join(CSV_HEADER) + "\n"


def test_csv_round_trip(tmp_path):
    path = tmp_path / "one.csv"
    write_csv(SweepResult(rows=[row()]), path)
    lines = path.read_text().splitlines()
    assert len(lines) == 2
    (back,) = read_csv(path)
    assert back["estimator"] == "ls" and back["mse"] == "0.123456789"
    assert float(back["sir_db"]) == pytest.approx(2.21848750)
    assert int(back["n_samples"]) == 19000


def test_csv_nan_row(tmp_path):
    path = tmp_path / "nan.csv"
    write_csv(SweepResult(rows=[row(mse=math.nan, std_err=math.nan, n_samples=0)]), path)
    assert read_csv(path)[0]["mse"] == "nan"


def test_csv_unwritable_path(tmp_path):
    with pytest.raises(OSError, match="cannot write"):
        write_csv(SweepResult(), tmp_path / "missing" / "x.csv")


def test_sweep_csv_is_byte_identical(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["sweep-mobility", *QUICK, "--v-kmh", "3,130", "--estimators", "ls,modkalman", "--seed", "5"]
    assert main(args + ["--csv", str(a)]) == 0
    assert main(args + ["--csv", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    rows = read_csv(a)
    assert [r["estimator"] for r in rows] == ["ls", "ls", "modkalman", "modkalman"]
    assert {r["seed"] for r in rows} == {"5"}


def test_seed_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("PILOTSIM_SEED", "77")
    out = tmp_path / "s.csv"
    assert main(["sweep-sir", *QUICK, "--sir-list-db", "0", "--estimators", "ls", "--csv", str(out)]) == 0
    assert read_csv(out)[0]["seed"] == "77"
    assert read_csv(out)[0]["sir_db"] == "0"


def test_plot_and_manifest(tmp_path):
    svg, man = tmp_path / "p.svg", tmp_path / "m.json"
    argv = ["sweep-mobility", *QUICK, "--v-kmh", "3,30", "--estimators", "mmse",
            "--plot", str(svg), "--manifest", str(man)]
    assert main(argv) == 0
    text = svg.read_text()
    assert text.lstrip().startswith("<?xml") and "km/h" in text
    data = json.loads(man.read_text())
    assert data["outputs"]["plot"] == str(svg) and data["command"] == "sweep-mobility"
    assert data["version"] and data["timestamp"]
    assert parse_config(man).estimators == ("mmse",)


def test_single_series_plot_has_one_line(tmp_path, monkeypatch):
    import matplotlib.pyplot as plt

    seen = {}
    monkeypatch.setattr(plt, "close", lambda fig: seen.setdefault("lines", fig.axes[0].get_lines()))
    render_plot(SweepResult(rows=[row(v=3.0), row(v=30.0)]), "mobility", tmp_path / "one.svg")
    assert len(seen["lines"]) == 1
    assert seen["lines"][0].axes.get_xlabel() == "mobility [km/h]"


def test_surface_heatmap(tmp_path):
    surf = SurfaceResult(a_grid=np.linspace(0, 1, 5), v_kmh=np.array([3.0, 30.0]),
                         mse=np.linspace(0.1, 1, 10).reshape(2, 5))
    render_plot(surf, "surface", tmp_path / "s.svg")
    assert "AR coefficient" in (tmp_path / "s.svg").read_text()


def test_empty_plot_rejected(tmp_path):
    with pytest.raises(ValueError):
        render_plot(SweepResult(), "mobility", tmp_path / "x.svg")


def test_config_error_exit_code(capsys):
    assert main(["sweep-sir", "--sigma-c2", "0.6", "--sir-db", "0"]) == 2
    assert "config error" in capsys.readouterr().err


def test_divergence_sets_exit_code(monkeypatch, capsys):
    monkeypatch.setattr(cli, "run_sweep", lambda cfg, axis, progress=None: SweepResult(rows=[row()], diverged=3))
    assert main(["sweep-mobility", "--workers", "1"]) == 1
    captured = capsys.readouterr()
    assert "3 diverged" in captured.err
    assert captured.out.startswith(",".join(CSV_HEADER))


def test_collision_stats(tmp_path, capsys):
    out = tmp_path / "c.csv"
    assert main(["collision-stats", "--slots", "20000", "--K", "8", "--tau", "8", "--csv", str(out)]) == 0
    assert "expected 8" in capsys.readouterr().out
    rows = read_csv(out)
    assert rows[0]["d"] == "1" and float(rows[0]["pmf"]) == pytest.approx(0.125)


def test_surface_command(tmp_path, capsys):
    out = tmp_path / "s.csv"
    argv = ["surface-a", *QUICK, "--v-kmh", "0", "--a-grid", "0.5,1.0", "--csv", str(out)]
    assert main(argv) == 0
    assert "a*=1" in capsys.readouterr().out
    assert len(read_csv(out)) == 2


def test_selftest_command(capsys):
    assert main(["selftest", "--workers", "1"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert len(out) == 4 and all(line.startswith("[PASS]") for line in out)
