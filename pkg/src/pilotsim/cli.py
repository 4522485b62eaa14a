"""Command-line front end: ``pilotsim <subcommand> [options]``.

Subcommands: ``sweep-mobility``, ``sweep-sir``, ``surface-a``,
``collision-stats`` and ``selftest``. A config file is flat ``key = value``
text using the :class:`~pilotsim.harness.SimConfig` field names; flags use
the kebab-case of the same names and override the file.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, fields
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .channel import InvalidParameterError
from .harness import SimConfig, SurfaceResult, SweepResult, mse_surface, run_sweep
from .pilots import collision_pmf, schedule_collision_distances
from .selftest import run_selftest

log = logging.getLogger("pilotsim")

CSV_HEADER = ["estimator", "v_kmh", "sir_db", "mse", "std_err", "n_samples", "seed"]
SEED_ENV = "PILOTSIM_SEED"

_TUPLE_FIELDS = {"v_kmh": float, "sir_list_db": float, "estimators": str}
_OPTIONAL_FLOAT = {"sigma_c2", "sir_db", "grad_scale", "kalman_a"}
_COMPLEX = {"h_hat0", "q0"}


class ConfigError(InvalidParameterError):
    pass


def _coerce(key: str, raw):
    """Convert a raw config value (string or JSON value) to the field type."""
    types = {f.name: f.type for f in fields(SimConfig)}
    if key not in types:
        raise ConfigError(f"unknown config key {key!r}")
    try:
        if key in _TUPLE_FIELDS:
            items = raw if isinstance(raw, (list, tuple)) else [s for s in str(raw).replace(",", " ").split()]
            return tuple(_TUPLE_FIELDS[key](s) for s in items)
        if key in _OPTIONAL_FLOAT:
            if raw is None or str(raw).strip().lower() in ("none", ""):
                return None
            return float(raw)
        if key in _COMPLEX:
            return complex(str(raw).replace(" ", ""))
        if key == "hopping":
            if isinstance(raw, bool):
                return raw
            s = str(raw).strip().lower()
            if s not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(s)
            return s in ("true", "1", "yes")
        if key == "mode" or key == "s_form":
            return str(raw).strip()
        t = types[key]
        if t == "int":
            f = float(raw)
            if f != int(f):
                raise ValueError(raw)
            return int(f)
        return float(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key!r}: {raw!r}") from exc


def read_config_file(path) -> dict:
    """Key/value pairs from a ``key = value`` file or a JSON manifest."""
    path = Path(path)
    text = path.read_text()
    if text.lstrip().startswith("{"):
        data = json.loads(text)
        return dict(data.get("config", data))
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k] = v
    return out


def parse_config(path=None, overrides: dict | None = None) -> SimConfig:
    """Resolve a :class:`SimConfig` from an optional file plus overrides.

    Unset values keep the reference defaults. A contamination level set by
    one source as ``sigma_c2`` and by another as ``sir_db`` is a conflict.
    """
    values = {}
    if path is not None:
        values.update({k: _coerce(k, v) for k, v in read_config_file(path).items()})
    for k, v in (overrides or {}).items():
        if v is None:
            continue
        values[k] = _coerce(k, v)
    if values.get("sigma_c2") is not None and values.get("sir_db") is not None:
        raise ConfigError("conflicting contamination settings: both sigma_c2 and sir_db given")
    try:
        return SimConfig(**values)
    except InvalidParameterError as exc:
        raise ConfigError(str(exc)) from exc


def format_config(cfg: SimConfig) -> str:
    lines = []
    for k, v in cfg.to_dict().items():
        if isinstance(v, list):
            v = ", ".join(str(x) for x in v)
        lines.append(f"{k} = {v}")
    return "\n".join(lines) + "\n"


@dataclass
class RunManifest:
    config: SimConfig
    command: str
    outputs: dict
    version: str = __version__
    timestamp: str = ""

    def to_json(self) -> str:
        return json.dumps({
            "tool": "pilotsim", "version": self.version, "command": self.command,
            "timestamp": self.timestamp or datetime.now(timezone.utc).isoformat(timespec="seconds"),
            "master_seed": self.config.master_seed, "outputs": self.outputs,
            "config": self.config.to_dict(),
        }, indent=2)


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.9g}"


def write_csv(result: SweepResult, path) -> None:
    """Write sweep rows in deterministic (estimator, axis) order."""
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            for r in result.rows:
                w.writerow([r.estimator, _fmt(r.v_kmh), _fmt(r.sir_db), _fmt(r.mse),
                            _fmt(r.std_err), _fmt(r.n_samples), _fmt(r.seed)])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def read_csv(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def write_surface_csv(surface: SurfaceResult, path) -> None:
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["v_kmh", "a", "mse", "seed"])
            for i, v in enumerate(surface.v_kmh):
                for j, a in enumerate(surface.a_grid):
                    w.writerow([_fmt(v), _fmt(a), _fmt(surface.mse[i, j]), _fmt(surface.seed)])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def render_plot(result, axis: str, path) -> None:
    """Static plot of MSE curves (log scale) or of the ``(a, v)`` MSE surface."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    if axis == "surface":
        mesh = ax.pcolormesh(result.a_grid, result.v_kmh, np.log10(result.mse), shading="nearest")
        fig.colorbar(mesh, ax=ax, label="log10 MSE")
        ax.plot(result.optimal_a(), result.v_kmh, "w.--", lw=1, label="argmin")
        ax.set_xlabel("AR coefficient a")
        ax.set_ylabel("mobility [km/h]")
        ax.legend(loc="lower left")
    else:
        if not result.rows:
            plt.close(fig)
            raise InvalidParameterError("nothing to plot")
        for name in dict.fromkeys(r.estimator for r in result.rows):
            rows = result.series(name)
            xs = [r.v_kmh if axis == "mobility" else r.sir_db for r in rows]
            ax.plot(xs, [r.mse for r in rows], marker="o", label=name)
        ax.set_yscale("log")
        ax.set_xlabel("mobility [km/h]" if axis == "mobility" else "SIR [dB]")
        ax.set_ylabel("MSE")
        ax.grid(True, which="both", alpha=0.3)
        ax.legend()
    fig.tight_layout()
    try:
        # keep labels as text in SVG output
        with plt.rc_context({"svg.fonttype": "none"}):
            fig.savefig(path, format=Path(path).suffix.lstrip(".") or "svg")
    finally:
        plt.close(fig)


# argument parsing -------------------------------------------------------------

def _floats(s: str):
    return [float(v) for v in s.replace(",", " ").split()]


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file or JSON manifest")
    common.add_argument("--seed", type=int, help=f"master seed (fallback: ${SEED_ENV})")
    common.add_argument("--workers", type=int, help="worker processes (default: CPU count)")
    common.add_argument("--mode", choices=["idealized", "explicit"])
    common.add_argument("--estimators", help="comma list of ls,mmse,kalman,modkalman,predictor,avg")
    common.add_argument("--no-hopping", action="store_true", help="fixed pilot schedule")
    common.add_argument("--csv", help="CSV output path")
    common.add_argument("--plot", help="SVG plot output path")
    common.add_argument("--manifest", help="manifest JSON output path")
    common.add_argument("-v", "--verbose", action="store_true")
    sim_flags = [f for f in fields(SimConfig) if f.name not in ("master_seed", "workers", "mode", "estimators",
                                                                "hopping")]
    for f in sim_flags:
        common.add_argument("--" + f.name.replace("_", "-"), dest=f.name, default=None)

    p = argparse.ArgumentParser(prog="pilotsim", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("sweep-mobility", parents=[common], help="MSE versus mobility")
    sub.add_parser("sweep-sir", parents=[common], help="MSE versus signal-to-interference ratio")
    sp = sub.add_parser("surface-a", parents=[common], help="fixed-a Kalman MSE over (a, v)")
    sp.add_argument("--a-grid", type=_floats, help="AR coefficients (default 0:0.01:1)")
    cp = sub.add_parser("collision-stats", parents=[common], help="collision distance statistics")
    cp.add_argument("--slots", type=int, default=100_000)
    sub.add_parser("selftest", parents=[common], help="analytic-oracle checks")
    return p


def config_from_args(args) -> SimConfig:
    overrides = {f.name: getattr(args, f.name, None) for f in fields(SimConfig)
                 if f.name not in ("master_seed", "workers", "mode", "estimators", "hopping")}
    seed = args.seed
    if seed is None and os.environ.get(SEED_ENV):
        seed = int(os.environ[SEED_ENV])
    overrides["master_seed"] = seed
    overrides["workers"] = args.workers if args.workers is not None else (
        None if args.config else os.cpu_count() or 1)
    overrides["mode"] = args.mode
    overrides["estimators"] = args.estimators
    if args.no_hopping:
        overrides["hopping"] = "false"
    return parse_config(args.config, overrides)


def _write_outputs(args, cfg, command, csv_writer, plot_axis, result) -> dict:
    outputs = {}
    if args.csv:
        csv_writer(result, args.csv)
        outputs["csv"] = str(args.csv)
    if args.plot:
        render_plot(result, plot_axis, args.plot)
        outputs["plot"] = str(args.plot)
    if args.manifest:
        outputs["manifest"] = str(args.manifest)
        Path(args.manifest).write_text(RunManifest(cfg, command, outputs).to_json() + "\n")
    return outputs


def _print_rows(result: SweepResult, out) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in result.rows:
        w.writerow([r.estimator, _fmt(r.v_kmh), _fmt(r.sir_db), _fmt(r.mse), _fmt(r.std_err),
                    r.n_samples, r.seed])


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
    except InvalidParameterError as exc:
        print(f"pilotsim: config error: {exc}", file=sys.stderr)
        return 2

    if args.command in ("sweep-mobility", "sweep-sir"):
        axis = "mobility" if args.command == "sweep-mobility" else "sir"
        result = run_sweep(cfg, axis, progress=lambda i, n, s: log.info("%d/%d points, %.1fs", i, n, s))
        _write_outputs(args, cfg, args.command, write_csv, axis, result)
        if not args.csv:
            _print_rows(result, sys.stdout)
        if result.diverged:
            print(f"pilotsim: {result.diverged} diverged realization(s) excluded", file=sys.stderr)
            return 1
        return 0

    if args.command == "surface-a":
        surface = mse_surface(cfg, a_grid=args.a_grid)
        _write_outputs(args, cfg, args.command, write_surface_csv, "surface", surface)
        for v, a in zip(surface.v_kmh, surface.optimal_a()):
            print(f"v={_fmt(v)} km/h  a*={_fmt(a)}")
        return 0

    if args.command == "collision-stats":
        d = schedule_collision_distances(cfg.master_seed, cfg.K, args.slots, hopping=cfg.hopping)
        print(f"K={cfg.K} slots={args.slots} collisions={d.size}")
        print(f"mean collision distance {d.mean():.4f} (expected {cfg.K if cfg.hopping else 1})")
        if args.csv:
            top = int(d.max()) if d.size else 0
            counts = np.bincount(d, minlength=top + 1)
            with Path(args.csv).open("w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["d", "count", "empirical", "pmf"])
                for k in range(1, top + 1):
                    w.writerow([k, int(counts[k]), _fmt(counts[k] / d.size), _fmt(collision_pmf(k, cfg.K))])
        return 0

    if args.command == "selftest":
        return 0 if run_selftest(cfg, out=sys.stdout) else 1
    return 2


if __name__ == "__main__":
    sys.exit(main())
