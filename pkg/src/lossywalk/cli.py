"""Command-line front end.

Subcommands: ``simulate``, ``spectrum``, ``winding``, ``sweep`` and
``figures``. Values come from command-line flags, then from a JSON config
file (``--config``), then from the defaults below. Any failure prints a
one-line JSON error record to stderr and exits nonzero.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import io as tio
from .dynamics import EvolveConfig, decay_distribution, imbalance
from .errors import ConfigError, LossyWalkError
from .model import LatticeParams
from .spectrum import EdgeCriteria, cell_weights, open_boundary_spectrum
from .topology import winding_point

COMMANDS = ("simulate", "spectrum", "winding", "sweep", "figures")
DEFAULTS = {
    "L": 51,
    "v": 0.0,
    "r": 0.5,
    "gamma": 1.0,
    "origin": None,
    "stop_norm": 1e-8,
    "dt": 0.01,
    "v_grid": None,
    "output": None,
    "format": "csv",
    "workers": 1,
}
DEFAULT_OUTPUT = {
    "simulate": "decay",
    "spectrum": "spectrum",
    "winding": "winding",
    "sweep": "sweep",
    "figures": "figures",
}
# offset used to read off the non-Bloch winding where the GBZ radius degenerates
CONTINUITY_STEP = 1e-6

EXIT_COMPUTE = 1
EXIT_CONFIG = 2


@dataclasses.dataclass(frozen=True)
class VGrid:
    start: float
    stop: float
    step: float

    def __post_init__(self):
        if not self.step > 0:
            raise ConfigError(f"v-grid step must be positive, got {self.step:g}")
        if not self.start <= self.stop:
            raise ConfigError(f"v-grid start {self.start:g} exceeds stop {self.stop:g}")

    def values(self) -> np.ndarray:
        n = int(math.floor((self.stop - self.start) / self.step + 1e-9))
        return np.round(self.start + self.step * np.arange(n + 1), 10) + 0.0

    @classmethod
    def parse(cls, text: str) -> "VGrid":
        parts = str(text).split(":")
        if len(parts) != 3:
            raise ConfigError(f"v-grid must look like start:stop:step, got {text!r}")
        try:
            start, stop, step = (float(p) for p in parts)
        except ValueError:
            raise ConfigError(f"v-grid entries must be numbers, got {text!r}") from None
        return cls(start, stop, step)


DEFAULT_GRID = VGrid(-1.0, 1.0, 0.01)


@dataclasses.dataclass(frozen=True)
class RunConfig:
    command: str
    params: LatticeParams
    evolve: EvolveConfig
    edge: EdgeCriteria
    v_grid: VGrid | None
    output_path: str
    format: str = "csv"
    workers: int = 1

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.format not in tio.FORMATS:
            raise ConfigError(f"format must be one of {tio.FORMATS}, got {self.format!r}")
        if isinstance(self.workers, bool) or int(self.workers) != self.workers or self.workers < 1:
            raise ConfigError(f"workers must be a positive integer, got {self.workers!r}")


@dataclasses.dataclass(frozen=True)
class SweepRow:
    v: float
    P_imb: float
    P_1: float
    P_L: float
    residual: float
    edge_state_count: int | None
    bloch_w: float
    nonbloch_w: int | None


SWEEP_FIELDS = [f.name for f in dataclasses.fields(SweepRow)]
ERROR_FIELDS = ["v", "stage", "error", "message"]


# -- configuration -----------------------------------------------------------


def _position(text: str, offset: int) -> tuple[int, int]:
    line = text.count("\n", 0, offset) + 1
    col = offset - (text.rfind("\n", 0, offset) + 1) + 1
    return line, col


def load_config(path) -> dict:
    """Read a flat JSON object; keys may use hyphens or underscores."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}", position=(exc.lineno, exc.colno)
        ) from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}:1:1: config must be a JSON object", position=(1, 1))
    out = {}
    for key, value in data.items():
        name = key.replace("-", "_")
        offset = max(text.find(json.dumps(key)), 0)
        line, col = _position(text, offset)
        if name not in DEFAULTS:
            raise ConfigError(f"{path}:{line}:{col}: unknown key {key!r}", position=(line, col))
        if isinstance(value, (dict, list)):
            raise ConfigError(
                f"{path}:{line}:{col}: value of {key!r} must be a scalar", position=(line, col)
            )
        out[name] = (value, (line, col))
    return out


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Merge flags over config-file values over defaults."""
    from_file = load_config(args.config) if args.config else {}
    merged = {}
    where = {}
    for name, default in DEFAULTS.items():
        flag = getattr(args, name, None)
        if flag is not None:
            merged[name] = flag
        elif name in from_file:
            merged[name], where[name] = from_file[name]
        else:
            merged[name] = default

    def fail(name, exc):
        pos = where.get(name)
        prefix = f"{args.config}:{pos[0]}:{pos[1]}: " if pos else ""
        raise ConfigError(f"{prefix}{exc}", position=pos) from exc

    try:
        params = LatticeParams(
            L=merged["L"], v=merged["v"], r=merged["r"], gamma=merged["gamma"], origin=merged["origin"]
        )
    except (TypeError, ValueError) as exc:
        fail(str(exc).split(" ", 1)[0], exc)
    try:
        evolve = EvolveConfig(stop_norm=float(merged["stop_norm"]), dt=float(merged["dt"]))
    except (TypeError, ValueError) as exc:
        fail(str(exc).split(" ", 1)[0], exc)
    grid = None
    if merged["v_grid"] is not None:
        try:
            grid = VGrid.parse(merged["v_grid"])
        except ConfigError as exc:
            fail("v_grid", exc)
    output = merged["output"]
    if output is None:
        output = DEFAULT_OUTPUT[args.command]
        if args.command != "figures":
            output = f"{output}.{merged['format']}"
    try:
        return RunConfig(
            command=args.command,
            params=params,
            evolve=evolve,
            edge=EdgeCriteria(),
            v_grid=grid,
            output_path=str(output),
            format=merged["format"],
            workers=merged["workers"],
        )
    except ConfigError as exc:
        fail("workers" if "workers" in str(exc) else "format", exc)


# -- per-point work ------------------------------------------------------------


def _error(v, stage, exc) -> dict:
    return {"v": v, "stage": stage, "error": type(exc).__name__, "message": str(exc)}


def decay_point(job):
    """Decay probabilities at one v; returns ``(P, residual, errors)``."""
    params, evolve = job
    try:
        record = decay_distribution(params, evolve)
    except (LossyWalkError, np.linalg.LinAlgError) as exc:
        return None, math.nan, [_error(params.v, "decay", exc)]
    return record.P, record.residual, []


def sweep_point(job) -> tuple[SweepRow, list[dict]]:
    params, evolve, edge = job
    v = params.v
    P, residual, errors = decay_point((params, evolve))
    if P is None:
        p_imb = p_1 = p_l = math.nan
    else:
        p_imb, p_1, p_l = float(P[0] - P[-1]), float(P[0]), float(P[-1])

    count = None
    try:
        count = open_boundary_spectrum(params, edge).edge_count
    except LossyWalkError as exc:
        errors.append(_error(v, "spectrum", exc))

    w = winding_point(params)
    errors.extend({"v": v, "stage": "winding", "error": e.split(":")[1].strip(), "message": e} for e in w.errors)
    nonbloch = w.nonbloch_w
    if nonbloch is None:
        nonbloch = _nonbloch_by_continuity(params)
        if nonbloch is not None:
            errors.append(
                {
                    "v": v,
                    "stage": "winding",
                    "error": "note",
                    "message": f"nonbloch_w taken from v +/- {CONTINUITY_STEP:g}, which agree",
                }
            )
    bloch = math.nan if w.bloch_w is None else w.bloch_w
    return SweepRow(v, p_imb, p_1, p_l, residual, count, bloch, nonbloch), errors


def _nonbloch_by_continuity(params: LatticeParams) -> int | None:
    values = []
    for dv in (-CONTINUITY_STEP, CONTINUITY_STEP):
        values.append(winding_point(params.with_v(params.v + dv)).nonbloch_w)
    if values[0] is not None and values[0] == values[1]:
        return values[0]
    return None


def _map(func, jobs, workers: int):
    if workers <= 1 or len(jobs) <= 1:
        return [func(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


def run_sweep(cfg: RunConfig, grid=None) -> tuple[list[SweepRow], list[dict]]:
    if grid is None:
        grid = (cfg.v_grid or DEFAULT_GRID).values()
    jobs = [(cfg.params.with_v(v), cfg.evolve, cfg.edge) for v in grid]
    rows, errors = [], []
    for row, errs in _map(sweep_point, jobs, cfg.workers):
        rows.append(row)
        errors.extend(errs)
    return rows, errors


# -- row builders --------------------------------------------------------------


def decay_rows(P) -> list[dict]:
    return [{"m": m, "P_m": float(p)} for m, p in enumerate(P, start=1)]


def spectrum_rows(result) -> list[dict]:
    return [
        {"v": result.v, "re_E": e.real, "im_E": e.imag, "abs_E": abs(e), "edge_flag": int(f)}
        for e, f in zip(result.eigenvalues, result.edge_flags)
    ]


def winding_rows(results) -> list[dict]:
    return [
        {
            "v": w.v,
            "bloch_w": math.nan if w.bloch_w is None else w.bloch_w,
            "nonbloch_w": w.nonbloch_w,
            "gbz_radius": math.nan if w.gbz_radius is None else w.gbz_radius,
        }
        for w in results
    ]


def winding_errors(results) -> list[dict]:
    return [
        {"v": w.v, "stage": "winding", "error": e.split(":")[1].strip(), "message": e}
        for w in results
        for e in w.errors
    ]


def profile_rows(result) -> list[dict]:
    """Long-format cell populations of the flagged edge states."""
    rows = []
    flagged = [(j, idx) for j, idx in enumerate(result.edge_candidates) if result.edge_flags[idx]]
    for state, (j, idx) in enumerate(flagged, start=1):
        weights = cell_weights(result.edge_vectors[:, j : j + 1])[:, 0]
        for m, w in enumerate(weights, start=1):
            rows.append({"v": result.v, "state": state, "side": result.edge_sides[idx], "m": m, "weight": float(w)})
    return rows


PROFILE_FIELDS = ["v", "state", "side", "m", "weight"]


# -- commands ----------------------------------------------------------------


def _sidecar(path: Path, errors: list[dict], fmt: str) -> Path | None:
    side = path.with_name(f"{path.stem}.errors.{fmt}")
    if errors:
        tio.write_rows(side, errors, fmt, header=ERROR_FIELDS)
        return side
    if side.exists():
        side.unlink()
    return None


def _opt(path):
    return None if path is None else str(path)


def cmd_simulate(cfg: RunConfig) -> dict:
    record = decay_distribution(cfg.params, cfg.evolve)
    tio.write_rows(cfg.output_path, decay_rows(record.P), cfg.format, header=["m", "P_m"])
    return {
        "output": cfg.output_path,
        "method": record.method,
        "sum_P": float(np.sum(record.P)),
        "residual": record.residual,
        "P_imb": imbalance(record),
    }


def _grid_or_single(cfg: RunConfig) -> np.ndarray:
    if cfg.v_grid is not None:
        return cfg.v_grid.values()
    return np.array([cfg.params.v])


def _spectrum_point(job):
    params, edge = job
    try:
        return spectrum_rows(open_boundary_spectrum(params, edge)), []
    except LossyWalkError as exc:
        return [], [_error(params.v, "spectrum", exc)]


def cmd_spectrum(cfg: RunConfig, grid) -> dict:
    rows, errors = [], []
    for r, e in _map(_spectrum_point, [(cfg.params.with_v(v), cfg.edge) for v in grid], cfg.workers):
        rows.extend(r)
        errors.extend(e)
    path = Path(cfg.output_path)
    tio.write_rows(path, rows, cfg.format, header=["v", "re_E", "im_E", "abs_E", "edge_flag"])
    return {"output": str(path), "rows": len(rows), "errors": _opt(_sidecar(path, errors, cfg.format))}


def _winding_point(params):
    return winding_point(params)


def cmd_winding(cfg: RunConfig, grid) -> dict:
    results = _map(_winding_point, [cfg.params.with_v(v) for v in grid], cfg.workers)
    path = Path(cfg.output_path)
    tio.write_rows(path, winding_rows(results), cfg.format, header=["v", "bloch_w", "nonbloch_w", "gbz_radius"])
    side = _sidecar(path, winding_errors(results), cfg.format)
    return {"output": str(path), "rows": len(results), "errors": _opt(side)}


def cmd_sweep(cfg: RunConfig) -> dict:
    rows, errors = run_sweep(cfg)
    path = Path(cfg.output_path)
    tio.write_rows(path, rows, cfg.format, header=SWEEP_FIELDS)
    side = _sidecar(path, errors, cfg.format)
    return {"output": str(path), "rows": len(rows), "errors": _opt(side)}


# figure presets: fixed model constants, v from each panel
FIG_DECAY = {
    "fig2a": 0.3, "fig2b": 0.5, "fig2c": 0.7, "fig2d": 0.9,
    "fig3a": -0.3, "fig3b": -0.5, "fig3c": -0.7, "fig3d": -0.9,
    "fig4": 0.0,
}
FIG_PROFILES = {"fig5a": -0.3, "fig5b": 0.0, "fig5c": 0.3}
FIG_PARAMS = LatticeParams(L=51, r=0.5, gamma=1.0)


def cmd_figures(cfg: RunConfig) -> dict:
    """Data for every figure panel, one file each, plus an errors sidecar."""
    out = Path(cfg.output_path)
    out.mkdir(parents=True, exist_ok=True)
    base = FIG_PARAMS
    ext = cfg.format
    errors = []
    written = []

    def put(name, rows, header):
        written.append(str(tio.write_rows(out / f"{name}.{ext}", rows, ext, header=header)))

    decay = _map(decay_point, [(base.with_v(v), cfg.evolve) for v in FIG_DECAY.values()], cfg.workers)
    for (name, v), (P, residual, errs) in zip(FIG_DECAY.items(), decay):
        errors.extend(errs)
        put(name, [] if P is None else decay_rows(P), ["m", "P_m"])

    for name, v in FIG_PROFILES.items():
        put(name, profile_rows(open_boundary_spectrum(base.with_v(v), cfg.edge)), PROFILE_FIELDS)

    grid = DEFAULT_GRID.values()
    spec_rows = []
    for r, e in _map(_spectrum_point, [(base.with_v(v), cfg.edge) for v in grid], cfg.workers):
        spec_rows.extend(r)
        errors.extend(e)
    for name, key in (("fig5d", "re_E"), ("fig6a", "im_E"), ("fig6b", "abs_E")):
        put(name, [{"v": r["v"], key: r[key], "edge_flag": r["edge_flag"]} for r in spec_rows], ["v", key, "edge_flag"])

    windings = _map(_winding_point, [base.with_v(v) for v in grid], cfg.workers)
    errors.extend(winding_errors(windings))
    put("fig7", winding_rows(windings), ["v", "bloch_w", "nonbloch_w", "gbz_radius"])

    decay = _map(decay_point, [(base.with_v(v), cfg.evolve) for v in grid], cfg.workers)
    fig8 = []
    for v, (P, residual, errs) in zip(grid, decay):
        errors.extend(errs)
        nan = P is None
        fig8.append(
            {
                "v": v,
                "P_imb": math.nan if nan else float(P[0] - P[-1]),
                "P_1": math.nan if nan else float(P[0]),
                "P_L": math.nan if nan else float(P[-1]),
            }
        )
    put("fig8", fig8, ["v", "P_imb", "P_1", "P_L"])
    side = _sidecar(out / "figures", errors, ext)
    return {"output": str(out), "files": len(written), "errors": _opt(side)}


# -- entry point ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("model")
    g.add_argument("--L", type=int, help="number of unit cells (default 51)")
    g.add_argument("--v", type=float, help="intracell hopping (default 0)")
    g.add_argument("--r", type=float, help="intercell hopping (default 0.5)")
    g.add_argument("--gamma", type=float, help="loss rate on B sites (default 1)")
    g.add_argument("--origin", type=int, help="starting cell, 1-based (default: center)")
    g = common.add_argument_group("integration")
    g.add_argument("--stop-norm", dest="stop_norm", type=float, help="stop when norm^2 drops below this")
    g.add_argument("--dt", type=float, help="time step of the stepping route")
    g = common.add_argument_group("run")
    g.add_argument("--v-grid", dest="v_grid", metavar="START:STOP:STEP", help="grid of v values")
    g.add_argument("--output", "-o", help="output file (directory for figures)")
    g.add_argument("--format", choices=tio.FORMATS, help="output format (default csv)")
    g.add_argument("--workers", type=int, help="concurrent worker processes (default 1)")
    g.add_argument("--config", help="JSON file with default values for any flag")

    parser = argparse.ArgumentParser(prog="lossywalk", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "simulate": "per-cell decay probabilities of one walk",
        "spectrum": "open-boundary spectrum with edge flags",
        "winding": "Bloch and non-Bloch winding numbers",
        "sweep": "decay imbalance, edge count and windings over a v grid",
        "figures": "data for every figure panel with the standard parameters",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def _emit_error(exc: BaseException, code: int) -> int:
    record = {"status": "error", "error": type(exc).__name__, "message": str(exc)}
    pos = getattr(exc, "position", None)
    if pos:
        record["line"], record["column"] = pos
    print(json.dumps(record), file=sys.stderr)
    return code


def _join_grid(argv: list[str]) -> list[str]:
    """Attach the value to ``--v-grid`` so a leading minus is not read as a flag."""
    out = []
    it = iter(argv)
    for tok in it:
        if tok == "--v-grid":
            nxt = next(it, None)
            out.append(tok if nxt is None else f"--v-grid={nxt}")
        else:
            out.append(tok)
    return out


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parser.parse_args(_join_grid(argv))
    except SystemExit as exc:
        if exc.code in (0, None):
            return 0
        return _emit_error(ConfigError("invalid command line; see usage above"), EXIT_CONFIG)
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        return _emit_error(exc, EXIT_CONFIG)
    try:
        if cfg.command == "simulate":
            summary = cmd_simulate(cfg)
        elif cfg.command == "spectrum":
            summary = cmd_spectrum(cfg, _grid_or_single(cfg))
        elif cfg.command == "winding":
            summary = cmd_winding(cfg, _grid_or_single(cfg))
        elif cfg.command == "sweep":
            summary = cmd_sweep(cfg)
        else:
            summary = cmd_figures(cfg)
    except (LossyWalkError, OSError, np.linalg.LinAlgError) as exc:
        return _emit_error(exc, EXIT_COMPUTE)
    print(json.dumps({"status": "ok", **summary}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
