"""Command-line driver: ``biclab <command> --config <path> [--set key=value ...] --out <path>``.

The config file holds one ``key = value`` per line.  ``#`` starts a comment
and ``[section]`` headers may be used to group keys; they do not change key
names.  Values are typed per key (see ``SCHEMA``).  Grids accept a single
number, a comma list, or ``start:stop:step`` with ``stop`` included.

Tables are written as CSV with 17 significant digits, nested reports as
JSON.  Every output starts with the artifact version and the fully
resolved configuration, so identical inputs give identical bytes.  Errors
go to stderr as one JSON object and the exit code is nonzero.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .basis import Boundary, Parity, sector
from .classify import DEFAULT_EPS, DEFAULT_R0, classify_candidate, match_candidate_across_sizes, tail_profile
from .effective import (PerturbationError, bound_state_energy, build_combined, build_h022, build_h211)
from .model import ModelParams, build_full_hamiltonian
from .observe import DEFAULT_DELTA, widths
from .quench import InitialKind, QuenchScenario, dominant_frequency, run_quench
from .solve import DEFAULT_DENSE_CAP, eig_dense, eig_window

COMMANDS = ("spectrum", "sweep", "classify", "effective", "quench")
EXIT_USAGE = 2
EXIT_FAILURE = 1


class ConfigError(ValueError):
    pass


# --------------------------------------------------------------------------
# value types


def _number(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ConfigError(f"not a number: {text!r}") from None
    if not math.isfinite(value):
        raise ConfigError(f"not a finite number: {text!r}")
    return value


def _integer(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"not an integer: {text!r}") from None


def _grid(text: str) -> tuple[float, ...]:
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"range must be start:stop:step, got {text!r}")
        start, stop, step = (_number(p) for p in parts)
        if step == 0 or (stop - start) * step < 0:
            raise ConfigError(f"empty or endless range {text!r}")
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        # round away float drift so that the echo and the rows are stable
        return tuple(float(round(start + k * step, 12)) for k in range(n))
    values = tuple(_number(p) for p in text.split(",") if p.strip())
    if not values:
        raise ConfigError("empty grid")
    return values


def _int_list(text: str) -> tuple[int, ...]:
    values = tuple(_integer(p) for p in text.split(",") if p.strip())
    if not values:
        raise ConfigError("empty list")
    return values


def _boolean(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _choice(*options):
    def parse(text: str) -> str:
        if text not in options:
            raise ConfigError(f"expected one of {', '.join(options)}, got {text!r}")
        return text
    return parse


def _text(text: str) -> str:
    return text


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(_format_value(v) for v in value)
    return str(value)


@dataclass(frozen=True)
class Key:
    parse: object
    default: object
    commands: tuple[str, ...] = COMMANDS


_ALL = COMMANDS
_SOLVE = ("spectrum", "sweep", "classify")

SCHEMA: dict[str, Key] = {
    "t": Key(_grid, (1.0,)),
    "U": Key(_grid, (-20.0,)),
    "V": Key(_grid, (-10.0,)),
    "L": Key(_integer, 5, ("spectrum", "sweep", "effective", "quench")),
    "N": Key(_integer, 4, _SOLVE),
    "parity": Key(_choice("even", "odd", "both", "none"), "both", _SOLVE),
    "boundary": Key(_choice("periodic", "open"), "periodic", ("spectrum", "sweep", "classify", "quench")),
    "format": Key(_choice("csv", "json"), "csv", ("spectrum", "sweep", "effective")),
    "dense_cap": Key(_integer, DEFAULT_DENSE_CAP, ("spectrum", "sweep", "classify", "quench")),
    "solver": Key(_choice("dense", "window"), "dense", ("spectrum", "classify")),
    "center": Key(_number, 0.0, ("spectrum",)),
    "count": Key(_integer, 6, ("spectrum", "classify")),
    "tol": Key(_number, 1e-8, ("spectrum", "classify")),
    "method": Key(_choice("lanczos", "fold"), "lanczos", ("spectrum", "classify")),
    "seed": Key(_integer, 0, ("spectrum", "classify")),
    "L_list": Key(_int_list, (3, 4, 5), ("classify",)),
    "candidates": Key(_grid, (-39.69,), ("classify",)),
    "window": Key(_number, 0.05, ("classify",)),
    "r0": Key(_integer, DEFAULT_R0, ("classify",)),
    "eps": Key(_number, DEFAULT_EPS, ("classify",)),
    "effective_L": Key(_integer, 12, ("effective",)),
    "include_constant": Key(_boolean, True, ("effective",)),
    "initial": Key(_choice(*(k.value for k in InitialKind)), InitialKind.N4_1122.value, ("quench",)),
    "occupation": Key(_text, "", ("quench",)),
    "symmetrize": Key(_boolean, True, ("quench",)),
    "t_max": Key(_number, 400.0, ("quench",)),
    "samples": Key(_integer, 801, ("quench",)),
    "tail_start": Key(_number, -1.0, ("quench",)),
    "observables": Key(_text, "all", ("quench",)),
    "delta": Key(_number, DEFAULT_DELTA, ("quench",)),
    "ensembles": Key(_boolean, True, ("quench",)),
    "quench_tol": Key(_number, 1e-10, ("quench",)),
}


def parse_config_text(text: str) -> dict[str, str]:
    """Raw ``key -> value`` strings from config text."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line or (line.startswith("[") and line.endswith("]")):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value
    return raw


def resolve_config(command: str, raw: dict[str, str]) -> dict[str, object]:
    """Typed config for ``command``: defaults overlaid with ``raw``; unknown keys are errors."""
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    out = {}
    for key, value in raw.items():
        spec = SCHEMA.get(key)
        if spec is None or command not in spec.commands:
            raise ConfigError(f"key {key!r} is not used by {command}")
        try:
            out[key] = spec.parse(value)
        except ConfigError as err:
            raise ConfigError(f"{key}: {err}") from None
    for key, spec in SCHEMA.items():
        if command in spec.commands:
            out.setdefault(key, spec.default)
    return dict(sorted(out.items()))


def _params_grid(cfg) -> list[ModelParams]:
    return [ModelParams(t, U, V) for t in cfg["t"] for U in cfg["U"] for V in cfg["V"]]


def _single_params(cfg, command) -> ModelParams:
    grid = _params_grid(cfg)
    if len(grid) != 1:
        raise ConfigError(f"{command} takes a single (t, U, V); use sweep for grids")
    return grid[0]


def _parities(choice: str):
    return {"even": [Parity.EVEN], "odd": [Parity.ODD], "both": [Parity.EVEN, Parity.ODD], "none": [None]}[choice]


def _label(parity) -> str:
    return "none" if parity is None else parity.value


# --------------------------------------------------------------------------
# commands


SPECTRUM_COLUMNS = ("t", "U", "V", "parity", "index", "energy", "width", "residual")


def _solve_rows(p: ModelParams, cfg, dense=True):
    rows = []
    for par in _parities(cfg["parity"]):
        basis = sector(cfg["L"], cfg["N"], par, Boundary(cfg["boundary"]))
        H = build_full_hamiltonian(p, basis)
        if dense:
            spec = eig_dense(H, dense_cap=cfg["dense_cap"])
        else:
            spec = eig_window(H, cfg["center"], cfg["count"], cfg["tol"], method=cfg["method"],
                              seed=cfg["seed"], dense_cap=cfg["dense_cap"])
        w = widths(spec.vectors, basis)
        for k in range(len(spec)):
            rows.append((p.t, p.U, p.V, _label(par), k, float(spec.values[k]), float(w[k]),
                         float(spec.residuals[k])))
    rows.sort(key=lambda r: (r[5], r[3], r[4]))
    return rows


def cmd_spectrum(cfg):
    p = _single_params(cfg, "spectrum")
    return SPECTRUM_COLUMNS, _solve_rows(p, cfg, dense=cfg["solver"] == "dense")


def cmd_sweep(cfg):
    rows = []
    for p in _params_grid(cfg):
        try:
            rows.extend(_solve_rows(p, cfg))
        except Exception as err:
            raise RuntimeError(f"grid point t={p.t!r} U={p.U!r} V={p.V!r}: {err}") from err
    return SPECTRUM_COLUMNS, rows


def cmd_classify(cfg):
    p = _single_params(cfg, "classify")
    sizes = sorted(set(cfg["L_list"]))
    if len(sizes) < 3:
        raise ConfigError("L_list needs at least three distinct sizes")
    report = []
    for par in _parities(cfg["parity"]):
        spectra = {}
        for L in sizes:
            basis = sector(L, cfg["N"], par, Boundary(cfg["boundary"]))
            H = build_full_hamiltonian(p, basis)
            if cfg["solver"] == "dense":
                spec = eig_dense(H, dense_cap=cfg["dense_cap"])
                spectra[L] = (spec, basis)
            else:
                spectra[L] = [(E, eig_window(H, E, cfg["count"], cfg["tol"], method=cfg["method"],
                                             seed=cfg["seed"], dense_cap=cfg["dense_cap"]), basis)
                              for E in cfg["candidates"]]
        for i, E in enumerate(cfg["candidates"]):
            entry = {"candidate": E, "parity": _label(par)}
            try:
                chosen = {L: (v if cfg["solver"] == "dense" else v[i][1:]) for L, v in spectra.items()}
                picks = match_candidate_across_sizes(chosen, E, par, cfg["window"])
                profiles = [tail_profile(s.vector, chosen[L][1], s.energy, par) for L, s in picks.items()]
                result = classify_candidate(profiles, cfg["r0"], cfg["eps"])
            except (LookupError, ValueError) as err:
                entry["error"] = str(err)
            else:
                entry.update(verdict=result.verdict.value, decay_rate=result.decay_rate,
                             selected={str(L): {"energy": s.energy, "width": s.width}
                                       for L, s in picks.items()},
                             evidence=result.evidence)
            report.append(entry)
    return report


EFFECTIVE_COLUMNS = ("t", "U", "V", "quantity", "index", "value", "flag")


def cmd_effective(cfg):
    rows = []
    L = cfg["effective_L"]
    for p in _params_grid(cfg):
        head = (p.t, p.U, p.V)
        for branch in ("b1", "b2", "secondary"):
            try:
                f = bound_state_energy(branch, p)
            except PerturbationError as err:
                rows.append(head + (f"E_{branch}", 0, float("nan"), f"error: {err}"))
            else:
                rows.append(head + (f"E_{branch}", 0, f.energy, "exists" if f.exists else "absent"))
        builders = (("H022", lambda: build_h022(p, L, cfg["include_constant"])),
                    ("H211", lambda: build_h211(p, L, 2, cfg["include_constant"])),
                    ("combined", lambda: build_combined(p, L, cfg["include_constant"])))
        for name, build in builders:
            try:
                values = np.linalg.eigvalsh(build().toarray())
            except PerturbationError as err:
                rows.append(head + (name, 0, float("nan"), f"error: {err}"))
                continue
            rows.extend(head + (name, k, float(e), "") for k, e in enumerate(values))
    return EFFECTIVE_COLUMNS, rows


def _occupation(text: str) -> dict[int, int] | None:
    if not text:
        return None
    occ = {}
    for item in text.split(","):
        if ":" not in item:
            raise ConfigError(f"occupation entries are site:count, got {item!r}")
        x, n = item.split(":")
        occ[_integer(x.strip())] = occ.get(_integer(x.strip()), 0) + _integer(n.strip())
    return occ


def cmd_quench(cfg):
    p = _single_params(cfg, "quench")
    L = cfg["L"]
    if cfg["observables"] == "all":
        observables = None
    else:
        observables = _int_list(cfg["observables"])
        bad = [x for x in observables if abs(x) > L]
        if bad:
            raise ConfigError(f"observable sites {bad} outside [-{L}, {L}]")
    if cfg["samples"] < 2:
        raise ConfigError("samples must be >= 2")
    scenario = QuenchScenario(
        params=p, L=L, initial=InitialKind(cfg["initial"]),
        times=np.linspace(0.0, cfg["t_max"], cfg["samples"]), observables=observables,
        occupation=_occupation(cfg["occupation"]), symmetrize=cfg["symmetrize"],
        boundary=Boundary(cfg["boundary"]), tail_start=None if cfg["tail_start"] < 0 else cfg["tail_start"],
        delta=cfg["delta"], ensembles=cfg["ensembles"], dense_cap=cfg["dense_cap"], tol=cfg["quench_tol"],
    )
    r = run_quench(scenario)

    def per_site(values):
        return None if values is None else {str(int(x)): float(v) for x, v in zip(r.sites, values)}

    return {
        "energy": r.energy,
        "energy_drift": r.energy_drift,
        "norm_drift": r.norm_drift,
        "times": r.times.tolist(),
        "series": {str(int(x)): r.series[:, j].tolist() for j, x in enumerate(r.sites)},
        "long_time_avg": per_site(r.long_time_avg),
        "microcanonical": per_site(r.microcanonical),
        "microcanonical_sensitivity": per_site(r.microcanonical_sensitivity),
        "diagonal": per_site(r.diagonal),
        "dominant_frequency": per_site([dominant_frequency(r.times, r.series[:, j])
                                        for j in range(len(r.sites))]),
        "bic_overlaps": r.bic_overlaps,
    }


HANDLERS = {"spectrum": cmd_spectrum, "sweep": cmd_sweep, "classify": cmd_classify,
            "effective": cmd_effective, "quench": cmd_quench}
JSON_ONLY = ("classify", "quench")


# --------------------------------------------------------------------------
# output


def _cell(value) -> str:
    if isinstance(value, float):
        return "nan" if math.isnan(value) else f"{value:.17g}"
    text = str(value)
    if any(c in text for c in ',"\n'):
        text = '"' + text.replace('"', '""') + '"'
    return text


def _jsonable(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return _jsonable(obj.item())
    return obj


def render(command: str, cfg: dict, result, fmt: str) -> str:
    echo = {k: _format_value(v) for k, v in cfg.items()}
    if fmt == "csv":
        columns, rows = result
        buf = io.StringIO()
        buf.write(f"# biclab {__version__}\n# command = {command}\n")
        for k, v in echo.items():
            buf.write(f"# {k} = {v}\n")
        buf.write(",".join(columns) + "\n")
        for row in rows:
            buf.write(",".join(_cell(v) for v in row) + "\n")
        return buf.getvalue()
    if isinstance(result, tuple):
        columns, rows = result
        result = [dict(zip(columns, row)) for row in rows]
    doc = {"version": __version__, "command": command, "config": echo, "result": _jsonable(result)}
    return json.dumps(doc, indent=1, sort_keys=True, allow_nan=False) + "\n"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="biclab", description="Bose-Hubbard impurity chain: spectra, classification, quenches.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, type=Path)
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", dest="overrides")
    ap.add_argument("--out", required=True, type=Path)
    ap.add_argument("--version", action="version", version=f"biclab {__version__}")
    return ap


def run(argv: list[str] | None = None) -> dict:
    """Parse arguments, execute, write the output file; returns the resolved config."""
    args = build_parser().parse_args(argv)
    try:
        text = args.config.read_text()
    except OSError as err:
        raise ConfigError(f"cannot read config: {err}") from None
    raw = parse_config_text(text)
    for item in args.overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = (s.strip() for s in item.split("=", 1))
        raw[key] = value
    cfg = resolve_config(args.command, raw)
    fmt = "json" if args.command in JSON_ONLY else cfg["format"]
    result = HANDLERS[args.command](cfg)
    args.out.write_text(render(args.command, cfg, result, fmt))
    return cfg


def main(argv: list[str] | None = None) -> int:
    try:
        run(argv)
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except ConfigError as err:
        sys.stderr.write(json.dumps({"error": "ConfigError", "message": str(err)}, sort_keys=True) + "\n")
        return EXIT_USAGE
    except Exception as err:
        sys.stderr.write(json.dumps({"error": type(err).__name__, "message": str(err)}, sort_keys=True) + "\n")
        return EXIT_FAILURE
    return 0


if __name__ == "__main__":
    sys.exit(main())
