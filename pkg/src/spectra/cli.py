"""Command-line front end.

    spectra <command> --config <path> [--out <dir>] [--threads N]

The config file has bracketed sections with ``key = value`` lines and ``#``
comments.  Unknown sections or keys are errors.  Exit status: 0 on success,
1 on input errors, 2 when a numerical certificate fails.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from spectra import acceptance, bands, dirichlet, neumann, special
from spectra.bands import BoundaryKind, ModelParams
from spectra.errors import InputError, NumericalError, SpectraError

COMMANDS = ("bands", "degennes", "dirichlet-count", "neumann-count", "gap-law", "sinc-law", "selftest")

_POTENTIAL_KEYS = {
    "rectangle_indicator": ("c", "x0", "x1", "y0", "y1"),
    "gaussian_separable": ("A", "sigma_x", "sigma_y", "cx", "cy"),
    "power_tail": ("A", "alpha", "x0", "x1"),
    "sampled": ("file",),
}

_SECTIONS = {
    "run": {"command", "output"},
    "model": {"b", "x_max", "n_x"},
    "bands": {"kind", "k_min", "k_max", "n_k", "tol"},
    "potential": {"kind"} | {k.lower() for keys in _POTENTIAL_KEYS.values() for k in keys},
    "lambda": {"values"},
    "geometry": {"omega_minus", "omega_plus"},
    "neumann": {"y_window", "n_y"},
    "gap-law": {"k_values"},
    "sinc-law": {"i_lo", "i_hi", "l", "m", "s_values", "n_k"},
}


@dataclass(frozen=True)
class RunConfig:
    command: str
    model: ModelParams
    potential: dirichlet.Potential2D | None
    lambda_list: tuple[float, ...]
    output_path: str
    options: dict = field(default_factory=dict)


def _float(section, key, path, default=None):
    if key not in section:
        if default is None:
            raise InputError(f"missing field {path}.{key}")
        return float(default)
    try:
        value = float(section[key])
    except ValueError:
        raise InputError(f"field {path}.{key}: not a number: {section[key]!r}") from None
    if not math.isfinite(value):
        raise InputError(f"field {path}.{key}: must be finite")
    return value


def _int(section, key, path, default):
    value = _float(section, key, path, default)
    if value != int(value):
        raise InputError(f"field {path}.{key}: must be an integer")
    return int(value)


def _floats(text: str, path: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(t) for t in text.replace(",", " ").split())
    except ValueError:
        raise InputError(f"field {path}: expected a list of numbers") from None
    if not vals:
        raise InputError(f"field {path}: empty list")
    return vals


def _polygon(text: str, path: str) -> dirichlet.GeometrySpec:
    pts = []
    for part in text.split(";"):
        if part.strip():
            xy = _floats(part, path)
            if len(xy) != 2:
                raise InputError(f"field {path}: vertices are 'x, y' pairs separated by ';'")
            pts.append(xy)
    try:
        return dirichlet.GeometrySpec(tuple(pts))
    except InputError as exc:
        raise InputError(f"field {path}: {exc}") from None


def _read_sampled(path: Path) -> dirichlet.SampledPotential:
    """CSV: header row 'x' then y-nodes; one row per x-node."""
    if not path.is_file():
        raise InputError(f"field potential.file: {path} does not exist")
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    try:
        ys = [float(t) for t in rows[0][1:]]
        xs = [float(r[0]) for r in rows[1:]]
        vals = [[float(t) for t in r[1:]] for r in rows[1:]]
    except (ValueError, IndexError):
        raise InputError(f"field potential.file: {path} is not a numeric grid") from None
    return dirichlet.SampledPotential(np.array(xs), np.array(ys), np.array(vals))


def _potential(section, base: Path) -> dirichlet.Potential2D | None:
    if not section or "kind" not in section:
        if section and len(section):
            raise InputError("field potential.kind: required when the potential section has keys")
        return None
    kind = section["kind"].strip()
    if kind not in _POTENTIAL_KEYS:
        raise InputError(f"field potential.kind: unknown kind {kind!r}")
    allowed = {"kind"} | {k.lower() for k in _POTENTIAL_KEYS[kind]}
    extra = set(section) - allowed
    if extra:
        raise InputError(f"field potential: keys {sorted(extra)} do not apply to {kind}")
    try:
        if kind == "rectangle_indicator":
            args = [_float(section, k, "potential") for k in ("c", "x0", "x1", "y0", "y1")]
            return dirichlet.RectangleIndicator(*args)
        if kind == "gaussian_separable":
            a, sx, sy = (_float(section, k, "potential") for k in ("a", "sigma_x", "sigma_y"))
            center = (_float(section, "cx", "potential", 0.0), _float(section, "cy", "potential", 0.0))
            return dirichlet.GaussianSeparable(a, sx, sy, center)
        if kind == "power_tail":
            args = [_float(section, k, "potential") for k in ("a", "alpha", "x0", "x1")]
            return dirichlet.PowerTail(*args)
        return _read_sampled((base / section["file"]).resolve())
    except InputError as exc:
        msg = str(exc)
        raise InputError(msg if msg.startswith("field") else f"field potential: {msg}") from None


def parse_config(text: str, base: Path | None = None, command: str | None = None) -> RunConfig:
    """Validated configuration; ``command`` (from the command line) fills or must match run.command."""
    parser = configparser.ConfigParser(
        interpolation=None, comment_prefixes=("#",), inline_comment_prefixes=("#",), strict=True
    )
    parser.optionxform = str.lower
    try:
        parser.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise InputError(f"parse error at line {exc.lineno}: key outside any [section]") from None
    except configparser.DuplicateOptionError as exc:
        raise InputError(f"parse error at line {exc.lineno}: duplicate key {exc.option!r}") from None
    except configparser.DuplicateSectionError as exc:
        raise InputError(f"parse error at line {exc.lineno}: duplicate section {exc.section!r}") from None
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else "?"
        raise InputError(f"parse error at line {line}: expected 'key = value'") from None
    for name in parser.sections():
        if name not in _SECTIONS:
            raise InputError(f"unknown section [{name}]")
        extra = set(parser[name]) - _SECTIONS[name]
        if extra:
            raise InputError(f"unknown key(s) {sorted(extra)} in [{name}]")
    sec = {name: parser[name] if parser.has_section(name) else {} for name in _SECTIONS}
    base = base or Path.cwd()

    cmd = sec["run"].get("command", command)
    if cmd is None:
        raise InputError("field run.command: missing")
    cmd = cmd.strip()
    if command is not None and cmd != command:
        raise InputError(f"field run.command: config says {cmd!r} but {command!r} was requested")
    if cmd not in COMMANDS:
        raise InputError(f"field run.command: unknown command {cmd!r}")

    m = sec["model"]
    b = _float(m, "b", "model", 1.0)
    if not b > 0:
        raise InputError("field model.b: must be positive")
    x_max = _float(m, "x_max", "model", 16.0 / math.sqrt(b))
    n_x = _int(m, "n_x", "model", 400)
    try:
        model = ModelParams(b, x_max, n_x)
    except InputError as exc:
        raise InputError(f"field model: {exc}") from None

    lams: tuple[float, ...] = ()
    if "values" in sec["lambda"]:
        lams = _floats(sec["lambda"]["values"], "lambda.values")
        if min(lams) <= 0:
            raise InputError("field lambda.values: entries must be positive")
        if any(a <= c for a, c in zip(lams, lams[1:])):
            raise InputError("field lambda.values: must be sorted strictly descending")

    potential = _potential(sec["potential"], base)
    opts = {}
    for name in ("bands", "neumann", "gap-law", "sinc-law", "geometry"):
        opts[name] = dict(sec[name])
    if cmd in ("dirichlet-count", "neumann-count"):
        if potential is None:
            raise InputError(f"field potential.kind: required for {cmd}")
        if not lams:
            raise InputError(f"field lambda.values: required for {cmd}")
    output = sec["run"].get("output", "spectra-out")
    return RunConfig(cmd, model, potential, lams, output, opts)


# --- commands ------------------------------------------------------------------


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) if isinstance(v, float) else v for v in r])


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def _cmd_bands(cfg: RunConfig, out: Path, threads: int, echo) -> None:
    o = cfg.options["bands"]
    kind = BoundaryKind.parse(o.get("kind", "D"))
    k_min = _float(o, "k_min", "bands", -2.0)
    k_max = _float(o, "k_max", "bands", 6.0)
    n_k = _int(o, "n_k", "bands", 100)
    tol = _float(o, "tol", "bands", 1e-10)
    table = bands.band_table(cfg.model, kind, (k_min, k_max), n_k, tol=tol, threads=threads)
    table.to_csv(out / "bands.csv")
    table.write_eigenfunctions(out / "eigenfunctions.csv")
    echo(f"{kind.value} band: {n_k} nodes on [{k_min:g}, {k_max:g}], E from {table.values[0]:.10g} to {table.values[-1]:.10g}")


def _cmd_degennes(cfg: RunConfig, out: Path, threads: int, echo) -> None:
    m = bands.find_neumann_minimum(cfg.model)
    record = {"b": cfg.model.b, "k_star": m.k_star, "energy": m.energy, "mu": m.mu}
    _write_json(out / "degennes.json", record)
    echo(f"k_star = {_fmt(m.k_star)}")
    echo(f"energy = {_fmt(m.energy)}")
    echo(f"mu = {_fmt(m.mu)}")


def _cmd_dirichlet(cfg: RunConfig, out: Path, threads: int, echo) -> None:
    g = cfg.options["geometry"]
    om = _polygon(g["omega_minus"], "geometry.omega_minus") if "omega_minus" in g else None
    op = _polygon(g["omega_plus"], "geometry.omega_plus") if "omega_plus" in g else None
    table = dirichlet.nd_pipeline(cfg.potential, cfg.model.b, cfg.lambda_list, om, op)
    table.to_csv(out / "dirichlet_counts.csv")
    for r in table.rows:
        echo(f"lambda = {r.lam:.3e}  count = {r.count}  envelopes = [{r.lower_envelope:.4f}, {r.upper_envelope:.4f}]")
    if table.slope is not None:
        echo(f"slope of ln(count) against ln|ln lambda| = {table.slope:.4f}")


def _cmd_neumann(cfg: RunConfig, out: Path, threads: int, echo) -> None:
    o = cfg.options["neumann"]
    table = neumann.nn_pipeline(
        cfg.potential,
        cfg.model.b,
        cfg.lambda_list,
        y_window=_float(o, "y_window", "neumann", 200.0),
        n_y=_int(o, "n_y", "neumann", 4001),
        params=cfg.model,
    )
    table.to_csv(out / "neumann_counts.csv")
    (out / "tail_fit.json").write_text(table.tail.to_json() + "\n")
    for r in table.rows:
        pred = f"{r.predicted:.4f}" if r.predicted is not None else "n/a"
        echo(f"lambda = {r.lam:.3e}  count = {r.count}  semiclassical = {r.semiclassical:.4f}  predicted = {pred}")


def _cmd_gap_law(cfg: RunConfig, out: Path, threads: int, echo) -> None:
    o = cfg.options["gap-law"]
    ks = _floats(o.get("k_values", "1 1.5 2 2.5 3 3.5 4 5"), "gap-law.k_values")
    b = cfg.model.b
    rows = []
    for k in ks:
        if not k > 0:
            raise InputError("field gap-law.k_values: entries must be positive")
        gap = bands.dirichlet_gap(cfg.model, k)
        asym = special.dirichlet_gap_asymptotic(k, b)
        rows.append((float(k), float(gap), float(asym), float(gap / asym)))
        echo(f"k = {k:g}  gap = {gap:.6e}  ratio = {gap / asym:.6f}")
    _write_csv(out / "gap_law.csv", ["k", "gap", "asymptotic", "ratio"], rows)


def _cmd_sinc(cfg: RunConfig, out: Path, threads: int, echo) -> None:
    o = cfg.options["sinc-law"]
    lo = _float(o, "i_lo", "sinc-law", 0.25)
    hi = _float(o, "i_hi", "sinc-law", 0.75)
    L = _float(o, "l", "sinc-law", 1.0)
    m = _float(o, "m", "sinc-law", 200.0)
    n_k = _int(o, "n_k", "sinc-law", 600)
    rows = []
    for s in _floats(o.get("s_values", "0.5 1.5"), "sinc-law.s_values"):
        n = dirichlet.sinc_count((lo, hi), L, m, s, n_k)
        limit = L * (hi - lo) / math.pi if s < 1 else 0.0
        rows.append((float(s), n, n / m, limit))
        echo(f"s = {s:g}  count = {n}  count/m = {n / m:.5f}  limit = {limit:.5f}")
    _write_csv(out / "sinc_law.csv", ["s", "count", "count_over_m", "limit"], rows)


_RUNNERS = {
    "bands": _cmd_bands,
    "degennes": _cmd_degennes,
    "dirichlet-count": _cmd_dirichlet,
    "neumann-count": _cmd_neumann,
    "gap-law": _cmd_gap_law,
    "sinc-law": _cmd_sinc,
}


def run(cfg: RunConfig, out_dir: str | None = None, threads: int = 1, echo=print, write_fixtures: bool = False) -> int:
    if cfg.command == "selftest":
        if write_fixtures:
            from spectra.oracles import write_fixtures as _write

            _write()
            echo("fixtures written")
        results = acceptance.run_all(echo)
        failed = [c.number for c in results if not c.passed]
        echo(f"{len(results) - len(failed)}/{len(results)} criteria passed" + (f"; failed: {failed}" if failed else ""))
        return 2 if failed else 0
    out = Path(out_dir or cfg.output_path)
    out.mkdir(parents=True, exist_ok=True)
    _RUNNERS[cfg.command](cfg, out, threads, echo)
    return 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="spectra", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="configuration file")
    ap.add_argument("--out", help="output directory (overrides run.output)")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--write-fixtures", action="store_true", help="selftest: regenerate the oracle fixtures first")
    args = ap.parse_args(argv)
    try:
        if args.threads < 1:
            raise InputError("--threads must be >= 1")
        if args.config:
            path = Path(args.config)
            if not path.is_file():
                raise InputError(f"config file {path} does not exist")
            cfg = parse_config(path.read_text(), base=path.parent, command=args.command)
        else:
            cfg = parse_config("", command=args.command)
        return run(cfg, args.out, args.threads, write_fixtures=args.write_fixtures)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 2
    except SpectraError as exc:  # pragma: no cover
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
