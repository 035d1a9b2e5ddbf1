"""Command-line front end: config parsing, orchestration, CSV/SVG emission.

Config files are INI-style with one section per concern::

    [model]
    family = heston32
    k1 = 0.1
    k2 = 70
    k3 = sqrt:0.2
    x0 = 1
    T = 1

    [experiment]
    schemes = sd, hms
    levels = 1, 3, 5, 7, 9, 11, 13
    reference = hms@14
    batches = 20
    paths_per_batch = 100
    alpha = 0.10
    seed = 20177

Numbers accept the ``sqrt:<x>`` sugar. Coefficients may also be left-continuous
step functions: ``k2 = tab: 0 = 7, 0.5 = 9`` (``time = value`` pairs).

All CSV numbers are written as the shortest round-trip decimal representation
of the underlying binary64, and row order is fixed, so a rerun with the same
config and seed is byte-identical regardless of ``--workers``.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import hashlib
import math
import sys
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import DEFAULT_FIT_SPECS, ConvergenceReport, build_report
from .errors import ConfigError, SemidiscreteError, UsageError
from .models import (
    NAMED_PHIS,
    Coefficient,
    Family,
    ModelSpec,
    PhiFn,
    example1,
    example2,
    example3,
    heston32,
    validate_parameters,
)
from .montecarlo import (
    DEFAULT_SEED,
    ExperimentConfig,
    NegativityCensus,
    negativity_census,
    run_endpoint_errors,
)
from .paths import GridSpec, gaussian_increments
from .schemes import SD_MODES, SchemeKind, simulate_series


@dataclass(frozen=True)
class NegativitySpec:
    scheme: SchemeKind
    n_paths: int
    level_exponent: int | None
    dt: float | None
    n_steps: int | None
    seed: int
    sd_mode: str


@dataclass(frozen=True)
class SinglePathSpec:
    schemes: tuple[SchemeKind, ...]
    dt: float
    n_steps: int
    path_index: int
    seed: int
    sd_mode: str


@dataclass(frozen=True)
class RunConfig:
    model: ModelSpec
    experiment: ExperimentConfig | None
    negativity: NegativitySpec | None
    single_path: SinglePathSpec | None
    source: str


def _number(text: str, where: str) -> float:
    text = text.strip()
    try:
        if text.startswith("sqrt:"):
            inner = float(text[len("sqrt:"):])
            if inner < 0:
                raise ValueError("sqrt of a negative number")
            return math.sqrt(inner)
        return float(text)
    except ValueError as exc:
        raise ConfigError(f"{where}: expected a number (or sqrt:<x>), got {text!r}") from exc


def _coefficient(text: str, where: str) -> Coefficient:
    text = text.strip()
    if not text.startswith("tab:"):
        return Coefficient.constant(_number(text, where))
    pairs = []
    for part in text[len("tab:"):].split(","):
        if "=" not in part:
            raise ConfigError(f"{where}: tabulated entries are 'time = value', got {part.strip()!r}")
        t_text, v_text = part.split("=", 1)
        pairs.append((_number(t_text, where), _number(v_text, where)))
    try:
        return Coefficient.tabulated([p[0] for p in pairs], [p[1] for p in pairs])
    except SemidiscreteError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _scheme(text: str, where: str) -> SchemeKind:
    try:
        return SchemeKind(text.strip().lower())
    except ValueError as exc:
        names = ", ".join(s.value for s in SchemeKind)
        raise ConfigError(f"{where}: unknown scheme {text.strip()!r}; supported: {names}") from exc


def _schemes(text: str, where: str) -> tuple[SchemeKind, ...]:
    items = [part for part in (p.strip() for p in text.split(",")) if part]
    if not items:
        raise ConfigError(f"{where}: expected at least one scheme")
    return tuple(_scheme(item, where) for item in items)


def _get(section, key: str, where: str) -> str:
    if key not in section:
        raise ConfigError(f"{where}: missing required key {key!r}")
    return section[key]


def _int(text: str, where: str) -> int:
    try:
        return int(text.strip())
    except ValueError as exc:
        raise ConfigError(f"{where}: expected an integer, got {text.strip()!r}") from exc


def _sd_mode(section, where: str) -> str:
    mode = section.get("sd_mode", "left_point").strip()
    if mode not in SD_MODES:
        raise ConfigError(f"{where}: sd_mode must be one of {SD_MODES}, got {mode!r}")
    return mode


def _parse_model(section) -> ModelSpec:
    where = "[model]"
    family_text = _get(section, "family", where).strip().lower()
    try:
        family = Family(family_text)
    except ValueError as exc:
        names = ", ".join(f.value for f in Family)
        raise ConfigError(f"{where}: unknown family {family_text!r}; supported: {names}") from exc
    k1 = _coefficient(_get(section, "k1", where), f"{where} k1")
    k2 = _coefficient(_get(section, "k2", where), f"{where} k2")
    k3 = _coefficient(_get(section, "k3", where), f"{where} k3")
    x0 = _number(_get(section, "x0", where), f"{where} x0")
    T = _number(_get(section, "T", where), f"{where} T")
    phi = None
    if "phi" in section:
        phi_name = section["phi"].strip().lower()
        if phi_name not in NAMED_PHIS:
            raise ConfigError(
                f"{where}: unknown phi {phi_name!r}; supported: {', '.join(sorted(NAMED_PHIS))}"
            )
        phi = NAMED_PHIS[phi_name]
    try:
        if family is Family.HESTON_32:
            if phi is not None and phi.name != "one":
                raise ConfigError(f"{where}: heston32 has no phi modifier")
            return heston32(k1, k2, k3, x0, T)
        if family is Family.EXAMPLE_I:
            return example1(k1, k2, k3, x0, T, phi=phi or NAMED_PHIS["one"])
        if family is Family.EXAMPLE_II:
            if phi is not None and phi.name != "one":
                raise ConfigError(f"{where}: example2 has no phi modifier")
            r = _number(_get(section, "r", where), f"{where} r")
            return example2(k1, k2, k3, r, x0, T)
        r = _number(_get(section, "r", where), f"{where} r")
        q = _int(_get(section, "q", where), f"{where} q")
        return example3(k1, k2, k3, r, q, x0, T, phi=phi or NAMED_PHIS["one"])
    except ConfigError:
        raise
    except SemidiscreteError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _parse_experiment(section, model: ModelSpec) -> ExperimentConfig:
    where = "[experiment]"
    schemes = _schemes(_get(section, "schemes", where), f"{where} schemes")
    levels_text = _get(section, "levels", where)
    levels = tuple(_int(part, f"{where} levels") for part in levels_text.split(",") if part.strip())
    reference_text = _get(section, "reference", where).strip()
    if "@" not in reference_text:
        raise ConfigError(f"{where}: reference must look like 'hms@14', got {reference_text!r}")
    ref_scheme_text, ref_exp_text = reference_text.split("@", 1)
    reference_scheme = _scheme(ref_scheme_text, f"{where} reference")
    reference_exponent = _int(ref_exp_text, f"{where} reference")
    batches = _int(_get(section, "batches", where), f"{where} batches")
    paths_per_batch = _int(_get(section, "paths_per_batch", where), f"{where} paths_per_batch")
    alpha = _number(section.get("alpha", "0.10"), f"{where} alpha")
    seed = _int(section.get("seed", str(DEFAULT_SEED)), f"{where} seed")
    override = None
    if "t_quantile" in section:
        override = _number(section["t_quantile"], f"{where} t_quantile")
    try:
        grid = GridSpec(T=model.T, levels=levels, reference_exponent=reference_exponent)
        return ExperimentConfig(
            model=model,
            schemes=schemes,
            grid=grid,
            batches=batches,
            paths_per_batch=paths_per_batch,
            alpha=alpha,
            seed=seed,
            reference_scheme=reference_scheme,
            sd_mode=_sd_mode(section, where),
            t_quantile_override=override,
        )
    except SemidiscreteError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _parse_negativity(section, model: ModelSpec) -> NegativitySpec:
    where = "[negativity]"
    level = _int(section["level"], f"{where} level") if "level" in section else None
    dt = _number(section["dt"], f"{where} dt") if "dt" in section else None
    if (level is None) == (dt is None):
        raise ConfigError(f"{where}: provide exactly one of 'level' or 'dt'")
    n_steps = _int(section["n_steps"], f"{where} n_steps") if "n_steps" in section else None
    return NegativitySpec(
        scheme=_scheme(_get(section, "scheme", where), f"{where} scheme"),
        n_paths=_int(_get(section, "n_paths", where), f"{where} n_paths"),
        level_exponent=level,
        dt=dt,
        n_steps=n_steps,
        seed=_int(section.get("seed", str(DEFAULT_SEED)), f"{where} seed"),
        sd_mode=_sd_mode(section, where),
    )


def _resolve_steps(model: ModelSpec, level, dt, n_steps, where: str) -> tuple[float, int]:
    if (level is None) == (dt is None):
        raise ConfigError(f"{where}: provide exactly one of 'level' or 'dt'")
    if level is not None:
        if not (0 <= level <= 30):
            raise ConfigError(f"{where}: level out of range: {level}")
        return model.T * 2.0 ** (-level), 2**level
    if n_steps is None:
        n_steps = round(model.T / dt)
        if n_steps < 1 or abs(n_steps * dt - model.T) > 1e-6 * model.T:
            raise ConfigError(f"{where}: dt={dt} does not divide T={model.T}; give n_steps explicitly")
    return dt, int(n_steps)


def _parse_single_path(section, model: ModelSpec) -> SinglePathSpec:
    where = "[single_path]"
    level = _int(section["level"], f"{where} level") if "level" in section else None
    dt = _number(section["dt"], f"{where} dt") if "dt" in section else None
    n_steps = _int(section["n_steps"], f"{where} n_steps") if "n_steps" in section else None
    dt, n_steps = _resolve_steps(model, level, dt, n_steps, where)
    return SinglePathSpec(
        schemes=_schemes(_get(section, "schemes", where), f"{where} schemes"),
        dt=dt,
        n_steps=n_steps,
        path_index=_int(section.get("path_index", "0"), f"{where} path_index"),
        seed=_int(section.get("seed", str(DEFAULT_SEED)), f"{where} seed"),
        sd_mode=_sd_mode(section, where),
    )


def parse_config(path) -> RunConfig:
    """Parse and validate a config file; prints validation findings as warnings."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_file(fh, source=str(path))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    if "model" not in parser:
        raise ConfigError(f"{path}: missing [model] section")
    model = _parse_model(parser["model"])
    report = validate_parameters(model)
    if report.status != "ok":
        for finding in report.findings:
            if not finding.ok or finding.near_boundary:
                print(f"validation {report.status}: {finding.message}", file=sys.stderr)
    experiment = _parse_experiment(parser["experiment"], model) if "experiment" in parser else None
    negativity = _parse_negativity(parser["negativity"], model) if "negativity" in parser else None
    single_path = _parse_single_path(parser["single_path"], model) if "single_path" in parser else None
    return RunConfig(
        model=model,
        experiment=experiment,
        negativity=negativity,
        single_path=single_path,
        source=str(path),
    )


def _fmt(value) -> str:
    return repr(float(value))


def _canonical_coefficient(c: Coefficient) -> str:
    if c.kind == "constant":
        return f"constant:{_fmt(c.value)}"
    if c.kind == "tabulated":
        pairs = ";".join(f"{_fmt(t)}={_fmt(v)}" for t, v in zip(c.times, c.values))
        return f"tabulated:{pairs}"
    return f"hook:[{_fmt(c.minimum)},{_fmt(c.maximum)}]"


def _canonical_lines(command: str, model: ModelSpec, extra: dict) -> list[str]:
    lines = [f"command={command}", f"tool_version={__version__}"]
    lines.append(f"model.family={model.family.value}")
    for name in ("k1", "k2", "k3"):
        lines.append(f"model.{name}={_canonical_coefficient(getattr(model, name))}")
    lines.append(f"model.x0={_fmt(model.x0)}")
    lines.append(f"model.T={_fmt(model.T)}")
    if model.phi is not None:
        lines.append(f"model.phi={model.phi.name}:{_fmt(model.phi.k_phi)}")
    if model.r is not None:
        lines.append(f"model.r={_fmt(model.r)}")
    if model.q is not None:
        lines.append(f"model.q={model.q}")
    for key in sorted(extra):
        lines.append(f"{key}={extra[key]}")
    return lines


def _digest(lines: list[str]) -> str:
    return hashlib.sha256("\n".join(lines).encode("utf-8")).hexdigest()


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _write_manifest(out_dir: Path, lines: list[str], files: list[Path], seed: int) -> Path:
    manifest = out_dir / "manifest.txt"
    stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    body = [
        f"tool=semidiscrete {__version__}",
        f"config_digest=sha256:{_digest(lines)}",
        f"seed={seed}",
        f"timestamp={stamp}",
        "files:",
    ]
    for f in files:
        digest = hashlib.sha256(f.read_bytes()).hexdigest()
        body.append(f"  {f.name} bytes={f.stat().st_size} sha256={digest}")
    manifest.write_text("\n".join(body) + "\n", encoding="utf-8")
    return manifest


def _experiment_extra(cfg: ExperimentConfig, workers_note: str = "") -> dict:
    return {
        "experiment.schemes": ",".join(s.value for s in cfg.schemes),
        "experiment.levels": ",".join(str(e) for e in cfg.grid.levels),
        "experiment.reference": cfg.reference,
        "experiment.batches": str(cfg.batches),
        "experiment.paths_per_batch": str(cfg.paths_per_batch),
        "experiment.alpha": _fmt(cfg.alpha),
        "experiment.seed": str(cfg.seed),
        "experiment.sd_mode": cfg.sd_mode,
        "experiment.t_quantile": "table" if cfg.t_quantile_override is None
        else _fmt(cfg.t_quantile_override),
    }


def cmd_convergence(run: RunConfig, out_dir: Path, workers: int = 1, seed: int | None = None) -> list[Path]:
    """Run the coupled-step-size experiment and write errors/orders/plot/manifest."""
    if run.experiment is None:
        raise ConfigError(f"{run.source}: an [experiment] section is required for 'convergence'")
    cfg = run.experiment
    if seed is not None:
        cfg = dataclasses.replace(cfg, seed=seed)
    reports = run_endpoint_errors(cfg, workers=workers)
    report = build_report(reports, DEFAULT_FIT_SPECS)
    out_dir.mkdir(parents=True, exist_ok=True)

    errors_csv = out_dir / "errors.csv"
    _write_csv(
        errors_csv,
        ["scheme", "level_exponent", "dt", "err_mean", "ci_half_width", "n_overflowed"],
        [
            [row.scheme.value, row.level_exponent, _fmt(row.dt), _fmt(row.err_mean),
             _fmt(row.ci_half_width), row.n_overflowed]
            for row in report.rows
        ],
    )
    orders_csv = out_dir / "orders.csv"
    _write_csv(
        orders_csv,
        ["scheme", "subset", "points_used", "slope", "intercept"],
        [
            [fit.scheme.value, fit.subset, fit.points_used, _fmt(fit.slope), _fmt(fit.intercept)]
            for fit in report.fits
        ],
    )
    plot_svg = out_dir / "plot.svg"
    from .plotting import plot_convergence

    plot_convergence(report, plot_svg)
    files = [errors_csv, orders_csv, plot_svg]
    lines = _canonical_lines("convergence", cfg.model, _experiment_extra(cfg))
    files.append(_write_manifest(out_dir, lines, files, cfg.seed))
    return files


def cmd_negativity(run: RunConfig, out_dir: Path, seed: int | None = None) -> list[Path]:
    """Run the negativity census and write census.csv plus a sample trajectory."""
    if run.negativity is None:
        raise ConfigError(f"{run.source}: a [negativity] section is required for 'negativity'")
    spec = run.negativity
    if seed is not None:
        spec = dataclasses.replace(spec, seed=seed)
    census = negativity_census(
        spec.scheme,
        run.model,
        spec.n_paths,
        spec.seed,
        level_exponent=spec.level_exponent,
        dt=spec.dt,
        n_steps=spec.n_steps,
        sd_mode=spec.sd_mode,
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    census_csv = out_dir / "census.csv"
    summary = [
        census.scheme.value,
        census.n_paths,
        census.n_steps,
        _fmt(census.dt),
        _fmt(census.fraction_negative),
        _fmt(census.min_iterate),
    ]
    hist_rows = sorted(census.step_histogram.items()) or [("", "")]
    _write_csv(
        census_csv,
        ["scheme", "n_paths", "n_steps", "dt", "fraction_negative", "min_iterate", "step", "count"],
        [summary + [step, count] for step, count in hist_rows],
    )

    sample_index = census.first_negative_path_index or 0
    increments = gaussian_increments(spec.seed, sample_index, census.n_steps, census.dt)
    series = simulate_series(spec.scheme, run.model, increments, census.dt, spec.sd_mode)
    trajectory_csv = out_dir / "trajectory.csv"
    _write_csv(
        trajectory_csv,
        ["step", "time", "value"],
        [[n, _fmt(n * census.dt), _fmt(v)] for n, v in enumerate(series)],
    )
    files = [census_csv, trajectory_csv]
    extra = {
        "negativity.scheme": spec.scheme.value,
        "negativity.n_paths": str(spec.n_paths),
        "negativity.n_steps": str(census.n_steps),
        "negativity.dt": _fmt(census.dt),
        "negativity.seed": str(spec.seed),
        "negativity.sd_mode": spec.sd_mode,
    }
    lines = _canonical_lines("negativity", run.model, extra)
    files.append(_write_manifest(out_dir, lines, files, spec.seed))
    return files


def cmd_single_path(run: RunConfig, out_dir: Path, seed: int | None = None) -> list[Path]:
    """Simulate the configured schemes along one shared Brownian path."""
    if run.single_path is None:
        raise ConfigError(f"{run.source}: a [single_path] section is required for 'single-path'")
    spec = run.single_path
    if seed is not None:
        spec = dataclasses.replace(spec, seed=seed)
    increments = gaussian_increments(spec.seed, spec.path_index, spec.n_steps, spec.dt)
    columns = {}
    for scheme in spec.schemes:
        try:
            columns[scheme] = simulate_series(scheme, run.model, increments, spec.dt, spec.sd_mode)
        except UsageError as exc:
            raise UsageError(f"scheme {scheme.value}: {exc}") from exc
    out_dir.mkdir(parents=True, exist_ok=True)
    series_csv = out_dir / "series.csv"
    header = ["step", "time"] + [scheme.value for scheme in spec.schemes]
    rows = []
    for n in range(spec.n_steps + 1):
        rows.append([n, _fmt(n * spec.dt)] + [_fmt(columns[s][n]) for s in spec.schemes])
    _write_csv(series_csv, header, rows)
    extra = {
        "single_path.schemes": ",".join(s.value for s in spec.schemes),
        "single_path.dt": _fmt(spec.dt),
        "single_path.n_steps": str(spec.n_steps),
        "single_path.path_index": str(spec.path_index),
        "single_path.seed": str(spec.seed),
        "single_path.sd_mode": spec.sd_mode,
    }
    lines = _canonical_lines("single-path", run.model, extra)
    return [series_csv, _write_manifest(out_dir, lines, [series_csv], spec.seed)]


def cmd_validate(run: RunConfig) -> int:
    """Print the parameter-validation report; advisory, always exits 0."""
    report = validate_parameters(run.model)
    print(f"status: {report.status}")
    for finding in report.findings:
        print(f"  [{'ok' if finding.ok else 'violation'}] {finding.condition}: {finding.message}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="semidiscrete",
        description="Positivity-preserving SDE integration experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    specs = {
        "convergence": "coupled strong-error experiment across step sizes",
        "negativity": "first-negative-iterate census",
        "single-path": "one shared Brownian path under several schemes",
        "validate": "check the model's convergence-guarantee conditions",
    }
    for name, help_text in specs.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="path to an INI config file")
        if name != "validate":
            p.add_argument("--seed", type=int, default=None, help="override the configured seed")
            p.add_argument("--out", default="out", help="output directory (default: out)")
        if name == "convergence":
            p.add_argument(
                "--workers",
                type=int,
                default=1,
                help="parallel workers for path simulation; never affects results",
            )
    args = parser.parse_args(argv)
    try:
        run = parse_config(args.config)
        if args.command == "validate":
            return cmd_validate(run)
        out_dir = Path(args.out)
        if args.command == "convergence":
            files = cmd_convergence(run, out_dir, workers=args.workers, seed=args.seed)
        elif args.command == "negativity":
            files = cmd_negativity(run, out_dir, seed=args.seed)
        else:
            files = cmd_single_path(run, out_dir, seed=args.seed)
        for f in files:
            print(f)
        return 0
    except SemidiscreteError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
