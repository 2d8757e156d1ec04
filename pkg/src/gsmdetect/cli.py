"""Command-line front end.

Every report embeds the parsed configuration, the seed, the generator identity
and the package version.  Nothing time- or host-dependent is written, so
repeating a command with the same flags reproduces its output byte for byte.

Exit codes: 0 success, 1 usage, 2 infeasible or mathematically invalid input,
3 numerical failure.
"""

from __future__ import annotations

import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from typing import Any, Callable

import click
import numpy as np

from . import __version__
from .analysis import FamilySpec, fit_rate, spec_for_bounds, spec_for_radius
from .bounds import ErrorBudget, compute_bounds, upper_radius
from .detectors import (
    DEFAULT_CALIBRATION_SAMPLES,
    build_ingster,
    calibrate_spectral,
    gaussian_spectral,
)
from .extremal import InfeasibleRadius, TruncationTooSmall, solve_extremal
from .mc import (
    AdversarySet,
    PowerEstimate,
    default_adversaries,
    empirical_radius,
    estimate_beta_at,
    estimate_size,
)
from .model import FAMILIES, MAX_TRUNCATION, ProblemSpec, RngStream, Signal, generator_identity

EXIT_OK, EXIT_USAGE, EXIT_MATH, EXIT_NUMERIC = 0, 1, 2, 3


class NumericalFailure(RuntimeError):
    """A computation produced a non-finite or unusable result."""


# ---------------------------------------------------------------- serialization


def jsonable(obj: Any) -> Any:
    """Plain JSON types; non-finite floats become the strings ``inf``, ``-inf``, ``nan``."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return obj


def _cell(v: Any) -> str:
    v = jsonable(v)
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, dict)):
        return json.dumps(v, separators=(",", ":"))
    return str(v)


@dataclass
class Report:
    command: str
    config: dict
    result: dict = field(default_factory=dict)
    rows: list[dict] = field(default_factory=list)

    def __post_init__(self) -> None:
        # click orders explicitly passed options first; normalize
        self.config = dict(sorted(self.config.items()))

    def envelope(self) -> dict:
        return {
            "command": self.command,
            "version": __version__,
            "generator": generator_identity(),
            "seed": self.config.get("seed"),
            "config": self.config,
            **({"rows": self.rows} if self.rows else {}),
            "result": self.result,
        }

    def to_json(self) -> str:
        return json.dumps(jsonable(self.envelope()), indent=2) + "\n"

    def to_csv(self) -> str:
        """Rows if any, otherwise one row of flattened scalar results; config columns are appended."""
        base = self.rows or [{k: v for k, v in self.result.items() if not isinstance(v, (list, dict))}]
        meta = {"command": self.command, "version": __version__, "generator": generator_identity()}
        meta.update({f"cfg_{k}": v for k, v in self.config.items()})
        records = [{**r, **meta} for r in base]
        cols: list[str] = []
        for r in records:
            cols.extend(k for k in r if k not in cols)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in records:
            w.writerow([_cell(r.get(c)) for c in cols])
        return buf.getvalue()

    def render(self, fmt: str) -> str:
        return self.to_csv() if fmt == "csv" else self.to_json()


# ---------------------------------------------------------------- shared setup


def _budget(cfg: dict) -> ErrorBudget:
    return ErrorBudget(cfg["alpha"], cfg["beta"])


def _family(cfg: dict) -> FamilySpec:
    return FamilySpec(cfg["family"], cfg["s"], cfg["t"])


def _spec(cfg: dict, radius: float | None = None) -> ProblemSpec:
    fam = _family(cfg)
    if cfg.get("truncation") is not None:
        return fam.at(cfg["eps"], cfg["truncation"])
    if radius is not None and radius > 0:
        return spec_for_radius(fam, cfg["eps"], radius)
    return spec_for_bounds(fam, cfg["eps"], _budget(cfg))


def _rng(cfg: dict, stream: int = 0) -> RngStream:
    return RngStream(cfg["seed"], stream)


def _check_finite(result: dict) -> dict:
    for k, v in result.items():
        if isinstance(v, float) and math.isnan(v):
            raise NumericalFailure(f"{k} is NaN")
    return result


def _spectral(cfg: dict, spec: ProblemSpec, D: int, stream: int):
    if cfg["calibration"] == "gaussian":
        return gaussian_spectral(spec, D, cfg["alpha"])
    return calibrate_spectral(spec, D, cfg["alpha"], cfg["calibration_samples"], _rng(cfg, stream))


def _ingster(cfg: dict, spec: ProblemSpec, r: float, stream: int):
    kind = "asymptotic-gaussian" if cfg["calibration"] == "gaussian" else "monte-carlo"
    return build_ingster(spec, r, cfg["alpha"], kind, cfg["calibration_samples"], _rng(cfg, stream))


def _bandwidth(cfg: dict, spec: ProblemSpec) -> int:
    if cfg.get("bandwidth"):
        if cfg["bandwidth"] > spec.truncation:
            raise click.UsageError(f"--bandwidth {cfg['bandwidth']} exceeds truncation {spec.truncation}")
        return cfg["bandwidth"]
    return upper_radius(spec, _budget(cfg), warn=False)[1]


# ---------------------------------------------------------------- command cores


def run_bounds(cfg: dict) -> Report:
    spec = _spec(cfg)
    rep = compute_bounds(spec, _budget(cfg)).to_dict()
    rep["truncation"] = spec.truncation
    return Report("bounds", cfg, _check_finite(rep))


def run_extremal(cfg: dict) -> Report:
    r = cfg["radius"]
    if r is None:
        raise click.UsageError("--radius is required")
    spec = _spec(cfg, radius=r)
    sol = solve_extremal(spec, r)
    result = sol.to_dict(include_theta=cfg["dump_theta"] and cfg["format"] == "json")
    result["truncation"] = spec.truncation
    rows = []
    if cfg["dump_theta"] and cfg["format"] == "csv":
        rows = [{"j": j + 1, "theta": float(v)} for j, v in enumerate(sol.theta_bar.coefficients)]
    return Report("extremal", cfg, _check_finite(result), rows)


def run_calibrate(cfg: dict) -> Report:
    if cfg["test"] == "spectral":
        spec = _spec(cfg)
        test = _spectral(cfg, spec, _bandwidth(cfg, spec), 1)
    else:
        if not cfg.get("radius"):
            raise click.UsageError("the Ingster test needs --radius > 0")
        spec = _spec(cfg, radius=cfg["radius"])
        test = _ingster(cfg, spec, cfg["radius"], 1)
    result = test.to_dict()
    result["truncation"] = spec.truncation
    return Report("calibrate", cfg, result)


def _build_test(cfg: dict, spec: ProblemSpec, design_r: float | None):
    if cfg["test"] == "spectral":
        return _spectral(cfg, spec, _bandwidth(cfg, spec), 1)
    if not design_r:
        raise click.UsageError("the Ingster test needs a design radius > 0 (use --design-radius)")
    return _ingster(cfg, spec, design_r, 1)


def run_power(cfg: dict, emit: Callable[[dict], None] | None = None) -> Report:
    r = cfg["radius"] or 0.0
    design = cfg.get("design_radius") or (r if r > 0 else None)
    spec = _spec(cfg, radius=design)
    budget = _budget(cfg)
    test = _build_test(cfg, spec, design)
    if r > 0:
        adv = default_adversaries(spec, budget, r)
    else:
        adv = AdversarySet((Signal.zeros(spec.truncation),), ("zero",))
    samples = cfg["mc_samples"]
    size = estimate_size(test, spec, samples, _rng(cfg, 2))
    rows, ests = [], []
    # same per-candidate streams as mc.estimate_beta
    for i, (lab, theta) in enumerate(zip(adv.labels, adv.candidates)):
        est = estimate_beta_at(test, spec, theta, samples, _rng(cfg, 3).child(i))
        ests.append(est)
        row = {"r": r, "candidate": lab, "beta_hat": est.probability, "half_width": est.half_width, "seed": cfg["seed"]}
        rows.append(row)
        if emit:
            emit(row)
    k = max(range(len(ests)), key=lambda i: (ests[i].probability, -i))
    sup = PowerEstimate(ests[k].probability, ests[k].half_width, samples, cfg["seed"], "candidate-sup", k)
    result = {
        "truncation": spec.truncation,
        "test": test.to_dict() if cfg["test"] == "spectral" else {k: v for k, v in test.to_dict().items() if k != "filters"},
        "size": size.to_dict(),
        "beta": sup.to_dict(),
        "beta_candidate": adv.labels[sup.argmax],
    }
    return Report("power", cfg, result, rows)


def run_radius(cfg: dict, emit: Callable[[dict], None] | None = None) -> Report:
    budget = _budget(cfg)
    spec = _spec(cfg)
    rows: list[dict] = []

    def on_probe(r: float, est) -> None:
        row = {"r": r, "beta_hat": est.probability, "half_width": est.half_width, "seed": cfg["seed"]}
        rows.append(row)
        if emit:
            emit(row)

    if cfg["test"] == "spectral":
        fixed = _spectral(cfg, spec, _bandwidth(cfg, spec), 1)

        def builder(r):
            return fixed
    else:

        def builder(r):
            return _ingster(cfg, spec, r, 1)

    res = empirical_radius(builder, spec, budget, cfg["mc_samples"], _rng(cfg, 4), rtol=cfg["rtol"], on_probe=on_probe)
    bounds = compute_bounds(spec, budget)
    result = {
        "status": res.status,
        "radius": res.radius,
        "bracket": list(res.bracket),
        "boundary": res.boundary,
        "target_beta": res.target,
        "truncation": spec.truncation,
        "lower_radius": math.sqrt(bounds.lower_radius_sq),
        "upper_radius": math.sqrt(bounds.upper_radius_sq),
        "label": "candidate-sup lower bound on beta at theta_bar(r)",
    }
    return Report("radius", cfg, result, rows)


def run_rates(cfg: dict, emit: Callable[[dict], None] | None = None) -> Report:
    fam = _family(cfg)
    grid = [float(x) for x in cfg["eps_grid"].split(",")]
    which = ["lower", "upper", "u-critical-radius"] if cfg["which"] == "all" else [cfg["which"]]
    rows, verdicts = [], {}
    for w in which:
        fit = fit_rate(fam, _budget(cfg), grid, w, level=cfg["level"])
        for e, v in zip(fit.eps_grid, fit.values):
            row = {"which": w, "eps": e, "value": v}
            rows.append(row)
            if emit:
                emit(row)
        d = fit.to_dict()
        verdicts[w] = {k: d[k] for k in ("exponent_expected", "exponent_fitted", "relative_error", "max_residual", "pass")}
    result = {"verdicts": verdicts, "pass": all(v["pass"] for v in verdicts.values())}
    return Report("rates", cfg, result, rows)


RUNNERS: dict[str, Callable[[dict], Report]] = {
    "bounds": run_bounds,
    "extremal": run_extremal,
    "calibrate": run_calibrate,
    "power": run_power,
    "radius": run_radius,
    "rates": run_rates,
}


# ---------------------------------------------------------------- click wiring


def common_options(f):
    opts = [
        click.option("--family", type=click.Choice(FAMILIES), default="mild", show_default=True),
        click.option("--s", "s", type=click.FloatRange(min=0, min_open=True), default=1.0, show_default=True, help="Smoothness a_j = j^s."),
        click.option("--t", "t", type=click.FloatRange(min=0), default=1.0, show_default=True, help="Operator decay parameter."),
        click.option("--eps", type=click.FloatRange(min=0, min_open=True), default=1e-2, show_default=True),
        click.option("--alpha", type=click.FloatRange(0, 1, min_open=True, max_open=True), default=0.05, show_default=True),
        click.option("--beta", type=click.FloatRange(0, 1, min_open=True, max_open=True), default=0.05, show_default=True),
        click.option("--truncation", type=click.IntRange(2, MAX_TRUNCATION), default=None, help="N; chosen automatically if omitted."),
        click.option("--mc-samples", type=click.IntRange(1), default=50_000, show_default=True),
        click.option("--seed", type=click.IntRange(0, 2**64 - 1), default=0, show_default=True),
        click.option("--format", "format", type=click.Choice(["json", "csv"]), default="json", show_default=True),
        click.option("--output", type=click.Path(dir_okay=False, writable=True), default=None),
    ]
    for o in reversed(opts):
        f = o(f)
    return f


def test_options(f):
    f = click.option("--calibration", type=click.Choice(["monte-carlo", "gaussian"]), default="monte-carlo", show_default=True)(f)
    f = click.option("--calibration-samples", type=click.IntRange(10_000), default=DEFAULT_CALIBRATION_SAMPLES, show_default=True)(f)
    f = click.option("--bandwidth", type=click.IntRange(1), default=None, help="Spectral bandwidth D (default: D*).")(f)
    f = click.option("--test", "test", type=click.Choice(["spectral", "ingster"]), default="spectral", show_default=True)(f)
    return f


def _write(cfg: dict, text: str) -> None:
    if cfg.get("output"):
        with open(cfg["output"], "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        click.echo(text, nl=False)


def _execute(name: str, params: dict) -> None:
    cfg = dict(params)
    report = RUNNERS[name](cfg)
    _write(cfg, report.render(cfg["format"]))


@click.group()
@click.version_option(__version__, prog_name="gsmdetect")
def cli() -> None:
    """Minimax detection in the Gaussian sequence model."""


@cli.command()
@common_options
def bounds(**params):
    """Lower and upper bounds on the separation radius."""
    _execute("bounds", params)


@cli.command()
@common_options
@click.option("--radius", type=click.FloatRange(min=0, min_open=True), required=True)
@click.option("--dump-theta", is_flag=True, help="Include the extremal signal (CSV: one row per coordinate).")
def extremal(**params):
    """Solve the extremal problem at a radius."""
    _execute("extremal", params)


@cli.command()
@common_options
@test_options
@click.option("--radius", type=click.FloatRange(min=0, min_open=True), default=None, help="Design radius (Ingster).")
def calibrate(**params):
    """Calibrate a test threshold."""
    _execute("calibrate", params)


@cli.command()
@common_options
@test_options
@click.option("--radius", type=click.FloatRange(min=0), default=0.0, show_default=True)
@click.option("--design-radius", type=click.FloatRange(min=0, min_open=True), default=None, help="Ingster design radius.")
def power(**params):
    """Size and candidate-sup type-II error at a radius."""
    _execute("power", params)


@cli.command()
@common_options
@test_options
@click.option("--rtol", type=click.FloatRange(min=0, min_open=True), default=0.02, show_default=True)
def radius(**params):
    """Empirical separation radius by bisection."""
    _execute("radius", params)


@cli.command()
@common_options
@click.option("--which", type=click.Choice(["lower", "upper", "u-critical-radius", "all"]), default="all", show_default=True)
@click.option("--eps-grid", default="1e-4,3.1622776601683794e-4,1e-3,3.1622776601683794e-3,1e-2", show_default=True)
@click.option("--level", type=click.FloatRange(min=0, min_open=True), default=1.0, show_default=True, help="u level for the critical radius.")
def rates(**params):
    """Fit rate exponents over a noise grid."""
    _execute("rates", params)


def _line_to_args(obj: dict) -> tuple[str, list[str]]:
    obj = dict(obj)
    name = obj.pop("command", None)
    if name not in RUNNERS:
        raise click.UsageError(f"batch line needs a known 'command', got {name!r}")
    args: list[str] = []
    for k, v in obj.items():
        flag = "--" + k.replace("_", "-")
        if isinstance(v, bool):
            if v:
                args.append(flag)
        else:
            args.extend([flag, str(v)])
    return name, args


@cli.command()
@click.argument("batch_file", type=click.File("r"))
@click.option("--output", type=click.Path(dir_okay=False, writable=True), default=None)
def batch(batch_file, output):
    """Run one command per JSON line; emits one JSON report per line, in input order."""
    out = []
    for n, line in enumerate(batch_file, 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise click.UsageError(f"line {n}: {exc}") from exc
        name, args = _line_to_args(obj)
        cmd = cli.commands[name]
        with cmd.make_context(name, args) as ctx:
            cfg = dict(ctx.params)
        report = RUNNERS[name](cfg)
        out.append(json.dumps(jsonable(report.envelope()), separators=(",", ":")) + "\n")
    text = "".join(out)
    if output:
        with open(output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        click.echo(text, nl=False)


def main(argv: list[str] | None = None) -> int:
    """Entry point with the documented exit codes."""
    try:
        cli.main(args=argv, prog_name="gsmdetect", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return EXIT_USAGE
    except click.ClickException as exc:
        exc.show()
        return EXIT_USAGE
    except (InfeasibleRadius, TruncationTooSmall) as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_MATH
    except (NumericalFailure, FloatingPointError, OverflowError, ZeroDivisionError) as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        return EXIT_NUMERIC
    except ValueError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_MATH
    return EXIT_OK


def entry() -> None:  # console script
    sys.exit(main())


if __name__ == "__main__":  # pragma: no cover
    entry()
