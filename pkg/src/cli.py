"""Batch driver: one subcommand per lab module, JSON/CSV output, and the acceptance report."""

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence

import numpy as np
import pydantic
import sympy
from pydantic import BaseModel

from src.config import settings
from src.core.dsl import chebyshev_background, companion_curve, curve_to_text, semiclassical_curve
from src.core.errors import ConfigError, NumericalError, RandsurfError, ValidationError
from src.core.freeprob import free_convolve, quartic_density, semicircle_density
from src.core.models import EnsembleConfig, OutputFormat, RunConfig
from src.core.potts_curves import critical_points, curve_template, elliptic_WY, fix_constants
from src.core.wronskian import (
    bdry_entropy_check,
    char_polys,
    kac_branch_check,
    lax_matrices,
    matrix_to_text,
    quantum_dimension,
    semiclassical_factor,
    young_basis,
)
from src.services.acceptance import AcceptanceOptions, run_acceptance
from src.services.ensembles import gaussian_sample, histogram
from src.utils.logger import setup_logging
from src.workers.chain_pool import run_chains_blocking

logger = logging.getLogger(__name__)

ACCEPTANCE_FAILED = 1
RESERVED_KEYS = ("seed", "output", "format")
STOCHASTIC = ("sample",)


def _as_bool(value: str) -> bool:
    text = str(value).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


# name -> (parser, default) per subcommand
PARAMETERS: Dict[str, Dict[str, tuple]] = {
    "sample": {
        "q": (int, 1),
        "N": (int, 64),
        "t2": (float, 1.0),
        "t3": (float, 0.0),
        "t4": (float, 0.0),
        "coupling_on": (_as_bool, True),
        "steps": (int, settings.MC_STEPS),
        "burn_in": (int, settings.MC_BURN_IN),
        "thinning": (int, settings.MC_THINNING),
        "chains": (int, 1),
        "method": (str, "metropolis"),
        "draws": (int, 20),
        "which": (str, "X1"),
        "bins": (int, 40),
    },
    "density": {"kind": (str, "semicircle"), "t2": (float, 1.0), "t4": (float, 0.0), "points": (int, 201)},
    "curve": {
        "q": (int, 2),
        "k": (int, 1),
        "p": (int, 1),
        "t2": (float, 4.0),
        "t3": (float, 0.2),
        "t4": (float, 0.0),
        "source": (str, "auto"),
    },
    "critical": {"q": (int, 2)},
    "elliptic": {"q": (float, 2.0), "t2": (float, 4.0), "t3": (float, 0.2)},
    "dsl-curve": {"p": (int, 3), "pprime": (int, 2), "background": (str, "string"), "subs": (str, "")},
    "wronskian": {
        "p": (int, 3),
        "pprime": (int, 2),
        "n": (int, 1),
        "background": (str, "string"),
        "subs": (str, ""),
    },
    "kac": {"p": (int, 5), "pprime": (int, 2), "n": (int, 2)},
    "acceptance": {"only": (str, ""), "N": (int, 512), "draws": (int, 100)},
}


class CommandResult(BaseModel):
    """What a subcommand hands to emit: a payload and, for tabular output, rows."""

    summary: str
    payload: Dict[str, Any] = {}
    columns: Optional[List[str]] = None
    rows: Optional[List[List[Any]]] = None
    exit_code: int = 0


# Configuration


def _typed(subcommand: str, parameters: Mapping[str, str]) -> Dict[str, Any]:
    """Parameter strings converted by the subcommand's schema, defaults filled in."""
    schema = PARAMETERS[subcommand]
    out = {name: default for name, (_, default) in schema.items()}
    for name, raw in parameters.items():
        parse = schema[name][0]
        try:
            out[name] = parse(raw)
        except ValueError:
            raise ConfigError(f"{subcommand}: {name}={raw!r} is not a valid {getattr(parse, '__name__', parse)}")
    return out


def resolve_config(subcommand: str, values: Mapping[str, Any]) -> RunConfig:
    """Validate keys and types of merged settings and build a RunConfig."""
    if subcommand not in PARAMETERS:
        raise ValidationError(f"unknown subcommand {subcommand!r}")
    values = {k: v for k, v in values.items() if v is not None}
    unknown = sorted(set(values) - set(PARAMETERS[subcommand]) - set(RESERVED_KEYS))
    if unknown:
        raise ConfigError(f"{subcommand}: unknown key(s) {unknown}")

    parameters = {k: str(v) for k, v in values.items() if k not in RESERVED_KEYS}
    _typed(subcommand, parameters)
    seed = values.get("seed")
    try:
        seed = int(seed) if seed is not None else None
        fmt = OutputFormat(str(values.get("format", OutputFormat.JSON.value)).lower())
    except ValueError as e:
        raise ConfigError(f"{subcommand}: {e}")
    if subcommand in STOCHASTIC and seed is None:
        raise ConfigError(f"{subcommand} is stochastic and needs --seed")
    return RunConfig(
        subcommand=subcommand,
        parameters=parameters,
        seed=seed,
        output_path=values.get("output"),
        format=fmt,
    )


def load_config(path: str, subcommand: str, flags: Optional[Mapping[str, Any]] = None) -> RunConfig:
    """Read key=value lines ('#' starts a comment) and merge them under explicit flags."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}")
    values: Dict[str, Any] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"{path}:{number}: expected key=value, got {raw.strip()!r}")
        values[key.strip()] = value.strip()
    logger.debug(f"config {path}: {len(values)} key(s)")
    values.update({k: v for k, v in (flags or {}).items() if v is not None})
    return resolve_config(subcommand, values)


# Output


def _plain(value: Any) -> Any:
    """JSON-ready copy; NaN or infinity anywhere is a numerical failure."""
    if isinstance(value, BaseModel):
        return _plain(value.model_dump())
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, (complex, np.complexfloating)):
        return [_plain(value.real), _plain(value.imag)]
    if isinstance(value, (float, np.floating)):
        if not math.isfinite(value):
            raise NumericalError(f"non-finite value {value} in result")
        return float(value)
    if isinstance(value, sympy.Basic):
        return str(value)
    return value


def _cell(value: Any) -> str:
    value = _plain(value)
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def _render(result: CommandResult, fmt: OutputFormat) -> str:
    if fmt == OutputFormat.CSV:
        if result.rows is None or result.columns is None:
            raise ValidationError("this subcommand has no tabular output; use --format json")
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(result.columns)
        for row in result.rows:
            writer.writerow([_cell(v) for v in row])
        return buffer.getvalue()

    document = dict(result.payload)
    if result.rows is not None:
        document["columns"] = result.columns
        document["rows"] = result.rows
    return json.dumps(_plain(document), sort_keys=True, indent=2, allow_nan=False) + "\n"


def emit(result: CommandResult, fmt: OutputFormat, path: Optional[str] = None) -> str:
    """Render the result; with a path, replace the file atomically, otherwise print it."""
    text = _render(result, fmt)
    if path is None:
        sys.stdout.write(text)
        return text
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp, target)
    except OSError:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    logger.info(f"wrote {target} ({fmt.value})")
    return text


# Subcommands


def _substitutions(params: Dict[str, Any], p: int, pprime: int) -> Optional[Dict[Any, Any]]:
    """None keeps the string relations; 'raw' keeps u, v free; 'chebyshev' is the conformal background."""
    background = params["background"]
    if params["subs"]:
        pairs = [item.split("=", 1) for item in params["subs"].split(";") if item.strip()]
        if any(len(pair) != 2 for pair in pairs):
            raise ConfigError(f"subs must look like 'u2=-8/3;v2=-1', got {params['subs']!r}")
        return {k.strip(): v.strip() for k, v in pairs}
    if background == "string":
        return None
    if background == "raw":
        return {}
    if background == "chebyshev":
        return chebyshev_background(p, pprime)
    raise ValidationError(f"unknown background {background!r}; use string, raw or chebyshev")


def cmd_sample(params: Dict[str, Any], seed: int) -> CommandResult:
    potential = {2: params["t2"], 3: params["t3"], 4: params["t4"]}
    if params["method"] == "gaussian":
        if params["t3"] or params["t4"] or params["q"] > 1 and params["coupling_on"]:
            raise ValidationError("method=gaussian samples decoupled Gaussian matrices only")
        batch = gaussian_sample(params["N"], params["draws"], [params["t2"]] * params["q"], seed=seed)
    elif params["method"] == "metropolis":
        config = EnsembleConfig(
            N=params["N"],
            q=params["q"],
            potential_coeffs=[potential],
            coupling_on=params["coupling_on"],
            seed=seed,
            steps=params["steps"],
            burn_in=params["burn_in"],
            thinning=params["thinning"],
            proposal_scale=settings.MC_PROPOSAL_SCALE,
        )
        batch = run_chains_blocking(config, [seed + k for k in range(params["chains"])])
    else:
        raise ValidationError(f"unknown method {params['method']!r}; use metropolis or gaussian")

    rows = histogram(batch, params["which"], bins=params["bins"])
    return CommandResult(
        summary=f"{len(batch.eigenvalue_draws[params['which']])} draws of {params['which']}, "
        f"acceptance {batch.acceptance_rate:.3f}",
        payload={
            "label": params["which"],
            "N": batch.N,
            "seed": seed,
            "acceptance_rate": batch.acceptance_rate,
            "effective_samples": batch.effective_samples,
            "regularized": batch.regularized,
        },
        columns=["bin_center", "density", "stderr"],
        rows=[list(r) for r in rows],
    )


def cmd_density(params: Dict[str, Any], seed: Optional[int]) -> CommandResult:
    kind = params["kind"]
    if kind == "semicircle":
        rho = semicircle_density(params["t2"])
    elif kind == "quartic":
        rho = quartic_density(params["t2"], params["t4"])
    elif kind == "free-sum":
        rho = free_convolve(semicircle_density(params["t2"]), semicircle_density(params["t2"]))
    else:
        raise ValidationError(f"unknown density {kind!r}; use semicircle, quartic or free-sum")
    if params["points"] < 2:
        raise ValidationError("need at least 2 points")
    a, b = rho.support
    xs = np.linspace(a, b, params["points"])
    values = np.asarray(rho(xs), dtype=float)
    return CommandResult(
        summary=f"{rho.label or kind} on [{a:.6g}, {b:.6g}]",
        payload={"kind": kind, "support": list(rho.support)},
        columns=["x", "density"],
        rows=[[x, v] for x, v in zip(xs, values)],
    )


def _curve_rows(curve) -> List[List[Any]]:
    return [[i, j, c] for (i, j), c in sorted(curve.coefficients.items())]


def _export(curve) -> Optional[Dict[str, Any]]:
    """The {"monomials": [[i, j, num, den], ...]} export, or None while coefficients are symbolic."""
    try:
        return json.loads(curve.to_json())
    except ValidationError:
        return None


def cmd_curve(params: Dict[str, Any], seed: Optional[int]) -> CommandResult:
    template = curve_template(params["q"], params["k"], params["p"])
    fixed = fix_constants(
        template, params["q"], params["k"], params["t2"], params["t3"], params["t4"], source=params["source"]
    )
    rows = [[i, j, float(c)] for i, j, c in _curve_rows(fixed)]
    return CommandResult(
        summary=f"F_({params['p']}) for q={params['q']} with {len(rows)} monomials",
        payload={
            "label": fixed.label,
            "q": params["q"],
            "k": params["k"],
            "p": params["p"],
            "polynomial": _export(fixed),
        },
        columns=["i", "j", "coefficient"],
        rows=rows,
    )


def cmd_critical(params: Dict[str, Any], seed: Optional[int]) -> CommandResult:
    cp = critical_points(params["q"])
    return CommandResult(
        summary=f"q={cp.q}: t2c={cp.t2c:.12g}, t3c={cp.t3c:.12g}",
        payload=cp.model_dump(),
        columns=["t2c", "t3c"],
        rows=[list(b) for b in cp.branches],
    )


def cmd_elliptic(params: Dict[str, Any], seed: Optional[int]) -> CommandResult:
    wy = elliptic_WY(params["q"], params["t2"], params["t3"])
    return CommandResult(
        summary=f"band [{wy.band[0]:.6g}, {wy.band[1]:.6g}], residual {wy.residual:.2e}",
        payload=wy.model_dump(),
    )


def cmd_dsl_curve(params: Dict[str, Any], seed: Optional[int]) -> CommandResult:
    p, pprime = params["p"], params["pprime"]
    if params["background"] == "chebyshev" and not params["subs"]:
        curve = semiclassical_curve(p, pprime)
    else:
        curve = companion_curve(p, pprime, _substitutions(params, p, pprime))
    return CommandResult(
        summary=f"companion curve of ({p},{pprime}) with {len(curve.coefficients)} monomials",
        payload={"label": curve.label, "curve": curve_to_text(curve), "polynomial": _export(curve)},
        columns=["i", "j", "coefficient"],
        rows=_curve_rows(curve),
    )


def cmd_wronskian(params: Dict[str, Any], seed: Optional[int]) -> CommandResult:
    p, pprime, n = params["p"], params["pprime"], params["n"]
    subs = _substitutions(params, p, pprime)
    B, Qm = lax_matrices(p, pprime, n, subs)
    F, G = char_polys(p, pprime, n, subs)
    return CommandResult(
        summary=f"({p},{pprime}) degree {n}: {B.rows}x{B.cols} Lax matrices",
        payload={
            "basis": [str(lam) for lam in young_basis(p, n)],
            "B": matrix_to_text(B),
            "Q": matrix_to_text(Qm),
            "F": curve_to_text(F),
            "G": curve_to_text(G),
        },
    )


def cmd_kac(params: Dict[str, Any], seed: Optional[int]) -> CommandResult:
    p, pprime, n = params["p"], params["pprime"], params["n"]
    rows = [
        [r, s, quantum_dimension(p, pprime, r, s), bdry_entropy_check(p, pprime, r, s)]
        for r in range(1, p)
        for s in range(1, pprime)
    ]
    payload: Dict[str, Any] = {"p": p, "pprime": pprime, "n": n, "branch_residual": kac_branch_check(p, pprime, n)}
    if p >= 3:
        factor = semiclassical_factor(p, pprime)
        payload["factorization"] = {"residual": factor.residual, "form": str(factor.as_expr())}
    return CommandResult(
        summary=f"Kac table of ({p},{pprime}): {len(rows)} labels, branch residual {payload['branch_residual']:.2e}",
        payload=payload,
        columns=["r", "s", "quantum_dimension", "entropy_residual"],
        rows=rows,
    )


def cmd_acceptance(params: Dict[str, Any], seed: Optional[int]) -> CommandResult:
    try:
        only = [int(c) for c in params["only"].split(",") if c.strip()] or None
    except ValueError:
        raise ConfigError(f"only must be a comma-separated list of criteria, got {params['only']!r}")
    options = AcceptanceOptions(N=params["N"], draws=params["draws"], seed=seed or 0)
    results = run_acceptance(only, options)
    failed = [r.criterion for r in results if not r.passed]
    columns = ["criterion", "name", "passed", "measured", "threshold", "seconds", "detail"]
    return CommandResult(
        summary=f"{len(results) - len(failed)}/{len(results)} criteria passed"
        + (f"; failed {failed}" if failed else ""),
        payload={"passed": not failed},
        columns=columns,
        rows=[[getattr(r, c) if getattr(r, c) is not None else "" for c in columns] for r in results],
        exit_code=ACCEPTANCE_FAILED if failed else 0,
    )


COMMANDS: Dict[str, Callable[[Dict[str, Any], Optional[int]], CommandResult]] = {
    "sample": cmd_sample,
    "density": cmd_density,
    "curve": cmd_curve,
    "critical": cmd_critical,
    "elliptic": cmd_elliptic,
    "dsl-curve": cmd_dsl_curve,
    "wronskian": cmd_wronskian,
    "kac": cmd_kac,
    "acceptance": cmd_acceptance,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="randsurf", description="Random matrix and random surface lab")
    parser.add_argument("--log-level", default=None, help="override LOG_LEVEL")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name, schema in PARAMETERS.items():
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", default=None, help="key=value file; flags win over it")
        cmd.add_argument("--seed", default=None)
        cmd.add_argument("--output", default=None)
        cmd.add_argument("--format", default=None, choices=[f.value for f in OutputFormat])
        for key in schema:
            cmd.add_argument(f"--{key}", dest=key, default=None)
    return parser


def execute(config: RunConfig) -> CommandResult:
    params = _typed(config.subcommand, config.parameters)
    logger.info(f"{config.subcommand}: {params} seed={config.seed}")
    return COMMANDS[config.subcommand](params, config.seed)


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Parse, execute and emit; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    setup_logging(args.log_level, stream=sys.stderr)
    flags = {k: v for k, v in vars(args).items() if k not in ("subcommand", "config", "log_level")}
    try:
        if args.config:
            config = load_config(args.config, args.subcommand, flags)
        else:
            config = resolve_config(args.subcommand, flags)
        result = execute(config)
        emit(result, config.format, config.output_path)
    except RandsurfError as e:
        logger.error(f"{args.subcommand} failed: {type(e).__name__}: {e}")
        print(f"{args.subcommand}: error: {e}", file=sys.stderr)
        return e.exit_code
    except pydantic.ValidationError as e:
        logger.error(f"{args.subcommand}: invalid input: {e}")
        print(f"{args.subcommand}: invalid input: {e.error_count()} error(s)", file=sys.stderr)
        return ValidationError.exit_code
    except Exception as e:
        logger.exception(f"{args.subcommand}: unexpected failure: {e}")
        print(f"{args.subcommand}: failed: {e}", file=sys.stderr)
        return NumericalError.exit_code

    where = config.output_path or "stdout"
    print(f"{config.subcommand}: {result.summary} -> {where}", file=sys.stdout if config.output_path else sys.stderr)
    return result.exit_code


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
