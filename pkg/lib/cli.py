"""
CLI - Toolkit Module
Command-line front end: linearize, solve, dos, stability, moments and
simulate, with file-based inputs and outputs.
"""

import argparse
import asyncio
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Type

import numpy as np
from pydantic import BaseModel, ValidationError

from lib.config import AppConfig
from lib.dyson import MASS_TOL, density_profile_async, solve_del
from lib.errors import ToolkitError, UsageError
from lib.experiments import EXPERIMENT_KINDS, ExperimentParams, run_experiment_async
from lib.freeprob import automaton_moments, fock_moments, limiting_moments
from lib.linearize import (
    Linearization,
    check_nilpotency,
    linearization_from_dict,
    linearization_to_dict,
    minimal_linearization,
    minimality_report,
    split_variables,
    standard_linearization,
    verify_linearization,
)
from lib.ncpoly import NCPolynomial, hermitize, parse_poly, shift_to_q
from lib.reporting import ReportGenerator
from lib.stability import DEFAULT_ETA_GRID, assess_M1_M2_async
from lib.storage import ResultStorage
from lib.validation import (
    DosRequest,
    LinearizationDocument,
    LinearizeRequest,
    ModelSource,
    MomentsRequest,
    SimulateRequest,
    SolveRequest,
    StabilityRequest,
)

logger = logging.getLogger(__name__)

DOS_HEADER = ("E", "rho", "eta", "residual")
MOMENTS_HEADER = ("k", "moment")
LOCALLAW_RAW_HEADER = ("N", "eta", "rep", "max_err", "avg_err")
MOMENT_METHODS = {
    "symbolic": limiting_moments,
    "fock": fock_moments,
    "automaton": automaton_moments,
}


class CliArgumentParser(argparse.ArgumentParser):
    """argparse parser whose errors map to the usage exit code."""

    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(message)


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved inputs of one run, echoed into every output."""

    command: str
    request: Dict[str, Any]
    settings: Dict[str, Any]
    threads: int

    def as_dict(self) -> Dict[str, Any]:
        return {
            "command": self.command,
            "request": self.request,
            "settings": self.settings,
            "threads": self.threads,
        }


@dataclass(frozen=True, eq=False)
class LoadedModel:
    """A pencil plus, when known, the polynomial and its constant offset."""

    linearization: Linearization
    offset: float = 1.0
    expression: Optional[str] = None
    q: Optional[NCPolynomial] = None
    extras: Dict[str, Any] = field(default_factory=dict)

    @property
    def energy_shift(self) -> float:
        """User energy = internal energy + energy_shift."""
        return self.offset - 1.0


@dataclass
class CommandOutput:
    payload: Dict[str, Any]
    header: Optional[Sequence[str]] = None
    rows: Optional[List[Sequence[Any]]] = None
    extra_csv: Optional[Tuple[Path, Sequence[str], List[Sequence[Any]]]] = None


def _polynomial_parts(expr: str, alpha: int, beta: int) -> Tuple[float, NCPolynomial]:
    p = parse_poly(expr, alpha, beta)
    return shift_to_q(p)


def _build_linearization(q: NCPolynomial, block: str, minimize: bool, tol: float) -> Tuple[Linearization, int]:
    qt = hermitize(q) if q.has_general_symbols() else q
    lsym = standard_linearization(qt, block=block)  # type: ignore[arg-type]
    standard_dim = lsym.m
    if minimize:
        lsym = minimal_linearization(lsym, tol=tol)
    return split_variables(lsym, q.alpha_star, q.beta_star), standard_dim


def _read_linearization_file(path: str) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except FileNotFoundError as exc:
        raise UsageError(f"Linearization file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"Linearization file is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise UsageError("Linearization file must contain a JSON object.")
    return data


def load_model(source: ModelSource, config: AppConfig, block: str = "padded") -> LoadedModel:
    """Resolve --expr/--lin into a pencil; --lin files keep their stored polynomial."""
    if source.expr is not None:
        offset, q = _polynomial_parts(source.expr, source.alpha, source.beta)
        lin, standard_dim = _build_linearization(q, block, source.minimize, config.NCLIN_RANK_TOL)
        return LoadedModel(lin, offset, source.expr, q, {"standardDim": standard_dim})

    data = _read_linearization_file(source.lin or "")
    document = LinearizationDocument.model_validate(data)
    lin = linearization_from_dict(data)
    if document.expression is None:
        return LoadedModel(lin, document.offset if document.offset is not None else 1.0)

    stored_offset, q = _polynomial_parts(document.expression, document.alpha_star, document.beta_star)
    if document.offset is not None and abs(stored_offset - document.offset) > 1e-12 * max(1.0, abs(stored_offset)):
        raise UsageError(
            "Linearization file offset does not match its expression.",
            {"offset": document.offset, "expressionOffset": stored_offset},
        )
    return LoadedModel(lin, stored_offset, document.expression, q)


# Commands


def cmd_linearize(request: LinearizeRequest, config: AppConfig, threads: int) -> CommandOutput:
    model = load_model(request, config, block=request.block)
    assert model.q is not None
    lin = model.linearization
    verification = verify_linearization(lin, model.q, depth=request.verify_depth)
    nilpotency = check_nilpotency(lin, tol=config.NCLIN_RANK_TOL)
    minimality = minimality_report(lin, tol=config.NCLIN_RANK_TOL)
    logger.info(
        "Linearized %r: m=%d (standard %d), verified=%s, nilpotent=%s, minimal=%s",
        request.expr,
        lin.m,
        model.extras["standardDim"],
        verification.passed,
        nilpotency.nilpotent,
        minimality.minimal,
    )
    payload = {
        **linearization_to_dict(lin),
        "expression": request.expr,
        "offset": model.offset,
        "report": {
            "standardDim": model.extras["standardDim"],
            "dim": lin.m,
            "minimized": request.minimize,
            "verification": verification.as_dict(),
            "nilpotency": nilpotency.as_dict(),
            "minimality": minimality.as_dict(),
        },
    }
    return CommandOutput(payload)


def cmd_solve(request: SolveRequest, config: AppConfig, threads: int) -> CommandOutput:
    model = load_model(request, config)
    z_internal = request.spectral_point - model.energy_shift
    solution = solve_del(model.linearization, z_internal, config.solver_options())
    payload = {
        "zUser": list(request.z),
        "energyShift": model.energy_shift,
        "m": model.linearization.m,
        "solution": solution.as_dict(include_matrix=request.include_matrix),
    }
    return CommandOutput(payload)


async def cmd_dos(request: DosRequest, config: AppConfig, threads: int) -> CommandOutput:
    model = load_model(request, config)
    user_grid = np.linspace(request.emin, request.emax, request.points)
    profile = await density_profile_async(
        model.linearization,
        user_grid - model.energy_shift,
        request.eta,
        config.solver_options(),
        richardson=request.richardson,
        concurrency=threads,
    )
    if abs(profile.mass - 1.0) > MASS_TOL:
        logger.warning("Density mass on [%g, %g] is %.4f", request.emin, request.emax, profile.mass)
    payload = {
        "mass": profile.mass,
        "eta": profile.eta,
        "richardson": profile.richardson,
        "points": request.points,
        "energyShift": model.energy_shift,
        "maxResidual": float(np.max(profile.residuals)),
    }
    return CommandOutput(payload, DOS_HEADER, profile.rows(model.energy_shift))


def _shift_stability(report: Dict[str, Any], shift: float) -> Dict[str, Any]:
    shifted = dict(report)
    shifted["bulkIntervals"] = [[lo + shift, hi + shift] for lo, hi in report["bulkIntervals"]]
    shifted["rows"] = [{**row, "E": row["E"] + shift} for row in report["rows"]]
    shifted["energyShift"] = shift
    return shifted


async def cmd_stability(request: StabilityRequest, config: AppConfig, threads: int) -> CommandOutput:
    model = load_model(request, config)
    shift = model.energy_shift
    report = await assess_M1_M2_async(
        model.linearization,
        request.kappa,
        (request.emin - shift, request.emax - shift),
        eta_grid=request.etas or [float(eta) for eta in DEFAULT_ETA_GRID],
        resolution=request.points,
        threshold=request.threshold,
        dos_eta=request.eta,
        options=config.solver_options(),
        concurrency=threads,
        bulk_samples=request.bulk_samples,
        sigma_floor=request.sigma_floor,
    )
    payload = _shift_stability(report.as_dict(), shift)
    return CommandOutput(payload)


def cmd_moments(request: MomentsRequest, config: AppConfig, threads: int) -> CommandOutput:
    offset, q = _polynomial_parts(request.expr, request.alpha, request.beta)
    qt = hermitize(q) if q.has_general_symbols() else q
    table = MOMENT_METHODS[request.method](qt, request.k_max)
    user_table = table.shifted(offset - 1.0)
    payload = {"offset": offset, "method": request.method, **user_table.as_dict()}
    return CommandOutput(payload, MOMENTS_HEADER, user_table.rows())


async def cmd_simulate(request: SimulateRequest, config: AppConfig, threads: int) -> CommandOutput:
    model = load_model(request, config)
    if model.q is None:
        raise UsageError("simulate needs the polynomial: pass --expr or a linearization file with an expression.")
    shift = model.energy_shift
    params = ExperimentParams(
        sizes=tuple(request.sizes),
        replicas=request.replicas,
        seed=request.seed,
        law=request.law,
        gamma=request.gamma,
        kappa=request.kappa,
        etas=tuple(request.etas) if request.etas else None,
        energies=tuple(e - shift for e in request.energies) if request.energies else None,
        energy_points=request.energy_points,
        dos_eta=request.dos_eta,
        dos_resolution=request.dos_points,
        bins=request.bins,
        concurrency=threads,
        energy_shift=shift,
    )
    report = await run_experiment_async(request.experiment, model.linearization, model.q, params, config.solver_options())
    extra_csv = None
    if request.raw_csv and report.raw_rows:
        extra_csv = (Path(request.raw_csv), LOCALLAW_RAW_HEADER, list(report.raw_rows))
    return CommandOutput(report.as_dict(), extra_csv=extra_csv)


COMMANDS: Dict[str, Tuple[Type[BaseModel], Any]] = {
    "linearize": (LinearizeRequest, cmd_linearize),
    "solve": (SolveRequest, cmd_solve),
    "dos": (DosRequest, cmd_dos),
    "stability": (StabilityRequest, cmd_stability),
    "moments": (MomentsRequest, cmd_moments),
    "simulate": (SimulateRequest, cmd_simulate),
}


# Parser


def _add_source_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--expr", help="Self-adjoint polynomial, e.g. 'x1*x2 + x2*x1'")
    parser.add_argument("--lin", help="Linearization JSON written by `linearize`")
    parser.add_argument("--alpha", type=int, default=0, help="Number of hermitian symbols x1..")
    parser.add_argument("--beta", type=int, default=0, help="Number of general symbols y1..")
    parser.add_argument("--minimize", action="store_true", help="Reduce to a minimal linearization")


def build_parser(config: AppConfig) -> CliArgumentParser:
    parser = CliArgumentParser(prog="nclin", description=f"{config.APP_NAME} {config.VERSION}")
    parser.add_argument("--threads", type=int, default=None, help="Worker count (default: all cores)")
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=CliArgumentParser)

    linearize = sub.add_parser("linearize", help="Build and certify a linearization")
    _add_source_arguments(linearize)
    linearize.add_argument("--block", choices=["padded", "compact"], default="padded")
    linearize.add_argument("--verify-depth", dest="verify_depth", type=int, default=None)
    linearize.add_argument("--output", "-o")

    solve = sub.add_parser("solve", help="Solve the Dyson equation at one spectral point")
    _add_source_arguments(solve)
    solve.add_argument("--z", required=True, help="Spectral parameter as 're,im'")
    solve.add_argument("--no-matrix", dest="include_matrix", action="store_false")
    solve.add_argument("--output", "-o")

    dos = sub.add_parser("dos", help="Density of states on an energy grid (CSV)")
    _add_source_arguments(dos)
    dos.add_argument("--emin", type=float, required=True)
    dos.add_argument("--emax", type=float, required=True)
    dos.add_argument("--points", type=int, default=400)
    dos.add_argument("--eta", type=float, default=config.NCLIN_DOS_ETA)
    dos.add_argument("--richardson", action="store_true")
    dos.add_argument("--output", "-o")

    stability = sub.add_parser("stability", help="Bulk stability certificate")
    _add_source_arguments(stability)
    stability.add_argument("--kappa", type=float, default=config.NCLIN_KAPPA)
    stability.add_argument("--emin", type=float, required=True)
    stability.add_argument("--emax", type=float, required=True)
    stability.add_argument("--points", type=int, default=201)
    stability.add_argument("--eta", type=float, default=config.NCLIN_DOS_ETA, help="Regularization for bulk detection")
    stability.add_argument("--etas", help="Comma-separated eta grid (default 1e-6..1e2)")
    stability.add_argument("--threshold", type=float, default=None)
    stability.add_argument("--bulk-samples", dest="bulk_samples", type=int, default=9)
    stability.add_argument(
        "--sigma-floor", dest="sigma_floor", type=float, default=config.NCLIN_SIGMA_FLOOR, help="Smallest accepted sigma_min"
    )
    stability.add_argument("--output", "-o")
    stability.add_argument("--summary", help="Markdown summary path")

    moments = sub.add_parser("moments", help="Limiting moments tau(p^k) (CSV)")
    moments.add_argument("--expr", required=True)
    moments.add_argument("--alpha", type=int, default=0)
    moments.add_argument("--beta", type=int, default=0)
    moments.add_argument("--kmax", dest="k_max", type=int, default=4)
    moments.add_argument("--method", choices=sorted(MOMENT_METHODS), default="symbolic")
    moments.add_argument("--output", "-o")

    simulate = sub.add_parser("simulate", help="Random-matrix experiment")
    _add_source_arguments(simulate)
    simulate.add_argument("--experiment", required=True, choices=list(EXPERIMENT_KINDS))
    simulate.add_argument("--sizes", default="200", help="Comma-separated matrix sizes")
    simulate.add_argument("--replicas", type=int, default=3)
    simulate.add_argument("--seed", type=int, default=0)
    simulate.add_argument("--law", default="complex-gaussian")
    simulate.add_argument("--gamma", type=float, default=config.NCLIN_GAMMA)
    simulate.add_argument("--kappa", type=float, default=config.NCLIN_KAPPA)
    simulate.add_argument("--etas")
    simulate.add_argument("--energies")
    simulate.add_argument("--energy-points", dest="energy_points", type=int, default=10)
    simulate.add_argument("--bins", type=int, default=40)
    simulate.add_argument("--dos-eta", dest="dos_eta", type=float, default=config.NCLIN_DOS_ETA)
    simulate.add_argument("--dos-points", dest="dos_points", type=int, default=401)
    simulate.add_argument("--raw-csv", dest="raw_csv")
    simulate.add_argument("--output", "-o")
    simulate.add_argument("--summary", help="Markdown summary path")
    return parser


# Output


async def _emit(
    storage: ResultStorage,
    run_config: RunConfig,
    output: CommandOutput,
    output_path: Optional[str],
    summary_path: Optional[str],
) -> Dict[str, Any]:
    document = {**output.payload, "config": run_config.as_dict()}
    written: Dict[str, Any] = {}
    if output_path is None:
        written = await storage.save_result(run_config.command, document, output.header, output.rows)
    elif output.header is not None and output.rows is not None:
        csv_path = Path(output_path)
        await storage.write_csv(csv_path, output.header, output.rows)
        sidecar = csv_path.with_suffix(csv_path.suffix + ".json")
        await storage.write_json(sidecar, document)
        written = {"csv": str(csv_path), "json": str(sidecar)}
    else:
        await storage.write_json(Path(output_path), document)
        written = {"json": output_path}

    if output.extra_csv is not None:
        path, header, rows = output.extra_csv
        await storage.write_csv(path, header, rows)
        written["rawCsv"] = str(path)

    if summary_path:
        generator = ReportGenerator()
        if run_config.command == "stability":
            text = generator.stability_summary(output.payload)
        else:
            text = generator.experiment_summary(output.payload)
        await storage.write_text(Path(summary_path), text)
        written["summary"] = summary_path
    return written


def _validation_error(exc: ValidationError) -> UsageError:
    errors = [
        {"loc": ".".join(str(part) for part in error["loc"]), "msg": error["msg"]}
        for error in exc.errors()
    ]
    return UsageError("Invalid arguments.", {"errors": errors})


def _report_error(error: ToolkitError) -> int:
    sys.stderr.write(json.dumps(error.as_dict(), default=str) + "\n")
    return error.exit_code


async def run_async(argv: Sequence[str], config: Optional[AppConfig] = None) -> int:
    try:
        config = config or AppConfig.load()
        parser = build_parser(config)
        args = parser.parse_args(list(argv))
        logging.getLogger().setLevel(args.log_level)
        threads = config.thread_count(args.threads)

        request_model, handler = COMMANDS[args.command]
        fields = {
            key: value
            for key, value in vars(args).items()
            if key not in ("command", "threads", "log_level", "summary") and value is not None
        }
        try:
            request = request_model.model_validate(fields)
        except ValidationError as exc:
            raise _validation_error(exc) from exc

        run_config = RunConfig(
            command=args.command,
            request=request.model_dump(mode="json"),
            settings=config.as_dict(),
            threads=threads,
        )
        logger.info("Resolved config: %s", json.dumps(run_config.as_dict(), default=str))

        result = handler(request, config, threads)
        if asyncio.iscoroutine(result):
            result = await result

        storage = ResultStorage(str(config.results_path))
        written = await _emit(storage, run_config, result, getattr(request, "output", None), getattr(args, "summary", None))
        sys.stdout.write(json.dumps(written) + "\n")
        return 0
    except ToolkitError as error:
        return _report_error(error)
    except ValidationError as exc:
        return _report_error(_validation_error(exc))
    except ValueError as exc:
        return _report_error(UsageError(str(exc)))


def run(argv: Sequence[str], config: Optional[AppConfig] = None) -> int:
    """Run one command; exit code 0 on success, 1 on usage error, 2 on numerical failure."""
    return asyncio.run(run_async(argv, config))
