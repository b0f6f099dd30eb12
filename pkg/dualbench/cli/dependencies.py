"""
CLI dependencies
Experiment file loading, kernel and service construction for the routes
"""
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

from pydantic import ValidationError
from sympy import Rational

from dualbench.application.errors import ConfigParse, SchemaViolation
from dualbench.application.services.lattice_service import LatticeService
from dualbench.application.services.verification_service import VerificationService
from dualbench.cli.schemas.common import ExperimentConfig
from dualbench.config import config

logger = logging.getLogger(__name__)


@dataclass
class RunContext:
    """Per-invocation settings after command-line overrides"""
    experiment: ExperimentConfig
    seed: int
    threads: int
    out_dir: Path

    @property
    def model(self):
        return self.experiment.model

    @property
    def run(self):
        return self.experiment.run


def load_config(path: str) -> ExperimentConfig:
    """
    Read and validate an experiment file

    Raises:
        ConfigParse: unreadable file or invalid JSON
        SchemaViolation: JSON that does not match the experiment schema
    """
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigParse(f"cannot read {path}: {exc}") from exc
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigParse(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in error['loc'])}: {error['msg']}" for error in exc.errors())
        raise SchemaViolation(f"{path}: {problems}") from exc


def get_context(experiment: ExperimentConfig, seed: Optional[int] = None, threads: int = 1,
                out_dir: Optional[str] = None) -> RunContext:
    return RunContext(
        experiment=experiment,
        seed=experiment.run.seed if seed is None else seed,
        threads=max(1, threads),
        out_dir=Path(out_dir or config.OUTPUT_DIR),
    )


def get_lattice(ctx: RunContext) -> LatticeService:
    """Lattice of the graph block, with reservoir parameters from rho or T"""
    graph = ctx.experiment.graph
    reservoirs = ctx.model.reservoirs
    if reservoirs is not None:
        unknown = set(reservoirs) - set(graph.boundary)
        if unknown:
            raise SchemaViolation(f"reservoir parameters for non-boundary sites {sorted(unknown)}")
        boundary = {site: reservoirs.get(site) for site in graph.boundary}
    else:
        boundary = list(graph.boundary)
    return LatticeService.from_graph(graph.sites, graph.edges, boundary)


def get_spin(ctx: RunContext) -> Any:
    """j of the model; the plain SEP is j = 1/2"""
    kind = ctx.model.kind.value
    if kind == "sep":
        return Rational(1, 2)
    if kind in ("ladder_sep", "boundary_ladder_sep"):
        return Rational(get_levels(ctx), 2)
    if ctx.model.j is None:
        raise SchemaViolation(f"model {kind} needs j")
    return ctx.model.j


def get_m(ctx: RunContext) -> int:
    if ctx.model.m is None:
        raise SchemaViolation(f"model {ctx.model.kind.value} needs m")
    return ctx.model.m


def get_levels(ctx: RunContext) -> int:
    if ctx.model.levels is not None:
        return ctx.model.levels
    if ctx.model.m is not None:
        return ctx.model.m
    raise SchemaViolation(f"model {ctx.model.kind.value} needs levels")


def get_verification_service(ctx: RunContext) -> VerificationService:
    run = ctx.run
    return VerificationService(
        seed=ctx.seed,
        threads=ctx.threads,
        sigma=run.sigma or config.SIGMA_THRESHOLD,
        significance=run.significance or config.SIGNIFICANCE,
    )
