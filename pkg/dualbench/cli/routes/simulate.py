"""
simulate route
Trajectory ensembles with per-site means, checked against exact laws where available
"""
import math

import numpy as np

from dualbench.application.errors import UnsupportedModel
from dualbench.application.services import polyops_service as polyops
from dualbench.application.services.model_service import ModelService
from dualbench.application.services.simulation_service import (
    simulate_bep, simulate_bmp, simulate_thermalization,
)
from dualbench.application.services.verification_service import (
    EnergyProcess, JumpProcess, absorption_solve,
)
from dualbench.cli.dependencies import (
    RunContext, get_lattice, get_levels, get_m, get_spin, get_verification_service,
)
from dualbench.cli.report import Report
from dualbench.config import config

ENERGY_KINDS = ("bep", "boundary_bep")
MOMENTUM_KINDS = ("bmp", "boundary_bmp")
THERMAL_KINDS = ("kmp", "dual_kmp")


def _jump_rule(ctx: RunContext, models: ModelService):
    kind = ctx.model.kind.value
    if kind not in ModelService.JUMP_KINDS:
        return None
    j = get_spin(ctx) if "sep" in kind else None
    m = get_m(ctx) if kind in ("sip", "dual_absorbing_sip") else None
    levels = get_levels(ctx) if "ladder" in kind else None
    return models.rule(kind, j=j, m=m, levels=levels)


def _site_rows(labels, values: np.ndarray, exact=None):
    means = values.mean(axis=0)
    stderr = values.std(axis=0, ddof=1) / math.sqrt(len(values)) if len(values) > 1 \
        else np.zeros_like(means)
    rows = []
    for k, label in enumerate(labels):
        row = {"site": label, "mean": repr(float(means[k])), "stderr": repr(float(stderr[k]))}
        if exact is not None:
            row["exact"] = repr(float(exact[k]))
        rows.append(row)
    return rows, means, stderr


def run(ctx: RunContext, report: Report) -> None:
    kind = ctx.model.kind.value
    kernel = get_lattice(ctx).kernel
    models = ModelService(kernel)
    run_block = ctx.run
    verification = get_verification_service(ctx)
    service = verification.simulation
    sigma = verification.sigma
    n, t = run_block.samples, run_block.t

    if kind.startswith("dual_absorbing"):
        rule = _jump_rule(ctx, models)
        xi0 = tuple(run_block.xi0 or ())
        xi0 = xi0 + (0,) * (len(rule.locations) - len(xi0))
        results = service.absorptions(rule, xi0, n)
        values = np.array([r.final for r in results], dtype=float)
        parameter = {"j": get_spin(ctx)} if kind == "dual_absorbing_sep2j" else {"m": get_m(ctx)}
        generator = models.generator(kind, sector=sum(xi0), **parameter)
        law = absorption_solve(kernel, generator, xi0).law
        exact = np.zeros(len(kernel.boundary))
        for sinks, probability in law.items():
            exact += float(probability) * np.array(sinks, dtype=float)
        rows, means, stderr = _site_rows(kernel.sink_ids, values, exact)
        report.add_table("sinks", rows)
        _compare(report, kernel.sink_ids, means, stderr, exact, sigma)
        return

    rule = _jump_rule(ctx, models)
    if rule is not None:
        init = tuple(int(v) for v in (run_block.eta0 or ()))
        if len(init) != len(rule.locations):
            raise UnsupportedModel(f"eta0 needs {len(rule.locations)} entries")
        results = service.trajectories(rule, init, t, n)
        values = np.array([r.final for r in results], dtype=float)
        process = JumpProcess(rule)
        exact = None
        if process.generator(init).size <= config.DENSE_STATE_LIMIT:
            exact = [process.expectation(init, t, lambda s, k=k: s[k])
                     for k in range(len(rule.locations))]
        rows, means, stderr = _site_rows(rule.locations, values, exact)
        report.add_table("sites", rows)
        if exact is not None:
            _compare(report, rule.locations, means, stderr, np.array(exact), sigma)
        return

    init = list(run_block.eta0 or ())
    reservoirs = kind.startswith("boundary")
    exact = None
    if kind in ENERGY_KINDS:
        m = get_m(ctx)
        task = lambda rng, k: simulate_bep(kernel, m, init, t, run_block.dt, rng, k,
                                           reservoirs).final
        labels = kernel.sites
        process = EnergyProcess(kernel, m, run_block.dt, reservoirs=reservoirs)
        zs = process.operator.variables
        exact = [process.expectation(init, t, polyops.poly(z, zs)) for z in zs]
    elif kind in MOMENTUM_KINDS:
        levels = get_levels(ctx)
        task = lambda rng, k: simulate_bmp(kernel, levels, init, t, run_block.dt, rng, k,
                                           reservoirs).final
        labels = [f"{site}:{level}" for site in kernel.sites for level in range(1, levels + 1)]
    elif kind in THERMAL_KINDS:
        spec = models.thermal_spec(kind, get_m(ctx))
        task = lambda rng, k: simulate_thermalization(spec, init, t, rng, k).final
        labels = kernel.sites
    else:
        raise UnsupportedModel(f"simulate does not support {kind}")
    values = np.array(service.map_streams(task, n), dtype=float)
    rows, means, stderr = _site_rows(labels, values, exact)
    report.add_table("sites", rows)
    if exact is not None:
        _compare(report, labels, means, stderr, np.array(exact), sigma)
    if reservoirs:
        return
    momentum = kind in MOMENTUM_KINDS
    totals = (values ** 2).sum(axis=1) if momentum else values.sum(axis=1)
    initial = float(np.sum(np.square(init))) if momentum else float(np.sum(init))
    report.check(bool(np.allclose(totals, initial, rtol=1e-9, atol=1e-9)),
                 "conserved total along every trajectory")


def _compare(report: Report, labels, means, stderr, exact, sigma: float) -> None:
    for label, mean, se, value in zip(labels, means, stderr, exact):
        gap = abs(mean - value)
        passed = gap <= sigma * se if se > 0 else gap <= 1e-12
        report.check(passed, f"mean at {label} within {sigma:g} stderr of exact")
