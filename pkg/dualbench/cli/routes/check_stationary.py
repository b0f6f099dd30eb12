"""
check-stationary route
Detailed balance of product measures, time reversal, and the thermalization laws
"""
from sympy import Rational

from dualbench.application.errors import UnsupportedModel
from dualbench.application.services.duality_service import product_measure, time_reversed_generator
from dualbench.application.services.model_service import ModelService
from dualbench.application.services.verification_service import detailed_balance_check
from dualbench.cli.dependencies import (
    RunContext, get_lattice, get_m, get_spin, get_verification_service,
)
from dualbench.cli.report import Report
from dualbench.infra.exact import max_abs_entry
from dualbench.infra.models import GoodnessOfFit, VerificationRecord


def _fit_record(fit: GoodnessOfFit) -> VerificationRecord:
    return VerificationRecord(identity=f"{fit.test} goodness of fit (n={fit.samples})",
                              sector=f"p={fit.p_value:.4g}", residual=f"{fit.statistic:.6g}",
                              passed=fit.passed)


def run(ctx: RunContext, report: Report) -> None:
    kind = ctx.model.kind.value
    model = ctx.model
    sector = ctx.run.sector
    totals = range((2 if sector is None else sector) + 1)

    if kind in ("kmp", "dual_kmp"):
        service = get_verification_service(ctx)
        thermal = service.thermalization_law_check(get_m(ctx), total=sector or 3,
                                                   samples=ctx.run.samples)
        for fit in (thermal.continuous, thermal.discrete):
            report.add_record(_fit_record(fit))
        report.add_record(VerificationRecord(
            identity="beta-binomial law stationary for the pair chain",
            sector=f"N={sector or 3}", residual=thermal.stationarity_residual,
            passed=thermal.stationarity_residual == 0))
        report.note(f"alternative recursion residual: {thermal.printed_recursion_residual}")
        return

    models = ModelService(get_lattice(ctx).kernel)
    if kind in ("sep", "sep2j"):
        j = get_spin(ctx)
        generator = models.generator("sep2j", j=j)
        mu = product_measure("sep2j", j=j, parameter=model.lam)
    elif kind == "sip":
        generator = models.generator("sip", m=get_m(ctx), totals=totals)
        mu = product_measure("sip", m=get_m(ctx),
                             parameter=model.lam if model.lam is not None else Rational(1, 4))
    elif kind == "irw":
        generator = models.generator("irw", totals=totals)
        mu = product_measure("irw", parameter=model.lam)
    else:
        raise UnsupportedModel(f"check-stationary has no reversible measure for {kind}")

    report.add_record(detailed_balance_check(generator, mu))
    reversed_generator = time_reversed_generator(generator, mu)
    residual, _ = max_abs_entry(reversed_generator.matrix() - generator.matrix())
    report.add_record(VerificationRecord(identity="time reversal equals L",
                                         sector=generator.name, residual=residual,
                                         passed=residual == 0))
