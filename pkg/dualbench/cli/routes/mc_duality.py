"""
mc-duality route
Both sides of E_eta D(eta_t, xi) = E_xi D(eta, xi_t) by Monte Carlo, with exact oracles
"""
from dualbench.application.errors import UnsupportedModel
from dualbench.application.services.duality_service import DualityService
from dualbench.application.services.verification_service import (
    EnergyProcess, JumpProcess, MomentumProcess,
)
from dualbench.cli.dependencies import (
    RunContext, get_lattice, get_m, get_spin, get_verification_service,
)
from dualbench.cli.report import Report


def run(ctx: RunContext, report: Report) -> None:
    kind = ctx.model.kind.value
    kernel = get_lattice(ctx).kernel
    duality = DualityService(kernel)
    models = duality.models
    run_block = ctx.run
    if run_block.eta0 is None or run_block.xi0 is None:
        raise UnsupportedModel("mc-duality needs run.eta0 and run.xi0")
    xi0 = tuple(run_block.xi0)
    eta0 = tuple(int(v) for v in run_block.eta0)
    with_sinks = xi0 + (0,) * (kernel.size + len(kernel.boundary) - len(xi0))

    if kind in ("sep", "sep2j"):
        j = get_spin(ctx)
        primal = dual = JumpProcess(models.rule("sep2j", j=j))
        D = duality.duality_function("sep2j", j=j)
    elif kind in ("sip", "irw"):
        m = get_m(ctx) if kind == "sip" else None
        primal = dual = JumpProcess(models.rule(kind, m=m))
        D = duality.duality_function(kind, m=m)
    elif kind == "bep":
        m = get_m(ctx)
        eta0 = tuple(float(v) for v in run_block.eta0)
        primal = EnergyProcess(kernel, m, run_block.dt)
        dual = JumpProcess(models.rule("sip", m=m))
        D = duality.duality_function("bep", m=m)
    elif kind == "bmp":
        if ctx.model.levels not in (None, 1):
            raise UnsupportedModel("mc-duality pairs the one-level BMP with SIP(1)")
        eta0 = tuple(float(v) for v in run_block.eta0)
        primal = MomentumProcess(kernel, 1, run_block.dt)
        dual = JumpProcess(models.rule("sip", m=1))
        D = duality.duality_function("bmp")
    elif kind == "boundary_sep2j":
        j = get_spin(ctx)
        primal = JumpProcess(models.rule("boundary_sep2j", j=j))
        dual = JumpProcess(models.rule("dual_absorbing_sep2j", j=j))
        xi0 = with_sinks
        D = duality.duality_function("boundary_sep2j", j=j)
    elif kind == "boundary_bep":
        m = get_m(ctx)
        eta0 = tuple(float(v) for v in run_block.eta0)
        primal = EnergyProcess(kernel, m, run_block.dt, reservoirs=True)
        dual = JumpProcess(models.rule("dual_absorbing_sip", m=m))
        xi0 = with_sinks
        D = duality.duality_function("boundary_bep", m=m)
    else:
        raise UnsupportedModel(f"mc-duality does not support {kind}")

    service = get_verification_service(ctx)
    report.add_comparison(service.mc_duality_check(primal, dual, D, eta0, xi0, run_block.t,
                                                   run_block.samples,
                                                   label=f"{kind} duality at t={run_block.t:g}"))
