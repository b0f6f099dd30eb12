"""
limits route
j -> infinity and m -> infinity distance tables at fixed-time marginals
"""
from dualbench.application.errors import UnsupportedModel
from dualbench.application.services.verification_service import (
    decreasing, limit_check_j, limit_check_m, limiting_duality_record,
)
from dualbench.cli.dependencies import RunContext, get_lattice, get_verification_service
from dualbench.cli.report import Report

FLOW_TOLERANCE = 1e-3


def _text(value) -> str:
    return "" if value is None else repr(value)


def _rows(rows):
    return [{"parameter": str(row.parameter), "distance": repr(row.distance),
             "function_gap": _text(row.function_gap), "mean_gap": _text(row.mean_gap),
             "variance": _text(row.variance), "simulated_gap": _text(row.simulated_gap),
             "simulated_z": _text(row.simulated_z)}
            for row in rows]


def run(ctx: RunContext, report: Report) -> None:
    kind = ctx.model.kind.value
    kernel = get_lattice(ctx).kernel
    run_block = ctx.run
    if kind in ("sep", "sep2j"):
        if run_block.eta0 is None:
            raise UnsupportedModel("limits for the 2j-SEP need run.eta0")
        rows = limit_check_j(kernel, run_block.j_values or [1, 4, 16],
                             tuple(int(v) for v in run_block.eta0), run_block.t,
                             density=run_block.density)
        report.add_table("limit_j", _rows(rows))
        report.check(decreasing([r.distance for r in rows]), "TV distance decreasing in j")
        report.check(decreasing([r.function_gap for r in rows]),
                     "duality-function gap decreasing in j")
        if run_block.density is not None:
            report.check(decreasing([r.variance for r in rows]), "density variance decreasing in j")
    elif kind in ("sip", "bep"):
        if run_block.xi0 is None:
            raise UnsupportedModel("limits for SIP/BEP need run.xi0")
        service = get_verification_service(ctx) if run_block.eta0 is not None else None
        rows = limit_check_m(kernel, run_block.m_values or [1, 4, 16], tuple(run_block.xi0),
                             run_block.t, z0=run_block.eta0, service=service,
                             samples=run_block.samples, dt=run_block.dt)
        report.add_table("limit_m", _rows(rows))
        report.check(decreasing([r.distance for r in rows]), "TV distance decreasing in m")
        if service is not None:
            report.check(decreasing([r.variance for r in rows]), "energy variance decreasing in m")
            report.check(all(r.mean_gap < FLOW_TOLERANCE for r in rows),
                         "exact mean within 1e-3 of the rate-2 flow")
            report.check(all(r.simulated_z <= service.sigma for r in rows),
                         f"simulated mean within {service.sigma:g} sigma of the rate-2 flow")
        report.add_record(limiting_duality_record(kernel, max(2, sum(run_block.xi0))))
    else:
        raise UnsupportedModel(f"limits does not support {kind}")
