"""
check-duality route
Exact duality, self-duality, lumping and thermalized-duality identities per model kind
"""
import logging

from dualbench.application.services.duality_service import (
    DualityService, thermalized_duality_records,
)
from dualbench.application.services.verification_service import (
    energy_lumping_check, lumping_check,
)
from dualbench.cli.dependencies import (
    RunContext, get_lattice, get_levels, get_m, get_spin,
)
from dualbench.cli.report import Report

logger = logging.getLogger(__name__)

DUAL_KINDS = {
    "bep": "bep",
    "hermite": "hermite",
    "boundary_sep2j": "boundary_sep2j",
    "dual_absorbing_sep2j": "boundary_sep2j",
    "boundary_bep": "boundary_bep",
    "dual_absorbing_sip": "boundary_bep",
}


def run(ctx: RunContext, report: Report) -> None:
    kind = ctx.model.kind.value
    lattice = get_lattice(ctx)
    kernel = lattice.kernel
    duality = DualityService(kernel)
    models = duality.models
    sector = ctx.run.sector
    totals = range((2 if sector is None else sector) + 1)

    if kind in ("sep", "sep2j", "sip", "irw"):
        j = get_spin(ctx) if kind in ("sep", "sep2j") else None
        m = get_m(ctx) if kind == "sip" else None
        bounded = kind in ("sep", "sep2j") and sector is None
        generator = models.generator(kind, j=j, m=m, totals=None if bounded else totals)
        for record in duality.self_duality_records("sep2j" if j is not None else kind,
                                                   generator, j=j, m=m):
            report.add_record(record)
    elif kind in ("ladder_sep", "boundary_ladder_sep"):
        levels = get_levels(ctx)
        if kind == "ladder_sep":
            fine = models.generator("ladder_sep", levels=levels, totals=totals)
            coarse = models.generator("sep2j", j=get_spin(ctx), totals=totals)
        else:
            fine = models.generator("boundary_ladder_sep", levels=levels)
            coarse = models.generator("boundary_sep2j", j=get_spin(ctx))
        report.add_record(lumping_check(fine, coarse, lattice.ladder_projection(levels)))
    elif kind in ("bmp", "boundary_bmp"):
        levels = get_levels(ctx)
        boundary = kind == "boundary_bmp"
        report.add_record(energy_lumping_check(kernel, levels, ctx.run.max_degree, boundary))
        if levels == 1 and not boundary:
            report.add_record(duality.duality_record("bmp", totals))
    elif kind in ("kmp", "dual_kmp"):
        for record in thermalized_duality_records(kernel, get_m(ctx), max(totals)):
            report.add_record(record)
    elif kind in DUAL_KINDS:
        target = DUAL_KINDS[kind]
        j = get_spin(ctx) if target == "boundary_sep2j" else None
        m = get_m(ctx) if target in ("bep", "boundary_bep") else None
        report.add_record(duality.duality_record(target, totals, j=j, m=m))
    logger.info("check-duality %s: %d records", kind, len(report.records))
