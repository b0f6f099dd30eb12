"""
check-algebra route
Commutation relations of the single-site representation, the two-site
Hamiltonian against the transposed generator, and the intertwiners
"""
from dualbench.application.services.algebra_service import AlgebraService
from dualbench.application.services.lattice_service import chain_kernel
from dualbench.application.services.model_service import ModelService
from dualbench.application.services.polyops_service import PolyopsService
from dualbench.cli.dependencies import RunContext, get_m, get_spin
from dualbench.cli.report import Report
from dualbench.infra.models import RepresentationKind, VerificationRecord

SU2_KINDS = ("sep", "sep2j", "ladder_sep", "boundary_sep2j", "boundary_ladder_sep",
             "dual_absorbing_sep2j")
HEISENBERG_KINDS = ("irw", "hermite")


def run(ctx: RunContext, report: Report) -> None:
    kind = ctx.model.kind.value
    models = ModelService(chain_kernel(2))
    if kind in SU2_KINDS:
        j = get_spin(ctx)
        algebra = AlgebraService.for_kind(RepresentationKind.SU2, j=j)
        generator = models.generator("sep2j", j=j, totals=algebra.pair_totals())
    elif kind in HEISENBERG_KINDS:
        algebra = AlgebraService.for_kind(RepresentationKind.HEISENBERG, cutoff=ctx.run.cutoff)
        generator = models.generator("irw", totals=algebra.pair_totals())
    else:
        m = get_m(ctx)
        algebra = AlgebraService.for_kind(RepresentationKind.SU11, m=m, cutoff=ctx.run.cutoff)
        generator = models.generator("sip", m=m, totals=algebra.pair_totals())

    for record in algebra.commutation_records():
        report.add_record(record)
    report.add_record(algebra.hamiltonian_record(generator))

    if kind in SU2_KINDS:
        return
    intertwining = PolyopsService.for_sites("z", ["1"]).intertwining(algebra.triple)
    for label, bad in sorted(intertwining.nonzero.items()):
        report.add_record(VerificationRecord(
            identity=f"intertwiner K{label} C = C K{label}",
            sector=f"xi<={intertwining.checked_up_to}",
            residual=len(bad), passed=not bad, witness=str(bad) if bad else None))
