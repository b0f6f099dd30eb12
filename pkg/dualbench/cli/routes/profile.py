"""
profile route
Stationary profile and two-point correlations of boundary-driven models,
optionally cross-checked against long-run simulation
"""
from dualbench.application.errors import NotAbsorbable, UnsupportedModel
from dualbench.application.services.verification_service import stationary_profile
from dualbench.cli.dependencies import (
    RunContext, get_lattice, get_m, get_spin, get_verification_service,
)
from dualbench.cli.report import Report

PROFILE_MODELS = {
    "sep": "sep2j",
    "sep2j": "sep2j",
    "boundary_sep2j": "sep2j",
    "bep": "bep",
    "boundary_bep": "bep",
    "kmp": "kmp",
}


def run(ctx: RunContext, report: Report) -> None:
    kind = ctx.model.kind.value
    if kind not in PROFILE_MODELS:
        raise UnsupportedModel(f"profile does not support {kind}")
    model = PROFILE_MODELS[kind]
    lattice = get_lattice(ctx)
    isolated = lattice.isolated_sites()
    if isolated:
        raise NotAbsorbable(f"sites {isolated} have no path to the boundary")
    kernel = lattice.kernel
    j = get_spin(ctx) if model == "sep2j" else None
    m = None if model == "sep2j" else get_m(ctx)
    profile = stationary_profile(kernel, model, j=j, m=m, correlations=ctx.run.correlations)
    report.add_table("profile", [
        {"site": site, "mean": str(mean), "value": repr(float(mean))}
        for site, mean in zip(profile.sites, profile.means)
    ])
    if profile.covariances:
        report.add_table("correlations", [
            {"site_a": profile.sites[a], "site_b": profile.sites[b], "covariance": str(value),
             "value": repr(float(value))}
            for (a, b), value in sorted(profile.covariances.items())
        ])
    if ctx.run.cross_check:
        service = get_verification_service(ctx)
        for comparison in service.profile_cross_check(kernel, profile, ctx.run.t,
                                                      ctx.run.samples, j=j, m=m, dt=ctx.run.dt):
            report.add_comparison(comparison)
    report.note("profile: " + ", ".join(str(v) for v in profile.means))
