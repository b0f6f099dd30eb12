"""
catalog route
Model kinds, their defining rates and the checks each supports
"""
from typing import List, Tuple

# kind, defining rate or operator, experiments
CATALOG: Tuple[Tuple[str, str, str], ...] = (
    ("sep", "rate η_i(1-η_j)", "check-algebra check-duality check-stationary simulate mc-duality profile limits"),
    ("sep2j", "rate η_i(2j-η_j)", "check-algebra check-duality check-stationary simulate mc-duality profile limits"),
    ("sip", "rate 2ξ_i(2ξ_j+m)", "check-algebra check-duality check-stationary simulate mc-duality limits"),
    ("irw", "rate η_i", "check-algebra check-duality check-stationary simulate mc-duality"),
    ("ladder_sep", "SEP on sites x levels, lumps onto 2j-SEP with 2j = levels", "check-algebra check-duality simulate"),
    ("bmp", "rotations (x_i∂_j - x_j∂_i)^2 over level pairs", "check-duality simulate mc-duality"),
    ("bep", "4z_iz_j(∂_i-∂_j)^2 - 2m(z_i-z_j)(∂_i-∂_j)", "check-algebra check-duality simulate mc-duality profile limits"),
    ("kmp", "instantaneous thermalization, Beta(m/2,m/2) split", "check-duality check-stationary simulate profile"),
    ("dual_kmp", "instantaneous thermalization, beta-binomial split", "check-duality check-stationary simulate"),
    ("hermite", "(∂_i-∂_j)^2 - (x_i-x_j)(∂_i-∂_j), dual to independent walkers", "check-algebra check-duality"),
    ("boundary_sep2j", "bulk 2j-SEP + creation ρ(2j-η), annihilation (1-ρ)η", "check-algebra check-duality simulate mc-duality profile"),
    ("boundary_ladder_sep", "ladder SEP + level-independent reservoirs", "check-duality"),
    ("boundary_bep", "bulk BEP + 2T(m∂ + 2z∂^2) - 2z∂", "check-duality simulate mc-duality profile"),
    ("boundary_bmp", "bulk BMP + T∂^2 - x∂ per level", "check-duality simulate"),
    ("dual_absorbing_sep2j", "bulk 2j-SEP + absorption rate ξ_i into sinks", "check-duality simulate"),
    ("dual_absorbing_sip", "bulk SIP + absorption rate 2ξ_i into sinks", "check-duality simulate"),
)

SUPPLEMENTED_CHECKS: Tuple[str, ...] = (
    "all four symmetry/self-duality correspondences (D = SQ^-1, Q^-1S; S = DQ, QD)",
    "conjugacy pairs: D = S C Q^-1 and S = D Q C~",
    "boundary ladder SEP lumping onto boundary 2j-SEP",
    "BMP to BEP energy lumping, bulk and boundary",
    "Hermite diffusion dual to independent walkers",
    "polynomial moment flow oracle for diffusions",
    "time reversal of reversible generators",
    "two-point correlations of boundary-driven models",
    "duality-function and variance columns in limit tables",
    "long-run simulation cross-check of stationary profiles",
    "dt-gated simulated BEP means against the rate-2 flow in m limit tables",
)


def catalog_lines() -> List[str]:
    """Stable, sorted listing of model kinds followed by the supplemented checks"""
    lines = ["Models:"]
    for kind, rate, checks in sorted(CATALOG):
        lines.append(f"  {kind} → {rate}  [{checks}]")
    lines.append("Further checks:")
    lines.extend(f"  {check}" for check in SUPPLEMENTED_CHECKS)
    return lines
