"""
Model service
Particle-system generators, diffusion operators, thermalization specs and
their boundary-driven variants
"""
import logging
import math
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import sympy
from sympy import Rational, Symbol

from dualbench.application.errors import (
    EmptySector, InvalidM, MissingReservoirParam, MissingSinks, UnsupportedModel,
)
from dualbench.application.services.algebra_service import check_m, spin_levels
from dualbench.application.services.lattice_service import build_kernel, ladder_kernel
from dualbench.application.services import polyops_service as polyops
from dualbench.infra.exact import to_rational
from dualbench.infra.models import (
    CTMCGenerator, DiffOperator, Kernel, RedistributionLaw, ThermalizationSpec,
)
from dualbench.infra.state_space import State, StateSpace

logger = logging.getLogger(__name__)


def _move(state: State, source: int, target: int) -> State:
    updated = list(state)
    updated[source] -= 1
    updated[target] += 1
    return tuple(updated)


def _shift(state: State, site: int, delta: int) -> State:
    updated = list(state)
    updated[site] += delta
    return tuple(updated)


class JumpRule:
    """
    Rate-function view of a particle system on a kernel

    Bulk hops i -> l happen at rate p(i,l) * hop_weight(eta_i, eta_l). With
    reservoirs, boundary sites gain a particle at rate rho (cap - eta_i) and
    lose one at rate (1 - rho) eta_i. With sinks, each particle at a boundary
    site moves to its sink at the absorption rate.
    """

    name = "jump"

    def __init__(self, kernel: Kernel, *, reservoirs: bool = False, sinks: bool = False,
                 absorption_rate: Any = 1, rate_scale: Any = 1):
        if reservoirs and sinks:
            raise UnsupportedModel("a rule has either reservoirs or sinks")
        if reservoirs:
            missing = [s for s in kernel.boundary if s not in kernel.reservoir_params]
            if not kernel.boundary or missing:
                raise MissingReservoirParam(
                    f"reservoir parameters missing for {missing or 'an empty boundary'}")
            if self.site_cap is None:
                raise UnsupportedModel(f"{self.name} has no finite site capacity for reservoirs")
        if sinks and not kernel.boundary:
            raise MissingSinks("kernel has no boundary sites to attach sinks to")
        self.kernel = kernel
        self.reservoirs = reservoirs
        self.sinks = sinks
        n = kernel.size
        sink_ids = kernel.sink_ids if sinks else ()
        self.locations: Tuple[str, ...] = kernel.sites + sink_ids
        self.caps: Tuple[Optional[int], ...] = (self.site_cap,) * n + (None,) * len(sink_ids)
        self.conserves = not reservoirs
        scale = to_rational(rate_scale)
        self.rate_scale = scale
        self._bonds = {
            True: [(a, b, p * scale) for a, b, p in kernel.directed_bonds],
            False: [(a, b, float(p * scale)) for a, b, p in kernel.directed_bonds],
        }
        self._boundary = kernel.boundary_indices
        self._sink_slot = {a: n + k for k, a in enumerate(self._boundary)}
        rho = {kernel.index(s): kernel.reservoir_params[s]
               for s in kernel.boundary if s in kernel.reservoir_params}
        self._rho = {True: rho, False: {a: float(v) for a, v in rho.items()}}
        absorption = to_rational(absorption_rate)
        self._absorption = {True: absorption, False: float(absorption)}

    @property
    def site_cap(self) -> Optional[int]:
        return None

    def hop_weight(self, n_from: int, n_to: int) -> int:
        raise NotImplementedError

    def _moves(self, state: State, exact: bool) -> List[Tuple[State, Any]]:
        moves = []
        for a, b, p in self._bonds[exact]:
            if state[a] == 0:
                continue
            weight = self.hop_weight(state[a], state[b])
            if weight > 0:
                moves.append((_move(state, a, b), p * weight))
        if self.reservoirs:
            cap = self.site_cap
            for a in self._boundary:
                rho = self._rho[exact][a]
                if state[a] < cap and rho != 0:
                    moves.append((_shift(state, a, 1), rho * (cap - state[a])))
                if state[a] > 0 and rho != 1:
                    moves.append((_shift(state, a, -1), (1 - rho) * state[a]))
        if self.sinks:
            rate = self._absorption[exact]
            for a in self._boundary:
                if state[a] > 0:
                    moves.append((_move(state, a, self._sink_slot[a]), rate * state[a]))
        return moves

    def transitions(self, state: State) -> List[Tuple[State, Rational]]:
        """Enabled moves with exact rates"""
        return self._moves(tuple(state), True)

    def float_transitions(self, state: State) -> List[Tuple[State, float]]:
        """Enabled moves with floating-point rates, for simulation"""
        return self._moves(tuple(state), False)

    def is_absorbed(self, state: State) -> bool:
        return not any(state[:self.kernel.size])


class ExclusionRule(JumpRule):
    """2j-SEP: at most 2j particles per site, hop weight eta_i (2j - eta_l)"""

    name = "sep2j"

    def __init__(self, kernel: Kernel, j: Any, **kwargs):
        self.two_j = spin_levels(j)
        super().__init__(kernel, **kwargs)

    @property
    def site_cap(self) -> Optional[int]:
        return self.two_j

    def hop_weight(self, n_from: int, n_to: int) -> int:
        return n_from * (self.two_j - n_to)


class InclusionRule(JumpRule):
    """SIP(m): hop weight 2 xi_i (2 xi_l + m)"""

    name = "sip"

    def __init__(self, kernel: Kernel, m: Any, **kwargs):
        self.m = check_m(m)
        super().__init__(kernel, **kwargs)

    def hop_weight(self, n_from: int, n_to: int) -> int:
        return 2 * n_from * (2 * n_to + self.m)


class IndependentRule(JumpRule):
    """Independent walkers: hop weight eta_i"""

    name = "irw"

    def hop_weight(self, n_from: int, n_to: int) -> int:
        return n_from


def build_generator(rule: JumpRule, sector: Optional[int] = None,
                    totals: Optional[Iterable[int]] = None, name: str = "") -> CTMCGenerator:
    """
    Enumerate the state space of a rule and collect its exact rates

    Conserving rules are enumerated sector-first: a single sector, a union of
    totals, or (for bounded sites) every total. Non-conserving rules use the
    full product space.

    Raises:
        EmptySector: if the requested sector holds no configuration
    """
    if rule.conserves:
        if sector is not None:
            totals = [sector]
        elif totals is None:
            if any(c is None for c in rule.caps):
                raise EmptySector(f"{rule.name} has unbounded sites: give a sector")
            totals = range(sum(rule.caps) + 1)
        totals = list(totals)
        if any(t < 0 for t in totals):
            raise EmptySector(f"negative sector in {totals}")
        space = StateSpace.sectors(rule.locations, rule.caps, totals)
    else:
        space = StateSpace.product(rule.locations, rule.caps)
    if space.count() == 0:
        raise EmptySector(f"{rule.name} sector {sector if sector is not None else totals} is empty")
    rates: Dict[Tuple[int, int], Rational] = {}
    for index, state in enumerate(space.states):
        for target, rate in rule.transitions(state):
            key = (index, space.index_of(target))
            rates[key] = rates.get(key, sympy.S.Zero) + rate
    logger.debug("Built %s generator: %d states, %d transitions",
                 name or rule.name, space.count(), len(rates))
    return CTMCGenerator(space=space, rates=rates, conserved=sector if rule.conserves else None,
                         name=name or rule.name)


def sep2j_generator(kernel: Kernel, j: Any, sector: Optional[int] = None,
                    totals: Optional[Iterable[int]] = None) -> CTMCGenerator:
    return build_generator(ExclusionRule(kernel, j), sector, totals, name="sep2j")


def sip_generator(kernel: Kernel, m: Any, sector: Optional[int] = None,
                  totals: Optional[Iterable[int]] = None) -> CTMCGenerator:
    return build_generator(InclusionRule(kernel, m), sector, totals, name="sip")


def irw_generator(kernel: Kernel, sector: Optional[int] = None,
                  totals: Optional[Iterable[int]] = None, rate_scale: Any = 1) -> CTMCGenerator:
    return build_generator(IndependentRule(kernel, rate_scale=rate_scale), sector, totals,
                           name="irw")


def ladder_sep_generator(kernel: Kernel, levels: int, sector: Optional[int] = None,
                         totals: Optional[Iterable[int]] = None) -> CTMCGenerator:
    """SEP on the product graph S x I; no intra-site exchange since p(i,i) = 0"""
    rule = ExclusionRule(ladder_kernel(kernel, levels), Rational(1, 2))
    return build_generator(rule, sector, totals, name="ladder_sep")


def boundary_sep2j_generator(kernel: Kernel, j: Any) -> CTMCGenerator:
    return build_generator(ExclusionRule(kernel, j, reservoirs=True), name="boundary_sep2j")


def boundary_ladder_sep_generator(kernel: Kernel, levels: int) -> CTMCGenerator:
    rule = ExclusionRule(ladder_kernel(kernel, levels), Rational(1, 2), reservoirs=True)
    return build_generator(rule, name="boundary_ladder_sep")


def dual_absorbing_sep2j_generator(kernel: Kernel, j: Any, sector: Optional[int] = None,
                                   totals: Optional[Iterable[int]] = None) -> CTMCGenerator:
    """Bulk 2j-SEP plus absorption into the sink at rate xi_i"""
    rule = ExclusionRule(kernel, j, sinks=True, absorption_rate=1)
    return build_generator(rule, sector, totals, name="dual_absorbing_sep2j")


def dual_absorbing_sip_generator(kernel: Kernel, m: Any, sector: Optional[int] = None,
                                 totals: Optional[Iterable[int]] = None) -> CTMCGenerator:
    """Bulk SIP(m) plus absorption into the sink at rate 2 xi_i"""
    rule = InclusionRule(kernel, m, sinks=True, absorption_rate=2)
    return build_generator(rule, sector, totals, name="dual_absorbing_sip")


def pair_generator(total: int, m: Any) -> CTMCGenerator:
    """
    Two-site chain behind the discrete thermalization

    (N, D) -> (N, D - 2) at rate (N + D)(N - D + m)/4, i.e. SIP(m) at p = 1/4.
    """
    kernel = build_kernel({"sites": ["1", "2"], "edges": [["1", "2", Rational(1, 4)]]})
    return sip_generator(kernel, m, sector=total)


# Diffusion operators

def _bond_difference(a: Symbol, b: Symbol, variables: Sequence[Symbol]) -> DiffOperator:
    return polyops.add(polyops.derivative(a, variables),
                       polyops.scale(polyops.derivative(b, variables), -1))


def bmp_operator(kernel: Kernel, levels: int = 1,
                 variables: Optional[Sequence[Symbol]] = None) -> DiffOperator:
    """sum over bonds and level pairs of p (x_{i,a} d_{j,b} - x_{j,b} d_{i,a})^2"""
    variables = tuple(variables or polyops.site_symbols("x", kernel.sites, levels))
    terms = [polyops.multiplication(0, variables)]
    for a, b, p in kernel.bonds:
        for alpha in range(levels):
            for beta in range(levels):
                xa = variables[a * levels + alpha]
                xb = variables[b * levels + beta]
                rotation = polyops.add(polyops.left_multiply(xa, polyops.derivative(xb, variables)),
                                       polyops.left_multiply(-xb, polyops.derivative(xa, variables)))
                terms.append(polyops.scale(polyops.square(rotation), p))
    return polyops.add(*terms)


def bep_operator(kernel: Kernel, m: Any,
                 variables: Optional[Sequence[Symbol]] = None) -> DiffOperator:
    """sum_bonds p [4 z_i z_j (d_i - d_j)^2 - 2m (z_i - z_j)(d_i - d_j)]"""
    m = check_m(m)
    variables = tuple(variables or polyops.site_symbols("z", kernel.sites))
    terms = [polyops.multiplication(0, variables)]
    for a, b, p in kernel.bonds:
        za, zb = variables[a], variables[b]
        diff = _bond_difference(za, zb, variables)
        diffusion = polyops.left_multiply(4 * za * zb, polyops.square(diff))
        drift = polyops.left_multiply(-2 * m * (za - zb), diff)
        terms.append(polyops.scale(polyops.add(diffusion, drift), p))
    return polyops.add(*terms)


def boundary_temperatures(kernel: Kernel) -> Dict[int, Rational]:
    missing = [s for s in kernel.boundary if s not in kernel.reservoir_params]
    if not kernel.boundary or missing:
        raise MissingReservoirParam(
            f"temperatures missing for {missing or 'an empty boundary'}")
    return {kernel.index(s): kernel.reservoir_params[s] for s in kernel.boundary}


def boundary_bep_operator(kernel: Kernel, m: Any,
                          variables: Optional[Sequence[Symbol]] = None) -> DiffOperator:
    """Bulk BEP plus 2 T_i (m d_i + 2 z_i d_i^2) - 2 z_i d_i at boundary sites"""
    m = check_m(m)
    variables = tuple(variables or polyops.site_symbols("z", kernel.sites))
    terms = [bep_operator(kernel, m, variables)]
    for a, temperature in boundary_temperatures(kernel).items():
        z = variables[a]
        first = polyops.derivative(z, variables)
        second = polyops.derivative(z, variables, 2)
        reservoir = polyops.add(polyops.scale(first, m), polyops.left_multiply(2 * z, second))
        terms.append(polyops.scale(reservoir, 2 * temperature))
        terms.append(polyops.left_multiply(-2 * z, first))
    return polyops.add(*terms)


def boundary_bmp_operator(kernel: Kernel, levels: int = 1,
                          variables: Optional[Sequence[Symbol]] = None) -> DiffOperator:
    """Bulk BMP plus T_i d^2_{i,a} - x_{i,a} d_{i,a} for every level of a boundary site"""
    variables = tuple(variables or polyops.site_symbols("x", kernel.sites, levels))
    terms = [bmp_operator(kernel, levels, variables)]
    for a, temperature in boundary_temperatures(kernel).items():
        for alpha in range(levels):
            x = variables[a * levels + alpha]
            terms.append(polyops.scale(polyops.derivative(x, variables, 2), temperature))
            terms.append(polyops.left_multiply(-x, polyops.derivative(x, variables)))
    return polyops.add(*terms)


def deterministic_operator(kernel: Kernel, rate: Any = 1,
                           variables: Optional[Sequence[Symbol]] = None) -> DiffOperator:
    """-rate sum_bonds p (x_i - x_j)(d_i - d_j)"""
    variables = tuple(variables or polyops.site_symbols("x", kernel.sites))
    rate = to_rational(rate)
    terms = [polyops.multiplication(0, variables)]
    for a, b, p in kernel.bonds:
        xa, xb = variables[a], variables[b]
        terms.append(polyops.left_multiply(-rate * p * (xa - xb),
                                           _bond_difference(xa, xb, variables)))
    return polyops.add(*terms)


def hermite_diffusion_operator(kernel: Kernel,
                               variables: Optional[Sequence[Symbol]] = None) -> DiffOperator:
    """
    sum_bonds p [(d_i - d_j)^2 - (x_i - x_j)(d_i - d_j)]

    Equals -(a_i+ - a_j+)(a_i- - a_j-) with a+ = x - d/dx, a- = d/dx.
    """
    variables = tuple(variables or polyops.site_symbols("x", kernel.sites))
    terms = [polyops.multiplication(0, variables)]
    for a, b, p in kernel.bonds:
        xa, xb = variables[a], variables[b]
        diff = _bond_difference(xa, xb, variables)
        bond = polyops.add(polyops.square(diff), polyops.left_multiply(-(xa - xb), diff))
        terms.append(polyops.scale(bond, p))
    return polyops.add(*terms)


def sep_hydrodynamic_operator(kernel: Kernel,
                              variables: Optional[Sequence[Symbol]] = None) -> DiffOperator:
    """sum_{i,l} p(i,l) x_i (1 - x_l)(d_l - d_i), the large-j density flow"""
    variables = tuple(variables or polyops.site_symbols("x", kernel.sites))
    terms = [polyops.multiplication(0, variables)]
    for a, b, p in kernel.directed_bonds:
        xa, xb = variables[a], variables[b]
        terms.append(polyops.left_multiply(p * xa * (1 - xb),
                                           _bond_difference(xb, xa, variables)))
    return polyops.add(*terms)


def deterministic_flow(x0: Sequence[float], t: float, rate: float = 1.0) -> Tuple[float, float]:
    """Two-site solution: mean +- halfdiff * exp(-2 rate t)"""
    x1, x2 = float(x0[0]), float(x0[1])
    mean = (x1 + x2) / 2
    half = (x1 - x2) / 2 * math.exp(-2 * rate * t)
    return mean + half, mean - half


# Instantaneous thermalization

def kmp_thermal_spec(kernel: Kernel, m: Any) -> ThermalizationSpec:
    return ThermalizationSpec(kernel=kernel, m=check_m(m), law=RedistributionLaw.CONTINUOUS)


def dual_kmp_thermal_spec(kernel: Kernel, m: Any) -> ThermalizationSpec:
    """Discrete dual; bond clocks carry the same p(i,j) weight as the primal"""
    return ThermalizationSpec(kernel=kernel, m=check_m(m), law=RedistributionLaw.DISCRETE)


def continuous_redistribution(total: float, m: int, rng: np.random.Generator,
                              size: Optional[int] = None) -> np.ndarray:
    """Share of the pair energy kept by the first site: E * Beta(m/2, m/2)"""
    return total * rng.beta(m / 2, m / 2, size=size)


def discrete_redistribution_law(total: int, m: Any) -> Dict[int, Rational]:
    """
    Stationary law of the pair chain with N particles, k on the first site

    From detailed balance: w_k / w_{k-1} = (N-k+1)(2k-2+m) / (k (2N-2k+m)),
    the beta-binomial law C(N,k) (m/2)_k (m/2)_{N-k} / (m)_N.
    """
    m = check_m(m)
    weights = [sympy.S.One]
    for k in range(1, total + 1):
        ratio = Rational((total - k + 1) * (2 * k - 2 + m), k * (2 * total - 2 * k + m))
        weights.append(weights[-1] * ratio)
    norm = sum(weights)
    return {k: w / norm for k, w in enumerate(weights)}


def printed_recursion_law(total: int, m: Any) -> Dict[int, Rational]:
    """
    Law from the recursion mu(D)/mu(D-2) = (N-D+1)(N+D-1+m) / ((N+D)(N-D+m))

    Kept for comparison only: it is not stationary for the pair chain.
    """
    m = check_m(m)
    weights = [sympy.S.One]
    for k in range(1, total + 1):
        delta = 2 * k - total
        ratio = Rational((total - delta + 1) * (total + delta - 1 + m),
                         (total + delta) * (total - delta + m))
        weights.append(weights[-1] * ratio)
    norm = sum(weights)
    return {k: w / norm for k, w in enumerate(weights)}


class ModelService:
    """Jump rules, generators and diffusion operators of one kernel, by model kind"""

    JUMP_KINDS = ("sep", "sep2j", "sip", "irw", "ladder_sep", "boundary_sep2j",
                  "boundary_ladder_sep", "dual_absorbing_sep2j", "dual_absorbing_sip")
    DIFFUSION_KINDS = ("bmp", "bep", "boundary_bmp", "boundary_bep", "hermite")

    def __init__(self, kernel: Kernel):
        self.kernel = kernel

    def rule(self, kind: str, j: Any = None, m: Any = None,
             levels: Optional[int] = None) -> JumpRule:
        """
        Jump rule of a discrete model

        Raises:
            UnsupportedModel: for kinds without jump dynamics
        """
        if kind == "sep":
            return ExclusionRule(self.kernel, Rational(1, 2))
        if kind == "sep2j":
            return ExclusionRule(self.kernel, j)
        if kind == "sip":
            return InclusionRule(self.kernel, m)
        if kind == "irw":
            return IndependentRule(self.kernel)
        if kind == "ladder_sep":
            return ExclusionRule(ladder_kernel(self.kernel, levels), Rational(1, 2))
        if kind == "boundary_sep2j":
            return ExclusionRule(self.kernel, j, reservoirs=True)
        if kind == "boundary_ladder_sep":
            return ExclusionRule(ladder_kernel(self.kernel, levels), Rational(1, 2),
                                 reservoirs=True)
        if kind == "dual_absorbing_sep2j":
            return ExclusionRule(self.kernel, j, sinks=True, absorption_rate=1)
        if kind == "dual_absorbing_sip":
            return InclusionRule(self.kernel, m, sinks=True, absorption_rate=2)
        raise UnsupportedModel(f"{kind} has no jump dynamics")

    def generator(self, kind: str, j: Any = None, m: Any = None, levels: Optional[int] = None,
                  sector: Optional[int] = None,
                  totals: Optional[Iterable[int]] = None) -> CTMCGenerator:
        """Exact generator of a discrete model; sector and totals apply to conserving rules"""
        if kind in ("sep", "sep2j"):
            return sep2j_generator(self.kernel, Rational(1, 2) if kind == "sep" else j,
                                   sector, totals)
        if kind == "sip":
            return sip_generator(self.kernel, m, sector, totals)
        if kind == "irw":
            return irw_generator(self.kernel, sector, totals)
        if kind == "ladder_sep":
            return ladder_sep_generator(self.kernel, levels, sector, totals)
        if kind == "boundary_sep2j":
            return boundary_sep2j_generator(self.kernel, j)
        if kind == "boundary_ladder_sep":
            return boundary_ladder_sep_generator(self.kernel, levels)
        if kind == "dual_absorbing_sep2j":
            return dual_absorbing_sep2j_generator(self.kernel, j, sector, totals)
        if kind == "dual_absorbing_sip":
            return dual_absorbing_sip_generator(self.kernel, m, sector, totals)
        raise UnsupportedModel(f"{kind} has no generator matrix")

    def operator(self, kind: str, m: Any = None, levels: int = 1,
                 variables: Optional[Sequence[Symbol]] = None) -> DiffOperator:
        """
        Diffusion operator of a continuous model

        Raises:
            UnsupportedModel: for kinds without a diffusion operator
        """
        if kind == "bmp":
            return bmp_operator(self.kernel, levels, variables)
        if kind == "boundary_bmp":
            return boundary_bmp_operator(self.kernel, levels, variables)
        if kind == "bep":
            return bep_operator(self.kernel, m, variables)
        if kind == "boundary_bep":
            return boundary_bep_operator(self.kernel, m, variables)
        if kind == "hermite":
            return hermite_diffusion_operator(self.kernel, variables)
        raise UnsupportedModel(f"{kind} has no diffusion operator")

    def thermal_spec(self, kind: str, m: Any) -> ThermalizationSpec:
        if kind == "kmp":
            return kmp_thermal_spec(self.kernel, m)
        if kind == "dual_kmp":
            return dual_kmp_thermal_spec(self.kernel, m)
        raise UnsupportedModel(f"{kind} is not an instantaneous-thermalization model")
