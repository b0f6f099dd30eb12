"""
Verification service
Monte Carlo duality checks against exact oracles, detailed balance, lumping,
absorption laws, stationary profiles, thermalization laws and scaling limits
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.integrate
import scipy.linalg
import scipy.stats
import sympy
from sympy import Poly, Rational, SparseMatrix, binomial, factorial

from dualbench.application.errors import (
    DimensionMismatch, MissingReservoirParam, NotLumpable, SectorTooLarge, UnsupportedModel,
)
from dualbench.application.services import polyops_service as polyops
from dualbench.application.services.algebra_service import check_m, spin_levels
from dualbench.application.services.duality_service import (
    detailed_balance_witness, verify_duality,
)
from dualbench.application.services.lattice_service import build_kernel
from dualbench.application.services.model_service import (
    ExclusionRule, InclusionRule, IndependentRule, JumpRule, bep_operator, bmp_operator,
    boundary_bep_operator, boundary_bmp_operator, build_generator, continuous_redistribution,
    deterministic_operator, discrete_redistribution_law, dual_absorbing_sep2j_generator,
    dual_absorbing_sip_generator, irw_generator, pair_generator, printed_recursion_law,
)
from dualbench.application.services.simulation_service import (
    SimulationService, gillespie, simulate_bep, simulate_bep_ensemble, simulate_bmp,
)
from dualbench.config import config
from dualbench.infra.exact import expm, max_abs_entry, solve
from dualbench.infra.models import (
    AbsorptionResult, CTMCGenerator, DiffOperator, DualityFunction, GoodnessOfFit, Kernel,
    LimitRow, MCComparison, ProfileResult, ThermalizationReport, VerificationRecord,
)
from dualbench.infra.state_space import State, StateSpace

logger = logging.getLogger(__name__)


# Processes seen by the Monte Carlo checks

class JumpProcess:
    """A jump rule with its exact sector oracle"""

    def __init__(self, rule: JumpRule):
        self.rule = rule
        self.name = rule.name
        self._generators: Dict[int, CTMCGenerator] = {}

    def simulate(self, init: State, t: float, rng: np.random.Generator, stream_id: int) -> State:
        return gillespie(self.rule, init, t, rng, stream_id=stream_id).final

    def generator(self, init: State) -> CTMCGenerator:
        total = sum(init)
        if total not in self._generators:
            sector = total if self.rule.conserves else None
            self._generators[total] = build_generator(self.rule, sector=sector)
        return self._generators[total]

    def law(self, init: State, t: float) -> Optional[Tuple[StateSpace, np.ndarray]]:
        """Distribution at time t over the sector of init, None above the dense limit"""
        L = self.generator(tuple(init))
        if L.size > config.DENSE_STATE_LIMIT:
            return None
        row = expm(L.dense(), t)[L.space.index_of(tuple(init))]
        return L.space, row

    def expectation(self, init: State, t: float, f: Callable[[State], float]) -> Optional[float]:
        law = self.law(init, t)
        if law is None:
            return None
        space, row = law
        return float(sum(p * f(s) for s, p in zip(space.states, row) if p != 0))


class DiffusionProcess:
    """Diffusion simulated by rotation splitting, with the moment-flow oracle"""

    name = "diffusion"

    def __init__(self, kernel: Kernel, dt: float, operator: DiffOperator, reservoirs: bool):
        self.kernel = kernel
        self.dt = dt
        self.operator = operator
        self.reservoirs = reservoirs

    def simulate(self, init: Sequence[float], t: float, rng: np.random.Generator,
                 stream_id: int) -> np.ndarray:
        raise NotImplementedError

    def expectation(self, init: Sequence[float], t: float, p: Poly) -> float:
        return polyops.moment_flow(self.operator, p, init, t)


class EnergyProcess(DiffusionProcess):
    """Energy process simulated through the momentum lift"""

    def __init__(self, kernel: Kernel, m: Any, dt: float, operator: Optional[DiffOperator] = None,
                 reservoirs: bool = False):
        self.m = check_m(m)
        if operator is None:
            build = boundary_bep_operator if reservoirs else bep_operator
            operator = build(kernel, self.m)
        super().__init__(kernel, dt, operator, reservoirs)
        self.name = f"{'boundary ' if reservoirs else ''}bep(m={self.m})"

    def simulate(self, init: Sequence[float], t: float, rng: np.random.Generator,
                 stream_id: int) -> np.ndarray:
        return simulate_bep(self.kernel, self.m, init, t, self.dt, rng, stream_id,
                            self.reservoirs).final


class MomentumProcess(DiffusionProcess):
    """Momentum process on one or more levels per site"""

    def __init__(self, kernel: Kernel, levels: int, dt: float,
                 operator: Optional[DiffOperator] = None, reservoirs: bool = False):
        self.levels = levels
        if operator is None:
            build = boundary_bmp_operator if reservoirs else bmp_operator
            operator = build(kernel, levels)
        super().__init__(kernel, dt, operator, reservoirs)
        self.name = f"{'boundary ' if reservoirs else ''}bmp(levels={levels})"

    def simulate(self, init: Sequence[float], t: float, rng: np.random.Generator,
                 stream_id: int) -> np.ndarray:
        return simulate_bmp(self.kernel, self.levels, init, t, self.dt, rng, stream_id,
                            self.reservoirs).final


Process = Union[JumpProcess, DiffusionProcess]
Duality = Union[DualityFunction, polyops.PolynomialFamily]


def _evaluate(D: Duality, eta: Any, xi: State) -> float:
    if isinstance(D, polyops.PolynomialFamily):
        return float(D.evaluate(np.asarray(eta, dtype=float)[None, :], xi)[0])
    return float(D.evaluate(tuple(eta), tuple(xi)))


def _mean_stderr(values: np.ndarray) -> Tuple[float, float]:
    if values.size < 2:
        return float(values.mean()), 0.0
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(values.size))


def _z_score(lhs: float, rhs: float, se_lhs: float, se_rhs: float) -> float:
    combined = math.hypot(se_lhs, se_rhs)
    gap = abs(lhs - rhs)
    if combined == 0:
        return 0.0 if gap <= 1e-12 * max(1.0, abs(lhs)) else math.inf
    return gap / combined


def _streams(side: int, attempt: int) -> int:
    """First stream id for one side of one attempt, keeping all draws disjoint"""
    return (2 * attempt + side) << 32


# Exact checks

def detailed_balance_check(L: CTMCGenerator, mu: Callable[[State], Rational]) -> VerificationRecord:
    witness = detailed_balance_witness(L, mu)
    residual = sympy.S.Zero
    if witness is not None:
        a, b = witness
        residual = abs(mu(a) * L.rate(a, b) - mu(b) * L.rate(b, a))
    return VerificationRecord(identity="detailed balance", sector=L.name,
                              residual=residual, passed=witness is None,
                              witness=None if witness is None else str(witness))


def projection_matrix(fine: StateSpace, coarse: StateSpace,
                      projection: Callable[[State], State]) -> SparseMatrix:
    entries = {}
    for a, state in enumerate(fine.states):
        image = projection(state)
        if image not in coarse:
            raise NotLumpable(f"{state} projects to {image} outside the coarse space",
                              witness=state)
        entries[(a, coarse.index_of(image))] = 1
    return SparseMatrix(fine.count(), coarse.count(), entries)


def lumping_check(fine: CTMCGenerator, coarse: CTMCGenerator,
                  projection: Callable[[State], State], strict: bool = False) -> VerificationRecord:
    """
    L_fine (psi o pi) = (L_coarse psi) o pi for every coarse indicator psi

    Raises:
        NotLumpable: with the worst (fine state, coarse state) when strict
    """
    P = projection_matrix(fine.space, coarse.space, projection)
    residual, where = max_abs_entry(fine.matrix() * P - P * coarse.matrix())
    witness = None
    if where is not None:
        witness = f"{fine.states[where[0]]},{coarse.states[where[1]]}"
        if strict:
            raise NotLumpable(f"{fine.name} does not lump onto {coarse.name}", witness=witness)
    return VerificationRecord(identity=f"lumping {fine.name} -> {coarse.name}",
                              sector=f"{fine.size}->{coarse.size} states", residual=residual,
                              passed=residual == 0, witness=witness)


def energy_lumping_check(kernel: Kernel, levels: int, max_degree: int = 3,
                         boundary: bool = False) -> VerificationRecord:
    """
    BMP on m levels acting on lifted z-monomials equals BEP(m) on the monomials

    Checked for every z-monomial of degree <= max_degree, with or without
    reservoirs.
    """
    groups = polyops.level_groups(kernel.sites, levels)
    zs = tuple(groups)
    if boundary:
        fine, coarse = boundary_bmp_operator(kernel, levels), boundary_bep_operator(kernel, levels, zs)
    else:
        fine, coarse = bmp_operator(kernel, levels), bep_operator(kernel, levels, zs)
    worst, witness = sympy.S.Zero, None
    for exponent in polyops.monomial_basis(len(zs), max_degree):
        q = Poly.from_dict({exponent: 1}, *zs, domain=sympy.QQ)
        image = polyops.apply_diff_operator(fine, polyops.lift_to_levels(q, groups))
        residual = polyops.change_variables_energy(image, groups) - polyops.apply_diff_operator(coarse, q)
        if not residual.is_zero:
            size = max(abs(c) for c in residual.coeffs())
            if size > worst:
                worst, witness = size, str(q.as_expr())
    return VerificationRecord(identity=f"energy lumping m={levels}", sector=f"degree<={max_degree}",
                              residual=worst, passed=worst == 0, witness=witness)


def absorption_solve(kernel: Kernel, generator: CTMCGenerator, xi0: State) -> AbsorptionResult:
    """
    Exact law of the sink occupation at absorption

    Occupation times y of the transient states solve (-L_TT)^T y = e_xi0; the
    law of the absorbing state a is sum_t y_t L(t, a).

    Raises:
        SectorTooLarge: if the transient block exceeds config.DENSE_STATE_LIMIT
    """
    n = kernel.size
    xi0 = tuple(xi0)
    transient = [k for k, s in enumerate(generator.states) if any(s[:n])]
    absorbing = [k for k, s in enumerate(generator.states) if not any(s[:n])]
    params = [kernel.reservoir_params.get(site) for site in kernel.boundary]

    def expectation(law: Mapping[State, Any]) -> Optional[Any]:
        if any(p is None for p in params):
            return None
        total = sympy.S.Zero
        for sinks, probability in law.items():
            weight = sympy.S.One
            for param, count in zip(params, sinks):
                weight *= param ** count
            total += probability * weight
        return total

    if not any(xi0[:n]):
        law = {xi0[n:]: sympy.S.One}
        return AbsorptionResult(initial=xi0, law=law, expectation=expectation(law))
    if len(transient) > config.DENSE_STATE_LIMIT:
        raise SectorTooLarge(f"{len(transient)} transient states exceed {config.DENSE_STATE_LIMIT}")
    M = generator.matrix()
    block = M.extract(transient, transient)
    exits = M.extract(transient, absorbing)
    position = transient.index(generator.space.index_of(xi0))
    rhs = SparseMatrix(len(transient), 1, {(position, 0): 1})
    occupation, exact = solve(-block.T, rhs)
    probabilities = occupation.T * exits
    law = {}
    for k, a in enumerate(absorbing):
        value = probabilities[0, k]
        if value != 0:
            law[generator.states[a][n:]] = value
    logger.debug("Absorption from %s: %d transient states, exact=%s", xi0, len(transient), exact)
    return AbsorptionResult(initial=xi0, law=law, expectation=expectation(law), exact=exact)


def _absorbing_dual(kernel: Kernel, model: str, parameter: Any, particles: int) -> CTMCGenerator:
    if model == "sep2j":
        return dual_absorbing_sep2j_generator(kernel, parameter, sector=particles)
    if model in ("bep", "kmp"):
        return dual_absorbing_sip_generator(kernel, parameter, sector=particles)
    raise UnsupportedModel(f"no absorbing dual for {model!r}")


def stationary_profile(kernel: Kernel, model: str, j: Any = None, m: Any = None,
                       correlations: bool = False) -> ProfileResult:
    """
    Stationary one- and two-point functions of a boundary-driven model

    sep2j: E[eta_i] = 2j E[prod rho^sinks] from one dual particle at i,
           E[eta_i eta_k] = (2j)^2 E[...] from dual particles at i and k.
    bep/kmp: the same with m in place of 2j and temperatures in place of rho.
    """
    if model == "sep2j":
        scale, parameter = sympy.Integer(spin_levels(j)), j
    elif model in ("bep", "kmp"):
        scale, parameter = sympy.Integer(check_m(m)), m
    else:
        raise UnsupportedModel(f"no stationary profile for {model!r}")
    missing = [s for s in kernel.boundary if s not in kernel.reservoir_params]
    if not kernel.boundary or missing:
        raise MissingReservoirParam(f"reservoir parameters missing for {missing or 'boundary'}")
    n, width = kernel.size, kernel.size + len(kernel.boundary)

    def dual_expectation(xi: State) -> Any:
        generator = _absorbing_dual(kernel, model, parameter, sum(xi))
        return absorption_solve(kernel, generator, xi).expectation

    means = []
    for a in range(n):
        xi = tuple(1 if k == a else 0 for k in range(width))
        means.append(scale * dual_expectation(xi))
    covariances = {}
    if correlations:
        for a in range(n):
            for b in range(a + 1, n):
                xi = tuple(1 if k in (a, b) else 0 for k in range(width))
                covariances[(a, b)] = scale ** 2 * dual_expectation(xi) - means[a] * means[b]
    logger.info("Stationary profile of %s on %d sites: %s", model, n, [str(v) for v in means])
    return ProfileResult(model=model, sites=kernel.sites, means=tuple(means),
                         covariances=covariances)


def limiting_duality_record(kernel: Kernel, max_total: int = 3) -> VerificationRecord:
    """Deterministic rate-2 flow against rate-2 independent walkers, D = prod x_i^xi_i"""
    variables = polyops.site_symbols("x", kernel.sites)
    dual = irw_generator(kernel, totals=range(max_total + 1), rate_scale=2)
    family = polyops.duality_family("detflow", variables)
    return verify_duality(deterministic_operator(kernel, 2, variables), dual, family,
                          identity="deterministic flow vs rate-2 walkers")


def beta_moment_quadrature(m: Any, p: int, q: int) -> float:
    """E[B^p (1-B)^q] for B ~ Beta(m/2, m/2) by numerical integration"""
    half = check_m(m) / 2
    density = scipy.stats.beta(half, half).pdf
    value, _ = scipy.integrate.quad(lambda u: u ** p * (1 - u) ** q * density(u), 0, 1,
                                    limit=200)
    return value


def _tv(first: Mapping[State, float], second: Mapping[State, float]) -> float:
    keys = set(first) | set(second)
    return 0.5 * sum(abs(first.get(k, 0.0) - second.get(k, 0.0)) for k in keys)


def _law_dict(space: StateSpace, row: np.ndarray) -> Dict[State, float]:
    return {s: float(p) for s, p in zip(space.states, row)}


def _linear_flow(kernel: Kernel, x0: Sequence[float], t: float, rate: float = 1.0) -> np.ndarray:
    """x(t) for dx_k/dt = rate sum_l p(k,l)(x_l - x_k)"""
    n = kernel.size
    A = np.zeros((n, n))
    for a, b, p in kernel.directed_bonds:
        A[a, b] += float(p)
        A[a, a] -= float(p)
    return scipy.linalg.expm(rate * t * A) @ np.asarray(x0, dtype=float)


def duality_limit_gap(two_j: int, window: int = 3) -> Optional[float]:
    """
    max |S / Q^(j) - e eta!/(eta-xi)!| on one site over eta, xi < window

    S(eta, xi) = 1/(eta-xi)! and Q^(j)(eta) = C(2j,eta)(1/2j)^eta (1-1/2j)^(2j-eta).
    """
    if two_j < window:
        return None
    gap = 0.0
    q = Rational(1, two_j)
    for eta in range(window):
        Q = binomial(two_j, eta) * q ** eta * (1 - q) ** (two_j - eta)
        for xi in range(eta + 1):
            value = (1 / factorial(eta - xi)) / Q
            target = math.e * float(factorial(eta) / factorial(eta - xi))
            gap = max(gap, abs(float(value) - target))
    return gap


def limit_check_j(kernel: Kernel, j_values: Sequence[Any], eta0: State, t: float,
                  density: Optional[Sequence[Any]] = None,
                  window: int = 3) -> List[LimitRow]:
    """
    2j-SEP at time t/(2j) against independent walkers at time t

    Each row holds the total-variation distance between the sector laws, the
    duality-function gap on a single-site window, and, with a density profile
    x0, the gap between E[eta/2j] started from 2j x0 and the linear flow plus
    the largest variance of eta/2j. Fixed-time marginals only.
    """
    eta0 = tuple(eta0)
    walkers = JumpProcess(IndependentRule(kernel))
    irw_space, irw_row = walkers.law(eta0, t)
    irw_law = _law_dict(irw_space, irw_row)
    rows = []
    for j in j_values:
        two_j = spin_levels(j)
        if max(eta0) > two_j:
            raise DimensionMismatch(f"{eta0} does not fit 2j = {two_j}")
        sep = JumpProcess(ExclusionRule(kernel, j))
        space, row = sep.law(eta0, t / two_j)
        distance = _tv(_law_dict(space, row), irw_law)
        mean_gap = variance = None
        if density is not None:
            start = tuple(int(sympy.Rational(x) * two_j) for x in density)
            if all(sympy.Rational(x) * two_j == s for x, s in zip(density, start)):
                space, row = sep.law(start, t / two_j)
                profile = np.array(space.states, dtype=float) / two_j
                mean = row @ profile
                target = _linear_flow(kernel, [float(sympy.Rational(x)) for x in density], t)
                mean_gap = float(np.max(np.abs(mean - target)))
                variance = float(np.max(row @ (profile - mean) ** 2))
        rows.append(LimitRow(parameter=Rational(two_j, 2), distance=distance,
                             function_gap=duality_limit_gap(two_j, window),
                             mean_gap=mean_gap, variance=variance))
        logger.debug("j=%s: TV %.3e", Rational(two_j, 2), distance)
    return rows


def limit_check_m(kernel: Kernel, m_values: Sequence[Any], xi0: State, t: float,
                  z0: Optional[Sequence[float]] = None,
                  service: Optional["VerificationService"] = None, samples: int = 2000,
                  dt: float = 0.01) -> List[LimitRow]:
    """
    SIP(m) at t/m against rate-2 walkers at t, and BEP(m) at t/m against the
    rate-2 deterministic flow

    mean_gap is the largest |E[z_i] - x_i(t)|, variance the largest Var z_i,
    both exact through the moment flow. With a service, the dt-gated
    simulation of BEP(m) is compared with the flow as well.
    """
    xi0 = tuple(xi0)
    walkers = JumpProcess(IndependentRule(kernel, rate_scale=2))
    irw_space, irw_row = walkers.law(xi0, t)
    irw_law = _law_dict(irw_space, irw_row)
    rows = []
    for m in m_values:
        m = check_m(m)
        space, row = JumpProcess(InclusionRule(kernel, m)).law(xi0, t / m)
        distance = _tv(_law_dict(space, row), irw_law)
        mean_gap = variance = simulated_gap = simulated_z = None
        if z0 is not None:
            variables = polyops.site_symbols("z", kernel.sites)
            operator = bep_operator(kernel, m, variables)
            target = _linear_flow(kernel, z0, t, rate=2.0)
            gaps, variances = [], []
            for k, z in enumerate(variables):
                first = polyops.moment_flow(operator, polyops.poly(z, variables), z0, t / m)
                second = polyops.moment_flow(operator, polyops.poly(z ** 2, variables), z0, t / m)
                gaps.append(abs(first - target[k]))
                variances.append(second - first ** 2)
            mean_gap, variance = max(gaps), max(variances)
            if service is not None:
                simulated_gap, simulated_z = service.simulated_flow_gap(kernel, m, z0, t,
                                                                        samples, dt)
        rows.append(LimitRow(parameter=sympy.Integer(m), distance=distance,
                             mean_gap=mean_gap, variance=variance,
                             simulated_gap=simulated_gap, simulated_z=simulated_z))
        logger.debug("m=%d: TV %.3e", m, distance)
    return rows


def decreasing(values: Sequence[Optional[float]], slack: float = 1e-12) -> bool:
    present = [v for v in values if v is not None]
    return all(b <= a + slack for a, b in zip(present, present[1:]))


# Thermalization laws

def stationarity_residual(L: CTMCGenerator, law: Mapping[int, Rational]) -> Rational:
    """max |mu^T L| for a law indexed by the first-site occupation"""
    mu = SparseMatrix(1, L.size, {(0, k): law[s[0]] for k, s in enumerate(L.states)})
    residual, _ = max_abs_entry(mu * L.matrix())
    return residual


@dataclass
class VerificationService:
    """
    Monte Carlo checks over seeded, independent streams

    Args:
        seed: Experiment seed
        threads: Worker threads for trajectory fan-out
        sigma: Mean-comparison threshold (config.SIGMA_THRESHOLD by default)
        significance: Distributional test level (config.SIGNIFICANCE by default)
    """
    seed: int
    threads: int = 1
    sigma: float = config.SIGMA_THRESHOLD
    significance: float = config.SIGNIFICANCE
    simulation: SimulationService = field(init=False)

    def __post_init__(self):
        self.simulation = SimulationService(self.seed, self.threads)

    def _side(self, process: Process, init: Any, t: float, n: int, offset: int,
              value: Callable[[Any], float]) -> np.ndarray:
        finals = self.simulation.map_streams(
            lambda rng, k: process.simulate(init, t, rng, k), n, offset)
        return np.array([value(f) for f in finals], dtype=float)

    def _halve_dt(self, simulate: Callable[[float, int], Sequence[Any]], dt: float,
                  value: Callable[[Any], float]) -> Tuple[Sequence[Any], float]:
        """
        Halve dt until the mean of value moves by less than half a standard error

        Args:
            simulate: simulate(dt, attempt) -> final states
            dt: Starting step

        Returns:
            (final states at the accepted step, accepted step)
        """
        finals = simulate(dt, 0)
        for halving in range(1, config.DT_GATE_MAX_HALVINGS + 1):
            before, se = _mean_stderr(np.array([value(f) for f in finals], dtype=float))
            dt /= 2
            finals = simulate(dt, 100 + halving)
            after, _ = _mean_stderr(np.array([value(f) for f in finals], dtype=float))
            logger.info("dt gate: dt=%.3g changed the estimate by %.3g (stderr %.3g)",
                        dt, abs(after - before), se)
            if abs(after - before) < 0.5 * se:
                break
        return finals, dt

    def _gate_dt(self, primal: DiffusionProcess, eta0: Any, t: float, n: int,
                 value: Callable[[Any], float]) -> np.ndarray:
        def simulate(dt: float, attempt: int) -> List[Any]:
            primal.dt = dt
            return self.simulation.map_streams(
                lambda rng, k: primal.simulate(eta0, t, rng, k), n, _streams(0, attempt))

        finals, _ = self._halve_dt(simulate, primal.dt, value)
        return np.array([value(f) for f in finals], dtype=float)

    def mc_duality_check(self, primal: Process, dual: JumpProcess, D: Duality, eta0: Any,
                         xi0: State, t: float, n: int, label: str = "") -> MCComparison:
        """
        Compare E_eta0 D(eta_t, xi0) with E_xi0 D(eta0, xi_t)

        Both sides are estimated from n trajectories on disjoint streams and,
        when the sectors allow it, computed exactly. A failure is rerun once
        with config.RERUN_SAMPLE_FACTOR times the samples.
        """
        xi0 = tuple(xi0)
        label = label or f"{primal.name} vs {dual.name}"
        lhs_value = lambda eta: _evaluate(D, eta, xi0)
        rhs_value = lambda xi: _evaluate(D, eta0, xi)
        exact_rhs = dual.expectation(xi0, t, rhs_value)
        if isinstance(primal, DiffusionProcess):
            exact_lhs = primal.expectation(eta0, t, D(xi0))
        else:
            exact_lhs = primal.expectation(tuple(eta0), t, lhs_value)

        def attempt(index: int, count: int) -> MCComparison:
            if isinstance(primal, DiffusionProcess) and index == 0:
                lhs_samples = self._gate_dt(primal, eta0, t, count, lhs_value)
            else:
                lhs_samples = self._side(primal, eta0, t, count, _streams(0, index), lhs_value)
            rhs_samples = self._side(dual, xi0, t, count, _streams(1, index), rhs_value)
            lhs, se_lhs = _mean_stderr(lhs_samples)
            rhs, se_rhs = _mean_stderr(rhs_samples)
            z = _z_score(lhs, rhs, se_lhs, se_rhs)
            return MCComparison(label=label, lhs=lhs, rhs=rhs, lhs_stderr=se_lhs,
                                rhs_stderr=se_rhs, n_lhs=count, n_rhs=count, z_score=z,
                                threshold=self.sigma, passed=z <= self.sigma,
                                exact_lhs=exact_lhs, exact_rhs=exact_rhs, reruns=index)

        result = attempt(0, n)
        if not result.passed:
            logger.warning("%s: z=%.2f above %.1f with n=%d, rerunning", label,
                           result.z_score, self.sigma, n)
            result = attempt(1, n * config.RERUN_SAMPLE_FACTOR)
            logger.warning("%s: rerun z=%.2f with n=%d, %s", label, result.z_score,
                           result.n_lhs, "pass" if result.passed else "fail")
        for side, estimate, stderr, exact in (("lhs", result.lhs, result.lhs_stderr, exact_lhs),
                                              ("rhs", result.rhs, result.rhs_stderr, exact_rhs)):
            if exact is not None and _z_score(estimate, exact, stderr, 0.0) > self.sigma:
                logger.warning("%s: %s estimate %.6g is off the exact value %.6g",
                               label, side, estimate, exact)
        return result

    def absorption_by_simulation(self, kernel: Kernel, rule: JumpRule, xi0: State,
                                 n: int) -> Tuple[float, float]:
        """Mean and stderr of prod param^sinks over absorbed dual trajectories"""
        params = [float(kernel.reservoir_params[s]) for s in kernel.boundary]
        results = self.simulation.absorptions(rule, xi0, n, _streams(1, 0))
        values = np.array([np.prod([p ** c for p, c in zip(params, r.final)])
                           for r in results])
        return _mean_stderr(values)

    def simulated_profile(self, kernel: Kernel, j: Any, t: float,
                          n: int) -> Tuple[np.ndarray, np.ndarray]:
        """Boundary-driven 2j-SEP from the empty chain: per-site means and stderrs at time t"""
        rule = ExclusionRule(kernel, j, reservoirs=True)
        finals = self.simulation.map_streams(
            lambda rng, k: gillespie(rule, (0,) * kernel.size, t, rng, stream_id=k).final,
            n, _streams(0, 0))
        values = np.array(finals, dtype=float)
        return values.mean(axis=0), values.std(axis=0, ddof=1) / math.sqrt(n)

    def simulated_energy_profile(self, kernel: Kernel, m: Any, t: float, n: int,
                                 dt: float) -> Tuple[np.ndarray, np.ndarray]:
        """Boundary-driven BEP(m) from zero energies: per-site means and stderrs at time t"""
        values = simulate_bep_ensemble(kernel, m, np.zeros(kernel.size), n, t, dt,
                                       self.simulation.rng(_streams(0, 0)), reservoirs=True)
        return values.mean(axis=0), values.std(axis=0, ddof=1) / math.sqrt(n)

    def profile_cross_check(self, kernel: Kernel, profile: ProfileResult, t: float, n: int,
                            j: Any = None, m: Any = None, dt: float = 0.01) -> List[MCComparison]:
        """
        Long-run simulated means against the stationary profile, one z-test per site

        Raises:
            UnsupportedModel: for models without a boundary-driven simulator
        """
        if profile.model == "sep2j":
            means, stderr = self.simulated_profile(kernel, j, t, n)
        elif profile.model == "bep":
            means, stderr = self.simulated_energy_profile(kernel, m, t, n, dt)
        else:
            raise UnsupportedModel(f"no boundary-driven simulator for {profile.model!r}")
        comparisons = []
        for site, estimate, se, exact in zip(profile.sites, means, stderr, profile.means):
            exact = float(exact)
            z = _z_score(float(estimate), exact, float(se), 0.0)
            comparisons.append(MCComparison(
                label=f"long-run mean at {site} (t={t:g})", lhs=float(estimate), rhs=exact,
                lhs_stderr=float(se), rhs_stderr=0.0, n_lhs=n, n_rhs=0, z_score=z,
                threshold=self.sigma, passed=z <= self.sigma, exact_rhs=exact))
        logger.info("Profile cross-check of %s: largest z %.2f", profile.model,
                    max(c.z_score for c in comparisons))
        return comparisons

    def simulated_flow_gap(self, kernel: Kernel, m: Any, z0: Sequence[float], t: float,
                           n: int, dt: float) -> Tuple[float, float]:
        """
        BEP(m) at time t/m, step dt/m under the dt gate, against the rate-2 flow at t

        Returns:
            (largest |mean z_i - x_i(t)|, largest z-score over sites)
        """
        m = check_m(m)
        target = _linear_flow(kernel, z0, t, rate=2.0)
        # gated on the site furthest from the flat profile
        site = int(np.argmax(np.abs(np.asarray(z0, dtype=float) - np.mean(z0))))

        def simulate(step: float, attempt: int) -> np.ndarray:
            return simulate_bep_ensemble(kernel, m, z0, n, t / m, step,
                                         self.simulation.rng(_streams(0, attempt)))

        finals, step = self._halve_dt(simulate, dt / m,
                                      lambda z: float(z[site] - target[site]))
        values = np.asarray(finals, dtype=float)
        means = values.mean(axis=0)
        stderr = values.std(axis=0, ddof=1) / math.sqrt(n)
        gaps = np.abs(means - target)
        z = max(_z_score(float(means[k]), float(target[k]), float(stderr[k]), 0.0)
                for k in range(kernel.size))
        logger.debug("m=%d: simulated gap %.3e at dt=%.3g, z=%.2f", m, gaps.max(), step, z)
        return float(gaps.max()), z

    def thermalization_law_check(self, m: Any, total: int = 3, energy: float = 1.0,
                                 samples: int = 2000, mixing_time: float = 20.0
                                 ) -> ThermalizationReport:
        """
        Continuous: (eps/E + 1)/2 ~ Beta(m/2, m/2) by Kolmogorov-Smirnov.
        Discrete: pair-chain occupations after mixing_time against the
        beta-binomial law by chi-square, plus exact stationarity of that law
        and the residual of the alternative recursion.
        """
        m = check_m(m)
        law = discrete_redistribution_law(total, m)
        L = pair_generator(total, m)
        beta = scipy.stats.beta(m / 2, m / 2)

        def continuous(count: int, attempt: int) -> GoodnessOfFit:
            rng = self.simulation.rng(_streams(0, attempt))
            kept = continuous_redistribution(energy, m, rng, size=count)
            epsilon = kept - (energy - kept)
            statistic, p_value = scipy.stats.kstest((epsilon / energy + 1) / 2, beta.cdf)
            return GoodnessOfFit(test="ks", statistic=float(statistic), p_value=float(p_value),
                                 samples=count, passed=p_value >= self.significance)

        pair = build_kernel({"sites": ["1", "2"], "edges": [["1", "2", Rational(1, 4)]]})
        chain = JumpProcess(InclusionRule(pair, m))

        def discrete(count: int, attempt: int) -> GoodnessOfFit:
            finals = self.simulation.map_streams(
                lambda rng, k: chain.simulate((total, 0), mixing_time, rng, k),
                count, _streams(1, attempt))
            observed = np.bincount([f[0] for f in finals], minlength=total + 1)
            expected = np.array([float(law[k]) for k in range(total + 1)]) * count
            statistic, p_value = scipy.stats.chisquare(observed, expected)
            return GoodnessOfFit(test="chi-square", statistic=float(statistic),
                                 p_value=float(p_value), samples=count,
                                 passed=p_value >= self.significance)

        results = []
        for test in (continuous, discrete):
            outcome = test(samples, 0)
            if not outcome.passed:
                logger.warning("%s test failed (p=%.4f, n=%d), rerunning", outcome.test,
                               outcome.p_value, samples)
                outcome = test(samples * config.RERUN_SAMPLE_FACTOR, 1)
                logger.warning("%s rerun p=%.4f with n=%d, %s", outcome.test, outcome.p_value,
                               outcome.samples, "pass" if outcome.passed else "fail")
            results.append(outcome)
        return ThermalizationReport(
            m=m, continuous=results[0], discrete=results[1],
            stationarity_residual=stationarity_residual(L, law),
            printed_recursion_residual=stationarity_residual(L, printed_recursion_law(total, m)),
        )
