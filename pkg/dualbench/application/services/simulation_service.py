"""
Simulation service
Gillespie trajectories, rotation-splitting diffusions, thermalization chains,
absorbing duals and stationary-measure samplers
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Callable, List, Optional, Sequence, Tuple, TypeVar, Union

import mpmath
import numpy as np
from sympy import Rational

from dualbench.application.errors import (
    CheckFailed, InvalidDt, LambdaOutOfRange, MaxEventsExceeded, NegativeEnergy,
    NotAbsorbable, RateOverflow, UnsupportedModel,
)
from dualbench.application.services.algebra_service import check_m
from dualbench.application.services.lattice_service import reachable_from_boundary
from dualbench.application.services.model_service import (
    JumpRule, boundary_temperatures, continuous_redistribution, discrete_redistribution_law,
)
from dualbench.config import config
from dualbench.infra.exact import to_rational
from dualbench.infra.models import Kernel, RedistributionLaw, ThermalizationSpec, TrajectoryResult
from dualbench.infra.rng import stream
from dualbench.infra.state_space import State

logger = logging.getLogger(__name__)

T = TypeVar("T")


# Jump processes

def _jump(rule: JumpRule, state: State, rng: np.random.Generator
          ) -> Tuple[Optional[State], float]:
    """
    One Gillespie step

    Returns:
        (next state, holding time), or (None, inf) when no move is enabled
    """
    moves = rule.float_transitions(state)
    if not moves:
        return None, math.inf
    rates = np.fromiter((rate for _, rate in moves), dtype=float, count=len(moves))
    total = rates.sum()
    if total > config.RATE_BOUND:
        raise RateOverflow(f"total rate {total:.3e} exceeds {config.RATE_BOUND:.1e}",
                           witness=state)
    if total <= 0:
        return None, math.inf
    holding = rng.exponential(1.0 / total)
    pick = int(np.searchsorted(np.cumsum(rates), rng.random() * total, side="right"))
    return moves[min(pick, len(moves) - 1)][0], holding


def _check_conserved(rule: JumpRule, state: State, expected: int, events: int) -> None:
    if rule.conserves and sum(state) != expected:
        raise CheckFailed(f"particle number {sum(state)} != {expected} after {events} events",
                          witness=state)


def gillespie(rule: JumpRule, init: Sequence[int], t_end: float, rng: np.random.Generator,
              stream_id: int = 0, max_events: Optional[int] = None) -> TrajectoryResult:
    """
    Exact-in-law trajectory of a jump rule up to time t_end

    Args:
        rule: Rate-function view of the chain
        init: Initial configuration over rule.locations
        t_end: Final time
        rng: Random stream owned by this trajectory
        stream_id: Stream id recorded in the result
        max_events: Event guard (config.MAX_EVENTS by default)

    Returns:
        TrajectoryResult with the configuration at t_end

    Raises:
        RateOverflow, MaxEventsExceeded
    """
    state = tuple(int(n) for n in init)
    expected = sum(state)
    limit = max_events or config.MAX_EVENTS
    t, events = 0.0, 0
    while True:
        target, holding = _jump(rule, state, rng)
        if target is None or t + holding > t_end:
            break
        t += holding
        state = target
        events += 1
        if events % config.CONSERVATION_CHECK_EVERY == 0:
            _check_conserved(rule, state, expected, events)
        if events >= limit:
            raise MaxEventsExceeded(f"{rule.name} reached {limit} events before t={t_end}")
    _check_conserved(rule, state, expected, events)
    return TrajectoryResult(final=state, elapsed=float(t_end), events=events,
                            stream_id=stream_id)


def run_absorbing_dual(rule: JumpRule, init: Sequence[int], rng: np.random.Generator,
                       stream_id: int = 0, max_events: Optional[int] = None) -> TrajectoryResult:
    """
    Run a dual with sinks until every particle sits in a sink

    Args:
        rule: Jump rule built with sinks=True
        init: Configuration over sites then sinks

    Returns:
        TrajectoryResult whose final value is the sink occupation

    Raises:
        NotAbsorbable: a particle starts in a component without boundary sites
        MaxEventsExceeded
    """
    if not rule.sinks:
        raise UnsupportedModel(f"{rule.name} has no sinks to absorb into")
    state = tuple(int(n) for n in init)
    n = rule.kernel.size
    reachable = set(reachable_from_boundary(rule.kernel))
    stuck = [rule.kernel.sites[a] for a in range(n) if state[a] > 0 and a not in reachable]
    if stuck:
        raise NotAbsorbable(f"sites {stuck} cannot reach the boundary", witness=state)
    expected = sum(state)
    limit = max_events or config.MAX_EVENTS
    t, events = 0.0, 0
    while not rule.is_absorbed(state):
        target, holding = _jump(rule, state, rng)
        if target is None:
            raise NotAbsorbable("no move enabled before absorption", witness=state)
        t += holding
        state = target
        events += 1
        if events % config.CONSERVATION_CHECK_EVERY == 0:
            _check_conserved(rule, state, expected, events)
        if events >= limit:
            raise MaxEventsExceeded(f"absorption not reached after {limit} events",
                                    witness=state)
    return TrajectoryResult(final=state[n:], elapsed=t, events=events, stream_id=stream_id)


# Diffusions

def _steps(t_end: float, dt: float) -> List[float]:
    if dt <= 0:
        raise InvalidDt(f"dt must be positive, got {dt}")
    if t_end <= 0:
        return []
    count = int(math.ceil(t_end / dt - 1e-12))
    steps = [dt] * (count - 1)
    steps.append(t_end - dt * (count - 1))
    return steps


def rotate_momenta(kernel: Kernel, levels: int, x: np.ndarray, steps: Sequence[float],
                   rng: np.random.Generator, reservoirs: bool = False) -> int:
    """
    Advance a batch of momentum configurations in place

    Per step h, every bond (i, l) and level pair (a, b) rotates
    (x_{i,a}, x_{l,b}) by an angle ~ Normal(0, 2 p(i,l) h). With reservoirs,
    each level of a boundary site then takes the exact Ornstein-Uhlenbeck
    step x -> x e^-h + sqrt(T (1 - e^-2h)) N(0, 1).

    Args:
        x: Array of shape (batch, sites * levels), site-major
        steps: Step lengths

    Returns:
        Number of sub-steps applied per configuration
    """
    pairs = [(a * levels + alpha, b * levels + beta, float(p))
             for a, b, p in kernel.bonds for alpha in range(levels) for beta in range(levels)]
    coordinates = np.zeros(0, dtype=int)
    temperatures = np.zeros(0)
    if reservoirs:
        boundary = boundary_temperatures(kernel)
        coordinates = np.array([a * levels + alpha for a in boundary for alpha in range(levels)],
                               dtype=int)
        temperatures = np.array([float(boundary[a]) for a in boundary for _ in range(levels)])
    if not pairs and coordinates.size == 0:
        return 0
    batch = x.shape[0]
    first = [i for i, _, _ in pairs]
    second = [l for _, l, _ in pairs]
    weights = np.array([p for _, _, p in pairs])
    for h in steps:
        if pairs:
            angles = rng.standard_normal((batch, len(pairs))) * np.sqrt(2.0 * weights * h)
            cos, sin = np.cos(angles), np.sin(angles)
            # pairs share coordinates: rotations are applied in sequence
            for k in range(len(pairs)):
                i, l = first[k], second[k]
                xi, xl = x[:, i].copy(), x[:, l].copy()
                x[:, i] = cos[:, k] * xi - sin[:, k] * xl
                x[:, l] = sin[:, k] * xi + cos[:, k] * xl
        if coordinates.size:
            decay = math.exp(-h)
            noise = rng.standard_normal((batch, coordinates.size))
            x[:, coordinates] = (x[:, coordinates] * decay
                                 + noise * np.sqrt(temperatures * (1 - decay ** 2)))
    return len(steps) * (len(pairs) + coordinates.size)


def simulate_bmp(kernel: Kernel, levels: int, x0: Sequence[float], t_end: float, dt: float,
                 rng: np.random.Generator, stream_id: int = 0,
                 reservoirs: bool = False) -> TrajectoryResult:
    """
    Momentum process by Lie-Trotter splitting into exact rotations

    Args:
        x0: Site-major coordinates, levels per site
        reservoirs: Couple boundary sites to heat baths at their temperatures

    Raises:
        InvalidDt, MissingReservoirParam
    """
    steps = _steps(t_end, dt)
    x = np.array(x0, dtype=float)
    if x.shape != (kernel.size * levels,):
        raise UnsupportedModel(f"expected {kernel.size * levels} coordinates, got {x.shape}")
    batch = x[None, :]
    events = rotate_momenta(kernel, levels, batch, steps, rng, reservoirs)
    return TrajectoryResult(final=batch[0], elapsed=float(t_end), events=events,
                            stream_id=stream_id)


def lift_energies(z: Union[Sequence[float], np.ndarray], levels: int,
                  rng: np.random.Generator) -> np.ndarray:
    """
    x with sum_a x_{i,a}^2 = z_i, direction uniform on each site's sphere

    Accepts one configuration (sites,) or a batch (count, sites).
    """
    z = np.asarray(z, dtype=float)
    if np.any(z < 0):
        raise NegativeEnergy(f"energies must be nonnegative, got {z.tolist()}")
    directions = rng.standard_normal(z.shape + (levels,))
    directions /= np.linalg.norm(directions, axis=-1, keepdims=True)
    lifted = directions * np.sqrt(z)[..., None]
    return lifted.reshape(z.shape[:-1] + (-1,))


def project_energies(x: np.ndarray, levels: int) -> np.ndarray:
    x = np.asarray(x)
    return (x.reshape(x.shape[:-1] + (-1, levels)) ** 2).sum(axis=-1)


def simulate_bep(kernel: Kernel, m: Any, z0: Sequence[float], t_end: float, dt: float,
                 rng: np.random.Generator, stream_id: int = 0,
                 reservoirs: bool = False) -> TrajectoryResult:
    """Energy process through the m-level momentum lift"""
    m = check_m(m)
    x0 = lift_energies(z0, m, rng)
    result = simulate_bmp(kernel, m, x0, t_end, dt, rng, stream_id, reservoirs)
    return TrajectoryResult(final=project_energies(result.final, m), elapsed=result.elapsed,
                            events=result.events, stream_id=stream_id)


def simulate_bep_ensemble(kernel: Kernel, m: Any, z0: Sequence[float], count: int,
                          t_end: float, dt: float, rng: np.random.Generator,
                          reservoirs: bool = False) -> np.ndarray:
    """
    count energy trajectories from z0 advanced together on one stream

    Returns:
        Final energies, shape (count, sites)
    """
    m = check_m(m)
    start = np.tile(np.asarray(z0, dtype=float), (count, 1))
    if start.shape[1] != kernel.size:
        raise UnsupportedModel(f"expected {kernel.size} energies, got {start.shape[1]}")
    x = lift_energies(start, m, rng)
    rotate_momenta(kernel, m, x, _steps(t_end, dt), rng, reservoirs)
    return project_energies(x, m)


# Instantaneous thermalization

@lru_cache(maxsize=256)
def _pair_law(total: int, m: int) -> np.ndarray:
    law = discrete_redistribution_law(total, m)
    probabilities = np.array([float(law[k]) for k in range(total + 1)])
    return probabilities / probabilities.sum()


def simulate_thermalization(spec: ThermalizationSpec, init: Sequence[Union[int, float]],
                            t_end: float, rng: np.random.Generator,
                            stream_id: int = 0) -> TrajectoryResult:
    """
    Bond clocks at rate p(i,l); a ringing bond redistributes its pair

    Continuous law: e_i = E Beta(m/2, m/2). Discrete law: k particles kept
    with the beta-binomial probability of the pair chain.
    """
    bonds = spec.kernel.bonds
    discrete = spec.law is RedistributionLaw.DISCRETE
    state = np.array(init, dtype=np.int64 if discrete else float)
    if np.any(state < 0):
        raise NegativeEnergy(f"initial values must be nonnegative, got {state.tolist()}")
    if not bonds or t_end <= 0:
        return TrajectoryResult(final=state, elapsed=float(t_end), events=0, stream_id=stream_id)
    weights = np.array([float(p) for _, _, p in bonds])
    total_rate = weights.sum()
    choice = weights / total_rate
    t, events = 0.0, 0
    while True:
        t += rng.exponential(1.0 / total_rate)
        if t > t_end:
            break
        a, b, _ = bonds[int(rng.choice(len(bonds), p=choice))]
        pair = state[a] + state[b]
        if discrete:
            kept = int(rng.choice(pair + 1, p=_pair_law(int(pair), spec.m)))
        else:
            kept = float(continuous_redistribution(float(pair), spec.m, rng))
        state[a], state[b] = kept, pair - kept
        events += 1
        if events >= config.MAX_EVENTS:
            raise MaxEventsExceeded(f"thermalization reached {events} events")
    return TrajectoryResult(final=state, elapsed=float(t_end), events=events, stream_id=stream_id)


# Stationary measures

@dataclass(frozen=True)
class BinomialProduct:
    """i.i.d. Binomial(2j, rho) marginals"""
    two_j: int
    rho: Rational


@dataclass(frozen=True)
class PoissonProduct:
    """i.i.d. Poisson(lam) marginals"""
    lam: Rational


@dataclass(frozen=True)
class SIPProduct:
    """i.i.d. marginals proportional to (m/2)_k / k! (2 lam)^k, 0 < lam < 1/2"""
    lam: Rational
    m: int = 1


@dataclass(frozen=True)
class ChiSquaredProduct:
    """i.i.d. sigma^2 chi^2_m marginals, the BEP equilibria"""
    m: int
    sigma: float = 1.0


StationaryMeasure = Union[BinomialProduct, PoissonProduct, SIPProduct, ChiSquaredProduct]


def _check_lambda(lam: Rational) -> None:
    if not 0 < lam < Rational(1, 2):
        raise LambdaOutOfRange(f"lambda must lie in (0, 1/2), got {lam}")


def sip_partition(lam: Any, m: int = 1) -> mpmath.mpf:
    """Z = (1 - 2 lam)^(-m/2)"""
    lam = to_rational(lam)
    _check_lambda(lam)
    with mpmath.workdps(40):
        return (1 - 2 * mpmath.mpf(lam.p) / lam.q) ** (-mpmath.mpf(m) / 2)


def sip_marginal(lam: Any, m: int = 1, deficit: Optional[float] = None) -> np.ndarray:
    """
    Mass function prefix of one SIP site, extended until the missing mass is
    below the tail deficit; the remainder goes to the last state
    """
    lam = to_rational(lam)
    _check_lambda(lam)
    m = check_m(m)
    deficit = config.SIP_TAIL_DEFICIT if deficit is None else deficit
    with mpmath.workdps(40):
        z = sip_partition(lam, m)
        ratio = 2 * mpmath.mpf(lam.p) / lam.q
        weight = mpmath.mpf(1)
        masses = [weight / z]
        total = masses[0]
        k = 0
        while 1 - total >= deficit:
            weight *= (mpmath.mpf(m) / 2 + k) / (k + 1) * ratio
            k += 1
            masses.append(weight / z)
            total += masses[-1]
        remainder = 1 - total
        masses[-1] += remainder
        logger.debug("SIP marginal lam=%s m=%d: %d states, tail %s on k=%d",
                     lam, m, len(masses), mpmath.nstr(remainder, 5), k)
        return np.array([float(p) for p in masses])


def sample_stationary(measure: StationaryMeasure, n_sites: int, rng: np.random.Generator,
                      size: Optional[int] = None) -> np.ndarray:
    """
    Draw configurations from a product stationary measure

    Args:
        measure: One of the product measure descriptions
        n_sites: Number of sites
        rng: Random stream
        size: Number of configurations; one configuration when None

    Returns:
        Array of shape (n_sites,) or (size, n_sites)
    """
    shape = (n_sites,) if size is None else (size, n_sites)
    if isinstance(measure, BinomialProduct):
        return rng.binomial(measure.two_j, float(measure.rho), size=shape)
    if isinstance(measure, PoissonProduct):
        return rng.poisson(float(measure.lam), size=shape)
    if isinstance(measure, SIPProduct):
        cdf = np.cumsum(sip_marginal(measure.lam, measure.m))
        draws = np.searchsorted(cdf, rng.random(shape), side="right")
        return np.minimum(draws, cdf.size - 1)
    if isinstance(measure, ChiSquaredProduct):
        return measure.sigma ** 2 * rng.chisquare(check_m(measure.m), size=shape)
    raise UnsupportedModel(f"unknown stationary measure {measure!r}")


class SimulationService:
    """Seeded trajectory fan-out over independent random streams"""

    def __init__(self, seed: int, threads: int = 1):
        self.seed = int(seed)
        self.threads = max(1, int(threads))

    def rng(self, stream_id: int) -> np.random.Generator:
        return stream(self.seed, stream_id)

    def map_streams(self, task: Callable[[np.random.Generator, int], T], count: int,
                    offset: int = 0) -> List[T]:
        """
        Run task(rng, stream_id) for stream ids offset..offset+count-1

        Returns:
            Results ordered by stream id, whatever the thread count
        """
        ids = range(offset, offset + count)
        if self.threads == 1:
            return [task(self.rng(k), k) for k in ids]
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            return list(pool.map(lambda k: task(self.rng(k), k), ids))

    def trajectories(self, rule: JumpRule, init: Sequence[int], t_end: float, count: int,
                     offset: int = 0) -> List[TrajectoryResult]:
        return self.map_streams(
            lambda rng, k: gillespie(rule, init, t_end, rng, stream_id=k), count, offset)

    def absorptions(self, rule: JumpRule, init: Sequence[int], count: int,
                    offset: int = 0) -> List[TrajectoryResult]:
        return self.map_streams(
            lambda rng, k: run_absorbing_dual(rule, init, rng, stream_id=k), count, offset)
