"""
Test simulation service
"""
import math

import numpy as np
import pytest
from sympy import Rational

from dualbench.application.errors import (
    InvalidDt, LambdaOutOfRange, MaxEventsExceeded, MissingReservoirParam, NegativeEnergy,
    NotAbsorbable, RateOverflow,
)
from dualbench.application.services.lattice_service import build_kernel
from dualbench.application.services.model_service import (
    ExclusionRule, InclusionRule, IndependentRule, dual_kmp_thermal_spec, kmp_thermal_spec,
)
from dualbench.application.services.simulation_service import (
    BinomialProduct, ChiSquaredProduct, PoissonProduct, SIPProduct, SimulationService,
    gillespie, lift_energies, project_energies, rotate_momenta, run_absorbing_dual,
    sample_stationary, simulate_bep, simulate_bep_ensemble, simulate_bmp, simulate_thermalization,
    sip_marginal, sip_partition,
)
from dualbench.application.services.verification_service import stationary_profile
from dualbench.config import config


def test_zero_time_returns_initial_state(two_site_kernel, rng_factory):
    result = gillespie(IndependentRule(two_site_kernel), (2, 1), 0.0, rng_factory())

    assert result.final == (2, 1)
    assert result.events == 0


def test_same_stream_same_trajectory(chain3, rng_factory):
    rule = ExclusionRule(chain3, 1)

    first = gillespie(rule, (2, 1, 0), 2.0, rng_factory(7))
    second = gillespie(rule, (2, 1, 0), 2.0, rng_factory(7))

    assert first == second


def test_particle_number_is_conserved(chain5, rng_factory):
    rule = InclusionRule(chain5, 1)

    result = gillespie(rule, (3, 0, 0, 0, 1), 1.0, rng_factory())
    assert sum(result.final) == 4


def test_single_walker_occupation(two_site_kernel, simulation):
    """P(walker still on site 1 at t) = (1 + e^{-2t}) / 2"""
    t, n = 0.5, 4000
    runs = simulation.trajectories(IndependentRule(two_site_kernel), (1, 0), t, n)
    values = np.array([r.final[0] for r in runs], dtype=float)

    expected = (1 + math.exp(-2 * t)) / 2
    stderr = values.std(ddof=1) / math.sqrt(n)
    assert abs(values.mean() - expected) < 4 * stderr


def test_rate_overflow(two_site_kernel, rng_factory, monkeypatch):
    monkeypatch.setattr(config, "RATE_BOUND", 0.5)

    with pytest.raises(RateOverflow):
        gillespie(IndependentRule(two_site_kernel), (1, 0), 1.0, rng_factory())


def test_max_events(two_site_kernel, rng_factory):
    with pytest.raises(MaxEventsExceeded):
        gillespie(InclusionRule(two_site_kernel, 1), (3, 3), 100.0, rng_factory(), max_events=5)


def test_absorbing_dual_ends_in_sinks(sep_boundary_chain, simulation):
    rule = ExclusionRule(sep_boundary_chain, Rational(1, 2), sinks=True)

    runs = simulation.absorptions(rule, (0, 1, 1, 0, 0, 0, 0), 20)
    for run in runs:
        assert sum(run.final) == 2
        assert len(run.final) == 2


def test_already_absorbed(sep_boundary_chain, rng_factory):
    rule = ExclusionRule(sep_boundary_chain, Rational(1, 2), sinks=True)

    result = run_absorbing_dual(rule, (0, 0, 0, 0, 0, 1, 2), rng_factory())
    assert result.final == (1, 2)
    assert result.events == 0


def test_not_absorbable(rng_factory):
    kernel = build_kernel({"sites": ["1", "2", "3"], "edges": [["1", "2"]],
                           "boundary": {"1": Rational(1, 2)}})
    rule = ExclusionRule(kernel, Rational(1, 2), sinks=True)

    with pytest.raises(NotAbsorbable):
        run_absorbing_dual(rule, (0, 0, 1, 0), rng_factory())


def test_bmp_conserves_energy(chain3, rng_factory):
    x0 = [1.0, -0.5, 2.0, 0.0, 0.3, 0.7]
    result = simulate_bmp(chain3, 2, x0, 1.0, 0.05, rng_factory())

    assert np.sum(result.final ** 2) == pytest.approx(np.sum(np.square(x0)))


def test_bmp_without_bonds_is_constant(rng_factory):
    kernel = build_kernel({"sites": ["1", "2"]})

    result = simulate_bmp(kernel, 1, [1.0, 2.0], 1.0, 0.1, rng_factory())
    assert result.final.tolist() == [1.0, 2.0]


def test_invalid_dt(two_site_kernel, rng_factory):
    with pytest.raises(InvalidDt):
        simulate_bmp(two_site_kernel, 1, [1.0, 0.0], 1.0, 0.0, rng_factory())


def test_lift_and_project(rng_factory):
    x = lift_energies([2.0, 0.0, 5.0], 3, rng_factory())

    assert project_energies(x, 3) == pytest.approx([2.0, 0.0, 5.0])
    with pytest.raises(NegativeEnergy):
        lift_energies([-1.0], 2, rng_factory())


def test_bep_conserves_total(chain3, rng_factory):
    result = simulate_bep(chain3, 2, [3.0, 0.0, 1.0], 0.5, 0.05, rng_factory())

    assert result.final.sum() == pytest.approx(4.0)
    assert np.all(result.final >= 0)


def test_continuous_thermalization(chain3, rng_factory):
    spec = kmp_thermal_spec(chain3, 2)

    result = simulate_thermalization(spec, [3.0, 0.0, 1.0], 5.0, rng_factory())
    assert result.final.sum() == pytest.approx(4.0)
    assert result.events > 0


def test_discrete_thermalization(chain3, rng_factory):
    spec = dual_kmp_thermal_spec(chain3, 4)

    result = simulate_thermalization(spec, [3, 0, 1], 5.0, rng_factory())
    assert result.final.dtype.kind == "i"
    assert int(result.final.sum()) == 4


def test_sip_partition_function():
    assert float(sip_partition(Rational(3, 8))) == pytest.approx(2.0)


def test_sip_marginal():
    masses = sip_marginal(Rational(1, 4))

    assert masses[1] == pytest.approx(0.25 * math.sqrt(0.5))
    assert masses.sum() == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("lam", [0, Rational(1, 2), Rational(3, 4)])
def test_lambda_out_of_range(lam):
    with pytest.raises(LambdaOutOfRange):
        sip_partition(lam)


def test_sample_stationary_means(rng_factory):
    rng = rng_factory()
    n = 20000

    binomial = sample_stationary(BinomialProduct(two_j=2, rho=Rational(1, 4)), 3, rng, size=n)
    poisson = sample_stationary(PoissonProduct(lam=Rational(3, 2)), 3, rng, size=n)
    sip = sample_stationary(SIPProduct(lam=Rational(1, 4), m=2), 3, rng, size=n)
    chi = sample_stationary(ChiSquaredProduct(m=3, sigma=2.0), 3, rng, size=n)

    assert binomial.shape == (n, 3)
    assert binomial.mean() == pytest.approx(0.5, abs=0.02)
    assert poisson.mean() == pytest.approx(1.5, abs=0.03)
    # SIP(m) marginal mean: m lam / (1 - 2 lam)
    assert sip.mean() == pytest.approx(1.0, abs=0.04)
    assert chi.mean() == pytest.approx(12.0, abs=0.3)


def test_map_streams_independent_of_threads():
    task = lambda rng, k: (k, rng.random())

    single = SimulationService(seed=5, threads=1).map_streams(task, 16)
    pooled = SimulationService(seed=5, threads=4).map_streams(task, 16)

    assert single == pooled
    assert [k for k, _ in single] == list(range(16))


def test_distinct_streams_differ():
    service = SimulationService(seed=5)

    assert service.rng(0).random() != service.rng(1).random()


def test_reservoir_site_equilibrates_at_its_temperature(rng_factory):
    """A lone boundary coordinate is an Ornstein-Uhlenbeck process with variance T"""
    kernel = build_kernel({"sites": ["1"], "boundary": {"1": 2}})
    x = np.zeros((4000, 1))

    rotate_momenta(kernel, 1, x, [0.5] * 20, rng_factory(), reservoirs=True)
    assert np.mean(x[:, 0] ** 2) == pytest.approx(2.0, abs=0.2)
    assert abs(np.mean(x[:, 0])) < 0.1


def test_boundary_bmp_does_not_conserve_energy(kmp_boundary_chain, rng_factory):
    x0 = [0.0, 1.0, -1.0, 0.0]

    result = simulate_bmp(kmp_boundary_chain, 1, x0, 1.0, 0.05, rng_factory(), reservoirs=True)
    assert np.sum(result.final ** 2) != pytest.approx(2.0)


def test_boundary_bmp_needs_temperatures(rng_factory):
    kernel = build_kernel({"sites": ["1", "2"], "edges": [["1", "2"]], "boundary": ["1"]})

    with pytest.raises(MissingReservoirParam):
        simulate_bmp(kernel, 1, [1.0, 0.0], 1.0, 0.1, rng_factory(), reservoirs=True)


def test_boundary_bep_ensemble_reaches_profile(kmp_boundary_chain, rng_factory):
    """Long-run mean energies match the exact stationary profile m T_i interpolation"""
    values = simulate_bep_ensemble(kmp_boundary_chain, 2, np.zeros(4), 2000, 20.0, 0.01,
                                   rng_factory(3), reservoirs=True)
    exact = stationary_profile(kmp_boundary_chain, "bep", m=2).means

    assert values.shape == (2000, 4)
    assert np.all(values >= 0)
    stderr = values.std(axis=0, ddof=1) / math.sqrt(len(values))
    for k in range(4):
        assert abs(values[:, k].mean() - float(exact[k])) < 4 * stderr[k]


def test_bep_ensemble_conserves_each_total(chain3, rng_factory):
    values = simulate_bep_ensemble(chain3, 3, [3.0, 0.0, 1.0], 50, 0.5, 0.05, rng_factory())

    assert values.sum(axis=1) == pytest.approx(np.full(50, 4.0))


def test_single_bep_trajectory_with_reservoirs(kmp_boundary_chain, rng_factory):
    result = simulate_bep(kmp_boundary_chain, 2, [1.0, 1.0, 1.0, 1.0], 0.5, 0.05,
                          rng_factory(), reservoirs=True)

    assert result.final.shape == (4,)
    assert result.events == 10 * (12 + 4)
