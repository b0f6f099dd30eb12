"""
Test model service
"""
import math

import numpy as np
import pytest
from sympy import Rational

from dualbench.application.errors import (
    EmptySector, InvalidM, MissingReservoirParam, MissingSinks, UnsupportedModel,
)
from dualbench.application.services import polyops_service as polyops
from dualbench.application.services.lattice_service import build_kernel
from dualbench.application.services.model_service import (
    ExclusionRule, InclusionRule, IndependentRule, ModelService, bep_operator,
    boundary_sep2j_generator, build_generator, continuous_redistribution, deterministic_flow, deterministic_operator,
    discrete_redistribution_law, dual_absorbing_sep2j_generator, dual_absorbing_sip_generator,
    irw_generator, kmp_thermal_spec, pair_generator, printed_recursion_law, sep2j_generator,
    sip_generator,
)


def test_sep2j_rates(two_site_kernel):
    """Hop rate eta_i (2j - eta_l) for j = 1"""
    L = sep2j_generator(two_site_kernel, 1, sector=2)

    assert L.states == ((0, 2), (1, 1), (2, 0))
    assert L.rate((2, 0), (1, 1)) == 4
    assert L.rate((1, 1), (2, 0)) == 1
    assert L.rate((1, 1), (0, 2)) == 1
    assert L.conserved == 2


def test_sip_rates(two_site_kernel):
    """SIP(1) from (1, 1): each direction at rate 2 * 1 * (2 + 1)"""
    L = sip_generator(two_site_kernel, 1, sector=2)

    assert L.rate((1, 1), (2, 0)) == 6
    assert L.rate((1, 1), (0, 2)) == 6
    assert L.rate((2, 0), (1, 1)) == 2 * 2 * (0 + 1)


def test_irw_rate_scale(two_site_kernel):
    L = irw_generator(two_site_kernel, sector=2, rate_scale=2)

    assert L.rate((2, 0), (1, 1)) == 4


def test_rows_sum_to_zero(chain3):
    M = sep2j_generator(chain3, Rational(3, 2)).matrix()

    for row in range(M.rows):
        assert sum(M.row(row)) == 0


def test_unbounded_model_needs_sector(chain3):
    with pytest.raises(EmptySector):
        sip_generator(chain3, 1)


def test_empty_sector(two_site_kernel):
    """Three particles do not fit on two exclusion sites"""
    with pytest.raises(EmptySector):
        sep2j_generator(two_site_kernel, Rational(1, 2), sector=3)


def test_invalid_m(two_site_kernel):
    with pytest.raises(InvalidM):
        sip_generator(two_site_kernel, 0, sector=1)


def test_boundary_sep_reservoir_rates(two_site_boundary):
    """Creation at rho (2j - eta), annihilation at (1 - rho) eta"""
    L = boundary_sep2j_generator(two_site_boundary, 1)

    assert L.conserved is None
    assert L.rate((0, 0), (1, 0)) == Rational(1, 5) * 2
    assert L.rate((1, 0), (0, 0)) == Rational(4, 5)
    assert L.rate((2, 2), (2, 1)) == Rational(1, 5) * 2


def test_reservoirs_need_parameters(chain3):
    kernel = build_kernel({"sites": ["1", "2", "3"], "edges": [["1", "2"], ["2", "3"]],
                           "boundary": ["1", "3"]})

    with pytest.raises(MissingReservoirParam):
        ExclusionRule(kernel, 1, reservoirs=True)
    with pytest.raises(MissingReservoirParam):
        ExclusionRule(chain3, 1, reservoirs=True)


def test_inclusion_has_no_reservoirs(two_site_boundary):
    with pytest.raises(UnsupportedModel):
        InclusionRule(two_site_boundary, 1, reservoirs=True)


def test_sinks_need_boundary(chain3):
    with pytest.raises(MissingSinks):
        dual_absorbing_sep2j_generator(chain3, 1, sector=1)


def test_absorbing_dual_rates(sep_boundary_chain):
    """Particles at boundary sites fall into their sink"""
    L = dual_absorbing_sep2j_generator(sep_boundary_chain, Rational(1, 2), sector=1)

    assert L.locations == ("1", "2", "3", "4", "5", "1_e", "5_e")
    assert L.rate((1, 0, 0, 0, 0, 0, 0), (0, 0, 0, 0, 0, 1, 0)) == 1
    assert L.rate((0, 0, 0, 0, 1, 0, 0), (0, 0, 0, 0, 0, 0, 1)) == 1
    assert L.rate((0, 0, 1, 0, 0, 0, 0), (0, 0, 0, 0, 0, 0, 1)) == 0


def test_absorbing_sip_rate_two(kmp_boundary_chain):
    L = dual_absorbing_sip_generator(kmp_boundary_chain, 2, sector=2)

    assert L.rate((2, 0, 0, 0, 0, 0), (1, 0, 0, 0, 1, 0)) == 4
    assert L.rate((2, 0, 0, 0, 0, 0), (1, 1, 0, 0, 0, 0)) == 2 * 2 * 2


def test_independent_rule_float_transitions(two_site_kernel):
    rule = IndependentRule(two_site_kernel)

    moves = rule.float_transitions((3, 1))
    assert sorted(moves) == [((2, 2), 3.0), ((4, 0), 1.0)]


def test_discrete_redistribution_law_is_beta_binomial():
    law = discrete_redistribution_law(2, 4)

    assert law == {0: Rational(3, 10), 1: Rational(2, 5), 2: Rational(3, 10)}
    assert sum(law.values()) == 1


def test_uniform_law_for_m_two():
    law = discrete_redistribution_law(4, 2)

    assert set(law.values()) == {Rational(1, 5)}


def test_printed_recursion_law_is_asymmetric():
    """The printed recursion breaks the k <-> N - k symmetry of the pair chain"""
    law = printed_recursion_law(2, 4)

    assert law == {0: Rational(64, 179), 1: Rational(80, 179), 2: Rational(35, 179)}
    assert law[0] != law[2]


def test_pair_generator_rates():
    """(N, D) -> (N, D - 2) at rate (N + D)(N - D + m)/4"""
    L = pair_generator(2, 4)

    assert L.rate((2, 0), (1, 1)) == Rational((2 + 2) * (2 - 2 + 4), 4)
    assert L.rate((1, 1), (0, 2)) == Rational((2 + 0) * (2 - 0 + 4), 4)


def test_deterministic_flow():
    assert deterministic_flow((2, 0), 0) == (2.0, 0.0)
    first, second = deterministic_flow((2, 0), 0.5)
    assert first == pytest.approx(1 + math.exp(-1))
    assert second == pytest.approx(1 - math.exp(-1))


def test_bep_operator_on_linear_polynomial(two_site_kernel):
    """BEP drift on z_1 is -2m (z_1 - z_2)"""
    op = bep_operator(two_site_kernel, 2)
    z1, z2 = op.variables

    image = polyops.apply_diff_operator(op, polyops.poly(z1, op.variables))
    assert image == polyops.poly(-4 * z1 + 4 * z2, op.variables)


def test_deterministic_operator_rate(two_site_kernel):
    op = deterministic_operator(two_site_kernel, rate=2)
    x1, x2 = op.variables

    image = polyops.apply_diff_operator(op, polyops.poly(x1, op.variables))
    assert image == polyops.poly(-2 * (x1 - x2), op.variables)


def test_continuous_redistribution_bounds(rng_factory):
    shares = continuous_redistribution(3.0, 2, rng_factory(0), size=500)

    assert np.all(shares >= 0)
    assert np.all(shares <= 3.0)
    assert shares.mean() == pytest.approx(1.5, abs=0.2)


def test_build_generator_full_space_with_reservoirs(two_site_boundary):
    rule = ExclusionRule(two_site_boundary, Rational(1, 2), reservoirs=True)
    L = build_generator(rule)

    assert L.size == 4


@pytest.mark.parametrize("kind,kwargs,name,cap", [
    ("sep", {}, "sep2j", 1),
    ("sep2j", {"j": Rational(3, 2)}, "sep2j", 3),
    ("sip", {"m": 2}, "sip", None),
    ("irw", {}, "irw", None),
])
def test_model_service_rules(chain3, kind, kwargs, name, cap):
    rule = ModelService(chain3).rule(kind, **kwargs)

    assert rule.name == name
    assert rule.site_cap == cap
    assert rule.conserves


def test_model_service_boundary_rules(kmp_boundary_chain):
    models = ModelService(kmp_boundary_chain)
    dual = models.rule("dual_absorbing_sip", m=2)

    assert dual.sinks
    assert dual.locations[-2:] == kmp_boundary_chain.sink_ids
    assert dual.transitions((1, 0, 0, 0, 0, 0)) == [((0, 1, 0, 0, 0, 0), 4),
                                                    ((0, 0, 0, 0, 1, 0), 2)]
    with pytest.raises(UnsupportedModel):
        models.rule("bep", m=2)


def test_model_service_generator_matches_builders(chain3):
    models = ModelService(chain3)

    assert models.generator("sip", m=1, sector=2).matrix() == sip_generator(chain3, 1, 2).matrix()
    assert models.generator("sep").matrix() == sep2j_generator(chain3, Rational(1, 2)).matrix()
    assert models.generator("ladder_sep", levels=2, sector=1).size == 6
    with pytest.raises(UnsupportedModel):
        models.generator("kmp")


def test_model_service_operators(kmp_boundary_chain):
    models = ModelService(kmp_boundary_chain)
    z = polyops.site_symbols("z", kmp_boundary_chain.sites)

    boundary = models.operator("boundary_bep", m=2)
    bulk = models.operator("bep", m=2)
    image = polyops.apply_diff_operator(boundary, polyops.poly(z[0], z))
    assert (image - polyops.poly(4 * (z[1] - z[0]) + 4 - 2 * z[0], z)).is_zero
    assert polyops.apply_diff_operator(bulk, polyops.poly(z[0] + z[1] + z[2] + z[3], z)).is_zero
    assert len(models.operator("bmp", levels=2).variables) == 8
    with pytest.raises(UnsupportedModel):
        models.operator("sip")


def test_model_service_thermal_spec(chain3):
    models = ModelService(chain3)

    assert models.thermal_spec("kmp", 2) == kmp_thermal_spec(chain3, 2)
    with pytest.raises(UnsupportedModel):
        models.thermal_spec("bep", 2)
