"""
Test duality service
"""
import pytest
from sympy import Rational, SparseMatrix, binomial

from dualbench.application.errors import (
    CommutatorNonzero, MissingReservoirParam, NotAConjugation, NotASymmetry, NotReversible,
    UnknownSink, UnsupportedModel,
)
from dualbench.application.services import polyops_service as polyops
from dualbench.application.services.duality_service import (
    DualityService, beta_pair_moment, boundary_duality_function, conjugacy_pair_check,
    detailed_balance_witness, duality_from_symmetry, product_duality_function, product_measure,
    q_from_reversible_measure, symmetry_from_duality, symmetry_triple, thermalize_polynomial,
    thermalized_duality_records, time_reversed_generator, verify_duality, verify_selfduality,
)
from dualbench.application.services.lattice_service import chain_kernel
from dualbench.application.services.model_service import (
    bmp_operator, boundary_bep_operator, boundary_sep2j_generator, dual_absorbing_sep2j_generator,
    dual_absorbing_sip_generator, irw_generator, sep2j_generator, sip_generator,
)
from dualbench.infra.models import ConjugationQ, DualityFunction


def test_reversible_measure_gives_conjugation(chain3):
    L = sep2j_generator(chain3, 1)
    Q = q_from_reversible_measure(L, product_measure("sep2j", j=1))

    index = L.space.index_of((2, 1, 0))
    assert Q.diagonal[index] == binomial(2, 2) * binomial(2, 1)
    assert Q.matrix() * L.matrix() == L.matrix().T * Q.matrix()


def test_non_reversible_measure(two_site_kernel):
    """Independent walkers are not reversible for the uniform measure"""
    L = irw_generator(two_site_kernel, sector=2)

    assert detailed_balance_witness(L, lambda s: 1) is not None
    with pytest.raises(NotReversible):
        q_from_reversible_measure(L, lambda s: 1)


def test_time_reversal_of_reversible_chain(chain3):
    """A reversible chain is its own time reversal"""
    L = sip_generator(chain3, 1, sector=2)
    reversed_ = time_reversed_generator(L, product_measure("sip", m=1))

    assert reversed_.matrix() == L.matrix()


@pytest.mark.parametrize("kind,kwargs,totals", [
    ("sep2j", {"j": Rational(1, 2)}, None),
    ("sep2j", {"j": 1}, None),
    ("sep2j", {"j": Rational(3, 2)}, range(5)),
    ("sip", {"m": 1}, range(7)),
    ("sip", {"m": 3}, range(3)),
    ("irw", {}, range(3)),
])
def test_closed_form_self_duality(chain3, kind, kwargs, totals):
    build = {"sep2j": lambda: sep2j_generator(chain3, kwargs["j"], totals=totals),
             "sip": lambda: sip_generator(chain3, kwargs.get("m"), totals=totals),
             "irw": lambda: irw_generator(chain3, totals=totals)}[kind]
    L = build()

    record = verify_selfduality(L, product_duality_function(kind, **kwargs))
    assert record.passed
    assert record.residual == 0
    assert record.witness is None


@pytest.mark.parametrize("kind,kwargs", [
    ("sep2j", {"j": 1}),
    ("sip", {"m": 1}),
    ("irw", {}),
])
def test_symmetry_reproduces_closed_form(two_site_kernel, kind, kwargs):
    """Q^-1 e^{raising} equals the site-factorized duality function"""
    if kind == "sep2j":
        L = sep2j_generator(two_site_kernel, kwargs["j"])
    elif kind == "sip":
        L = sip_generator(two_site_kernel, kwargs["m"], totals=range(4))
    else:
        L = irw_generator(two_site_kernel, totals=range(4))
    triple = symmetry_triple(kind, L, **kwargs)

    D = duality_from_symmetry(L, triple.S, triple.Q, side="transpose")
    closed = product_duality_function(kind, **kwargs)

    assert D.values == closed.matrix(L.space, L.space)
    assert verify_selfduality(L, D).passed
    assert symmetry_from_duality(L, closed, triple.Q, side="transpose") == triple.S


def test_generator_side_symmetry(two_site_kernel):
    """S^T commutes with L and yields the transposed duality function"""
    L = sep2j_generator(two_site_kernel, 1)
    triple = symmetry_triple("sep2j", L, j=1)

    D = duality_from_symmetry(L, triple.S.T, triple.Q, side="generator")
    assert verify_selfduality(L, D).passed


def test_not_a_symmetry(two_site_kernel):
    L = sep2j_generator(two_site_kernel, 1)
    triple = symmetry_triple("sep2j", L, j=1)
    S = SparseMatrix(L.size, L.size, {(k, k): k + 1 for k in range(L.size)})

    with pytest.raises(NotASymmetry):
        duality_from_symmetry(L, S, triple.Q, side="transpose")


def test_not_a_conjugation(two_site_kernel):
    L = sep2j_generator(two_site_kernel, 1)
    Q = ConjugationQ(space=L.space, diagonal=(1,) * L.size)

    with pytest.raises(NotAConjugation):
        duality_from_symmetry(L, SparseMatrix.eye(L.size), Q, side="transpose")


def test_commutator_nonzero(two_site_kernel):
    L = sep2j_generator(two_site_kernel, 1)
    triple = symmetry_triple("sep2j", L, j=1)
    identity = DualityFunction(factor=lambda k, a, b: 1 if a == b else 0)

    with pytest.raises(CommutatorNonzero):
        symmetry_from_duality(L, identity, triple.Q, side="transpose")


def test_conjugacy_pair(two_site_kernel):
    """A = L^T, B = L, C = Q, C~ = Q^-1 for reversible independent walkers"""
    L = irw_generator(two_site_kernel, totals=range(4))
    triple = symmetry_triple("irw", L)
    M = L.matrix()
    Q = triple.Q.matrix()

    records = conjugacy_pair_check(M.T, M, Q, triple.Q.inverse(), Q=Q, S=triple.S,
                                   D=SparseMatrix.eye(L.size))

    assert [r.identity for r in records] == [
        "AC=CB", "C~A=BC~", "D=SCQ^-1 duality", "S=DQC~ symmetry"]
    assert all(r.passed for r in records)


def test_unknown_closed_form():
    with pytest.raises(UnsupportedModel):
        product_duality_function("kmp")


def test_boundary_sep_duality_values(two_site_boundary):
    D = boundary_duality_function(two_site_boundary, "sep2j", j=Rational(1, 2))

    assert D.evaluate((1, 0), (1, 0, 0, 0)) == 1
    assert D.evaluate((0, 1), (0, 0, 1, 1)) == Rational(1, 5) * Rational(4, 5)
    assert D.evaluate((1, 0), (0, 1, 0, 0)) == 0
    with pytest.raises(UnknownSink):
        D.evaluate((1, 0), (1, 0))


def test_boundary_duality_needs_parameters(chain3):
    with pytest.raises(MissingReservoirParam):
        boundary_duality_function(chain3, "sep2j", j=1)


@pytest.mark.parametrize("j", [Rational(1, 2), 1])
def test_boundary_sep_duality(j):
    kernel = chain_kernel(3, boundary={1: Rational(1, 3), 3: Rational(1, 2)})
    L = boundary_sep2j_generator(kernel, j)
    L_dual = dual_absorbing_sep2j_generator(kernel, j, totals=range(3))

    record = verify_duality(L, L_dual, boundary_duality_function(kernel, "sep2j", j=j))
    assert record.passed


def test_boundary_bep_duality(kmp_boundary_chain):
    """Boundary-driven BEP is dual to absorbing SIP with absorption rate 2"""
    op = boundary_bep_operator(kmp_boundary_chain, 2)
    L_dual = dual_absorbing_sip_generator(kmp_boundary_chain, 2, totals=range(3))
    family = boundary_duality_function(kmp_boundary_chain, "bep", m=2, variables=op.variables)

    assert verify_duality(op, L_dual, family).passed


def test_boundary_bep_detects_wrong_temperatures(kmp_boundary_chain):
    op = boundary_bep_operator(kmp_boundary_chain, 2)
    other = chain_kernel(4, boundary={1: 1, 4: 3})
    L_dual = dual_absorbing_sip_generator(kmp_boundary_chain, 2, totals=range(2))
    family = boundary_duality_function(other, "bep", m=2, variables=op.variables)

    record = verify_duality(op, L_dual, family)
    assert not record.passed
    assert record.witness is not None


def test_beta_pair_moment():
    """E[B (1-B)] = 1/6 for the uniform law"""
    assert beta_pair_moment(2, 1, 1) == Rational(1, 6)
    assert beta_pair_moment(2, 0, 0) == 1


def test_thermalize_linear_polynomial(two_site_kernel):
    e1, e2 = polyops.site_symbols("e", two_site_kernel.sites)
    p = polyops.poly(e1, (e1, e2))

    assert thermalize_polynomial(p, e1, e2, 2) == polyops.poly((e1 + e2) / 2, (e1, e2))


@pytest.mark.parametrize("m", [1, 2, 3])
def test_thermalized_duality(chain3, m):
    records = thermalized_duality_records(chain3, m, 3)

    assert len(records) == 2
    assert all(r.passed for r in records)


@pytest.mark.parametrize("m", [1, 2, 3])
@pytest.mark.parametrize("n_sites", [2, 3])
def test_bep_dual_to_sip(m, n_sites):
    """BEP(m) and SIP(m) with D(z, xi) = prod z^xi / (2^xi (m/2)_xi), up to three particles"""
    service = DualityService(chain_kernel(n_sites))

    record = service.duality_record("bep", range(4), m=m)
    assert record.passed
    assert record.identity == "BEP vs SIP"


@pytest.mark.parametrize("n_sites", [2, 3])
def test_bmp_dual_to_sip_one(n_sites):
    """One-level BMP and SIP(1) with D(x, xi) = prod x^(2 xi) / (2 xi - 1)!!"""
    kernel = chain_kernel(n_sites)
    family = polyops.PolyopsService.for_sites("x", kernel.sites).family("bmp")
    L_dual = sip_generator(kernel, 1, totals=range(4))

    assert verify_duality(bmp_operator(kernel), L_dual, family).passed
    assert DualityService(kernel).duality_record("bmp", range(4)).passed


def test_bmp_is_not_dual_to_sip_two(two_site_kernel):
    family = polyops.PolyopsService.for_sites("x", two_site_kernel.sites).family("bmp")
    L_dual = sip_generator(two_site_kernel, 2, totals=range(3))

    record = verify_duality(bmp_operator(two_site_kernel), L_dual, family)
    assert not record.passed


def test_hermite_dual_to_walkers(chain3):
    assert DualityService(chain3).duality_record("hermite", range(4)).passed


@pytest.mark.parametrize("j", [Rational(1, 2), 1])
def test_boundary_sep_duality_up_to_three_dual_particles(j):
    kernel = chain_kernel(3, boundary={1: Rational(1, 3), 3: Rational(1, 2)})

    record = DualityService(kernel).duality_record("boundary_sep2j", range(4), j=j)
    assert record.passed
    assert record.identity == "boundary 2j-SEP vs absorbing dual"


@pytest.mark.parametrize("m", [1, 2])
def test_boundary_bep_duality_up_to_three_dual_particles(kmp_boundary_chain, m):
    record = DualityService(kmp_boundary_chain).duality_record("boundary_bep", range(4), m=m)

    assert record.passed
    assert record.identity == "boundary BEP vs absorbing SIP"


@pytest.mark.parametrize("kind,kwargs", [
    ("sep2j", {"j": 1}),
    ("sip", {"m": 2}),
    ("irw", {}),
])
def test_self_duality_records(two_site_kernel, kind, kwargs):
    service = DualityService(two_site_kernel)
    generator = service.models.generator(kind, totals=range(4), **kwargs)

    records = service.self_duality_records(kind, generator, **kwargs)
    identities = [r.identity for r in records]
    assert identities[:3] == [f"{kind} LD = DL^T", f"{kind} D = Q^-1 e^(raising)",
                              f"{kind} S = QD commutes with L^T"]
    assert f"{kind} conjugacy D=SCQ^-1 duality" in identities
    assert all(r.passed for r in records)


def test_duality_function_by_kind(sep_boundary_chain):
    service = DualityService(sep_boundary_chain)

    assert service.duality_function("sep").evaluate((1, 0, 0, 0, 0), (1, 0, 0, 0, 0)) == 1
    assert service.duality_function("boundary_sep2j", j=Rational(1, 2)).name == "boundary_sep2j"
    assert service.duality_function("bep", m=2).name == "bep"
    with pytest.raises(UnsupportedModel):
        service.duality_function("kmp")


def test_dual_generator_of_bmp_is_sip_one(two_site_kernel):
    dual = DualityService(two_site_kernel).dual_generator("bmp", range(3))

    assert dual.matrix() == sip_generator(two_site_kernel, 1, totals=range(3)).matrix()
    with pytest.raises(UnsupportedModel):
        DualityService(two_site_kernel).dual_generator("kmp", range(3))
