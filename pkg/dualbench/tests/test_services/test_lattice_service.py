"""
Test lattice service
"""
import pytest
from sympy import Rational

from dualbench.application.errors import (
    AsymmetricKernel, IndexOutOfRange, NegativeRate, SelfLoop, UnknownBoundarySite,
)
from dualbench.application.services.lattice_service import (
    LatticeService, build_kernel, chain_kernel, complete_kernel, ladder_kernel,
    ladder_projection, reachable_from_boundary, row_sums, symmetry_witness, with_reservoirs,
)
from dualbench.infra.state_space import StateSpace


def test_edges_are_symmetric():
    """An undirected edge gives the same rate in both directions"""
    kernel = build_kernel({"sites": ["a", "b"], "edges": [["a", "b", 2]]})

    assert kernel.p("a", "b") == 2
    assert kernel.p("b", "a") == 2
    assert kernel.bonds == ((0, 1, 2),)
    assert symmetry_witness(kernel) is None


def test_rational_weights():
    """Weights written as p/q strings stay exact"""
    kernel = build_kernel({"sites": [1, 2], "edges": [[1, 2, "1/4"]]})

    assert kernel.p("1", "2") == Rational(1, 4)


def test_negative_rate_rejected():
    with pytest.raises(NegativeRate):
        build_kernel({"sites": ["1", "2"], "edges": [["1", "2", -1]]})


def test_self_loop_rejected():
    with pytest.raises(SelfLoop):
        build_kernel({"sites": ["1", "2"], "edges": [["1", "1", 1]]})


def test_unknown_boundary_site():
    with pytest.raises(UnknownBoundarySite):
        build_kernel({"sites": ["1", "2"], "edges": [["1", "2"]], "boundary": ["3"]})


def test_unknown_edge_endpoint():
    with pytest.raises(IndexOutOfRange):
        build_kernel({"sites": ["1", "2"], "edges": [["1", "9"]]})


def test_asymmetric_directed_rates():
    """Directed entries must come in symmetric pairs; the witness names the pair"""
    with pytest.raises(AsymmetricKernel) as info:
        build_kernel({"sites": ["a", "b"], "rates": [["a", "b", 1]]})

    assert info.value.witness == ("a", "b")


def test_sinks_follow_boundary_order(sep_boundary_chain):
    """Each boundary site owns one sink, in boundary order"""
    assert sep_boundary_chain.boundary == ("1", "5")
    assert sep_boundary_chain.sink_ids == ("1_e", "5_e")
    assert sep_boundary_chain.reservoir_params == {"1": Rational(1, 4), "5": Rational(3, 4)}
    assert sep_boundary_chain.boundary_indices == [0, 4]


def test_chain_and_complete_graphs():
    assert len(chain_kernel(5).bonds) == 4
    assert len(complete_kernel(4).bonds) == 6
    assert row_sums(chain_kernel(3)) == {"1": 1, "2": 2, "3": 1}


def test_with_reservoirs(chain3):
    """Reservoirs can be attached to an existing graph"""
    kernel = with_reservoirs(chain3, {1: "1/2", 3: 0})

    assert kernel.boundary == ("1", "3")
    assert kernel.reservoir_params["1"] == Rational(1, 2)
    assert kernel.bonds == chain3.bonds


def test_ladder_kernel(two_site_kernel):
    """Every level pair of a bond is connected, levels of one site are not"""
    ladder = ladder_kernel(two_site_kernel, 2)

    assert ladder.sites == ("1:1", "1:2", "2:1", "2:2")
    assert ladder.p("1:1", "2:2") == 1
    assert ladder.p("1:2", "2:1") == 1
    assert ladder.p("1:1", "1:2") == 0
    assert len(ladder.bonds) == 4


def test_ladder_boundary_inherits_parameters(sep_boundary_chain):
    ladder = ladder_kernel(sep_boundary_chain, 2)

    assert ladder.boundary == ("1:1", "1:2", "5:1", "5:2")
    assert ladder.reservoir_params["5:2"] == Rational(3, 4)


def test_ladder_projection():
    project = ladder_projection(2, 2)

    assert project((1, 0, 1, 1)) == (1, 2)
    assert project((1, 1, 0, 0, 3)) == (2, 0, 3)


def test_reachable_from_boundary():
    """Sites without a path to the boundary are not reachable"""
    kernel = build_kernel({"sites": ["1", "2", "3"], "edges": [["1", "2"]],
                           "boundary": {"1": Rational(1, 2)}})

    assert reachable_from_boundary(kernel) == [0, 1]


def test_lattice_service_from_graph():
    lattice = LatticeService.from_graph([1, 2, 3], [[1, 2], [2, 3, "1/2"]],
                                        boundary={1: Rational(1, 4)})

    assert lattice.kernel.sites == ("1", "2", "3")
    assert lattice.kernel.p("2", "3") == Rational(1, 2)
    assert lattice.kernel.reservoir_params == {"1": Rational(1, 4)}
    assert lattice.isolated_sites() == []


def test_lattice_service_isolated_sites():
    lattice = LatticeService.from_graph(["1", "2", "3"], [["1", "2"]], boundary={"1": "1/2"})

    assert lattice.isolated_sites() == ["3"]
    assert LatticeService.from_graph(["1", "2"], []).isolated_sites() == []


def test_lattice_service_ladder():
    lattice = LatticeService({"sites": ["1", "2"], "edges": [["1", "2"]]})

    assert lattice.ladder(3).size == 6
    assert lattice.ladder_projection(3)((1, 1, 0, 0, 0, 1)) == (2, 1)


def test_state_space_sector_order():
    """A sector lists configurations lexicographically, indexed consistently"""
    space = StateSpace.sector(("a", "b", "c"), (None, None, None), 2)

    assert space.states == ((0, 0, 2), (0, 1, 1), (0, 2, 0), (1, 0, 1), (1, 1, 0), (2, 0, 0))
    assert space.index_of((0, 2, 0)) == 2
    assert (1, 0, 1) in space
    assert (1, 1, 1) not in space
    assert len(space) == 6


def test_state_space_sector_union():
    """Unions go sector by sector in ascending total; the product space is lexicographic"""
    space = StateSpace.sectors(("a", "b"), (1, 1), [2, 0, 1])
    full = StateSpace.product(("a", "b"), (1, 1))

    assert space.states == ((0, 0), (0, 1), (1, 0), (1, 1))
    assert full.states == space.states
    assert full == space
    assert StateSpace.sectors(("a", "b"), (1, 1), [1]).states == ((0, 1), (1, 0))
    with pytest.raises(KeyError):
        space.index_of((2, 0))
