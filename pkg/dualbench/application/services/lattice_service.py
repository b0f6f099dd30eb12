"""
Lattice service
Finite graphs, symmetric kernels, boundary and sink bookkeeping
"""
import logging
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import sympy
from sympy import Rational

from dualbench.application.errors import (
    AsymmetricKernel, IndexOutOfRange, NegativeRate, SelfLoop, UnknownBoundarySite,
)
from dualbench.infra.exact import to_rational
from dualbench.infra.models import Kernel
from dualbench.infra.state_space import State

logger = logging.getLogger(__name__)


def _edge(entry: Any) -> Tuple[str, str, Any]:
    if isinstance(entry, Mapping):
        return str(entry["a"]), str(entry["b"]), entry.get("weight", 1)
    if len(entry) == 2:
        return str(entry[0]), str(entry[1]), 1
    return str(entry[0]), str(entry[1]), entry[2]


def _rate(value: Any, where: str) -> Rational:
    rate = to_rational(value)
    if rate < 0:
        raise NegativeRate(f"negative rate {rate} on {where}")
    return rate


def _sink_name(site: str, taken: Iterable[str]) -> str:
    taken = set(taken)
    name = f"{site}_e"
    while name in taken:
        name += "_e"
    return name


def build_kernel(spec: Mapping[str, Any]) -> Kernel:
    """
    Build a kernel from a declarative graph description

    Args:
        spec: {"sites": [...],
               "edges": [[a, b, weight], ...]   undirected, weight defaults to 1,
               "rates": [[i, l, rate], ...]     directed entries, must be symmetric,
               "boundary": {site: parameter} or [site, ...]}

    Returns:
        Kernel with symmetric exact rates

    Raises:
        NegativeRate, AsymmetricKernel, SelfLoop, UnknownBoundarySite, IndexOutOfRange
    """
    sites = tuple(str(s) for s in spec["sites"])
    if len(set(sites)) != len(sites):
        raise IndexOutOfRange(f"duplicate site ids in {list(sites)}")
    known = set(sites)

    def check_site(site: str) -> None:
        if site not in known:
            raise IndexOutOfRange(f"edge endpoint {site!r} is not a site")

    rates: Dict[Tuple[str, str], Rational] = {}
    for entry in spec.get("edges", []) or []:
        a, b, weight = _edge(entry)
        check_site(a)
        check_site(b)
        rate = _rate(weight, f"edge {a}-{b}")
        if a == b:
            if rate != 0:
                raise SelfLoop(f"self-loop at site {a}")
            continue
        rates[(a, b)] = rates.get((a, b), sympy.S.Zero) + rate
        rates[(b, a)] = rates.get((b, a), sympy.S.Zero) + rate

    directed: Dict[Tuple[str, str], Rational] = {}
    for entry in spec.get("rates", []) or []:
        a, b, value = _edge(entry)
        check_site(a)
        check_site(b)
        rate = _rate(value, f"rate {a}->{b}")
        if a == b and rate != 0:
            raise SelfLoop(f"self-loop at site {a}")
        directed[(a, b)] = directed.get((a, b), sympy.S.Zero) + rate
    for (a, b), rate in sorted(directed.items()):
        back = directed.get((b, a), sympy.S.Zero)
        if back != rate:
            raise AsymmetricKernel(f"p({a},{b}) = {rate} but p({b},{a}) = {back}",
                                   witness=(a, b))
        if a != b:
            rates[(a, b)] = rates.get((a, b), sympy.S.Zero) + rate

    boundary_spec = spec.get("boundary") or {}
    if not isinstance(boundary_spec, Mapping):
        boundary_spec = {site: None for site in boundary_spec}
    boundary: List[str] = []
    params: Dict[str, Rational] = {}
    for site, value in boundary_spec.items():
        site = str(site)
        if site not in known:
            raise UnknownBoundarySite(f"boundary site {site!r} is not a site")
        boundary.append(site)
        if value is not None:
            params[site] = _rate(value, f"reservoir at {site}")
    sinks: Dict[str, str] = {}
    for site in boundary:
        sinks[site] = _sink_name(site, list(sites) + list(sinks.values()))

    kernel = Kernel(
        sites=sites,
        rates={key: value for key, value in rates.items() if value != 0},
        boundary=tuple(boundary),
        sinks=sinks,
        reservoir_params=params,
    )
    logger.debug("Built kernel: %d sites, %d bonds, boundary %s",
                 kernel.size, len(kernel.bonds), list(kernel.boundary))
    return kernel


def chain_kernel(n: int, weight: Any = 1,
                 boundary: Optional[Mapping[Any, Any]] = None) -> Kernel:
    """Chain 1 - 2 - ... - n with uniform edge weight"""
    return build_kernel({
        "sites": [str(k) for k in range(1, n + 1)],
        "edges": [[str(k), str(k + 1), weight] for k in range(1, n)],
        "boundary": {str(k): v for k, v in (boundary or {}).items()},
    })


def complete_kernel(n: int, weight: Any = 1) -> Kernel:
    return build_kernel({
        "sites": [str(k) for k in range(1, n + 1)],
        "edges": [[str(a), str(b), weight]
                  for a in range(1, n + 1) for b in range(a + 1, n + 1)],
    })


def with_reservoirs(kernel: Kernel, params: Mapping[Any, Any]) -> Kernel:
    """Same graph, boundary set to the given sites and parameters"""
    return build_kernel({
        "sites": list(kernel.sites),
        "rates": [[i, l, rate] for (i, l), rate in sorted(kernel.rates.items())],
        "boundary": {str(site): value for site, value in params.items()},
    })


def symmetry_witness(kernel: Kernel) -> Optional[Tuple[str, str]]:
    """First pair with p(i,l) != p(l,i), or None"""
    for (i, l), rate in sorted(kernel.rates.items()):
        if kernel.p(l, i) != rate:
            return i, l
    return None


def row_sums(kernel: Kernel) -> Dict[str, Rational]:
    return {i: sum((kernel.p(i, l) for l in kernel.sites), sympy.S.Zero)
            for i in kernel.sites}


def ladder_site(site: str, level: int) -> str:
    return f"{site}:{level}"


def ladder_kernel(kernel: Kernel, levels: int) -> Kernel:
    """
    Product graph S x I: (i, a) -> (l, b) at rate p(i, l) for every level pair

    Ladder sites are site-major, levels 1..levels. Every level of a boundary
    site is a boundary site with the same reservoir parameter.
    """
    if levels < 1:
        raise IndexOutOfRange(f"levels must be >= 1, got {levels}")
    sites = [ladder_site(site, level) for site in kernel.sites
             for level in range(1, levels + 1)]
    rates = []
    for (i, l), rate in sorted(kernel.rates.items()):
        for a in range(1, levels + 1):
            for b in range(1, levels + 1):
                rates.append([ladder_site(i, a), ladder_site(l, b), rate])
    boundary = {}
    for site in kernel.boundary:
        for level in range(1, levels + 1):
            boundary[ladder_site(site, level)] = kernel.reservoir_params.get(site)
    return build_kernel({"sites": sites, "rates": rates, "boundary": boundary})


def ladder_projection(levels: int, n_sites: int):
    """Map a ladder occupation (site-major) to per-site particle counts"""
    def project(state: State) -> State:
        counts = [sum(state[k * levels:(k + 1) * levels]) for k in range(n_sites)]
        return tuple(counts) + tuple(state[n_sites * levels:])
    return project


def reachable_from_boundary(kernel: Kernel) -> List[int]:
    """Site indices connected to some boundary site through positive bonds"""
    seen = set(kernel.boundary_indices)
    frontier = list(seen)
    while frontier:
        a = frontier.pop()
        for b in kernel.neighbours(a):
            if b not in seen:
                seen.add(b)
                frontier.append(b)
    return sorted(seen)


class LatticeService:
    """Kernel of one experiment graph and the graphs derived from it"""

    def __init__(self, spec: Mapping[str, Any]):
        """
        Build the kernel

        Args:
            spec: Graph description accepted by build_kernel

        Raises:
            NegativeRate, AsymmetricKernel, SelfLoop, UnknownBoundarySite
        """
        self.kernel = build_kernel(spec)

    @classmethod
    def from_graph(cls, sites: Sequence[Any], edges: Sequence[Sequence[Any]],
                   boundary: Union[Sequence[Any], Mapping[Any, Any]] = ()) -> "LatticeService":
        return cls({"sites": list(sites), "edges": [list(e) for e in edges], "boundary": boundary})

    def ladder(self, levels: int) -> Kernel:
        return ladder_kernel(self.kernel, levels)

    def ladder_projection(self, levels: int):
        return ladder_projection(levels, self.kernel.size)

    def isolated_sites(self) -> List[str]:
        """Sites with no path to the boundary; empty when there is no boundary"""
        if not self.kernel.boundary:
            return []
        reachable = set(reachable_from_boundary(self.kernel))
        return [site for a, site in enumerate(self.kernel.sites) if a not in reachable]
