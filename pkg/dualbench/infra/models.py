"""
Domain models for the duality workbench
Immutable value objects shared by the services
"""
import enum
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Callable, Dict, List, Mapping, Optional, Tuple

import numpy as np
import sympy
from sympy import Rational, SparseMatrix

from dualbench.infra.state_space import State, StateSpace


# Enums
class RepresentationKind(enum.Enum):
    """Ladder-operator representation family"""
    SU2 = "su2"
    SU11 = "su11"
    HEISENBERG = "heisenberg"


class RedistributionLaw(enum.Enum):
    """Bond redistribution law of an instantaneous-thermalization model"""
    CONTINUOUS = "continuous"
    DISCRETE = "discrete"


# Models
@dataclass(frozen=True)
class Kernel:
    """
    Finite site set with a symmetric rate kernel

    rates holds both orientations of every bond. Boundary sites own a sink
    (absorbing copy) and a reservoir parameter (density rho or temperature T).
    """
    sites: Tuple[str, ...]
    rates: Mapping[Tuple[str, str], Rational]
    boundary: Tuple[str, ...] = ()
    sinks: Mapping[str, str] = field(default_factory=dict)
    reservoir_params: Mapping[str, Rational] = field(default_factory=dict)

    @property
    def size(self) -> int:
        return len(self.sites)

    def index(self, site: str) -> int:
        return self.sites.index(site)

    def p(self, i: str, l: str) -> Rational:
        return self.rates.get((i, l), sympy.S.Zero)

    @cached_property
    def bonds(self) -> Tuple[Tuple[int, int, Rational], ...]:
        """Unordered bonds (a < b in site order) with positive rate"""
        found = []
        for a, i in enumerate(self.sites):
            for b in range(a + 1, len(self.sites)):
                rate = self.p(i, self.sites[b])
                if rate > 0:
                    found.append((a, b, rate))
        return tuple(found)

    @cached_property
    def directed_bonds(self) -> Tuple[Tuple[int, int, Rational], ...]:
        """Ordered pairs (a, b), a != b, with positive rate"""
        found = []
        for a, b, rate in self.bonds:
            found.append((a, b, rate))
            found.append((b, a, rate))
        return tuple(sorted(found, key=lambda item: (item[0], item[1])))

    @property
    def boundary_indices(self) -> List[int]:
        return [self.index(site) for site in self.boundary]

    @property
    def sink_ids(self) -> Tuple[str, ...]:
        return tuple(self.sinks[site] for site in self.boundary)

    def neighbours(self, a: int) -> List[int]:
        return [b for x, b, _ in self.directed_bonds if x == a]


@dataclass(frozen=True)
class OperatorTriple:
    """Raising, lowering and diagonal matrices of one single-site representation"""
    plus: SparseMatrix
    minus: SparseMatrix
    zero: SparseMatrix
    kind: RepresentationKind
    parameter: Optional[Rational] = None
    cutoff: Optional[int] = None

    @property
    def dim(self) -> int:
        return self.plus.rows

    @property
    def cutoff_exact_dim(self) -> int:
        """Number of leading basis vectors on which products are exact"""
        if self.kind is RepresentationKind.SU2:
            return self.dim
        return self.dim - 1

    def component(self, label: str) -> SparseMatrix:
        return {"+": self.plus, "-": self.minus, "0": self.zero}[label]


@dataclass(frozen=True)
class CTMCGenerator:
    """
    Sparse generator of a continuous-time Markov chain

    rates maps (row index, column index) to the positive off-diagonal rate;
    the diagonal is implied by zero row sums.
    """
    space: StateSpace
    rates: Mapping[Tuple[int, int], Rational]
    conserved: Optional[int] = None
    name: str = ""

    @property
    def states(self) -> Tuple[State, ...]:
        return self.space.states

    @property
    def size(self) -> int:
        return self.space.count()

    @property
    def locations(self) -> Tuple[str, ...]:
        return self.space.locations

    @cached_property
    def _out(self) -> Dict[int, List[Tuple[int, Rational]]]:
        out: Dict[int, List[Tuple[int, Rational]]] = {}
        for (a, b), rate in sorted(self.rates.items()):
            out.setdefault(a, []).append((b, rate))
        return out

    def out_rates(self, index: int) -> List[Tuple[int, Rational]]:
        return self._out.get(index, [])

    def rate(self, source: State, target: State) -> Rational:
        key = (self.space.index_of(source), self.space.index_of(target))
        return self.rates.get(key, sympy.S.Zero)

    def exit_rate(self, index: int) -> Rational:
        return sum((rate for _, rate in self.out_rates(index)), sympy.S.Zero)

    def matrix(self) -> SparseMatrix:
        """Exact generator matrix including the diagonal"""
        entries: Dict[Tuple[int, int], Rational] = dict(self.rates)
        for index in range(self.size):
            total = self.exit_rate(index)
            if total != 0:
                entries[(index, index)] = -total
        return SparseMatrix(self.size, self.size, entries)

    def dense(self) -> np.ndarray:
        """Floating-point copy of the generator matrix"""
        out = np.zeros((self.size, self.size))
        for (a, b), rate in self.rates.items():
            out[a, b] += float(rate)
            out[a, a] -= float(rate)
        return out


@dataclass(frozen=True)
class DiffOperator:
    """
    Differential operator with polynomial coefficients in normal form

    terms maps a derivative multi-index (aligned with variables) to its
    coefficient polynomial over the same variables.
    """
    variables: Tuple[sympy.Symbol, ...]
    terms: Mapping[Tuple[int, ...], sympy.Poly]

    @property
    def order(self) -> int:
        return max((sum(index) for index in self.terms), default=0)

    def coefficient(self, derivative: Tuple[int, ...]) -> sympy.Poly:
        zero = sympy.Poly(0, *self.variables, domain=sympy.QQ)
        return self.terms.get(tuple(derivative), zero)


@dataclass(frozen=True)
class ThermalizationSpec:
    """Instantaneous-thermalization model on a kernel"""
    kernel: Kernel
    m: int
    law: RedistributionLaw


@dataclass(frozen=True)
class ConjugationQ:
    """Invertible conjugation, diagonal when built from a reversible measure"""
    space: StateSpace
    diagonal: Optional[Tuple[Rational, ...]] = None
    full: Optional[SparseMatrix] = None

    def matrix(self) -> SparseMatrix:
        if self.diagonal is None:
            return self.full
        n = len(self.diagonal)
        return SparseMatrix(n, n, {(k, k): v for k, v in enumerate(self.diagonal)})

    def inverse(self) -> SparseMatrix:
        if self.diagonal is None:
            return self.full.inv()
        n = len(self.diagonal)
        return SparseMatrix(n, n, {(k, k): 1 / v for k, v in enumerate(self.diagonal)})


@dataclass(frozen=True)
class DualityFunction:
    """
    Duality function D(eta, xi)

    One of: an explicit matrix over (rows, cols), a factorized closed form
    factor(location index, eta_k, xi_k) multiplied over locations, or a
    general closed form function(eta, xi).
    """
    rows: Optional[StateSpace] = None
    cols: Optional[StateSpace] = None
    values: Optional[SparseMatrix] = None
    factor: Optional[Callable[[int, int, int], Rational]] = None
    function: Optional[Callable[[State, State], Rational]] = None
    name: str = ""

    def evaluate(self, eta: State, xi: State) -> Rational:
        if self.function is not None:
            return self.function(tuple(eta), tuple(xi))
        if self.factor is not None:
            result = sympy.S.One
            for k, (a, b) in enumerate(zip(eta, xi)):
                result *= self.factor(k, a, b)
                if result == 0:
                    break
            return result
        return self.values[self.rows.index_of(eta), self.cols.index_of(xi)]

    def matrix(self, rows: Optional[StateSpace] = None,
               cols: Optional[StateSpace] = None) -> SparseMatrix:
        rows = rows or self.rows
        cols = cols or self.cols
        if self.values is not None and rows is self.rows and cols is self.cols:
            return self.values
        entries = {}
        for a, eta in enumerate(rows.states):
            for b, xi in enumerate(cols.states):
                value = self.evaluate(eta, xi)
                if value != 0:
                    entries[(a, b)] = value
        return SparseMatrix(rows.count(), cols.count(), entries)


@dataclass(frozen=True)
class TrajectoryResult:
    """Final state of one simulated trajectory"""
    final: Any
    elapsed: float
    events: int
    stream_id: int


@dataclass(frozen=True)
class MCComparison:
    """Two-sided Monte Carlo estimate of a duality identity"""
    label: str
    lhs: float
    rhs: float
    lhs_stderr: float
    rhs_stderr: float
    n_lhs: int
    n_rhs: int
    z_score: float
    threshold: float
    passed: bool
    exact_lhs: Optional[float] = None
    exact_rhs: Optional[float] = None
    reruns: int = 0


@dataclass(frozen=True)
class VerificationRecord:
    """Outcome of one exact identity check"""
    identity: str
    sector: str
    residual: Any
    passed: bool
    witness: Optional[str] = None


@dataclass(frozen=True)
class AbsorptionResult:
    """Law of the sink occupation once every dual particle is absorbed"""
    initial: State
    law: Mapping[State, Any]
    expectation: Optional[Any] = None
    exact: bool = True


@dataclass(frozen=True)
class ProfileResult:
    """Stationary one- and two-point functions of a boundary-driven model"""
    model: str
    sites: Tuple[str, ...]
    means: Tuple[Any, ...]
    covariances: Mapping[Tuple[int, int], Any] = field(default_factory=dict)


@dataclass(frozen=True)
class IntertwiningReport:
    """Residual locations of K^a C = C K^a per ladder component"""
    nonzero: Mapping[str, Tuple[int, ...]]
    checked_up_to: int

    @property
    def passed(self) -> bool:
        return not any(self.nonzero.values())


@dataclass(frozen=True)
class GoodnessOfFit:
    """One distributional test"""
    test: str
    statistic: float
    p_value: float
    samples: int
    passed: bool


@dataclass(frozen=True)
class ThermalizationReport:
    """Continuous and discrete redistribution-law checks"""
    m: int
    continuous: Optional[GoodnessOfFit]
    discrete: Optional[GoodnessOfFit]
    stationarity_residual: Any
    printed_recursion_residual: Any

    @property
    def passed(self) -> bool:
        tests = [t for t in (self.continuous, self.discrete) if t is not None]
        return all(t.passed for t in tests) and self.stationarity_residual == 0


@dataclass(frozen=True)
class LimitRow:
    """One row of a j or m limit table"""
    parameter: Rational
    distance: float
    function_gap: Optional[float] = None
    mean_gap: Optional[float] = None
    variance: Optional[float] = None
    simulated_gap: Optional[float] = None
    simulated_z: Optional[float] = None
