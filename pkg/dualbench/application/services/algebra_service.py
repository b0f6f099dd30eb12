"""
Algebra service
Ladder-operator representations, commutators, exponentials of raising
operators and two-site Hamiltonians built from them
"""
import logging
from typing import Any, Dict, List, Sequence

import sympy
from sympy import Rational, SparseMatrix

from dualbench.application.errors import (
    CutoffTooSmall, DimensionMismatch, IndexOutOfRange, InvalidM, InvalidSpin,
    NotNilpotentOrTriangular,
)
from dualbench.infra.exact import kron, max_abs_entry, to_rational
from dualbench.infra.models import OperatorTriple, RepresentationKind, VerificationRecord
from dualbench.infra.state_space import StateSpace

logger = logging.getLogger(__name__)


def spin_levels(j: Any) -> int:
    """2j as a positive integer, or InvalidSpin"""
    try:
        value = to_rational(j)
    except ValueError as exc:
        raise InvalidSpin(f"spin {j!r} is not a number") from exc
    two_j = 2 * value
    if not two_j.is_integer or two_j <= 0:
        raise InvalidSpin(f"2j must be a positive integer, got j = {value}")
    return int(two_j)


def check_m(m: Any) -> int:
    if isinstance(m, bool) or int(m) != m or int(m) < 1:
        raise InvalidM(f"m must be a positive integer, got {m!r}")
    return int(m)


def _is_zero(matrix: SparseMatrix) -> bool:
    return all(v == 0 for v in matrix.todok().values())


def su2_rep(j: Any) -> OperatorTriple:
    """
    Spin-j representation on {0..2j}

    J+|n> = (2j-n)|n+1>, J-|n> = n|n-1>, J0|n> = (n-j)|n>
    """
    two_j = spin_levels(j)
    spin = Rational(two_j, 2)
    dim = two_j + 1
    plus = {(n + 1, n): two_j - n for n in range(two_j)}
    minus = {(n - 1, n): n for n in range(1, dim)}
    zero = {(n, n): n - spin for n in range(dim) if n != spin}
    return OperatorTriple(
        plus=SparseMatrix(dim, dim, plus),
        minus=SparseMatrix(dim, dim, minus),
        zero=SparseMatrix(dim, dim, zero),
        kind=RepresentationKind.SU2,
        parameter=spin,
    )


def su11_rep(m: Any, cutoff: int) -> OperatorTriple:
    """
    Discrete-series representation truncated to {0..cutoff-1}

    K+|n> = (m/2+n)|n+1>, K-|n> = n|n-1>, K0|n> = (m/4+n)|n>
    """
    m = check_m(m)
    if cutoff < 3:
        raise CutoffTooSmall(f"su(1,1) cutoff must be >= 3, got {cutoff}")
    half = Rational(m, 2)
    quarter = Rational(m, 4)
    plus = {(n + 1, n): half + n for n in range(cutoff - 1)}
    minus = {(n - 1, n): n for n in range(1, cutoff)}
    zero = {(n, n): quarter + n for n in range(cutoff)}
    return OperatorTriple(
        plus=SparseMatrix(cutoff, cutoff, plus),
        minus=SparseMatrix(cutoff, cutoff, minus),
        zero=SparseMatrix(cutoff, cutoff, zero),
        kind=RepresentationKind.SU11,
        parameter=sympy.Integer(m),
        cutoff=cutoff,
    )


def heisenberg_rep(cutoff: int) -> OperatorTriple:
    """a+|n> = |n+1>, a-|n> = n|n-1>, zero component is the identity"""
    if cutoff < 2:
        raise CutoffTooSmall(f"Heisenberg cutoff must be >= 2, got {cutoff}")
    return OperatorTriple(
        plus=SparseMatrix(cutoff, cutoff, {(n + 1, n): 1 for n in range(cutoff - 1)}),
        minus=SparseMatrix(cutoff, cutoff, {(n - 1, n): n for n in range(1, cutoff)}),
        zero=SparseMatrix.eye(cutoff),
        kind=RepresentationKind.HEISENBERG,
        cutoff=cutoff,
    )


def commutator(a: SparseMatrix, b: SparseMatrix) -> SparseMatrix:
    if a.shape != b.shape or a.rows != a.cols:
        raise DimensionMismatch(f"cannot commute {a.shape} with {b.shape}")
    return a * b - b * a


def commutation_residuals(triple: OperatorTriple) -> Dict[str, Rational]:
    """
    Max residual of each defining relation on the exact sub-dimension

    Returns:
        relation name -> largest absolute entry inside the exact block
    """
    k = triple.cutoff_exact_dim
    plus, minus, zero = triple.plus, triple.minus, triple.zero
    if triple.kind is RepresentationKind.SU2:
        relations = {
            "[J0,J+]-J+": commutator(zero, plus) - plus,
            "[J0,J-]+J-": commutator(zero, minus) + minus,
            "[J-,J+]+2J0": commutator(minus, plus) + 2 * zero,
        }
    elif triple.kind is RepresentationKind.SU11:
        relations = {
            "[K0,K+]-K+": commutator(zero, plus) - plus,
            "[K0,K-]+K-": commutator(zero, minus) + minus,
            "[K-,K+]-2K0": commutator(minus, plus) - 2 * zero,
        }
    else:
        relations = {"[a-,a+]-1": commutator(minus, plus) - zero}
    residuals = {}
    for name, matrix in relations.items():
        block = matrix[:k, :k]
        residuals[name] = max((abs(v) for v in block.values()), default=sympy.S.Zero)
    return residuals


def exp_raising(a: SparseMatrix) -> SparseMatrix:
    """
    Exact exponential of a nilpotent matrix through its terminating series

    Raises:
        NotNilpotentOrTriangular: if no power up to the dimension vanishes
    """
    if a.rows != a.cols:
        raise DimensionMismatch(f"exponential of a non-square {a.shape} matrix")
    n = a.rows
    result = SparseMatrix.eye(n)
    term = SparseMatrix.eye(n)
    for k in range(1, n + 1):
        term = term * a / k
        if _is_zero(term):
            return result
        result = result + term
    raise NotNilpotentOrTriangular(f"{n}x{n} matrix is not nilpotent")


def embed(matrix: SparseMatrix, site: int, n_sites: int) -> SparseMatrix:
    """Kronecker embedding at 1-based site position, identities elsewhere"""
    if not 1 <= site <= n_sites:
        raise IndexOutOfRange(f"site {site} outside 1..{n_sites}")
    result = None
    for position in range(1, n_sites + 1):
        factor = matrix if position == site else SparseMatrix.eye(matrix.rows)
        result = factor if result is None else kron(result, factor)
    return result


def tensor_site_operators(triple: OperatorTriple, site: int, n_sites: int) -> OperatorTriple:
    """
    The triple acting on one site of an n-site product basis

    Args:
        triple: Single-site representation
        site: 1-based site position
        n_sites: Number of sites

    Returns:
        OperatorTriple over the (dim ** n_sites)-dimensional product basis
    """
    return OperatorTriple(
        plus=embed(triple.plus, site, n_sites),
        minus=embed(triple.minus, site, n_sites),
        zero=embed(triple.zero, site, n_sites),
        kind=triple.kind,
        parameter=triple.parameter,
        cutoff=triple.cutoff,
    )


def total_operator(triple: OperatorTriple, label: str, n_sites: int) -> SparseMatrix:
    """Sum over sites of the embedded component"""
    total = None
    for site in range(1, n_sites + 1):
        term = embed(triple.component(label), site, n_sites)
        total = term if total is None else total + term
    return total


def product_space(triple: OperatorTriple, locations: Sequence[str]) -> StateSpace:
    """Product basis of the representation in Kronecker order"""
    return StateSpace.product(locations, [triple.dim - 1] * len(locations))


def restrict(matrix: SparseMatrix, full: StateSpace, rows: StateSpace,
             cols: StateSpace = None) -> SparseMatrix:
    """Sub-matrix of a product-basis operator on the given configurations"""
    cols = cols or rows
    row_index = [full.index_of(s) for s in rows.states]
    col_index = [full.index_of(s) for s in cols.states]
    return matrix.extract(row_index, col_index)


def two_site_hamiltonian(triple: OperatorTriple) -> SparseMatrix:
    """
    Transposed two-site generator written in ladder operators

    SU2:        J1+J2- + J1-J2+ + 2 J1^0 J2^0 - 2j^2
    SU11:       4 (K1+K2- + K1-K2+ - 2 K1^0 K2^0 + m^2/8)
    Heisenberg: -(a1+ - a2+)(a1- - a2-)
    """
    first = tensor_site_operators(triple, 1, 2)
    second = tensor_site_operators(triple, 2, 2)
    identity = SparseMatrix.eye(triple.dim ** 2)
    if triple.kind is RepresentationKind.SU2:
        j = triple.parameter
        return (first.plus * second.minus + first.minus * second.plus
                + 2 * first.zero * second.zero - 2 * j ** 2 * identity)
    if triple.kind is RepresentationKind.SU11:
        m = triple.parameter
        return 4 * (first.plus * second.minus + first.minus * second.plus
                    - 2 * first.zero * second.zero + m ** 2 / 8 * identity)
    return -(first.plus - second.plus) * (first.minus - second.minus)


class AlgebraService:
    """Defining relations and two-site Hamiltonian of one single-site representation"""

    def __init__(self, triple: OperatorTriple):
        self.triple = triple

    @classmethod
    def for_kind(cls, kind: RepresentationKind, j: Any = None, m: Any = None,
                 cutoff: int = 8) -> "AlgebraService":
        if kind is RepresentationKind.SU2:
            return cls(su2_rep(j))
        if kind is RepresentationKind.SU11:
            return cls(su11_rep(m, cutoff))
        return cls(heisenberg_rep(cutoff))

    def pair_totals(self) -> range:
        """Two-site particle totals on which the truncated Hamiltonian is exact"""
        if self.triple.kind is RepresentationKind.SU2:
            return range(2 * self.triple.dim - 1)
        return range(self.triple.dim)

    def commutation_records(self) -> List[VerificationRecord]:
        return [VerificationRecord(identity=name, sector=f"dim {self.triple.cutoff_exact_dim}",
                                   residual=residual, passed=residual == 0)
                for name, residual in commutation_residuals(self.triple).items()]

    def hamiltonian_record(self, generator) -> VerificationRecord:
        """Two-site Hamiltonian against the transposed two-site generator on its states"""
        full = product_space(self.triple, generator.locations)
        H = restrict(two_site_hamiltonian(self.triple), full, generator.space)
        residual, where = max_abs_entry(H - generator.matrix().T)
        witness = None
        if where is not None:
            witness = f"{generator.states[where[0]]},{generator.states[where[1]]}"
        return VerificationRecord(identity="two-site H = L^T", sector=f"{generator.size} states",
                                  residual=residual, passed=residual == 0, witness=witness)
