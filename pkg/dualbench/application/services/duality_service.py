"""
Duality service
Symmetries to duality functions and back, conjugations from reversible
measures, exact duality checks for chains and diffusions
"""
import logging
from dataclasses import dataclass, replace
from typing import Any, Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import sympy
from sympy import Poly, Rational, SparseMatrix, Symbol, binomial, factorial

from dualbench.application.errors import (
    CommutatorNonzero, DimensionMismatch, MissingReservoirParam, NotAConjugation,
    NotASymmetry, NotReversible, UnknownSink, UnsupportedModel,
)
from dualbench.application.services import polyops_service as polyops
from dualbench.application.services.algebra_service import (
    check_m, exp_raising, spin_levels, su11_rep, su2_rep, heisenberg_rep,
)
from dualbench.application.services.model_service import ModelService, discrete_redistribution_law
from dualbench.infra.exact import max_abs_entry
from dualbench.infra.models import (
    ConjugationQ, CTMCGenerator, DiffOperator, DualityFunction, Kernel, VerificationRecord,
)
from dualbench.infra.state_space import State, StateSpace

logger = logging.getLogger(__name__)

Measure = Union[Callable[[State], Rational], Mapping[State, Rational]]


def _measure_values(space: StateSpace, mu: Measure) -> List[Rational]:
    if isinstance(mu, Mapping):
        return [sympy.nsimplify(mu[s]) if not isinstance(mu[s], sympy.Basic) else mu[s]
                for s in space.states]
    return [mu(s) for s in space.states]


def _sector_label(space: StateSpace) -> str:
    totals = sorted({sum(s) for s in space.states})
    if len(totals) == 1:
        return f"N={totals[0]}"
    return f"N={totals[0]}..{totals[-1]}"


def _record(identity: str, space_label: str, matrix: SparseMatrix,
            rows: StateSpace, cols: StateSpace) -> VerificationRecord:
    residual, where = max_abs_entry(matrix)
    witness = None
    if where is not None:
        witness = f"{rows.states[where[0]]},{cols.states[where[1]]}"
    return VerificationRecord(identity=identity, sector=space_label, residual=residual,
                              passed=residual == 0, witness=witness)


# Reversible measures and conjugations

def detailed_balance_witness(L: CTMCGenerator, mu: Measure) -> Optional[Tuple[State, State]]:
    """First pair with mu(a) L(a,b) != mu(b) L(b,a), or None"""
    values = _measure_values(L.space, mu)
    for (a, b), rate in sorted(L.rates.items()):
        back = L.rates.get((b, a), sympy.S.Zero)
        if values[a] * rate != values[b] * back:
            return L.states[a], L.states[b]
    return None


def q_from_reversible_measure(L: CTMCGenerator, mu: Measure) -> ConjugationQ:
    """
    Diagonal conjugation Q = diag(mu), so that Q L Q^-1 = L^T

    Raises:
        NotReversible: with the first pair violating detailed balance
    """
    values = _measure_values(L.space, mu)
    for state, value in zip(L.states, values):
        if value <= 0:
            raise NotReversible(f"measure is not positive at {state}", witness=state)
    witness = detailed_balance_witness(L, mu)
    if witness is not None:
        raise NotReversible("detailed balance fails", witness=witness)
    return ConjugationQ(space=L.space, diagonal=tuple(values))


def time_reversed_generator(L: CTMCGenerator, mu: Measure) -> CTMCGenerator:
    """L_rev(a, b) = L(b, a) mu(b) / mu(a) for a stationary mu"""
    values = _measure_values(L.space, mu)
    rates = {(b, a): rate * values[a] / values[b] for (a, b), rate in L.rates.items()}
    return CTMCGenerator(space=L.space, rates=rates, conserved=L.conserved,
                         name=f"{L.name}_reversed")


def is_conjugation(L: CTMCGenerator, Q: ConjugationQ) -> bool:
    M = L.matrix()
    return not any((Q.matrix() * M - M.T * Q.matrix()).values())


# Symmetries and self-duality

def duality_from_symmetry(L: CTMCGenerator, S: SparseMatrix, Q: ConjugationQ,
                          side: str = "generator") -> DualityFunction:
    """
    Self-duality function from a symmetry

    side="generator": S commutes with L and D = S Q^-1
    side="transpose": S commutes with L^T and D = Q^-1 S

    Raises:
        NotAConjugation, NotASymmetry
    """
    M = L.matrix()
    if S.shape != M.shape:
        raise DimensionMismatch(f"symmetry {S.shape} vs generator {M.shape}")
    if not is_conjugation(L, Q):
        raise NotAConjugation("Q L Q^-1 != L^T")
    target = M if side == "generator" else M.T
    if any((target * S - S * target).values()):
        raise NotASymmetry(f"S does not commute with the {side}")
    values = S * Q.inverse() if side == "generator" else Q.inverse() * S
    return DualityFunction(rows=L.space, cols=L.space, values=values,
                           name=f"symmetry/{side}")


def symmetry_from_duality(L: CTMCGenerator, D: DualityFunction, Q: ConjugationQ,
                          side: str = "generator") -> SparseMatrix:
    """
    Symmetry from a self-duality function

    side="generator": S = D Q commutes with L
    side="transpose": S = Q D commutes with L^T

    Raises:
        CommutatorNonzero
    """
    M = L.matrix()
    values = D.matrix(L.space, L.space)
    S = values * Q.matrix() if side == "generator" else Q.matrix() * values
    target = M if side == "generator" else M.T
    residual, where = max_abs_entry(target * S - S * target)
    if residual != 0:
        raise CommutatorNonzero(f"[L, S] has entry {residual}",
                                witness=(L.states[where[0]], L.states[where[1]]))
    return S


def verify_selfduality(L: CTMCGenerator, D: DualityFunction,
                       identity: str = "LD-DL^T") -> VerificationRecord:
    """Max entry of L D - D L^T with the worst (eta, xi)"""
    if D.values is not None and D.values.shape != (L.size, L.size):
        raise DimensionMismatch(f"duality matrix {D.values.shape} vs generator size {L.size}")
    M = L.matrix()
    values = D.matrix(L.space, L.space)
    return _record(identity, _sector_label(L.space), M * values - values * M.T,
                   L.space, L.space)


def verify_duality(L: Union[CTMCGenerator, DiffOperator], L_dual: CTMCGenerator,
                   D: Union[DualityFunction, polyops.PolynomialFamily],
                   identity: str = "LD-DL_dual^T") -> VerificationRecord:
    """
    Exact duality residual

    Chains: L D - D L_dual^T over (L states, L_dual states).
    Diffusions: L D(., xi) - sum_xi' L_dual(xi, xi') D(., xi') for every xi of
    L_dual's space, as polynomials.
    """
    dual_matrix = L_dual.matrix()
    if isinstance(L, CTMCGenerator):
        values = D.matrix(L.space, L_dual.space)
        if values.shape != (L.size, L_dual.size):
            raise DimensionMismatch(f"duality matrix {values.shape}")
        return _record(identity, _sector_label(L_dual.space),
                       L.matrix() * values - values * dual_matrix.T, L.space, L_dual.space)
    worst = sympy.S.Zero
    witness = None
    for a, xi in enumerate(L_dual.states):
        lhs = polyops.apply_diff_operator(L, D(xi))
        rhs = polyops.poly(0, lhs.gens)
        for b in range(L_dual.size):
            rate = dual_matrix[a, b]
            if rate != 0:
                rhs += D(L_dual.states[b]) * rate
        residual = lhs - rhs
        if not residual.is_zero:
            size = max(abs(c) for c in residual.coeffs())
            if size > worst:
                worst, witness = size, str(xi)
    return VerificationRecord(identity=identity, sector=_sector_label(L_dual.space),
                              residual=worst, passed=worst == 0, witness=witness)


def conjugacy_pair_check(A: SparseMatrix, B: SparseMatrix, C: SparseMatrix,
                         C_tilde: SparseMatrix, Q: Optional[SparseMatrix] = None,
                         S: Optional[SparseMatrix] = None,
                         D: Optional[SparseMatrix] = None) -> List[VerificationRecord]:
    """
    Conjugacy A C = C B, C~ A = B C~ and the derived duality statements

    With Q (B^T = Q B Q^-1) and a symmetry S of A: D = S C Q^-1 satisfies
    A D = D B^T. With Q and a duality function D: S = D Q C~ commutes with A.
    """
    if C.shape != (A.rows, B.rows) or C_tilde.shape != (B.rows, A.rows):
        raise DimensionMismatch(f"C {C.shape}, C~ {C_tilde.shape} for A {A.shape}, B {B.shape}")

    def record(identity: str, matrix: SparseMatrix) -> VerificationRecord:
        residual, where = max_abs_entry(matrix)
        return VerificationRecord(identity=identity, sector=f"{A.rows}x{B.rows}",
                                  residual=residual, passed=residual == 0,
                                  witness=None if where is None else str(where))

    records = [record("AC=CB", A * C - C * B), record("C~A=BC~", C_tilde * A - B * C_tilde)]
    if Q is not None and S is not None:
        derived = S * C * Q.inv()
        records.append(record("D=SCQ^-1 duality", A * derived - derived * B.T))
    if Q is not None and D is not None:
        symmetry = D * Q * C_tilde
        records.append(record("S=DQC~ symmetry", A * symmetry - symmetry * A))
    return records


# Closed-form product duality functions and the measures behind them

def product_duality_function(kind: str, j: Any = None, m: Any = None) -> DualityFunction:
    """
    Site-factorized self-duality functions

    sep2j: C(eta, xi) / C(2j, xi)
    sip:   eta! / ((eta - xi)! (m/2)_xi)   (m=1: 2^xi eta! / ((eta-xi)! (2xi-1)!!))
    irw:   eta! / (eta - xi)!
    """
    if kind == "sep2j":
        two_j = spin_levels(j)

        def factor(_: int, eta: int, xi: int) -> Rational:
            return binomial(eta, xi) / binomial(two_j, xi)
    elif kind == "sip":
        half = Rational(check_m(m), 2)

        def factor(_: int, eta: int, xi: int) -> Rational:
            if xi > eta:
                return sympy.S.Zero
            return factorial(eta) / (factorial(eta - xi) * polyops.rising(half, xi))
    elif kind == "irw":
        def factor(_: int, eta: int, xi: int) -> Rational:
            if xi > eta:
                return sympy.S.Zero
            return factorial(eta) / factorial(eta - xi)
    else:
        raise UnsupportedModel(f"no product duality function for {kind!r}")
    return DualityFunction(factor=factor, name=kind)


def product_measure(kind: str, j: Any = None, m: Any = None,
                    parameter: Any = None) -> Callable[[State], Rational]:
    """
    Unnormalized reversible product measures

    sep2j: prod C(2j, eta) (rho / (1 - rho))^eta, rho = 1/2 by default
    sip:   prod (m/2)_eta / eta! (2 lambda)^eta, lambda = 1/2 by default
    irw:   prod lambda^eta / eta!, lambda = 1 by default
    """
    if kind == "sep2j":
        two_j = spin_levels(j)
        rho = Rational(1, 2) if parameter is None else sympy.Rational(parameter)
        odds = rho / (1 - rho)
        single = lambda n: binomial(two_j, n) * odds ** n
    elif kind == "sip":
        half = Rational(check_m(m), 2)
        lam = Rational(1, 2) if parameter is None else sympy.Rational(parameter)
        single = lambda n: polyops.rising(half, n) / factorial(n) * (2 * lam) ** n
    elif kind == "irw":
        lam = sympy.S.One if parameter is None else sympy.Rational(parameter)
        single = lambda n: lam ** n / factorial(n)
    else:
        raise UnsupportedModel(f"no product measure for {kind!r}")

    def mu(state: State) -> Rational:
        value = sympy.S.One
        for n in state:
            value *= single(n)
        return value
    return mu


def single_site_symmetry(kind: str, j: Any = None, m: Any = None,
                         cutoff: int = 12) -> SparseMatrix:
    """e^{J+}, e^{K+} or e^{a+} of one site"""
    if kind == "sep2j":
        return exp_raising(su2_rep(j).plus)
    if kind == "sip":
        return exp_raising(su11_rep(m, cutoff).plus)
    if kind == "irw":
        return exp_raising(heisenberg_rep(cutoff).plus)
    raise UnsupportedModel(f"no raising symmetry for {kind!r}")


def product_symmetry(single: SparseMatrix, space: StateSpace) -> SparseMatrix:
    """Tensor power of a single-site matrix restricted to the configurations of a space"""
    entries = {}
    for a, eta in enumerate(space.states):
        for b, xi in enumerate(space.states):
            value = sympy.S.One
            for x, y in zip(eta, xi):
                if x >= single.rows or y >= single.cols:
                    value = sympy.S.Zero
                    break
                value *= single[x, y]
                if value == 0:
                    break
            if value != 0:
                entries[(a, b)] = value
    n = space.count()
    return SparseMatrix(n, n, entries)


@dataclass(frozen=True)
class SymmetryTriple:
    """Generator with its reversible conjugation and raising-operator symmetry"""
    generator: CTMCGenerator
    Q: ConjugationQ
    S: SparseMatrix
    kind: str


def symmetry_triple(kind: str, L: CTMCGenerator, j: Any = None, m: Any = None) -> SymmetryTriple:
    """
    (L, Q, S) for a bulk model: Q from the reversible product measure, S the
    restricted tensor power of the single-site exponential of the raising operator
    """
    top = max((max(s) for s in L.states), default=0)
    single = single_site_symmetry(kind, j=j, m=m, cutoff=max(top + 2, 3))
    Q = q_from_reversible_measure(L, product_measure(kind, j=j, m=m))
    return SymmetryTriple(generator=L, Q=Q, S=product_symmetry(single, L.space), kind=kind)


# Boundary-driven duality

def boundary_duality_function(kernel: Kernel, model: str, j: Any = None, m: Any = None,
                              variables: Optional[Sequence[Symbol]] = None):
    """
    Duality between a boundary-driven primal and its absorbing dual

    sep2j: D(eta, xi) = prod_sites C(eta_i, xi_i)/C(2j, xi_i) * prod_sinks rho_i^xi_e,
           a DualityFunction with eta over sites and xi over sites then sinks.
    bep:   D(z, xi) = prod_sites z_i^xi_i / (2^xi_i (m/2)_xi_i) * prod_sinks T_i^xi_e,
           a PolynomialFamily over the site energies.

    Raises:
        MissingReservoirParam, UnknownSink, UnsupportedModel
    """
    missing = [s for s in kernel.boundary if s not in kernel.reservoir_params]
    if not kernel.boundary or missing:
        raise MissingReservoirParam(f"reservoir parameters missing for {missing or 'boundary'}")
    n = kernel.size
    params = [kernel.reservoir_params[s] for s in kernel.boundary]
    width = n + len(params)

    def reservoir_factor(xi: State) -> Rational:
        if len(xi) != width:
            raise UnknownSink(f"dual configuration {xi} does not cover {width} sites and sinks")
        value = sympy.S.One
        for param, count in zip(params, xi[n:]):
            value *= param ** count
        return value

    if model == "sep2j":
        two_j = spin_levels(j)

        def function(eta: State, xi: State) -> Rational:
            value = reservoir_factor(xi)
            for a in range(n):
                if xi[a] > eta[a]:
                    return sympy.S.Zero
                value *= binomial(eta[a], xi[a]) / binomial(two_j, xi[a])
            return value
        return DualityFunction(function=function, name="boundary_sep2j")
    if model == "bep":
        m = check_m(m)
        variables = tuple(variables or polyops.site_symbols("z", kernel.sites))

        def build(xi: State) -> Poly:
            bulk = polyops.duality_polynomial("bep", xi[:n], variables, m)
            return bulk * reservoir_factor(xi)
        return polyops.PolynomialFamily(variables, build, name="boundary_bep")
    raise UnsupportedModel(f"no boundary duality function for {model!r}")


# Instantaneous thermalization

def beta_pair_moment(m: Any, p: int, q: int) -> Rational:
    """E[B^p (1-B)^q] for B ~ Beta(m/2, m/2): (a)_p (a)_q / (m)_{p+q}"""
    half = Rational(check_m(m), 2)
    return polyops.rising(half, p) * polyops.rising(half, q) / polyops.rising(2 * half, p + q)


def thermalize_polynomial(p: Poly, first: Symbol, second: Symbol, m: Any) -> Poly:
    """
    Expected value of p after redistributing (e_i, e_j) by gamma_m

    Each monomial e_i^a e_j^b becomes E[B^a (1-B)^b] (e_i + e_j)^(a+b).
    """
    gens = p.gens
    i, k = gens.index(first), gens.index(second)
    total = first + second
    result = sympy.S.Zero
    for exponent, coeff in p.terms():
        a, b = exponent[i], exponent[k]
        rest = sympy.Mul(*[g ** e for n, (g, e) in enumerate(zip(gens, exponent))
                           if n not in (i, k)])
        result += coeff * beta_pair_moment(m, a, b) * total ** (a + b) * rest
    return polyops.poly(result, gens)


def thermalized_duality_records(kernel: Kernel, m: Any, max_total: int,
                                variables: Optional[Sequence[Symbol]] = None
                                ) -> List[VerificationRecord]:
    """
    (T_ij - id) D(., xi) = (T^_ij - id) D(., xi) per bond for every xi with |xi| <= max_total
    """
    m = check_m(m)
    variables = tuple(variables or polyops.site_symbols("e", kernel.sites))
    family = polyops.duality_family("bep", variables, m)
    records = []
    space = StateSpace.sectors(kernel.sites, [None] * kernel.size, range(max_total + 1))
    for a, b, _ in kernel.bonds:
        worst = sympy.S.Zero
        witness = None
        for xi in space.states:
            D = family(xi)
            lhs = thermalize_polynomial(D, variables[a], variables[b], m) - D
            pair = xi[a] + xi[b]
            rhs = polyops.poly(0, variables) - D
            for k, weight in discrete_redistribution_law(pair, m).items():
                moved = list(xi)
                moved[a], moved[b] = k, pair - k
                rhs += family(tuple(moved)) * weight
            residual = lhs - rhs
            if not residual.is_zero:
                size = max(abs(c) for c in residual.coeffs())
                if size > worst:
                    worst, witness = size, str(xi)
        records.append(VerificationRecord(
            identity=f"thermalized duality bond {kernel.sites[a]}-{kernel.sites[b]}",
            sector=f"|xi|<={max_total}", residual=worst, passed=worst == 0, witness=witness))
    return records


class DualityService:
    """Duality functions and exact duality checks on one kernel, by model kind"""

    def __init__(self, kernel: Kernel):
        self.kernel = kernel
        self.models = ModelService(kernel)

    def duality_function(self, kind: str, j: Any = None, m: Any = None):
        """
        Duality function matching the pairing of a model with its dual

        Discrete self-dual models get the closed product form, diffusions the
        polynomial family over their site variables, boundary-driven models the
        reservoir-weighted function against the absorbing dual.

        Raises:
            UnsupportedModel
        """
        if kind in ("sep", "sep2j"):
            return product_duality_function("sep2j", j=Rational(1, 2) if kind == "sep" else j)
        if kind in ("sip", "irw"):
            return product_duality_function(kind, m=m)
        if kind == "bep":
            return polyops.PolyopsService.for_sites("z", self.kernel.sites).family("bep", m)
        if kind in ("bmp", "hermite"):
            return polyops.PolyopsService.for_sites("x", self.kernel.sites).family(kind)
        if kind == "boundary_sep2j":
            return boundary_duality_function(self.kernel, "sep2j", j=j)
        if kind == "boundary_bep":
            return boundary_duality_function(self.kernel, "bep", m=m)
        raise UnsupportedModel(f"no duality function for {kind!r}")

    def self_duality_records(self, kind: str, generator: CTMCGenerator, j: Any = None,
                             m: Any = None) -> List[VerificationRecord]:
        """
        Closed-form self-duality, the function built from the exponential of
        the raising operator, the symmetry given back by the closed form and
        the conjugacy-pair statements

        Raises:
            CommutatorNonzero: if the closed form does not give back a symmetry
        """
        closed = product_duality_function(kind, j=j, m=m)
        records = [verify_selfduality(generator, closed, identity=f"{kind} LD = DL^T")]
        triple = symmetry_triple(kind, generator, j=j, m=m)
        derived = duality_from_symmetry(generator, triple.S, triple.Q, side="transpose")
        records.append(verify_selfduality(generator, derived,
                                          identity=f"{kind} D = Q^-1 e^(raising)"))
        symmetry_from_duality(generator, closed, triple.Q, side="transpose")
        records.append(VerificationRecord(identity=f"{kind} S = QD commutes with L^T",
                                          sector=generator.name, residual=0, passed=True))
        unit = SparseMatrix.eye(generator.size)
        for record in conjugacy_pair_check(generator.matrix(), generator.matrix(), unit, unit,
                                           Q=triple.Q.matrix(), S=triple.S.T,
                                           D=closed.matrix(generator.space, generator.space)):
            records.append(replace(record, identity=f"{kind} conjugacy {record.identity}"))
        return records

    def dual_generator(self, kind: str, totals: Iterable[int], j: Any = None,
                       m: Any = None) -> CTMCGenerator:
        """Discrete dual of a diffusion or boundary-driven model on the given totals"""
        if kind in ("bep", "bmp"):
            return self.models.generator("sip", m=1 if kind == "bmp" else m, totals=totals)
        if kind == "hermite":
            return self.models.generator("irw", totals=totals)
        if kind == "boundary_sep2j":
            return self.models.generator("dual_absorbing_sep2j", j=j, totals=totals)
        if kind == "boundary_bep":
            return self.models.generator("dual_absorbing_sip", m=m, totals=totals)
        raise UnsupportedModel(f"no dual generator for {kind!r}")

    def duality_record(self, kind: str, totals: Iterable[int], j: Any = None,
                       m: Any = None) -> VerificationRecord:
        """
        Exact duality of a diffusion or boundary-driven model with its dual

        bep: BEP(m) vs SIP(m); bmp: one-level BMP vs SIP(1); hermite: Hermite
        diffusion vs independent walkers; boundary_sep2j and boundary_bep:
        reservoirs vs the absorbing dual.
        """
        totals = list(totals)
        dual = self.dual_generator(kind, totals, j=j, m=m)
        D = self.duality_function(kind, j=j, m=m)
        if kind == "boundary_sep2j":
            primal = self.models.generator("boundary_sep2j", j=j)
            return verify_duality(primal, dual, D, identity="boundary 2j-SEP vs absorbing dual")
        identities = {
            "bep": "BEP vs SIP",
            "bmp": "BMP vs SIP(1)",
            "hermite": "Hermite diffusion vs walkers",
            "boundary_bep": "boundary BEP vs absorbing SIP",
        }
        operator = self.models.operator(kind, m=m, variables=D.variables)
        return verify_duality(operator, dual, D, identity=identities[kind])
