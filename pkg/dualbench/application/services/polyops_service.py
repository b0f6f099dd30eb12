"""
Polynomial operations service
Exact polynomial ring over QQ, differential operators in normal form and
their action on polynomials
"""
import logging
from dataclasses import dataclass
from itertools import product
from math import comb
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import sympy
from sympy import Poly, QQ, Rational, SparseMatrix, Symbol

from dualbench.application.errors import (
    CutoffExceeded, NotExpressibleInEnergy, UnknownVariable, UnsupportedModel,
)
from dualbench.infra.exact import exact_expm, to_rational
from dualbench.infra.models import DiffOperator, IntertwiningReport, OperatorTriple, RepresentationKind
from dualbench.infra.state_space import State

logger = logging.getLogger(__name__)

Index = Tuple[int, ...]

DUALITY_MODELS = ("bmp", "bep", "detflow", "irw-dual", "hermite")


# Variables and polynomials

def site_symbols(prefix: str, sites: Sequence[str], levels: int = 1) -> Tuple[Symbol, ...]:
    """x_1, x_2, ... for one level; x_1_1, x_1_2, ... (site-major) for several"""
    if levels == 1:
        return tuple(Symbol(f"{prefix}_{site}") for site in sites)
    return tuple(Symbol(f"{prefix}_{site}_{level}")
                 for site in sites for level in range(1, levels + 1))


def level_groups(sites: Sequence[str], levels: int,
                 x_prefix: str = "x", z_prefix: str = "z") -> Dict[Symbol, Tuple[Symbol, ...]]:
    """z_i -> (x_i_1, ..., x_i_m) in site order"""
    xs = site_symbols(x_prefix, sites, levels)
    zs = site_symbols(z_prefix, sites)
    return {z: xs[k * levels:(k + 1) * levels] for k, z in enumerate(zs)}


def poly(expr, variables: Sequence[Symbol]) -> Poly:
    return Poly(expr, *variables, domain=QQ)


def rising(a: Rational, k: int) -> Rational:
    """(a)_k = a (a+1) ... (a+k-1), exact"""
    result = sympy.S.One
    for r in range(k):
        result *= a + r
    return result


def odd_double_factorial(n: int) -> int:
    """(2n-1)!!, with (-1)!! = 1"""
    result = 1
    for r in range(1, 2 * n, 2):
        result *= r
    return result


def _diff(p: Poly, index: Index) -> Poly:
    if not any(index):
        return p
    return p.diff(*[(k, order) for k, order in enumerate(index) if order])


# Operator construction

def _clean(terms: Mapping[Index, Poly]) -> Dict[Index, Poly]:
    return {index: coeff for index, coeff in terms.items() if not coeff.is_zero}


def extend(op: DiffOperator, variables: Sequence[Symbol]) -> DiffOperator:
    """Re-express an operator over a larger variable tuple"""
    variables = tuple(variables)
    if op.variables == variables:
        return op
    missing = [v for v in op.variables if v not in variables]
    if missing:
        raise UnknownVariable(f"variables {missing} not in {list(variables)}")
    position = {v: k for k, v in enumerate(op.variables)}
    terms = {}
    for index, coeff in op.terms.items():
        new_index = tuple(index[position[v]] if v in position else 0 for v in variables)
        terms[new_index] = poly(coeff.as_expr(), variables)
    return DiffOperator(variables, terms)


def multiplication(expr, variables: Sequence[Symbol]) -> DiffOperator:
    variables = tuple(variables)
    return DiffOperator(variables, _clean({(0,) * len(variables): poly(expr, variables)}))


def derivative(var: Symbol, variables: Sequence[Symbol], order: int = 1) -> DiffOperator:
    variables = tuple(variables)
    if var not in variables:
        raise UnknownVariable(f"{var} not in {list(variables)}")
    index = tuple(order if v == var else 0 for v in variables)
    return DiffOperator(variables, {index: poly(1, variables)})


def vector_field(coefficients: Mapping[Symbol, object],
                 variables: Sequence[Symbol]) -> DiffOperator:
    """sum_v c_v d/dv"""
    variables = tuple(variables)
    terms = {}
    for var, coeff in coefficients.items():
        index = tuple(1 if v == var else 0 for v in variables)
        terms[index] = poly(coeff, variables)
    return DiffOperator(variables, _clean(terms))


def add(*ops: DiffOperator) -> DiffOperator:
    variables = ops[0].variables
    terms: Dict[Index, Poly] = {}
    for op in ops:
        for index, coeff in extend(op, variables).terms.items():
            terms[index] = terms[index] + coeff if index in terms else coeff
    return DiffOperator(variables, _clean(terms))


def scale(op: DiffOperator, factor) -> DiffOperator:
    factor = to_rational(factor) if not isinstance(factor, sympy.Basic) else factor
    return DiffOperator(op.variables,
                        _clean({i: c * poly(factor, op.variables) for i, c in op.terms.items()}))


def left_multiply(expr, op: DiffOperator) -> DiffOperator:
    """f(x) * op"""
    factor = poly(expr, op.variables)
    return DiffOperator(op.variables, _clean({i: factor * c for i, c in op.terms.items()}))


def compose(a: DiffOperator, b: DiffOperator) -> DiffOperator:
    """
    Normal form of a o b (apply b first) by the Leibniz rule

    A d^alpha (B d^beta) = sum_{gamma <= alpha} C(alpha, gamma) A (d^gamma B) d^(alpha - gamma + beta)
    """
    variables = a.variables
    b = extend(b, variables)
    terms: Dict[Index, Poly] = {}
    for alpha, a_coeff in a.terms.items():
        for beta, b_coeff in b.terms.items():
            for gamma in product(*[range(k + 1) for k in alpha]):
                d = _diff(b_coeff, gamma)
                if d.is_zero:
                    continue
                weight = 1
                for k, g in zip(alpha, gamma):
                    weight *= comb(k, g)
                index = tuple(x - g + y for x, g, y in zip(alpha, gamma, beta))
                term = a_coeff * d * weight
                terms[index] = terms[index] + term if index in terms else term
    return DiffOperator(variables, _clean(terms))


def square(op: DiffOperator) -> DiffOperator:
    return compose(op, op)


# Application

def apply_diff_operator(op: DiffOperator, p: Poly) -> Poly:
    """
    Apply each coefficient x derivative term of op to p

    Raises:
        UnknownVariable: if an operator variable is not a generator of p
    """
    gens = tuple(p.gens)
    missing = [v for v in op.variables if v not in gens]
    if missing:
        raise UnknownVariable(f"operator variables {missing} not in polynomial generators {list(gens)}")
    op = extend(op, gens)
    if p.domain != QQ:
        p = p.set_domain(QQ)
    result = poly(0, gens)
    for index, coeff in op.terms.items():
        result += coeff * _diff(p, index)
    return result


def evaluate(p: Poly, point: Mapping[Symbol, float]) -> float:
    return float(p.as_expr().subs({v: sympy.Float(point[v], 30) for v in p.gens}))


@dataclass(frozen=True)
class PolynomialFamily:
    """xi -> polynomial duality function over continuous variables"""
    variables: Tuple[Symbol, ...]
    build: Callable[[State], Poly]
    name: str = ""

    def __call__(self, xi: State) -> Poly:
        return self.build(tuple(xi))

    def evaluate(self, points: np.ndarray, xi: State) -> np.ndarray:
        """Values at an array of points (rows aligned with variables)"""
        fn = sympy.lambdify(self.variables, self(xi).as_expr(), "numpy")
        points = np.atleast_2d(np.asarray(points, dtype=float))
        values = fn(*[points[:, k] for k in range(points.shape[1])])
        return np.broadcast_to(np.asarray(values, dtype=float), (points.shape[0],)).copy()


# Duality polynomials

def _single_site(model: str, var: Symbol, n: int, m: Optional[int]) -> sympy.Expr:
    if model == "bmp":
        return var ** (2 * n) / odd_double_factorial(n)
    if model == "bep":
        if m is None:
            raise UnsupportedModel("the BEP duality polynomial needs m")
        return var ** n / (2 ** n * rising(Rational(m, 2), n))
    if model in ("detflow", "irw-dual"):
        return var ** n
    if model == "hermite":
        return hermite_duality_sequence(n, var)[n].as_expr()
    raise UnsupportedModel(f"no duality polynomial for model {model!r}")


def duality_polynomial(model: str, xi: State, variables: Sequence[Symbol],
                       m: Optional[int] = None) -> Poly:
    """
    Product over sites of single-site duality polynomials

    bmp:               x^(2n) / (2n-1)!!
    bep:               z^n / (2^n (m/2)_n)
    detflow, irw-dual: x^n
    hermite:           He_n(x)
    """
    variables = tuple(variables)
    if len(xi) != len(variables):
        raise UnknownVariable(f"{len(xi)} occupations for {len(variables)} variables")
    expr = sympy.S.One
    for var, n in zip(variables, xi):
        if n:
            expr *= _single_site(model, var, n, m)
    return poly(expr, variables)


def duality_family(model: str, variables: Sequence[Symbol],
                   m: Optional[int] = None) -> PolynomialFamily:
    variables = tuple(variables)
    if model not in DUALITY_MODELS:
        raise UnsupportedModel(f"no duality polynomial for model {model!r}")
    if model == "bep" and m is None:
        raise UnsupportedModel("the BEP duality polynomial needs m")
    return PolynomialFamily(variables, lambda xi: duality_polynomial(model, xi, variables, m),
                            name=model)


def hermite_duality_sequence(n_max: int, var: Symbol = Symbol("x")) -> List[Poly]:
    """D(x,0) = 1, D(x,n+1) = (x - d/dx) D(x,n)"""
    sequence = [poly(1, [var])]
    for _ in range(n_max):
        last = sequence[-1]
        sequence.append(poly(var, [var]) * last - last.diff(var))
    return sequence


# Continuous ladder operators and intertwining

def continuous_su11_triple(variables: Sequence[Symbol], m: Optional[int] = None,
                           coordinates: str = "x") -> Dict[str, DiffOperator]:
    """
    Continuous su(1,1) operators of one site

    x-coordinates (one variable per level, m = number of levels):
        K+ = sum x^2/2, K- = sum d^2/2, K0 = sum x d/2 + m/4
    z-coordinates (single energy variable):
        K+ = z/2, K- = 2 z d^2 + m d, K0 = z d + m/4
    """
    variables = tuple(variables)
    if coordinates == "x":
        m = len(variables)
        plus = multiplication(sum(v ** 2 for v in variables) / 2, variables)
        minus = add(*[scale(derivative(v, variables, 2), Rational(1, 2)) for v in variables])
        zero = add(vector_field({v: v / 2 for v in variables}, variables),
                   multiplication(Rational(m, 4), variables))
        return {"+": plus, "-": minus, "0": zero}
    if coordinates == "z":
        (z,) = variables
        plus = multiplication(z / 2, variables)
        minus = add(left_multiply(2 * z, derivative(z, variables, 2)),
                    scale(derivative(z, variables), m))
        zero = add(vector_field({z: z}, variables), multiplication(Rational(m, 4), variables))
        return {"+": plus, "-": minus, "0": zero}
    raise UnsupportedModel(f"unknown coordinates {coordinates!r}")


def continuous_heisenberg_pair(var: Symbol) -> Dict[str, DiffOperator]:
    """a+ = x - d/dx, a- = d/dx acting on Hermite polynomials"""
    variables = (var,)
    plus = add(multiplication(var, variables), scale(derivative(var, variables), -1))
    return {"+": plus, "-": derivative(var, variables)}


def check_intertwining(continuous: Mapping[str, DiffOperator], discrete: OperatorTriple,
                       family: Sequence[Poly], xi_max: Optional[int] = None):
    """
    Compare K^a C(., xi) with sum_xi' C(., xi') K^a(xi', xi)

    Args:
        continuous: label -> continuous operator ("+", "-", optionally "0")
        discrete: Matching discrete representation
        family: C(., xi) for xi = 0 .. cutoff - 1
        xi_max: Largest xi checked, default cutoff - 2

    Returns:
        IntertwiningReport with the xi values of nonzero residuals per label
    """
    limit = discrete.dim - 2
    xi_max = limit if xi_max is None else xi_max
    if xi_max > limit or len(family) < xi_max + 2:
        raise CutoffExceeded(
            f"xi up to {xi_max} needs a cutoff of {xi_max + 2} and {xi_max + 2} family members")
    nonzero: Dict[str, Tuple[int, ...]] = {}
    for label, op in continuous.items():
        matrix = discrete.component(label)
        bad = []
        for xi in range(xi_max + 1):
            lhs = apply_diff_operator(op, family[xi])
            rhs = poly(0, family[xi].gens)
            for row in range(min(xi + 2, discrete.dim)):
                weight = matrix[row, xi]
                if weight != 0:
                    rhs += family[row] * weight
            if not (lhs - rhs).is_zero:
                bad.append(xi)
        nonzero[label] = tuple(bad)
    return IntertwiningReport(nonzero=nonzero, checked_up_to=xi_max)


# Energy coordinates

def lift_to_levels(q: Poly, groups: Mapping[Symbol, Sequence[Symbol]]) -> Poly:
    """Substitute z_i = sum_a x_{i,a}^2"""
    xs = [x for z in groups for x in groups[z]]
    expr = q.as_expr().subs({z: sum(x ** 2 for x in levels) for z, levels in groups.items()},
                            simultaneous=True)
    return poly(expr, xs)


def change_variables_energy(p: Poly, groups: Mapping[Symbol, Sequence[Symbol]]) -> Poly:
    """
    Rewrite a polynomial in x as a polynomial in the site energies

    Greedy division by lifted z-monomials on the lexicographic leading term.

    Raises:
        NotExpressibleInEnergy: if p is not in the subring generated by the z_i
    """
    zs = list(groups)
    xs = [x for z in zs for x in groups[z]]
    remainder = poly(p.as_expr(), xs)
    result = poly(0, zs)
    lifted_cache: Dict[Index, Poly] = {}
    while not remainder.is_zero:
        exponent, coeff = remainder.terms()[0]
        k = []
        offset = 0
        for z in zs:
            width = len(groups[z])
            block = exponent[offset:offset + width]
            offset += width
            if any(block[1:]) or block[0] % 2:
                raise NotExpressibleInEnergy(
                    f"{p.as_expr()} is not a polynomial in {zs}")
            k.append(block[0] // 2)
        k = tuple(k)
        if k not in lifted_cache:
            monomial = sympy.Mul(*[z ** e for z, e in zip(zs, k)])
            lifted_cache[k] = lift_to_levels(poly(monomial, zs), {z: groups[z] for z in zs})
        result += poly(sympy.Mul(*[z ** e for z, e in zip(zs, k)]), zs) * coeff
        remainder -= lifted_cache[k] * coeff
    return result


# Moment flow

def monomial_basis(n_vars: int, max_degree: int) -> List[Index]:
    """Exponent tuples with total degree <= max_degree, by degree then lex"""
    basis = [e for e in product(range(max_degree + 1), repeat=n_vars) if sum(e) <= max_degree]
    return sorted(basis, key=lambda e: (sum(e), tuple(-x for x in e)))


def operator_matrix(op: DiffOperator, basis: Sequence[Index]) -> SparseMatrix:
    """
    Matrix A with op(b_k) = sum_j A[j, k] b_j on a monomial basis

    Raises:
        CutoffExceeded: if op maps a basis monomial outside the basis
    """
    position = {e: k for k, e in enumerate(basis)}
    entries = {}
    for k, e in enumerate(basis):
        monomial = Poly.from_dict({e: 1}, *op.variables, domain=QQ)
        image = apply_diff_operator(op, monomial)
        for exponent, coeff in image.terms():
            if exponent not in position:
                raise CutoffExceeded(f"operator maps {e} to {exponent} outside the basis")
            entries[(position[exponent], k)] = coeff
    return SparseMatrix(len(basis), len(basis), entries)


def moment_flow(op: DiffOperator, p: Poly, point: Union[Mapping[Symbol, float], Sequence[float]],
                t: float) -> float:
    """
    (e^{t op} p)(point) for an operator that preserves polynomial degree

    Args:
        op: Degree non-increasing operator
        p: Polynomial over op's variables
        point: Evaluation point, by variable or aligned with op.variables
        t: Time

    Returns:
        Value of the evolved polynomial at the point
    """
    variables = op.variables
    p = poly(p.as_expr(), variables)
    basis = monomial_basis(len(variables), p.total_degree())
    matrix = operator_matrix(op, basis)
    coefficients = np.zeros(len(basis))
    position = {e: k for k, e in enumerate(basis)}
    for exponent, coeff in p.terms():
        coefficients[position[exponent]] = float(coeff)
    evolved = exact_expm(matrix, t) @ coefficients
    if isinstance(point, Mapping):
        values = np.array([float(point[v]) for v in variables])
    else:
        values = np.asarray(point, dtype=float)
    monomials = np.array([np.prod(values ** np.array(e)) for e in basis])
    return float(evolved @ monomials)


class PolyopsService:
    """Duality polynomials and operator actions over one tuple of variables"""

    def __init__(self, variables: Sequence[Symbol]):
        self.variables = tuple(variables)

    @classmethod
    def for_sites(cls, prefix: str, sites: Sequence[str], levels: int = 1) -> "PolyopsService":
        return cls(site_symbols(prefix, sites, levels))

    def family(self, model: str, m: Optional[int] = None) -> PolynomialFamily:
        return duality_family(model, self.variables, m)

    def apply(self, op: DiffOperator, p: Poly) -> Poly:
        return apply_diff_operator(extend(op, self.variables), poly(p.as_expr(), self.variables))

    def expectation(self, op: DiffOperator, p: Poly, point: Sequence[float], t: float) -> float:
        """E[p(X_t)] from the given point for the diffusion generated by op"""
        return moment_flow(extend(op, self.variables), p, point, t)

    def intertwining(self, discrete: OperatorTriple) -> IntertwiningReport:
        """
        Single-site intertwining of the discrete representation with its
        continuous counterpart through the duality polynomials

        Heisenberg: Hermite polynomials and (x - d/dx, d/dx).
        SU(1,1): z^n / (2^n (m/2)_n) and the energy-coordinate triple.

        Raises:
            UnsupportedModel: for representations without a continuous counterpart
        """
        if len(self.variables) != 1:
            raise UnknownVariable(f"intertwining is single-site, got {list(self.variables)}")
        (var,) = self.variables
        if discrete.kind is RepresentationKind.HEISENBERG:
            return check_intertwining(continuous_heisenberg_pair(var), discrete,
                                      hermite_duality_sequence(discrete.dim - 1, var))
        if discrete.kind is RepresentationKind.SU11:
            m = int(discrete.parameter)
            family = [duality_polynomial("bep", (k,), self.variables, m)
                      for k in range(discrete.dim)]
            return check_intertwining(continuous_su11_triple(self.variables, m, coordinates="z"),
                                      discrete, family)
        raise UnsupportedModel(f"no continuous counterpart for {discrete.kind.value}")
