"""
Exact and high-precision linear algebra
Rational parsing, sparse Kronecker products, residual witnesses, solves and
the matrix-exponential oracle
"""
import logging
from fractions import Fraction
from typing import Any, Dict, Optional, Sequence, Tuple

import mpmath
import numpy as np
import scipy.linalg
import sympy
from sympy import Rational, SparseMatrix
from sympy.polys.matrices import DomainMatrix

from dualbench.config import config

logger = logging.getLogger(__name__)


def to_rational(value: Any) -> Rational:
    """
    Parse a number into an exact rational

    Args:
        value: int, Fraction, sympy Rational, float or string like "1/4" / "0.25"

    Returns:
        sympy Rational

    Raises:
        ValueError: if the value is not a finite rational number
    """
    if isinstance(value, bool):
        raise ValueError(f"not a number: {value!r}")
    if isinstance(value, sympy.Rational):
        return value
    if isinstance(value, int):
        return sympy.Integer(value)
    if isinstance(value, Fraction):
        return sympy.Rational(value.numerator, value.denominator)
    if isinstance(value, float):
        if not np.isfinite(value):
            raise ValueError(f"not a finite number: {value!r}")
        return sympy.Rational(repr(value))
    if isinstance(value, str):
        try:
            parsed = sympy.Rational(value.strip())
        except (TypeError, ValueError, sympy.SympifyError) as exc:
            raise ValueError(f"not a rational number: {value!r}") from exc
        return parsed
    raise ValueError(f"not a rational number: {value!r}")


def _mpf(value: Any) -> mpmath.mpf:
    if isinstance(value, sympy.Rational):
        return mpmath.mpf(int(value.p)) / int(value.q)
    return mpmath.mpf(float(value))


def diagonal(values: Sequence[Any]) -> SparseMatrix:
    n = len(values)
    return SparseMatrix(n, n, {(k, k): v for k, v in enumerate(values) if v != 0})


def kron(a: SparseMatrix, b: SparseMatrix) -> SparseMatrix:
    """Sparse Kronecker product, a's index most significant"""
    entries: Dict[Tuple[int, int], Any] = {}
    b_items = b.todok().items()
    for (i, j), v in a.todok().items():
        for (k, l), w in b_items:
            entries[(i * b.rows + k, j * b.cols + l)] = v * w
    return SparseMatrix(a.rows * b.rows, a.cols * b.cols, entries)


def max_abs_entry(m: SparseMatrix) -> Tuple[Rational, Optional[Tuple[int, int]]]:
    """
    Largest absolute entry and its position

    Returns:
        (value, (row, col)) with (0, None) for the zero matrix; ties resolve to
        the first position in row-major order
    """
    best = sympy.S.Zero
    where = None
    for key in sorted(m.todok()):
        value = abs(m[key])
        if value > best:
            best, where = value, key
    return best, where


def solve(a: SparseMatrix, b: SparseMatrix) -> Tuple[SparseMatrix, bool]:
    """
    Solve a X = b

    Exact over the rationals up to config.EXACT_SOLVE_LIMIT unknowns, then in
    mpmath at config.EXPM_PRECISION_BITS.

    Returns:
        (solution, exact flag)
    """
    if a.rows <= config.EXACT_SOLVE_LIMIT:
        lhs = DomainMatrix.from_Matrix(sympy.Matrix(a)).to_field()
        rhs = DomainMatrix.from_Matrix(sympy.Matrix(b)).convert_to(lhs.domain)
        return SparseMatrix(lhs.lu_solve(rhs).to_Matrix()), True
    logger.info("Falling back to %d-bit solve for %d unknowns",
                config.EXPM_PRECISION_BITS, a.rows)
    with mpmath.workprec(config.EXPM_PRECISION_BITS):
        lhs = mpmath.matrix([[_mpf(v) for v in row] for row in sympy.Matrix(a).tolist()])
        columns = []
        for c in range(b.cols):
            rhs = mpmath.matrix([_mpf(b[r, c]) for r in range(b.rows)])
            columns.append(mpmath.lu_solve(lhs, rhs))
        values = {(r, c): sympy.Float(mpmath.nstr(columns[c][r], 40), 40)
                  for c in range(b.cols) for r in range(b.rows) if columns[c][r] != 0}
    return SparseMatrix(b.rows, b.cols, values), False


def expm(generator: np.ndarray, t: float) -> np.ndarray:
    """
    Matrix exponential oracle e^{tL}

    Small matrices go through mpmath at config.EXPM_PRECISION_BITS; larger ones
    through scipy's scaling-and-squaring.
    """
    n = generator.shape[0]
    if n > config.DENSE_STATE_LIMIT:
        raise ValueError(f"{n} states exceed the dense limit {config.DENSE_STATE_LIMIT}")
    if n <= config.MPMATH_EXPM_LIMIT:
        with mpmath.workprec(config.EXPM_PRECISION_BITS):
            scaled = mpmath.matrix(generator.tolist()) * _mpf(t)
            result = mpmath.expm(scaled)
            return np.array(result.tolist(), dtype=float)
    return scipy.linalg.expm(generator * t)


def exact_expm(matrix: SparseMatrix, t: Any) -> np.ndarray:
    """e^{tA} for an exact rational matrix, via the high-precision oracle"""
    if matrix.rows <= config.MPMATH_EXPM_LIMIT:
        with mpmath.workprec(config.EXPM_PRECISION_BITS):
            rows = [[_mpf(v) for v in row] for row in sympy.Matrix(matrix).tolist()]
            result = mpmath.expm(mpmath.matrix(rows) * _mpf(t))
            return np.array(result.tolist(), dtype=float)
    dense = np.array(sympy.Matrix(matrix).tolist(), dtype=float)
    return expm(dense, float(t))
