"""
Utility functions for the minimax coding lab
"""
import math
from typing import Callable, Iterator, Sequence

import numpy as np
from scipy.special import gammaln

from config import ENUMERATION_GUARD, EIGENVALUE_FLOOR, FD_STEP, SIGNIFICANT_DIGITS
from exceptions import EnumerationLimitError, NumericalError


def as_vector(theta) -> np.ndarray:
    """Coerce a scalar or sequence parameter into a 1-d float array"""
    return np.atleast_1d(np.asarray(theta, dtype=float)).ravel()


def _checked_eigh(matrix: np.ndarray, floor: float, what: str):
    matrix = np.asarray(matrix, dtype=float)
    sym = 0.5 * (matrix + matrix.T)
    if not np.all(np.isfinite(sym)):
        raise NumericalError(f"{what}: matrix has non-finite entries\n{matrix}")
    values, vectors = np.linalg.eigh(sym)
    if values[0] < floor:
        raise NumericalError(
            f"{what}: smallest eigenvalue {values[0]:.3e} below floor {floor:.0e}\n{matrix}"
        )
    return values, vectors


def spd_sqrt(matrix: np.ndarray, floor: float = EIGENVALUE_FLOOR) -> np.ndarray:
    """Symmetric positive definite square root"""
    values, vectors = _checked_eigh(matrix, floor, "spd_sqrt")
    return (vectors * np.sqrt(values)) @ vectors.T


def inv_sqrt(matrix: np.ndarray, floor: float = EIGENVALUE_FLOOR) -> np.ndarray:
    """Inverse of the symmetric positive definite square root"""
    values, vectors = _checked_eigh(matrix, floor, "inv_sqrt")
    return (vectors / np.sqrt(values)) @ vectors.T


def log_det_spd(matrix: np.ndarray, floor: float = EIGENVALUE_FLOOR) -> float:
    values, _ = _checked_eigh(matrix, floor, "log_det")
    return float(np.sum(np.log(values)))


def spectral_norm(matrix: np.ndarray) -> float:
    """Largest absolute eigenvalue of a symmetric matrix"""
    sym = np.atleast_2d(np.asarray(matrix, dtype=float))
    return float(np.max(np.abs(np.linalg.eigvalsh(0.5 * (sym + sym.T)))))


def central_gradient(func: Callable[[np.ndarray], float], x, step: float = FD_STEP) -> np.ndarray:
    """Central finite-difference gradient of a scalar function"""
    x = as_vector(x)
    grad = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        grad[i] = (func(x + e) - func(x - e)) / (2.0 * step)
    return grad


def central_jacobian(func: Callable[[np.ndarray], np.ndarray], x, step: float = FD_STEP) -> np.ndarray:
    """Central finite-difference Jacobian, rows indexed by output coordinate"""
    x = as_vector(x)
    columns = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        columns.append((np.asarray(func(x + e), dtype=float) - np.asarray(func(x - e), dtype=float)) / (2.0 * step))
    return np.stack(columns, axis=-1)


def compositions(n: int, k: int) -> Iterator[tuple]:
    """All count vectors of length k summing to n, in lexicographic order"""
    if k == 1:
        yield (n,)
        return
    for first in range(n + 1):
        for rest in compositions(n - first, k - 1):
            yield (first,) + rest


def num_compositions(n: int, k: int) -> int:
    return math.comb(n + k - 1, k - 1)


def count_matrix(n: int, k: int, limit: int = ENUMERATION_GUARD) -> np.ndarray:
    """All count vectors of length k summing to n as rows of an int matrix"""
    total = num_compositions(n, k)
    if total > limit:
        raise EnumerationLimitError(total, limit)
    if k == 1:
        return np.array([[n]], dtype=np.int64)
    if k == 2:
        first = np.arange(n + 1, dtype=np.int64)
        return np.column_stack([first, n - first])
    return np.array(list(compositions(n, k)), dtype=np.int64).reshape(total, k)


def multinomial_coefficient(counts: Sequence[int]) -> int:
    """Exact n!/prod(c!) as a Python integer"""
    total = math.factorial(int(sum(counts)))
    for c in counts:
        total //= math.factorial(int(c))
    return total


def log_multinomial(counts: np.ndarray) -> np.ndarray:
    """Log multinomial coefficients for each row of a count matrix"""
    counts = np.atleast_2d(np.asarray(counts, dtype=float))
    return gammaln(counts.sum(axis=1) + 1.0) - gammaln(counts + 1.0).sum(axis=1)


def nats_to_bits(value: float) -> float:
    return value / math.log(2.0)


def format_number(value) -> str:
    """Format a number with the lab's fixed significant digits"""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.{SIGNIFICANT_DIGITS}g}"


def format_counts(counts: Sequence[int]) -> str:
    """Render a count vector as a compact CSV-safe token, e.g. 3|9"""
    return "|".join(str(int(c)) for c in counts)
