"""Truncated formal power series in two real scalars ``(b, lambda)`` with field coefficients."""
from __future__ import annotations

from collections import defaultdict
from typing import Callable, Iterable

import numpy as np


class BivariateSeries:
    """``sum c[m, n] b^m lambda^n`` with ``m + n <= max_total_degree``.

    Coefficients are numpy arrays (fields) or scalars; absent monomials are
    zero.  ``max_total_degree=None`` keeps every product term.
    """

    __slots__ = ("coeffs", "max_total_degree")

    def __init__(self, coeffs: dict | None = None, max_total_degree: int | None = None):
        self.max_total_degree = max_total_degree
        self.coeffs = {}
        for (m, n), c in (coeffs or {}).items():
            if m < 0 or n < 0:
                raise ValueError(f"negative exponent in monomial {(m, n)}")
            if self._keeps(m, n):
                self.coeffs[(m, n)] = c

    def _keeps(self, m: int, n: int) -> bool:
        return self.max_total_degree is None or m + n <= self.max_total_degree

    def _like(self, coeffs) -> "BivariateSeries":
        return BivariateSeries(coeffs, self.max_total_degree)

    @staticmethod
    def _degree(a: "BivariateSeries", b: "BivariateSeries"):
        if a.max_total_degree is None:
            return b.max_total_degree
        if b.max_total_degree is None:
            return a.max_total_degree
        return min(a.max_total_degree, b.max_total_degree)

    @classmethod
    def constant(cls, c, max_total_degree: int | None = None) -> "BivariateSeries":
        return cls({(0, 0): c}, max_total_degree)

    # ------------------------------------------------------------- access
    def coefficient(self, m: int, n: int):
        return self.coeffs.get((m, n), 0)

    def monomials(self) -> list[tuple[int, int]]:
        return sorted(self.coeffs)

    def __repr__(self):
        return f"BivariateSeries(monomials={self.monomials()}, D={self.max_total_degree})"

    # --------------------------------------------------------- ring laws
    def __add__(self, other):
        if not isinstance(other, BivariateSeries):
            other = BivariateSeries.constant(other)
        out = dict(self.coeffs)
        for key, c in other.coeffs.items():
            out[key] = out[key] + c if key in out else c
        return BivariateSeries(out, self._degree(self, other))

    __radd__ = __add__

    def __neg__(self):
        return self._like({k: -c for k, c in self.coeffs.items()})

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, BivariateSeries):
            return self._like({k: c * other for k, c in self.coeffs.items()})
        D = self._degree(self, other)
        out = {}
        for (m1, n1), c1 in self.coeffs.items():
            for (m2, n2), c2 in other.coeffs.items():
                key = (m1 + m2, n1 + n2)
                if D is not None and key[0] + key[1] > D:
                    continue
                out[key] = out[key] + c1 * c2 if key in out else c1 * c2
        return BivariateSeries(out, D)

    __rmul__ = __mul__

    def conj(self) -> "BivariateSeries":
        return self._like({k: np.conj(c) for k, c in self.coeffs.items()})

    def map(self, fn: Callable) -> "BivariateSeries":
        """Apply a linear map to every coefficient."""
        return self._like({k: fn(c) for k, c in self.coeffs.items()})

    def shift(self, dm: int, dn: int) -> "BivariateSeries":
        """Multiply by ``b^dm lambda^dn``."""
        return self._like({(m + dm, n + dn): c for (m, n), c in self.coeffs.items()})

    def d_b(self) -> "BivariateSeries":
        return self._like({(m - 1, n): m * c for (m, n), c in self.coeffs.items() if m > 0})

    def d_lambda(self) -> "BivariateSeries":
        return self._like({(m, n - 1): n * c for (m, n), c in self.coeffs.items() if n > 0})

    def truncate(self, max_total_degree: int | None) -> "BivariateSeries":
        return BivariateSeries(self.coeffs, max_total_degree)

    # -------------------------------------------------------- evaluation
    def evaluate(self, b: float, lam: float, exclude: Iterable[tuple[int, int]] = ()):
        skip = set(exclude)
        total = 0
        for (m, n), c in sorted(self.coeffs.items(), key=lambda kv: -(kv[0][0] + kv[0][1])):
            if (m, n) not in skip:
                total = total + c * (b ** m * lam ** n)
        return total

    def equals(self, other: "BivariateSeries", atol: float = 0.0) -> bool:
        keys = set(self.coeffs) | set(other.coeffs)
        return all(np.allclose(self.coefficient(*k), other.coefficient(*k), rtol=0, atol=atol)
                   for k in keys)


def monomial_sum(terms: Iterable[tuple[tuple[int, int], object]],
                 max_total_degree: int | None = None) -> BivariateSeries:
    acc = defaultdict(lambda: 0)
    for key, c in terms:
        acc[key] = acc[key] + c
    return BivariateSeries(dict(acc), max_total_degree)
