"""Partitions, Jack-polynomial normalisations and the terminating series.

For ``Sigma = I_M`` the moment ``R_2k(x)`` is a finite sum over partitions
``nu`` fitting in a ``k x M`` box of

    [-k]_nu [-k+1-beta/2]_nu / [beta N/2]_nu * C_nu(1^M) / |nu|!

times ``|x|^(2kM - 2|nu|)``, with Jack parameter ``alpha = 2/beta``.  Each
term is formed as (sign, log-magnitude) and the terms of one ``|x|^2``
power are added with :func:`math.fsum`.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np
from scipy.special import gammaln

from .errors import ConvergenceWarning, DomainError
from .special_functions import EnsembleSpec

__all__ = [
    "Partition",
    "SeriesPolynomial",
    "SeriesEstimate",
    "enumerate_partitions",
    "partitions_of",
    "gen_pochhammer",
    "jack_dprime",
    "jack_identity_value",
    "exact_moment",
    "noninteger_moment",
]


@dataclass(frozen=True, order=True)
class Partition:
    """Weakly decreasing tuple of positive integers."""

    parts: tuple = ()

    def __post_init__(self):
        parts = tuple(int(p) for p in self.parts)
        if any(p <= 0 for p in parts):
            raise ValueError(f"parts must be positive, got {parts}")
        if any(a < b for a, b in zip(parts, parts[1:])):
            raise ValueError(f"parts must be weakly decreasing, got {parts}")
        object.__setattr__(self, "parts", parts)

    def __len__(self):
        return len(self.parts)

    def __iter__(self):
        return iter(self.parts)

    def __getitem__(self, i):
        return self.parts[i]

    def __repr__(self):
        return f"Partition{self.parts}"

    @property
    def weight(self) -> int:
        return sum(self.parts)

    @property
    def length(self) -> int:
        return len(self.parts)

    def doubled(self) -> "Partition":
        """Every part multiplied by two."""
        return Partition(tuple(2 * p for p in self.parts))

    def squared(self) -> "Partition":
        """Every part repeated twice."""
        return Partition(tuple(p for p in self.parts for _ in range(2)))

    def conjugate(self) -> "Partition":
        if not self.parts:
            return self
        return Partition(tuple(sum(1 for p in self.parts if p > j)
                               for j in range(self.parts[0])))

    def cells(self):
        """Yield ``(arm, leg, row, col)`` for each box, rows/cols 0-based."""
        conj = self.conjugate().parts
        for i, row in enumerate(self.parts):
            for j in range(row):
                yield row - j - 1, conj[j] - i - 1, i, j


def enumerate_partitions(max_part, max_length) -> Iterator[Partition]:
    """All partitions with ``nu_1 <= max_part`` and at most ``max_length`` parts.

    The empty partition comes first; every partition appears exactly once.
    """
    if max_part < 0 or max_length < 0:
        raise ValueError("max_part and max_length must be non-negative")

    def rec(prefix, bound, room):
        yield Partition(tuple(prefix))
        if room == 0:
            return
        for p in range(1, bound + 1):
            prefix.append(p)
            yield from rec(prefix, p, room - 1)
            prefix.pop()

    yield from rec([], int(max_part), int(max_length))


def partitions_of(n, max_length=None, max_part=None) -> Iterator[Partition]:
    """Partitions of the integer ``n``, optionally restricted in length and part size."""
    max_length = n if max_length is None else max_length
    max_part = n if max_part is None else max_part

    def rec(prefix, remaining, bound, room):
        if remaining == 0:
            yield Partition(tuple(prefix))
            return
        if room == 0:
            return
        for p in range(min(bound, remaining), 0, -1):
            if p * room < remaining:
                break
            prefix.append(p)
            yield from rec(prefix, remaining - p, p, room - 1)
            prefix.pop()

    yield from rec([], int(n), int(max_part), int(max_length))


def _log_pochhammer_int(u, n):
    """``(sign, log|(u)_n|)`` for a non-negative integer ``n``."""
    sign = 1
    total = []
    for i in range(n):
        f = u + i
        if f == 0:
            return 0, -math.inf
        if f < 0:
            sign = -sign
        total.append(math.log(abs(f)))
    return sign, math.fsum(total)


def _log_gen_pochhammer(u, alpha, nu):
    sign = 1
    logs = []
    for j, part in enumerate(nu):
        s, lg = _log_pochhammer_int(u - j / alpha, part)
        if s == 0:
            return 0, -math.inf
        sign *= s
        logs.append(lg)
    return sign, math.fsum(logs)


def gen_pochhammer(u, alpha, nu) -> float:
    """Generalised Pochhammer symbol ``prod_j (u - (j-1)/alpha)_{nu_j}``."""
    sign, lg = _log_gen_pochhammer(u, alpha, _as_partition(nu))
    return 0.0 if sign == 0 else sign * math.exp(lg)


def _as_partition(nu) -> Partition:
    return nu if isinstance(nu, Partition) else Partition(tuple(nu))


def _log_poch_real(u, s):
    return gammaln(u + s) - gammaln(u)


def _log_jack_dprime(nu: Partition, alpha, m=None):
    m = max(len(nu), 1) if m is None else m
    if m < len(nu):
        raise ValueError("padding size must be at least the partition length")
    inv = 1.0 / alpha
    padded = list(nu.parts) + [0] * (m - len(nu))
    _, lg_top = _log_gen_pochhammer((m - 1) / alpha + 1, alpha, nu)
    logs = []
    for i in range(m):
        for j in range(i + 1, m):
            base = 1 + (j - i - 1) / alpha
            logs.append(_log_poch_real(base + padded[i] - padded[j], inv)
                        - _log_poch_real(base, inv))
    return nu.weight * math.log(alpha) + lg_top - math.fsum(logs)


def jack_dprime(nu, alpha, m=None) -> float:
    """Normalising constant ``d'_nu`` linking ``P_nu`` and ``C_nu``.

    Computed from the generalised Pochhammer symbol and the pair product
    ``f-bar`` over an ``m``-row padding of ``nu``; the value does not depend
    on ``m`` (default: the length of ``nu``).
    """
    return math.exp(_log_jack_dprime(_as_partition(nu), alpha, m))


def _log_jack_identity_value(nu: Partition, alpha, m):
    n = nu.weight
    numer = []
    denom = []
    for arm, leg, row, col in nu.cells():
        numer.append(math.log(m - row + alpha * col))
        denom.append(math.log(alpha * arm + leg + 1))
    log_p = math.fsum(numer) - math.fsum(denom)
    return n * math.log(alpha) + math.lgamma(n + 1) - _log_jack_dprime(nu, alpha) + log_p


def jack_identity_value(nu, alpha, m) -> float:
    """``C_nu^(alpha)`` evaluated at the ``m x m`` identity matrix.

    Uses the principal specialisation
    ``P_nu(1^m) = prod_s (m - row(s) + alpha col(s)) / (alpha arm(s) + leg(s) + 1)``
    and ``C_nu = alpha^|nu| |nu|! P_nu / d'_nu``.  Zero when ``nu`` has more
    than ``m`` parts.
    """
    nu = _as_partition(nu)
    if len(nu) > m:
        return 0.0
    return math.exp(_log_jack_identity_value(nu, alpha, m))


@dataclass
class SeriesPolynomial:
    """``R_2k`` as a polynomial in ``r = |x|^2`` (``x^2`` for ``beta = 1``).

    ``coefficients[p]`` multiplies ``r**p``; the degree is ``k M``.
    """

    coefficients: np.ndarray
    spec: EnsembleSpec
    k: int

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def at_modulus_squared(self, r):
        return np.polynomial.polynomial.polyval(r, self.coefficients)

    def __call__(self, x):
        x = complex(x)
        if self.spec.beta == 1 and x.imag != 0:
            raise DomainError("beta=1 moments need a real evaluation point")
        return float(self.at_modulus_squared(abs(x) ** 2))


def _series_params(spec, gamma):
    h = spec.beta / 2.0
    return -gamma / 2.0, -gamma / 2.0 + 1 - h, h * spec.n_total


def _log_term(nu, a, b, c, alpha, m):
    sa, la = _log_gen_pochhammer(a, alpha, nu)
    if sa == 0:
        return 0, -math.inf
    sb, lb = _log_gen_pochhammer(b, alpha, nu)
    if sb == 0:
        return 0, -math.inf
    sc, lc = _log_gen_pochhammer(c, alpha, nu)
    lg = la + lb - lc + _log_jack_identity_value(nu, alpha, m) - math.lgamma(nu.weight + 1)
    return sa * sb * sc, lg


def exact_moment(spec: EnsembleSpec, k) -> SeriesPolynomial:
    """Exact ``R_2k(x)`` for ``Sigma = I`` as a polynomial in ``|x|^2``.

    The series terminates: only partitions with ``nu_1 <= k`` and at most
    ``M`` parts contribute.  Conventions: ``beta = 1`` gives
    ``E det(x - A)^(2k)`` with real ``x``; ``beta = 2`` gives
    ``E|det(x - A)|^(2k)``; ``beta = 4`` gives ``E det(x - A)^k`` with the
    ``2M``-dimensional complex determinant.
    """
    if int(k) != k or k < 0:
        raise DomainError(f"k must be a non-negative integer, got {k!r}")
    k = int(k)
    m = spec.m_trunc
    a, b, c = _series_params(spec, 2 * k)
    alpha = spec.alpha
    shells = [[] for _ in range(k * m + 1)]
    for nu in enumerate_partitions(k, m):
        sign, lg = _log_term(nu, a, b, c, alpha, m)
        if sign:
            shells[nu.weight].append(sign * math.exp(lg))
    coeffs = np.array([math.fsum(shells[k * m - p]) for p in range(k * m + 1)])
    return SeriesPolynomial(coeffs, spec, k)


@dataclass
class SeriesEstimate:
    """Truncated series value with a geometric tail estimate."""

    value: float
    tail_bound: float
    weight_cap: int
    shell_sums: list = field(repr=False, default_factory=list)
    ratio: float = 0.0


def noninteger_moment(spec: EnsembleSpec, gamma, x_mod, weight_cap=60) -> SeriesEstimate:
    """``R_gamma(x)`` for real ``gamma`` and ``|x| > 1`` from the convergent series.

    Sums all shells ``|nu| <= weight_cap`` (partitions with at most ``M``
    parts).  The tail is estimated as ``|s_last| r / (1 - r)`` with ``r`` the
    ratio of the last two shell sums; a :class:`ConvergenceWarning` is issued
    (and the bound is infinite) when ``r >= 1``.
    """
    x_mod = abs(complex(x_mod))
    if not x_mod > 1:
        raise DomainError(f"the series needs |x| > 1, got |x|={x_mod}")
    if not gamma > -1:
        raise DomainError(f"gamma must exceed -1, got {gamma}")
    if gamma == 0:
        return SeriesEstimate(1.0, 0.0, weight_cap, [1.0], 0.0)
    m = spec.m_trunc
    a, b, c = _series_params(spec, float(gamma))
    alpha = spec.alpha
    inv_r = 1.0 / (x_mod * x_mod)
    shell_sums = []
    for n in range(weight_cap + 1):
        terms = []
        for nu in partitions_of(n, max_length=m):
            sign, lg = _log_term(nu, a, b, c, alpha, m)
            if sign:
                terms.append(sign * math.exp(lg + n * math.log(inv_r)))
        shell_sums.append(math.fsum(terms))
    pref = math.exp(gamma * m * math.log(x_mod))
    value = pref * math.fsum(shell_sums)

    last, prev = abs(shell_sums[-1]), abs(shell_sums[-2]) if weight_cap >= 1 else 0.0
    if last == 0.0:
        ratio, tail = 0.0, 0.0
    elif prev == 0.0:
        ratio, tail = math.inf, math.inf
    else:
        ratio = last / prev
        tail = pref * last * ratio / (1 - ratio) if ratio < 1 else math.inf
    if ratio >= 1:
        warnings.warn(f"shell ratio {ratio:.3g} >= 1; series tail not controlled",
                      ConvergenceWarning, stacklevel=2)
    return SeriesEstimate(value, tail, weight_cap, shell_sums, ratio)
