"""Closed-form Gamma products for truncated Haar ensembles.

Every quantity here is a finite product of Gamma-function ratios.  All of
them are accumulated in log space (``math.fsum`` keeps the sum correctly rounded) and
handed back as :class:`GammaProductValue`, so that products over ``N`` up to
``10**6`` factors never overflow.  Cumulants are obtained by differentiating
the log-products analytically with polygamma functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, polygamma

from .errors import DomainError, PoleError

__all__ = [
    "EnsembleSpec",
    "GammaProductValue",
    "selberg_const",
    "skn_const",
    "boundary_moment",
    "haar_group_moment",
    "logdet_mgf",
    "logdet_cumulants",
    "gamma_limit_mgf",
    "mehta_const",
    "laguerre_const",
    "HAAR_GROUPS",
]

HAAR_GROUPS = ("U", "SO_even", "Sp", "O_even")


@dataclass(frozen=True)
class EnsembleSpec:
    """Truncated ensemble: top-left ``M x M`` block of a Haar matrix of size ``N``.

    For ``beta = 4`` the sizes count quaternion entries, so the complex
    representation of the truncation is ``2M x 2M``.
    """

    beta: int
    n_total: int
    m_trunc: int

    def __post_init__(self):
        if self.beta not in (1, 2, 4):
            raise DomainError(f"beta must be 1, 2 or 4, got {self.beta!r}")
        for name in ("n_total", "m_trunc"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise DomainError(f"{name} must be a positive integer, got {value!r}")
        if self.m_trunc > self.n_total:
            raise DomainError(
                f"need 1 <= M <= N, got M={self.m_trunc}, N={self.n_total}")

    @property
    def kappa(self) -> int:
        return self.n_total - self.m_trunc

    @property
    def mu(self) -> float:
        return self.m_trunc / self.n_total

    @property
    def alpha(self) -> float:
        return 2.0 / self.beta

    @property
    def beta_prime(self) -> int:
        return 4 // self.beta

    @property
    def rep_dim(self) -> int:
        """Size of the complex matrix representing the truncation."""
        return 2 * self.m_trunc if self.beta == 4 else self.m_trunc


@dataclass(frozen=True)
class GammaProductValue:
    """A positive number stored as its natural logarithm."""

    log_value: float
    sign: int = 1

    @property
    def value(self) -> float:
        return self.sign * math.exp(self.log_value)

    def __float__(self):
        return self.value

    def __mul__(self, other):
        if isinstance(other, GammaProductValue):
            return GammaProductValue(self.log_value + other.log_value,
                                     self.sign * other.sign)
        return NotImplemented

    def __truediv__(self, other):
        if isinstance(other, GammaProductValue):
            return GammaProductValue(self.log_value - other.log_value,
                                     self.sign * other.sign)
        return NotImplemented


ONE = GammaProductValue(0.0)


def _lgamma_sum(numer, denom) -> float:
    """``sum(log Gamma(numer)) - sum(log Gamma(denom))`` with pole checks."""
    numer = np.atleast_1d(np.asarray(numer, dtype=float))
    denom = np.atleast_1d(np.asarray(denom, dtype=float))
    for arr in (numer, denom):
        if arr.size and not np.all(arr > 0):
            bad = arr[~(arr > 0)][0]
            raise PoleError(f"Gamma argument {bad:g} is not positive")
    return math.fsum(np.concatenate([gammaln(numer), -gammaln(denom)]).tolist())


def _check_int(name, value, minimum):
    if int(value) != value or value < minimum:
        raise DomainError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)


def selberg_const(m, a, b, lam) -> GammaProductValue:
    r"""Selberg integral :math:`S_m(a, b, \lambda)`.

    .. math::

        S_m(a,b,\lambda) = \int_{[0,1]^m} \prod_j y_j^a (1-y_j)^b
        |\Delta(y)|^\lambda \, dy

    Parameters
    ----------
    m : int
        Number of integration variables (``m >= 1``).
    a, b : float
        Exponents, both ``> -1``.
    lam : float
        Power of the Vandermonde determinant, ``>= 0``.
    """
    m = _check_int("m", m, 1)
    if not (a > -1 and b > -1 and lam >= 0):
        raise DomainError(f"Selberg needs a, b > -1 and lambda >= 0; got a={a}, b={b}, lambda={lam}")
    j = np.arange(m, dtype=float)
    h = lam / 2.0
    numer = np.concatenate([a + 1 + j * h, b + 1 + j * h, 1 + (j + 1) * h])
    denom = np.concatenate([a + b + 2 + (m + j - 1) * h, np.full(m, 1 + h)])
    return GammaProductValue(_lgamma_sum(numer, denom))


def skn_const(k, n_total, beta) -> GammaProductValue:
    """Normalisation of the ``k``-fold duality integral for size-``N`` groups."""
    k = _check_int("k", k, 1)
    n_total = _check_int("N", n_total, 1)
    if beta not in (1, 2, 4):
        raise DomainError(f"beta must be 1, 2 or 4, got {beta!r}")
    c = 2.0 / beta
    j = np.arange(k, dtype=float)
    numer = np.concatenate([n_total + 1 + j * c, 1 + j * c, 1 + (j + 1) * c])
    denom = np.concatenate([n_total + 2 + (k + j - 1) * c, np.full(k, 1 + c)])
    return GammaProductValue(_lgamma_sum(numer, denom))


def _theta_is_real_axis(theta) -> bool:
    r = math.remainder(float(theta), math.pi)
    return abs(r) < 1e-12


def boundary_moment(spec: EnsembleSpec, gamma, theta=0.0) -> GammaProductValue:
    r"""Moment of the characteristic polynomial on the unit circle.

    Returns :math:`E|\det(e^{i\theta} - A)|^\gamma` for ``beta = 1, 2`` and
    :math:`E\,\det(e^{i\theta} - A)^\gamma` for ``beta = 4``, where the
    determinant is taken in the ``2M x 2M`` complex representation (and is
    therefore real and non-negative).  For ``beta = 1`` only ``theta`` in
    ``{0, pi}`` is admissible.  The products do not depend on ``theta``.

    ``gamma = 0`` gives exactly 1.  Otherwise ``gamma > -1`` is required for
    ``beta = 2`` and ``gamma > 0`` for ``beta`` in ``{1, 4}``.
    """
    beta = spec.beta
    if beta == 1 and not _theta_is_real_axis(theta):
        raise DomainError("beta=1 needs theta in {0, pi}")
    if gamma == 0:
        return ONE
    if beta == 2 and not gamma > -1:
        raise DomainError(f"beta=2 boundary moment needs gamma > -1, got {gamma}")
    if beta in (1, 4) and not gamma > 0:
        raise DomainError(f"beta={beta} boundary moment needs gamma > 0, got {gamma}")

    j = np.arange(spec.kappa + 1, spec.n_total + 1, dtype=float)
    g = float(gamma)
    if beta == 1:
        numer = np.concatenate([j / 2, (j - 1) / 2 + g])
        denom = np.concatenate([j / 2 + g / 2, (j - 1) / 2 + g / 2])
    elif beta == 2:
        numer = np.concatenate([j, j + g])
        denom = np.concatenate([j + g / 2, j + g / 2])
    else:
        numer = np.concatenate([2 * j, 2 * j + 2 * g + 1])
        denom = np.concatenate([2 * j + g, 2 * j + g + 1])
    return GammaProductValue(_lgamma_sum(numer, denom))


def haar_group_moment(group, n, gamma) -> GammaProductValue:
    r"""Characteristic-polynomial moments over the classical compact groups.

    ``group`` selects the matrix group and the quantity returned:

    ========== ============ =======================================
    group      matrices     moment
    ========== ============ =======================================
    ``U``      ``U(n)``     :math:`E|\det(e^{i\theta}-U)|^\gamma`
    ``SO_even`` ``SO(2n)``  :math:`E\det(I-U)^\gamma`
    ``O_even`` ``O(2n)``    :math:`E\det(I-U)^\gamma` (half of SO)
    ``Sp``     ``Sp(2n)``   :math:`E\det(I-U)^\gamma`
    ========== ============ =======================================

    The ``O_even`` value is half the ``SO_even`` value, which only holds for
    ``gamma > 0`` (the ``det = -1`` component contributes ``0**gamma``).
    """
    n = _check_int("n", n, 1)
    if group not in HAAR_GROUPS:
        raise DomainError(f"group must be one of {HAAR_GROUPS}, got {group!r}")
    g = float(gamma)
    if group == "O_even":
        if not g > 0:
            raise DomainError("O_even moments are only defined here for gamma > 0")
        half = GammaProductValue(-math.log(2.0))
        return half * haar_group_moment("SO_even", n, g)
    if g == 0:
        return ONE
    if group == "U":
        if not g > -1:
            raise DomainError(f"U(n) moment needs gamma > -1, got {gamma}")
        return boundary_moment(EnsembleSpec(2, n, n), g)
    if not g > 0:
        raise DomainError(f"{group} moment needs gamma > 0, got {gamma}")
    j = np.arange(1, n + 1, dtype=float)
    if group == "SO_even":
        numer = np.concatenate([n - 1 + j, g - 0.5 + j])
        denom = np.concatenate([j - 0.5, n - 1 + g + j])
    else:
        numer = np.concatenate([1 + n + j, 0.5 + g + j])
        denom = np.concatenate([0.5 + j, 1 + g + n + j])
    return GammaProductValue(2 * n * g * math.log(2.0) + _lgamma_sum(numer, denom))


def logdet_mgf(spec: EnsembleSpec, gamma, form="m_fold") -> GammaProductValue:
    r"""Moment generating function :math:`E|\det A|^\gamma` of ``log|det A|``.

    ``form="m_fold"`` multiplies ``M`` Gamma ratios, ``form="kappa_fold"``
    the equivalent ``N - M`` ratios.  For ``beta = 4``, ``|det A|`` is the
    square root of the ``2M x 2M`` complex determinant.
    """
    if form not in ("m_fold", "kappa_fold"):
        raise DomainError(f"form must be 'm_fold' or 'kappa_fold', got {form!r}")
    h = spec.beta / 2.0
    g = float(gamma) / 2.0
    if not g + h > 0:
        raise PoleError(f"E|det A|^gamma diverges for gamma <= -beta (gamma={gamma})")
    if g == 0:
        return ONE
    kappa, m = spec.kappa, spec.m_trunc
    if form == "m_fold":
        j = np.arange(m, dtype=float)
        numer = np.concatenate([g + h * (1 + j), h * (kappa + 1 + j)])
        denom = np.concatenate([h * (1 + j), h * (kappa + 1 + j) + g])
    else:
        j = np.arange(kappa, dtype=float)
        numer = np.concatenate([h * (m + 1 + j), g + h * (1 + j)])
        denom = np.concatenate([h * (1 + j), g + h * (m + 1 + j)])
    return GammaProductValue(_lgamma_sum(numer, denom))


def _boundary_cumulant_terms(beta, j, order):
    """Per-factor contribution of the boundary product to a cumulant."""
    p = order - 1
    if beta == 2:
        return (1 - 2.0 ** (1 - order)) * polygamma(p, j)
    if beta == 1:
        return ((1 - 2.0 ** -order) * polygamma(p, (j - 1) / 2)
                - 2.0 ** -order * polygamma(p, j / 2))
    return (2.0 ** order - 1) * polygamma(p, 2 * j + 1) - polygamma(p, 2 * j)


def logdet_cumulants(spec: EnsembleSpec, order, at_boundary=False) -> float:
    r"""Cumulant of order 1, 2 or 3 of a log-determinant, in closed form.

    With ``at_boundary=False`` this is the cumulant of ``log|det A|``.  With
    ``at_boundary=True`` it is the cumulant of
    :math:`\log|\det(e^{i\theta}-A)|` (``2M``-dimensional determinant for
    ``beta = 4``), computed as the group cumulant at size ``N`` minus the
    group cumulant at size ``N - M``.
    """
    if order not in (1, 2, 3):
        raise DomainError(f"order must be 1, 2 or 3, got {order!r}")
    p = order - 1
    if not at_boundary:
        h = spec.beta / 2.0
        if spec.kappa <= spec.m_trunc:
            j = np.arange(spec.kappa, dtype=float)
            terms = polygamma(p, h * (1 + j)) - polygamma(p, h * (spec.m_trunc + 1 + j))
        else:
            j = np.arange(spec.m_trunc, dtype=float)
            terms = polygamma(p, h * (1 + j)) - polygamma(p, h * (spec.kappa + 1 + j))
        return float(0.5 ** order * np.sum(terms))

    if spec.beta == 1 and spec.kappa == 0:
        raise DomainError(
            "log|det(I - U)| over O(N) has an atom at -inf; cumulants need N > M")
    # group(N) minus group(N - M) telescopes to the factors j = N-M+1 .. N
    j = np.arange(spec.kappa + 1, spec.n_total + 1, dtype=float)
    return float(np.sum(_boundary_cumulant_terms(spec.beta, j, order)))


def gamma_limit_mgf(kappa, beta, gamma) -> GammaProductValue:
    r"""MGF of :math:`\tfrac12\sum_{j<\kappa}\log\Gamma_j` with Gamma shapes ``beta(1+j)/2``."""
    kappa = _check_int("kappa", kappa, 0)
    if beta not in (1, 2, 4):
        raise DomainError(f"beta must be 1, 2 or 4, got {beta!r}")
    j = np.arange(kappa, dtype=float)
    shape = beta / 2.0 * (1 + j)
    return GammaProductValue(_lgamma_sum(shape + gamma / 2.0, shape))


def mehta_const(k, beta_prime) -> GammaProductValue:
    r""":math:`\int_{\mathbb{R}^k} \prod e^{-t_i^2/2} |\Delta(t)|^{\beta'} dt`."""
    k = _check_int("k", k, 1)
    c = beta_prime / 2.0
    j = np.arange(k, dtype=float)
    log_val = 0.5 * k * math.log(2 * math.pi) + _lgamma_sum(1 + (1 + j) * c, np.full(k, 1 + c))
    return GammaProductValue(log_val)


def laguerre_const(k, beta_prime, kappa) -> GammaProductValue:
    r""":math:`\int_{[0,\infty)^k} \prod e^{-t_i} t_i^\kappa |\Delta(t)|^{\beta'} dt`."""
    k = _check_int("k", k, 1)
    c = beta_prime / 2.0
    j = np.arange(k, dtype=float)
    numer = np.concatenate([1 + (j + 1) * c, kappa + 1 + j * c])
    return GammaProductValue(_lgamma_sum(numer, np.full(k, 1 + c)))
