"""Leading-order asymptotics and limit-theorem parameters.

The large-``M`` formulas are assembled in log space and return the leading
term only; no ``o(1)`` corrections are modelled.  Finite-``M`` evaluations
use ``mu = M/N`` wherever the limit statements use its limiting value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.special import gammaln

from .errors import DomainError
from .quadrature import DEFAULT_QUADRATURE, QuadratureSpec, gbe_max_cdf, lbe_max_cdf
from .special_functions import EnsembleSpec, logdet_cumulants

__all__ = [
    "CLTParams",
    "E_BETA",
    "V_BETA",
    "strong_gbe_argument",
    "strong_gbe_factor",
    "strong_approx",
    "weak_modulus",
    "weak_approx",
    "clt_params_boundary",
    "clt_params_origin",
    "boundary_cumulant_sweep",
]

E_BETA = {1: -0.5, 2: 0.0, 4: 0.5}
V_BETA = {1: 1.0, 2: 0.5, 4: 1.0}
_REGIMES = ("weak", "strong", "origin_strong")


@dataclass(frozen=True)
class CLTParams:
    """Centering and scaling of a log-determinant limit theorem.

    For ``regime="weak"`` the mean and variance are ``e_beta log M`` and
    ``v_beta log M`` (``None`` when no ``M`` was supplied).  For
    ``regime="strong"`` they are the finite limits ``-e_beta log(1-mu)`` and
    ``-v_beta log(1-mu)``.  For ``regime="origin_strong"``, ``e_beta`` and
    ``v_beta`` are the ``log M`` coefficients of the centering and of the
    variance of ``log|det A|``.
    """

    e_beta: float
    v_beta: float
    mean: float | None
    variance: float | None
    regime: str

    def __post_init__(self):
        if self.regime not in _REGIMES:
            raise DomainError(f"regime must be one of {_REGIMES}, got {self.regime!r}")


def _check_beta(beta):
    if beta not in (1, 2, 4):
        raise DomainError(f"beta must be 1, 2 or 4, got {beta!r}")


def _check_k(k):
    if int(k) != k or k < 1:
        raise DomainError(f"k must be a positive integer, got {k!r}")
    return int(k)


def _strong_mu(spec):
    mu = spec.mu
    if not 0 < mu < 1:
        raise DomainError(f"the strong regime needs 0 < M/N < 1, got {mu!r}")
    return mu


def strong_gbe_argument(spec: EnsembleSpec, x) -> float:
    """``sqrt(M) (mu - |x|^2) / (mu sqrt(1 - mu))``."""
    mu = _strong_mu(spec)
    r = abs(complex(x)) ** 2
    return math.sqrt(spec.m_trunc) * (mu - r) / (mu * math.sqrt(1.0 - mu))


def strong_gbe_factor(spec: EnsembleSpec, k, x, q: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """Largest-eigenvalue probability entering :func:`strong_approx`."""
    return gbe_max_cdf(_check_k(k), spec.beta_prime, strong_gbe_argument(spec, x), q)


def strong_approx(spec: EnsembleSpec, k, x, q: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """Leading-order ``R_2k(x)`` for ``M/N`` fixed in ``(0, 1)``.

    Uses the exponent ``M k (1/mu - 1)`` on ``(1 - mu)/(1 - |x|^2)``, which
    reproduces Stirling's formula for the exact ``x = 0`` value.
    """
    k = _check_k(k)
    mu = _strong_mu(spec)
    x = complex(x)
    if spec.beta == 1 and x.imag != 0:
        raise DomainError("beta=1 needs a real evaluation point x")
    r = abs(x) ** 2
    if r >= 1:
        raise DomainError(f"strong asymptotics need |x| < 1, got {abs(x)!r}")
    m, beta = spec.m_trunc, spec.beta
    cdf = strong_gbe_factor(spec, k, x, q)
    if cdf == 0:
        return 0.0
    log_val = (
        (k * k / beta + 0.5 * k * (1.0 - 2.0 / beta)) * math.log(m)
        + m * k * math.log(mu)
        + m * k * (1.0 / mu - 1.0) * (math.log1p(-mu) - math.log1p(-r))
        + (k + 2.0 * k * (k - 1) / beta) * (0.5 * math.log1p(-mu) - math.log1p(-r))
        + 0.5 * k * math.log(2.0 * math.pi)
        - sum(gammaln(1.0 + 2.0 * j / beta) for j in range(k))
        + math.log(cdf)
    )
    return math.exp(log_val)


def weak_modulus(m_trunc, u) -> float:
    """``|x|`` with ``|x|^2 = 1 - 2u/M``."""
    r = 1.0 - 2.0 * u / m_trunc
    if r < 0:
        raise DomainError(f"1 - 2u/M must be nonnegative, got {r!r}")
    return math.sqrt(r)


def weak_approx(beta, kappa, k, u, m_trunc, q: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """Leading-order ``R_2k(x)`` at ``|x|^2 = 1 - 2u/M`` for ``kappa = N - M`` fixed."""
    _check_beta(beta)
    k = _check_k(k)
    if int(kappa) != kappa or kappa < 0:
        raise DomainError(f"kappa must be a nonnegative integer, got {kappa!r}")
    if int(m_trunc) != m_trunc or m_trunc < 1:
        raise DomainError(f"m_trunc must be a positive integer, got {m_trunc!r}")
    u = float(u)
    if not u > 0:
        raise DomainError(f"u must be positive, got {u!r}")
    cdf = lbe_max_cdf(k, 4 // beta, int(kappa), u, q)
    if cdf == 0:
        return 0.0
    h = 2.0 / beta
    log_val = (
        (h * k * k + k * (1.0 - h)) * math.log(m_trunc / (2.0 * u))
        + sum(gammaln(kappa + 1.0 + h * j) - gammaln(1.0 + h * j) for j in range(k))
        - k * kappa * math.log(2.0 * u)
        + math.log(cdf)
    )
    return math.exp(log_val)


def clt_params_boundary(beta, regime, mu_tilde=None, m_trunc=None) -> CLTParams:
    """Parameters of the limit law of ``log|det(e^{i theta} - A)|``.

    Parameters
    ----------
    beta : {1, 2, 4}
    regime : {"weak", "strong"}
    mu_tilde : float, optional
        Limiting ``M/N``; required for the strong regime.
    m_trunc : int, optional
        Weak regime only: fills in ``mean = e log M`` and
        ``variance = v log M``.
    """
    _check_beta(beta)
    e, v = E_BETA[beta], V_BETA[beta]
    if regime == "weak":
        if m_trunc is None:
            return CLTParams(e, v, None, None, "weak")
        if int(m_trunc) != m_trunc or m_trunc < 1:
            raise DomainError(f"m_trunc must be a positive integer, got {m_trunc!r}")
        lm = math.log(m_trunc)
        return CLTParams(e, v, e * lm, v * lm, "weak")
    if regime == "strong":
        if mu_tilde is None or not 0 < mu_tilde < 1:
            raise DomainError(f"the strong regime needs mu_tilde in (0, 1), got {mu_tilde!r}")
        l1 = math.log1p(-mu_tilde)
        return CLTParams(e, v, -e * l1, -v * l1, "strong")
    raise DomainError(f"regime must be 'weak' or 'strong', got {regime!r}")


def clt_params_origin(spec: EnsembleSpec) -> CLTParams:
    """Centering and variance of ``log|det A|`` for ``M/N`` fixed in ``(0, 1)``.

    ``mean = (M/2) log(mu (1-mu)^(1/mu - 1)) + (1/4)(2/beta - 1) log M``, with
    the bounded correction omitted, and ``variance = log M / (2 beta)``.

    The exact mean from :func:`logdet_cumulants` has ``log M`` coefficient
    ``(1/4)(1 - 2/beta)`` instead, so for ``beta != 2`` the centering agrees
    with it in relative terms only.
    """
    mu = _strong_mu(spec)
    m, beta = spec.m_trunc, spec.beta
    e = 0.25 * (2.0 / beta - 1.0)
    v = 1.0 / (2.0 * beta)
    lm = math.log(m)
    mean = 0.5 * m * (math.log(mu) + (1.0 / mu - 1.0) * math.log1p(-mu)) + e * lm
    return CLTParams(e, v, mean, v * lm, "origin_strong")


def boundary_cumulant_sweep(beta, kappa, m_values) -> list:
    """Exact cumulants of ``log|det(1 - A)|`` along a sweep of ``M`` at fixed ``kappa``.

    Each entry holds ``M``, the first three cumulants, the standardised third
    cumulant and the ratios of mean and variance to ``e_beta log M`` and
    ``v_beta log M``.
    """
    _check_beta(beta)
    rows = []
    for m in m_values:
        spec = EnsembleSpec(beta, int(m) + int(kappa), int(m))
        k1, k2, k3 = (logdet_cumulants(spec, order, at_boundary=True) for order in (1, 2, 3))
        lm = math.log(m) if m > 1 else float("nan")
        e = E_BETA[beta]
        rows.append({
            "M": int(m),
            "mean": k1,
            "variance": k2,
            "third": k3,
            "skewness": k3 / k2 ** 1.5,
            "mean_ratio": k1 / (e * lm) if e else None,
            "variance_ratio": k2 / (V_BETA[beta] * lm),
        })
    return rows
