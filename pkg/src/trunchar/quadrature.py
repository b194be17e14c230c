"""Selberg-weighted k-fold quadrature.

Every integral handled here has the shape

    int_{[0,1]^k} prod_i v_i^a g(v_i) |Delta(v)|^p dv,

with ``g`` smooth.  Two geometries are available:

``cube``
    Tensor product of one-dimensional rules with weight ``v^a`` (Gauss-Jacobi)
    or weight 1 (Gauss-Legendre).  Exact for polynomial ``g`` when ``p`` is
    even.
``simplex``
    The integrand is symmetric, so the cube equals ``k!`` times the ordered
    region ``v_1 < ... < v_k``.  Collapsed coordinates ``v_k = s_k``,
    ``v_j = s_j v_{j+1}`` turn that region into the unit cube with Jacobian
    ``prod_j s_j^{j-1}`` and make ``Delta`` a polynomial in ``s`` with no sign
    changes, so odd ``p`` is integrated exactly as well.  Dimension ``j``
    carries the Jacobi weight ``s_j^{j(a+1)-1}``.

Sums are formed in log space with a signed log-sum-exp over a fixed node
ordering, so results are deterministic and do not overflow for large ``N``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import roots_jacobi

from .errors import DomainError, InsufficientNodesError
from .sampling import MCEstimate, block_rng
from .special_functions import (
    EnsembleSpec,
    laguerre_const,
    mehta_const,
    selberg_const,
    skn_const,
)

__all__ = [
    "QuadratureSpec",
    "RULES",
    "selberg_integral",
    "duality_moment",
    "duality_moment_general",
    "duality_moment_mc",
    "odd_moment_real",
    "gbe_max_cdf",
    "lbe_max_cdf",
]

RULES = ("gauss_jacobi", "gauss_legendre", "ordered_simplex_mc")
GEOMETRIES = ("auto", "cube", "simplex")
_CHUNK = 1 << 17
_MAX_POINTS = 50_000_000


@dataclass(frozen=True)
class QuadratureSpec:
    """Quadrature settings.

    Parameters
    ----------
    nodes_per_dim : int, optional
        Nodes per dimension.  ``None`` picks the smallest count giving exact
        integration for polynomial integrands, and a fixed default
        otherwise.  An explicit count below the exactness threshold raises
        :class:`InsufficientNodesError`.
    rule : {"gauss_jacobi", "gauss_legendre", "ordered_simplex_mc"}
    mc_samples : int
        Sample count for the stochastic rule.
    domain_cut : float
        Gaussian integrals are truncated to ``[-domain_cut, domain_cut]``.
    geometry : {"auto", "cube", "simplex"}
        ``auto`` uses the cube for even Vandermonde powers and the ordered
        simplex for odd ones.
    seed : int
        Seed of the stochastic rule.
    """

    nodes_per_dim: int | None = None
    rule: str = "gauss_jacobi"
    mc_samples: int = 200_000
    domain_cut: float = 12.0
    geometry: str = "auto"
    seed: int = 0

    def __post_init__(self):
        if self.rule not in RULES:
            raise DomainError(f"rule must be one of {RULES}, got {self.rule!r}")
        if self.geometry not in GEOMETRIES:
            raise DomainError(f"geometry must be one of {GEOMETRIES}, got {self.geometry!r}")
        if self.nodes_per_dim is not None and (
                int(self.nodes_per_dim) != self.nodes_per_dim or self.nodes_per_dim < 1):
            raise DomainError(f"nodes_per_dim must be a positive integer, got {self.nodes_per_dim!r}")
        if int(self.mc_samples) != self.mc_samples or self.mc_samples < 2:
            raise DomainError(f"mc_samples must be an integer >= 2, got {self.mc_samples!r}")
        if not self.domain_cut > 0:
            raise DomainError(f"domain_cut must be positive, got {self.domain_cut!r}")


DEFAULT_QUADRATURE = QuadratureSpec()


def _signed_logsumexp(signs, logs):
    """``log|sum s_i e^{l_i}|`` and its sign; entries with ``l = -inf`` drop out."""
    logs = np.asarray(logs, dtype=float)
    signs = np.asarray(signs, dtype=float)
    keep = np.isfinite(logs) & (signs != 0)
    if not np.any(keep):
        return 0, -math.inf
    logs, signs = logs[keep], signs[keep]
    top = logs.max()
    total = float(np.sum(signs * np.exp(logs - top)))
    if total == 0:
        return 0, -math.inf
    return (1 if total > 0 else -1), top + math.log(abs(total))


def _rule_1d(n, exponent, rule):
    """Nodes and log-weights on ``[0, 1]`` for the weight ``v**exponent``.

    Gauss-Legendre leaves the weight to the integrand and returns it in the
    third slot as an extra log-factor per node.
    """
    if rule == "gauss_jacobi":
        x, w = roots_jacobi(n, 0.0, float(exponent))
        extra = np.zeros(n)
        logw = np.log(w) - (exponent + 1.0) * math.log(2.0)
    else:
        x, w = roots_jacobi(n, 0.0, 0.0)
        logw = np.log(w) - math.log(2.0)
        extra = exponent * np.log((1.0 + x) / 2.0)
    return (1.0 + x) / 2.0, logw + extra


def _resolve_geometry(q, p):
    if q.geometry == "auto":
        return "cube" if p % 2 == 0 else "simplex"
    if q.geometry == "cube" and p % 2:
        raise DomainError("cube geometry needs an even Vandermonde power; use the simplex")
    return q.geometry


def _exponents(k, a, geometry):
    if geometry == "cube":
        return [float(a)] * k
    return [j * (a + 1.0) - 1.0 for j in range(1, k + 1)]


def _required_nodes(k, a, p, degree, geometry, rule):
    """Minimal per-dimension node counts for exact integration (``None`` if not polynomial)."""
    if degree is None:
        return None
    out = []
    for j in range(1, k + 1):
        if geometry == "cube":
            deg = degree + p * (k - 1)
            weight = a
        else:
            deg = j * degree + p * (j * (j - 1) // 2 + j * (k - j))
            weight = j * (a + 1) - 1
        if rule == "gauss_legendre":
            if float(weight) != int(weight):
                return None
            deg += int(weight)
        out.append(deg // 2 + 1)
    return out


def _default_nodes(k):
    return {1: 128, 2: 96, 3: 48}.get(k, 24)


def _node_counts(k, a, p, degree, geometry, q):
    need = _required_nodes(k, a, p, degree, geometry, q.rule)
    if q.nodes_per_dim is None:
        return need if need is not None else [_default_nodes(k)] * k
    n = int(q.nodes_per_dim)
    if need is not None and n < max(need):
        raise InsufficientNodesError(
            f"{n} nodes per dimension cannot integrate this degree exactly; "
            f"at least {max(need)} are needed (exactness degree 2n-1)")
    return [n] * k


def _points(geometry, s):
    """Map rule coordinates ``s`` (shape ``(P, k)``) to integration points."""
    if geometry == "cube":
        return s
    # v_j = s_j s_{j+1} ... s_k
    return np.cumprod(s[:, ::-1], axis=1)[:, ::-1]


def _log_vandermonde(v, p):
    k = v.shape[1]
    logs = np.zeros(v.shape[0])
    signs = np.ones(v.shape[0])
    for i in range(k):
        for j in range(i + 1, k):
            d = v[:, j] - v[:, i]
            with np.errstate(divide="ignore"):
                logs += p * np.log(np.abs(d))
            if p % 2:
                signs *= np.sign(d)
    return signs, logs


def selberg_integral(k, a, p, log_g, degree=None, q: QuadratureSpec = DEFAULT_QUADRATURE):
    """Signed log of ``int_{[0,1]^k} prod v_i^a g(v_i) |Delta(v)|^p dv``.

    Parameters
    ----------
    k : int
        Dimension.
    a : float
        Exponent of the Jacobi weight, ``a > -1``.
    p : int
        Power of ``|Delta|``.
    log_g : callable
        Maps an array of points in ``[0, 1]`` to ``(sign, log|g|)`` arrays of
        the same shape.
    degree : int, optional
        Polynomial degree of ``g``.  Enables the exactness check and the
        automatic minimal node count.
    q : QuadratureSpec

    Returns
    -------
    (sign, log_abs) : (int, float)
    """
    if q.rule == "ordered_simplex_mc":
        return _selberg_mc(k, a, p, log_g, q)
    geometry = _resolve_geometry(q, p)
    exps = _exponents(k, a, geometry)
    counts = _node_counts(k, a, p, degree, geometry, q)
    total = int(np.prod(counts, dtype=np.int64))
    if total > _MAX_POINTS:
        raise DomainError(f"tensor grid of {total} points exceeds the {_MAX_POINTS} limit")
    rules = [_rule_1d(n, e, q.rule) for n, e in zip(counts, exps)]
    log_fact = math.lgamma(k + 1) if geometry == "simplex" else 0.0

    part_signs, part_logs = [], []
    for start in range(0, total, _CHUNK):
        flat = np.arange(start, min(start + _CHUNK, total))
        idx = np.unravel_index(flat, counts)
        s = np.stack([rules[d][0][idx[d]] for d in range(k)], axis=1)
        logs = np.sum([rules[d][1][idx[d]] for d in range(k)], axis=0)
        v = _points(geometry, s)
        g_sign, g_log = log_g(v)
        signs = np.prod(g_sign, axis=1)
        logs = logs + np.sum(g_log, axis=1)
        d_sign, d_log = _log_vandermonde(v, p)
        sg, lg = _signed_logsumexp(signs * d_sign, logs + d_log)
        part_signs.append(sg)
        part_logs.append(lg)
    sign, log_abs = _signed_logsumexp(part_signs, part_logs)
    return sign, log_abs + log_fact


def _selberg_mc(k, a, p, log_g, q):
    """Latin-hypercube Monte Carlo with ``v_i ~ Beta(a+1, 1)``; returns an :class:`MCEstimate` in log form."""
    n = int(q.mc_samples)
    rng = block_rng(q.seed, 0)
    u = np.empty((n, k))
    for d in range(k):
        u[:, d] = (rng.permutation(n) + rng.random(n)) / n
    v = u ** (1.0 / (a + 1.0))
    g_sign, g_log = log_g(v)
    # points cover the whole cube, so the Vandermonde enters as |Delta|^p
    _, d_log = _log_vandermonde(v, p)
    signs = np.prod(g_sign, axis=1)
    logs = np.sum(g_log, axis=1) + d_log - k * math.log(a + 1.0)
    finite = np.isfinite(logs)
    top = logs[finite].max() if np.any(finite) else 0.0
    vals = np.where(finite, signs * np.exp(np.where(finite, logs, 0.0) - top), 0.0)
    mean = float(np.mean(vals))
    stderr = float(np.std(vals, ddof=1) / math.sqrt(n))
    return _LogMC(mean, stderr, top, n, int(q.seed))


@dataclass(frozen=True)
class _LogMC:
    """Monte Carlo estimate ``(mean, stderr) * exp(log_scale)``."""

    mean: float
    stderr: float
    log_scale: float
    n_samples: int
    seed: int

    def scaled(self, log_factor) -> MCEstimate:
        f = math.exp(self.log_scale + log_factor)
        return MCEstimate(self.mean * f, self.stderr * f, self.n_samples, self.seed)


def _check_k(k, minimum=1):
    if int(k) != k or k < minimum:
        raise DomainError(f"k must be an integer >= {minimum}, got {k!r}")
    return int(k)


def _sigma(spec, sigma_eigs):
    if sigma_eigs is None:
        return None
    s = np.asarray(sigma_eigs, dtype=float).ravel()
    if s.size != spec.m_trunc:
        raise DomainError(f"sigma_eigs must have M={spec.m_trunc} entries, got {s.size}")
    if np.any(s < 0) or not np.all(np.isfinite(s)):
        raise DomainError("sigma_eigs must be finite and nonnegative")
    return s


def _shift_factor(m, r, sigma):
    """``log_g`` for ``t -> prod_j (sigma_j + (r - sigma_j) t)``.

    This equals ``det(r - Sigma) prod_j (t - gamma_j)`` with
    ``gamma_j = -sigma_j / (r - sigma_j)``, without the division.
    """
    if sigma is None:
        values, mult = np.array([1.0]), np.array([m])
    else:
        values, mult = np.unique(sigma, return_counts=True)

    def log_g(t):
        sign = np.ones_like(t)
        logs = np.zeros_like(t)
        for s, c in zip(values, mult):
            f = s + (r - s) * t
            with np.errstate(divide="ignore"):
                logs += c * np.log(np.abs(f))
            if c % 2:
                sign *= np.sign(f)
        return sign, logs

    return log_g


def _modulus_squared(spec, x):
    x = complex(x)
    if spec.beta == 1 and x.imag != 0:
        raise DomainError("beta=1 needs a real evaluation point x")
    return abs(x) ** 2


def _duality_log(spec, k, x, sigma, q):
    r = _modulus_squared(spec, x)
    log_g = _shift_factor(spec.m_trunc, r, sigma)
    res = selberg_integral(k, spec.kappa, spec.beta_prime, log_g, spec.m_trunc, q)
    return res, -skn_const(k, spec.n_total, spec.beta).log_value


def duality_moment_general(spec: EnsembleSpec, k, x, sigma_eigs=None,
                           q: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """``R_2k(x)`` for the scaled truncation ``A V`` with ``V V^T = Sigma``.

    Evaluates the k-dimensional dual integral over ``[0,1]^k`` with weight
    ``t^{N-M}``, the factor ``prod_j (sigma_j + (|x|^2 - sigma_j) t_i)`` and
    ``|Delta(t)|^{4/beta}``, normalised by :func:`skn_const`.

    Parameters
    ----------
    spec : EnsembleSpec
    k : int
        Half the moment order, ``k >= 1``.
    x : complex
        Evaluation point; real for ``beta = 1``.  Only ``|x|`` enters.
    sigma_eigs : sequence of float, optional
        The ``M`` eigenvalues of ``Sigma``; ``None`` means the identity.
    q : QuadratureSpec

    Notes
    -----
    The factor is the product form of ``det(|x|^2 - Sigma) prod (t - gamma_j)``
    and is regular where ``|x|^2`` equals an eigenvalue of ``Sigma``.
    """
    k = _check_k(k)
    sigma = _sigma(spec, sigma_eigs)
    res, norm = _duality_log(spec, k, x, sigma, q)
    if isinstance(res, _LogMC):
        return res.scaled(norm).mean
    sign, log_abs = res
    return sign * math.exp(log_abs + norm) if sign else 0.0


def duality_moment(spec: EnsembleSpec, k, x, q: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """``R_2k(x)`` from its k-dimensional dual integral.

    Examples
    --------
    >>> from trunchar import EnsembleSpec
    >>> round(duality_moment(EnsembleSpec(2, 4, 2), 1, 0.0) * 6, 12)
    1.0
    """
    return duality_moment_general(spec, k, x, None, q)


def duality_moment_mc(spec: EnsembleSpec, k, x, sigma_eigs=None,
                      q: QuadratureSpec | None = None) -> MCEstimate:
    """Stochastic evaluation of the dual integral with a standard error."""
    if q is None:
        q = QuadratureSpec(rule="ordered_simplex_mc")
    elif q.rule != "ordered_simplex_mc":
        raise DomainError("duality_moment_mc needs rule='ordered_simplex_mc'")
    k = _check_k(k)
    sigma = _sigma(spec, sigma_eigs)
    res, norm = _duality_log(spec, k, x, sigma, q)
    return res.scaled(norm)


def odd_moment_real(spec: EnsembleSpec, k, x, sigma_eigs=None,
                    q: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """``E det(x - A V)^(2k+1)`` for the real orthogonal ensemble.

    The k-dimensional integral carries the extra weight ``(1 - t)^2``,
    ``|Delta|^4`` and the normalisation ``selberg_const(k, N, 2, 4)``; it is
    multiplied by ``x^M``, which is the ``k = 0`` value.
    """
    if spec.beta != 1:
        raise DomainError("odd moments are defined for beta=1 only")
    k = _check_k(k, minimum=0)
    x = complex(x)
    if x.imag != 0:
        raise DomainError("beta=1 needs a real evaluation point x")
    x = x.real
    lead = x ** spec.m_trunc
    if k == 0:
        return lead
    sigma = _sigma(spec, sigma_eigs)
    shift = _shift_factor(spec.m_trunc, x * x, sigma)

    def log_g(t):
        sign, logs = shift(t)
        with np.errstate(divide="ignore"):
            return sign, logs + 2.0 * np.log1p(-t)

    res = selberg_integral(k, spec.kappa, 4, log_g, spec.m_trunc + 2, q)
    norm = -selberg_const(k, spec.n_total, 2, 4).log_value
    if isinstance(res, _LogMC):
        return lead * res.scaled(norm).mean
    sign, log_abs = res
    return lead * sign * math.exp(log_abs + norm) if sign else 0.0


def _check_beta_prime(beta_prime):
    if beta_prime not in (1, 2, 4):
        raise DomainError(f"beta_prime must be 1, 2 or 4, got {beta_prime!r}")


def _as_probability(res, log_norm):
    if isinstance(res, _LogMC):
        val = res.scaled(log_norm).mean
    else:
        sign, log_abs = res
        val = sign * math.exp(log_abs + log_norm) if sign else 0.0
    return min(1.0, max(0.0, val))


def gbe_max_cdf(k, beta_prime, s, q: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """``P(lambda_max < s)`` for the ``k x k`` Gaussian ensemble with weight ``exp(-t^2/2)``.

    The lower limit is truncated at ``-q.domain_cut``; for ``s`` beyond the
    cut the CDF is 0 or 1 to machine precision.
    """
    k = _check_k(k)
    _check_beta_prime(beta_prime)
    s = float(s)
    cut = float(q.domain_cut)
    if s <= -cut:
        return 0.0
    lo, hi = -cut, min(s, cut)
    width = hi - lo

    def log_g(v):
        t = lo + width * v
        return np.ones_like(v), math.log(width) - 0.5 * t * t

    res = selberg_integral(k, 0.0, beta_prime, log_g, None, q)
    log_norm = beta_prime * k * (k - 1) / 2 * math.log(width) - mehta_const(k, beta_prime).log_value
    return _as_probability(res, log_norm)


def lbe_max_cdf(k, beta_prime, kappa, u, q: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """``P(lambda_max < 2u)`` for the ``k x k`` Laguerre ensemble with weight ``t^kappa e^{-t}``."""
    k = _check_k(k)
    _check_beta_prime(beta_prime)
    if int(kappa) != kappa or kappa < 0:
        raise DomainError(f"kappa must be a nonnegative integer, got {kappa!r}")
    u = float(u)
    if not u > 0:
        raise DomainError(f"u must be positive, got {u!r}")
    t_max = 60.0 + 4.0 * (kappa + beta_prime * k)
    width = min(2.0 * u, t_max)

    def log_g(v):
        return np.ones_like(v), -width * v

    res = selberg_integral(k, float(kappa), beta_prime, log_g, None, q)
    log_norm = ((k * (kappa + 1) + beta_prime * k * (k - 1) / 2) * math.log(width)
                - laguerre_const(k, beta_prime, kappa).log_value)
    return _as_probability(res, log_norm)
