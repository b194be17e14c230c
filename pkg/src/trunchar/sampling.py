"""Monte Carlo engines for truncated Haar ensembles.

Three samplers feed the moment estimator :func:`mc_moments`:

``haar``
    Dense Haar matrices (QR of Gaussian arrays, quaternionic Gram-Schmidt
    for ``beta = 4``), truncated and evaluated with a pivoted-LU determinant.
``bhny``
    The dimension-recursion representation of ``det(I - A)`` as a product of
    ``M`` independent scalar factors; boundary points only.
``beta-product``
    ``log|det A|`` as half a sum of independent log-Beta variables; ``x = 0``
    only.

Random streams are keyed by ``(seed, block index)`` through a counter-based
Philox generator, and block results are reduced in block order, so an
estimate depends only on ``(seed, n_samples)`` and never on the number of
worker threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .special_functions import EnsembleSpec

__all__ = [
    "HaarMatrix",
    "MCEstimate",
    "MomentQuery",
    "BLOCK_SIZE",
    "block_rng",
    "haar_sample",
    "haar_truncations",
    "truncate",
    "charpoly_value",
    "charpoly_values",
    "mc_moment",
    "mc_moments",
    "bhny_boundary_sample",
    "bhny_boundary_samples",
    "beta_product_logdet_sample",
    "beta_product_logdet_samples",
    "symplectic_form",
    "SAMPLERS",
]

BLOCK_SIZE = 4096
SAMPLERS = ("haar", "bhny", "beta-product")
_MAX_ATTEMPTS = 3


@dataclass
class HaarMatrix:
    """Haar-distributed group element in its complex (or real) representation."""

    entries: np.ndarray
    beta: int

    @property
    def n(self) -> int:
        """Group size ``N`` (quaternion units for ``beta = 4``)."""
        return self.rep_dim // 2 if self.beta == 4 else self.rep_dim

    @property
    def rep_dim(self) -> int:
        return self.entries.shape[-1]


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    stderr: float
    n_samples: int
    seed: int

    def z_score(self, value) -> float:
        if self.stderr == 0:
            return 0.0 if self.mean == value else math.inf
        return (self.mean - value) / self.stderr

    def covers(self, value, n_se=4.0) -> bool:
        return abs(self.mean - value) <= n_se * self.stderr


@dataclass(frozen=True)
class MomentQuery:
    """Moment order ``gamma`` and evaluation point ``x``.

    The integrand is ``det(x - A)**gamma`` (``beta = 1``; ``|det|`` if
    ``gamma`` is not an integer), ``|det(x - A)|**gamma`` (``beta = 2``) or
    ``det(x - A)**(gamma/2)`` with the ``2M``-dimensional determinant
    (``beta = 4``).  ``gamma = 2k`` therefore gives ``R_2k(x)``.
    """

    gamma: float
    x: complex = 0j

    @classmethod
    def even(cls, k, x=0j):
        return cls(2.0 * k, complex(x))

    def validate(self, beta):
        x = complex(self.x)
        if beta == 1 and x.imag != 0:
            raise DomainError("beta=1 needs a real evaluation point x")
        return self


def block_rng(seed, block) -> np.random.Generator:
    """Counter-based generator owning samples ``block*BLOCK_SIZE ...``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(block),))
    return np.random.Generator(np.random.Philox(ss))


def symplectic_form(n) -> np.ndarray:
    """Block-diagonal ``J`` built from ``[[0, 1], [-1, 0]]`` blocks."""
    return np.kron(np.eye(n), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def _quaternion_partner(u):
    """``-J conj(u)`` along the last-but-one axis."""
    out = np.empty_like(u)
    out[..., 0::2, :] = -np.conj(u[..., 1::2, :])
    out[..., 1::2, :] = np.conj(u[..., 0::2, :])
    return out


def _haar_columns(beta, n, m, size, rng):
    """First ``m`` (quaternion) columns of ``size`` independent Haar matrices."""
    if beta == 1:
        g = rng.standard_normal((size, n, m))
        q, r = np.linalg.qr(g)
        d = np.sign(np.diagonal(r, axis1=-2, axis2=-1))
        d[d == 0] = 1.0
        return q * d[:, None, :]
    if beta == 2:
        g = rng.standard_normal((size, n, m)) + 1j * rng.standard_normal((size, n, m))
        q, r = np.linalg.qr(g)
        d = np.diagonal(r, axis1=-2, axis2=-1)
        phase = d / np.where(np.abs(d) == 0, 1.0, np.abs(d))
        return q * phase[:, None, :]

    # quaternionic Gram-Schmidt, two passes per column pair
    g = rng.standard_normal((size, 2 * n, m)) + 1j * rng.standard_normal((size, 2 * n, m))
    q = np.zeros((size, 2 * n, 2 * m), dtype=complex)
    for i in range(m):
        v = g[:, :, i:i + 1]
        basis = q[:, :, :2 * i]
        for _ in range(2):
            if i:
                v = v - basis @ (np.conj(np.swapaxes(basis, 1, 2)) @ v)
        norm = np.linalg.norm(v, axis=1, keepdims=True)
        if np.any(norm < 1e-280):
            raise FloatingPointError("degenerate Gaussian column")
        v = v / norm
        q[:, :, 2 * i:2 * i + 1] = v
        q[:, :, 2 * i + 1:2 * i + 2] = _quaternion_partner(v)
    return q


def _with_retry(fn, *args):
    for attempt in range(_MAX_ATTEMPTS):
        try:
            return fn(*args)
        except FloatingPointError:
            if attempt == _MAX_ATTEMPTS - 1:
                raise
    raise AssertionError("unreachable")


def haar_sample(beta, n, rng=None) -> HaarMatrix:
    """One Haar-distributed element of ``O(n)``, ``U(n)`` or ``Sp(2n)``.

    ``beta = 4`` returns the ``2n x 2n`` complex matrix whose columns come
    in pairs ``(u, -J conj(u))``.
    """
    if beta not in (1, 2, 4):
        raise DomainError(f"beta must be 1, 2 or 4, got {beta!r}")
    if int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n!r}")
    rng = np.random.default_rng(rng)
    cols = _with_retry(_haar_columns, beta, int(n), int(n), 1, rng)
    return HaarMatrix(cols[0], beta)


def truncate(u: HaarMatrix, m) -> np.ndarray:
    """Top-left ``m x m`` block (``2m x 2m`` in the complex representation for ``beta = 4``)."""
    if int(m) != m or not 1 <= m <= u.n:
        raise DomainError(f"truncation size must be in 1..{u.n}, got {m!r}")
    d = 2 * int(m) if u.beta == 4 else int(m)
    return u.entries[:d, :d]


def haar_truncations(spec: EnsembleSpec, size, rng) -> np.ndarray:
    """``size`` independent truncations, shape ``(size, d, d)`` with ``d = spec.rep_dim``.

    Only the first ``M`` columns of each Haar matrix are generated; they
    have the same law as the corresponding columns of a full Haar sample.
    """
    cols = _with_retry(_haar_columns, spec.beta, spec.n_total, spec.m_trunc, size, rng)
    d = spec.rep_dim
    return cols[:, :d, :]


def _shift_matrix(x, d, beta):
    if beta == 4:
        diag = np.empty(d, dtype=complex)
        diag[0::2] = x
        diag[1::2] = np.conj(x)
        return np.diag(diag)
    return x * np.eye(d)


def _power_from_logdet(sign, logabs, beta, gamma):
    if gamma == 0:
        return np.ones_like(logabs, dtype=float)
    if beta == 4:
        return np.exp(0.5 * gamma * logabs)
    vals = np.exp(gamma * logabs)
    if beta == 1 and float(gamma).is_integer() and int(gamma) % 2:
        vals = vals * np.real(sign)
    return vals


def charpoly_values(a, x, beta, gamma) -> np.ndarray:
    """Vectorised :func:`charpoly_value` over a stack of matrices ``a``."""
    a = np.asarray(a)
    x = complex(x)
    if beta == 1:
        if x.imag != 0:
            raise DomainError("beta=1 needs a real evaluation point x")
        x = x.real
    d = a.shape[-1]
    sign, logabs = np.linalg.slogdet(_shift_matrix(x, d, beta) - a)
    return _power_from_logdet(sign, logabs, beta, gamma)


def charpoly_value(a, x, beta, gamma) -> float:
    """One Monte Carlo integrand sample for the moment of order ``gamma`` at ``x``.

    See :class:`MomentQuery` for the per-``beta`` conventions; for
    ``beta = 4`` the shift is ``diag(x, conj(x), ...)``, the complex image of
    the quaternion ``x``.
    """
    return float(charpoly_values(np.asarray(a)[None], x, beta, gamma)[0])


def _beta_log(rng, a, b, size):
    """``log`` of a Beta(a, b) draw as a ratio of Gamma variates; ``b = 0`` gives 0."""
    if b == 0:
        return np.zeros(size)
    x = rng.standard_gamma(a, size)
    y = rng.standard_gamma(b, size)
    return np.log(x) - np.log(x + y)


def _bhny_log_samples(spec: EnsembleSpec, size, rng):
    """``log det(I - A)`` (``log|det|`` for ``beta = 2``)."""
    n = spec.n_total
    total = np.zeros(size)
    for k in range(1, spec.m_trunc + 1):
        rest = n - k
        if spec.beta == 2:
            b = np.exp(0.5 * _beta_log(rng, 1.0, float(rest), size))
            omega = rng.uniform(0.0, 2 * np.pi, size)
            factor = np.abs(1.0 - np.exp(1j * omega) * b)
        elif spec.beta == 1:
            b = np.exp(0.5 * _beta_log(rng, 0.5, rest / 2.0, size))
            eps = np.where(rng.random(size) < 0.5, -1.0, 1.0)
            factor = 1.0 - eps * b
        else:
            r2 = np.exp(_beta_log(rng, 2.0, 2.0 * rest, size))
            g = rng.standard_normal((size, 4))
            a = np.sqrt(r2) * g[:, 0] / np.linalg.norm(g, axis=1)
            factor = 1.0 - 2.0 * a + r2
        with np.errstate(divide="ignore"):
            total += np.log(np.maximum(factor, 0.0))
    return total


def bhny_boundary_samples(spec: EnsembleSpec, size, rng) -> np.ndarray:
    """``size`` draws of ``det(I - A)`` built from ``M`` independent factors.

    ``beta = 2`` returns the modulus ``|det(I - A)|``; ``beta = 4`` the
    (non-negative) ``2M``-dimensional complex determinant.
    """
    return np.exp(_bhny_log_samples(spec, size, rng))


def bhny_boundary_sample(spec: EnsembleSpec, rng=None) -> float:
    rng = np.random.default_rng(rng)
    return float(bhny_boundary_samples(spec, 1, rng)[0])


def beta_product_logdet_samples(spec: EnsembleSpec, form, size, rng) -> np.ndarray:
    """Draws of ``log|det A|`` as half a sum of independent log-Beta variables.

    ``form="m_fold"`` uses ``M`` variables Beta(beta(1+j)/2, beta kappa/2),
    ``form="kappa_fold"`` uses ``kappa`` variables Beta(beta(1+j)/2, beta M/2).
    For ``kappa = 0`` the matrix is unitary and 0 is returned exactly.
    """
    if form not in ("m_fold", "kappa_fold"):
        raise DomainError(f"form must be 'm_fold' or 'kappa_fold', got {form!r}")
    h = spec.beta / 2.0
    out = np.zeros(size)
    if spec.kappa == 0:
        return out
    if form == "m_fold":
        count, second = spec.m_trunc, h * spec.kappa
    else:
        count, second = spec.kappa, h * spec.m_trunc
    for j in range(count):
        out += _beta_log(rng, h * (1 + j), second, size)
    return 0.5 * out


def beta_product_logdet_sample(spec: EnsembleSpec, form="kappa_fold", rng=None) -> float:
    rng = np.random.default_rng(rng)
    return float(beta_product_logdet_samples(spec, form, 1, rng)[0])


def _check_sampler_queries(spec, queries, sampler):
    if sampler not in SAMPLERS:
        raise DomainError(f"sampler must be one of {SAMPLERS}, got {sampler!r}")
    for q in queries:
        q.validate(spec.beta)
        x = complex(q.x)
        if sampler == "bhny" and abs(abs(x) - 1) > 1e-12:
            raise DomainError("the bhny sampler only covers boundary points |x| = 1")
        if sampler == "bhny" and spec.beta == 1 and abs(x.real) != 1.0:
            raise DomainError("beta=1 boundary points are x = 1 or x = -1")
        if sampler == "beta-product":
            if x != 0:
                raise DomainError("the beta-product sampler only covers x = 0")
            g = float(q.gamma)
            if spec.beta == 1 and g.is_integer() and int(g) % 2:
                raise DomainError("beta-product samples |det A|; odd real moments are not covered")


def _block_values(spec, queries, sampler, rng, size):
    out = np.empty((len(queries), size))
    if sampler == "haar":
        a = haar_truncations(spec, size, rng)
        for i, q in enumerate(queries):
            out[i] = charpoly_values(a, q.x, spec.beta, q.gamma)
        return out
    if sampler == "bhny":
        logs = _bhny_log_samples(spec, size, rng)
        for i, q in enumerate(queries):
            g = float(q.gamma)
            scale = 0.5 * g if spec.beta == 4 else g
            if g == 0:
                out[i] = 1.0
                continue
            with np.errstate(invalid="ignore"):
                out[i] = np.exp(scale * logs)
            if spec.beta == 1 and complex(q.x).real < 0 and g.is_integer():
                # det(-I - A) = (-1)^M det(I + A), and A -> -A preserves the law
                out[i] *= (-1) ** ((spec.m_trunc * int(g)) % 2)
        return out
    logs = beta_product_logdet_samples(spec, "kappa_fold", size, rng)
    for i, q in enumerate(queries):
        out[i] = 1.0 if q.gamma == 0 else np.exp(float(q.gamma) * logs)
    return out


def mc_moments(spec: EnsembleSpec, queries, n_samples, seed=0, sampler="haar",
               workers=1) -> list:
    """Monte Carlo estimates of several moments from one shared set of draws.

    Returns one :class:`MCEstimate` per query.  The standard error is the
    sample standard deviation over ``sqrt(n_samples)``.
    """
    queries = [q if isinstance(q, MomentQuery) else MomentQuery(*q) for q in queries]
    n_samples = int(n_samples)
    if n_samples < 2:
        raise DomainError("n_samples must be at least 2")
    _check_sampler_queries(spec, queries, sampler)

    n_blocks = -(-n_samples // BLOCK_SIZE)

    def run(block):
        size = min(BLOCK_SIZE, n_samples - block * BLOCK_SIZE)
        return _block_values(spec, queries, sampler, block_rng(seed, block), size)

    workers = max(1, int(workers or 1))
    if workers == 1:
        blocks = [run(b) for b in range(n_blocks)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(run, range(n_blocks)))
    values = np.concatenate(blocks, axis=1)
    results = []
    for row, q in zip(values, queries):
        if q.gamma == 0:
            results.append(MCEstimate(1.0, 0.0, n_samples, int(seed)))
            continue
        mean = float(np.mean(row))
        stderr = float(np.std(row, ddof=1) / math.sqrt(n_samples))
        results.append(MCEstimate(mean, stderr, n_samples, int(seed)))
    return results


def mc_moment(spec: EnsembleSpec, query, n_samples, seed=0, sampler="haar",
              workers=1) -> MCEstimate:
    """Monte Carlo estimate of a single moment; see :func:`mc_moments`."""
    return mc_moments(spec, [query], n_samples, seed, sampler, workers)[0]
