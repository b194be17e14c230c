import math

import numpy as np
import pytest
import sympy as sp
from scipy.stats import norm

from oracles import selberg_closed_form, sympy_selberg_integral
from trunchar import EnsembleSpec
from trunchar.errors import DomainError, InsufficientNodesError
from trunchar.partitions import exact_moment
from trunchar.quadrature import (
    QuadratureSpec,
    duality_moment,
    duality_moment_general,
    duality_moment_mc,
    gbe_max_cdf,
    lbe_max_cdf,
    odd_moment_real,
    selberg_integral,
)
from trunchar.sampling import block_rng, charpoly_values, haar_truncations, mc_moment, MomentQuery


def _poly_log_g(coeffs):
    """``log_g`` for the polynomial ``sum c_j t^j``."""
    def log_g(t):
        vals = np.polynomial.polynomial.polyval(t, coeffs)
        with np.errstate(divide="ignore"):
            return np.sign(vals), np.log(np.abs(vals))
    return log_g


def _value(res):
    sign, log_abs = res
    return sign * math.exp(log_abs)


# ---------------------------------------------------------------- raw integrals

@pytest.mark.parametrize("k,a,p", [(1, 0, 2), (2, 1, 2), (2, 3, 4), (3, 0, 2), (2, 2, 1), (3, 1, 1)])
@pytest.mark.parametrize("rule", ["gauss_jacobi", "gauss_legendre"])
def test_polynomial_exactness_against_sympy(k, a, p, rule):
    coeffs = [1, 2, 0, -1]
    t = sp.Symbol("t")
    g = sum(c * t ** j for j, c in enumerate(coeffs))
    want = float(sympy_selberg_integral(k, a, p, g, t))
    got = _value(selberg_integral(k, a, p, _poly_log_g(coeffs), degree=3, q=QuadratureSpec(rule=rule)))
    assert got == pytest.approx(want, rel=1e-12)


@pytest.mark.parametrize("k,a,b,p", [(2, 0, 0, 2), (3, 2.5, 0, 2), (2, 1, 2, 4), (3, 0, 1, 1), (3, 4, 0, 1), (4, 1, 0, 2)])
def test_against_selberg_closed_form(k, a, b, p):
    want = selberg_closed_form(k, a, b, p)
    got = _value(selberg_integral(k, a, p, _poly_log_g([1, -1]) if b == 1 else
                                  _poly_log_g([1, -2, 1]) if b == 2 else _poly_log_g([1]),
                                  degree=b))
    assert got == pytest.approx(want, rel=1e-11)


def test_simplex_matches_cube_for_even_power():
    log_g = _poly_log_g([0.5, 1.0, 3.0])
    cube = _value(selberg_integral(3, 2, 2, log_g, 2, QuadratureSpec(geometry="cube")))
    simplex = _value(selberg_integral(3, 2, 2, log_g, 2, QuadratureSpec(geometry="simplex")))
    assert simplex == pytest.approx(cube, rel=1e-8)


def test_cube_rejects_odd_power():
    with pytest.raises(DomainError):
        selberg_integral(2, 0, 1, _poly_log_g([1]), 0, QuadratureSpec(geometry="cube"))


def test_insufficient_nodes():
    with pytest.raises(InsufficientNodesError):
        duality_moment(EnsembleSpec(2, 10, 6), 2, 0.5, QuadratureSpec(nodes_per_dim=2))


@pytest.mark.parametrize("beta", [1, 2, 4])
def test_doubling_nodes_is_stable(beta):
    spec = EnsembleSpec(beta, 9, 5)
    for k in (1, 2, 3):
        base = duality_moment(spec, k, 0.6)
        n = 40
        a = duality_moment(spec, k, 0.6, QuadratureSpec(nodes_per_dim=n))
        b = duality_moment(spec, k, 0.6, QuadratureSpec(nodes_per_dim=2 * n))
        assert b == pytest.approx(a, rel=1e-12)
        assert a == pytest.approx(base, rel=1e-12)


# ---------------------------------------------------------------- duality moments

@pytest.mark.parametrize("beta", [1, 2, 4])
def test_k1_origin_is_inverse_binomial(beta):
    for n, m in [(2, 1), (4, 2), (7, 3), (12, 12)]:
        assert duality_moment(EnsembleSpec(beta, n, m), 1, 0.0) == pytest.approx(1 / math.comb(n, m), rel=1e-12)


def test_k1_is_beta_independent():
    vals = [duality_moment(EnsembleSpec(beta, 8, 3), 1, 0.7) for beta in (1, 2, 4)]
    assert vals[1] == pytest.approx(vals[0], rel=1e-13)
    assert vals[2] == pytest.approx(vals[0], rel=1e-13)


def test_example_against_series():
    spec = EnsembleSpec(2, 4, 2)
    assert duality_moment(spec, 2, 0.5) == pytest.approx(exact_moment(spec, 2)(0.5), rel=1e-10)


@pytest.mark.parametrize("beta", [1, 2, 4])
@pytest.mark.parametrize("rule", ["gauss_jacobi", "gauss_legendre"])
def test_duality_matches_series(beta, rule):
    q = QuadratureSpec(rule=rule)
    for n, m in [(3, 1), (5, 3), (6, 6), (9, 4)]:
        spec = EnsembleSpec(beta, n, m)
        for k in (1, 2, 3):
            poly = exact_moment(spec, k)
            for x in (0.0, 0.45, 1.0, 1.3):
                assert duality_moment(spec, k, x, q) == pytest.approx(poly(x), rel=1e-10)


def test_complex_x_uses_modulus():
    spec = EnsembleSpec(2, 6, 3)
    assert duality_moment(spec, 2, 0.3 + 0.4j) == pytest.approx(duality_moment(spec, 2, 0.5), rel=1e-14)
    with pytest.raises(DomainError):
        duality_moment(EnsembleSpec(1, 6, 3), 2, 0.3 + 0.4j)


def test_identity_sigma_reduces():
    spec = EnsembleSpec(2, 7, 3)
    for k in (1, 2):
        assert duality_moment_general(spec, k, 0.8, [1, 1, 1]) == pytest.approx(
            duality_moment(spec, k, 0.8), rel=1e-13)


def test_sigma_length_checked():
    with pytest.raises(DomainError):
        duality_moment_general(EnsembleSpec(2, 7, 3), 1, 0.8, [1, 1])


def _mc_scaled(spec, v_diag, x, gamma, n, seed):
    """Plain MC of ``|det(x - A V)|^gamma`` (``det^gamma`` for beta=1) with a diagonal ``V``."""
    rng = block_rng(seed, 0)
    a = haar_truncations(spec, n, rng)
    v = np.asarray(v_diag)
    if spec.beta == 4:
        v = np.repeat(v, 2)
    vals = charpoly_values(a * v[None, None, :], x, spec.beta, gamma)
    return vals.mean(), vals.std(ddof=1) / math.sqrt(n)


def test_sigma_example():
    spec = EnsembleSpec(2, 2, 1)
    val = duality_moment_general(spec, 1, 1.0, [0.25])
    assert val == pytest.approx(1.125, rel=1e-13)
    mean, se = _mc_scaled(spec, [0.5], 1.0, 2, 200_000, 3)
    assert abs(mean - val) < 4 * se


@pytest.mark.parametrize("beta", [1, 2])
def test_general_sigma_against_mc(beta):
    spec = EnsembleSpec(beta, 5, 3)
    sigma = [0.3, 1.0, 1.7]
    val = duality_moment_general(spec, 2, 0.9, sigma)
    mean, se = _mc_scaled(spec, np.sqrt(sigma), 0.9, 4, 200_000, 5)
    assert abs(mean - val) < 4 * se


def test_sigma_eigenvalue_at_modulus_is_regular():
    spec = EnsembleSpec(2, 5, 2)
    at = duality_moment_general(spec, 2, 1.0, [1.0, 0.5])
    near = duality_moment_general(spec, 2, 1.0 + 1e-9, [1.0, 0.5])
    assert math.isfinite(at) and at == pytest.approx(near, rel=1e-7)


def test_large_x_normalisation():
    spec = EnsembleSpec(2, 6, 3)
    x = 1e4
    val = duality_moment_general(spec, 1, x, [0.2, 0.9, 2.0])
    assert val / x ** (2 * spec.m_trunc) == pytest.approx(1.0, rel=1e-6)


@pytest.mark.parametrize("beta", [1, 2, 4])
def test_stochastic_rule_covers_exact(beta):
    spec = EnsembleSpec(beta, 6, 3)
    est = duality_moment_mc(spec, 2, 0.7, q=QuadratureSpec(rule="ordered_simplex_mc", mc_samples=200_000, seed=4))
    assert est.covers(exact_moment(spec, 2)(0.7), 4)
    with pytest.raises(DomainError):
        duality_moment_mc(spec, 2, 0.7, q=QuadratureSpec())


# ---------------------------------------------------------------- odd moments

def test_odd_k0_is_power():
    spec = EnsembleSpec(1, 5, 3)
    assert odd_moment_real(spec, 0, 0.7) == pytest.approx(0.7 ** 3)


def test_odd_two_point_example():
    val = odd_moment_real(EnsembleSpec(1, 1, 1), 1, 0.3)
    assert val == pytest.approx(((0.3 - 1) ** 3 + (0.3 + 1) ** 3) / 2, rel=1e-13)


def test_odd_leading_coefficient():
    spec = EnsembleSpec(1, 5, 2)
    x = 1e3
    for k in (1, 2):
        assert odd_moment_real(spec, k, x) / x ** ((2 * k + 1) * spec.m_trunc) == pytest.approx(1, rel=1e-4)


@pytest.mark.parametrize("k,x", [(0, 0.8), (1, 0.8), (1, -1.2), (2, 0.5)])
def test_odd_against_mc(k, x):
    spec = EnsembleSpec(1, 4, 2)
    val = odd_moment_real(spec, k, x)
    mc = mc_moment(spec, MomentQuery(2 * k + 1, x), 400_000, seed=8)
    assert mc.covers(val, 4)


def test_odd_general_sigma_against_mc():
    spec = EnsembleSpec(1, 4, 2)
    sigma = [0.5, 1.5]
    val = odd_moment_real(spec, 1, 0.8, sigma)
    mean, se = _mc_scaled(spec, np.sqrt(sigma), 0.8, 3, 400_000, 9)
    assert abs(mean - val) < 4 * se


def test_odd_rejects_other_beta():
    with pytest.raises(DomainError):
        odd_moment_real(EnsembleSpec(2, 3, 2), 1, 0.5)


# ---------------------------------------------------------------- largest eigenvalue CDFs

@pytest.mark.parametrize("beta_prime", [1, 2, 4])
def test_gbe_k1_is_normal_cdf(beta_prime):
    assert gbe_max_cdf(1, beta_prime, 0.0) == pytest.approx(0.5, abs=1e-13)
    for s in (-2.0, -0.3, 1.1, 3.0):
        assert gbe_max_cdf(1, beta_prime, s) == pytest.approx(norm.cdf(s), abs=1e-13)


def test_gbe_tail():
    assert gbe_max_cdf(2, 2, 6.0) > 1 - 1e-6
    assert gbe_max_cdf(2, 2, -20.0) == 0.0
    assert gbe_max_cdf(2, 2, 20.0) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("beta_prime", [1, 2, 4])
def test_gbe_against_dense_sampling(beta_prime):
    rng = np.random.default_rng(21)
    n, k = 200_000, 2
    if beta_prime == 1:
        g = rng.standard_normal((n, k, k))
        h = (g + g.transpose(0, 2, 1)) / 2
        lam = np.linalg.eigvalsh(h)[:, -1]
    elif beta_prime == 2:
        g = rng.standard_normal((n, k, k)) + 1j * rng.standard_normal((n, k, k))
        h = (g + g.conj().transpose(0, 2, 1)) / 2
        lam = np.linalg.eigvalsh(h)[:, -1]
    else:
        # quaternion self-dual 2x2 as 4x4 complex; eigenvalues come in pairs
        a = rng.standard_normal((n, k, k)) + 1j * rng.standard_normal((n, k, k))
        b = rng.standard_normal((n, k, k)) + 1j * rng.standard_normal((n, k, k))
        big = np.block([[a, b], [-b.conj(), a.conj()]])
        h = (big + big.conj().transpose(0, 2, 1)) / 2
        lam = np.linalg.eigvalsh(h)[:, -1]
    for s in (-0.5, 0.8, 2.0):
        emp = np.mean(lam < s)
        se = math.sqrt(max(emp * (1 - emp), 1e-6) / n)
        assert abs(gbe_max_cdf(k, beta_prime, s) - emp) < 4 * se


def test_lbe_small_cases():
    for u in (0.1, 0.7, 2.5):
        assert lbe_max_cdf(1, 2, 0, u) == pytest.approx(1 - math.exp(-2 * u), abs=1e-13)
        assert lbe_max_cdf(1, 1, 1, u) == pytest.approx(1 - math.exp(-2 * u) * (1 + 2 * u), abs=1e-13)
    assert lbe_max_cdf(2, 2, 1, 500.0) == pytest.approx(1.0, abs=1e-12)


def test_lbe_against_sampling():
    # complex Wishart k x k with k + kappa degrees of freedom, weight t^kappa e^{-t}
    rng = np.random.default_rng(5)
    n, k, kappa = 200_000, 2, 1
    g = (rng.standard_normal((n, k, k + kappa)) + 1j * rng.standard_normal((n, k, k + kappa))) / math.sqrt(2)
    lam = np.linalg.eigvalsh(g @ g.conj().transpose(0, 2, 1))[:, -1]
    for u in (1.0, 2.5):
        emp = np.mean(lam < 2 * u)
        se = math.sqrt(emp * (1 - emp) / n)
        assert abs(lbe_max_cdf(k, 2, kappa, u) - emp) < 4 * se


@pytest.mark.parametrize("beta_prime", [1, 2, 4])
def test_cdfs_monotone_and_bounded(beta_prime):
    s_grid = np.linspace(-5, 6, 23)
    g = [gbe_max_cdf(3, beta_prime, s) for s in s_grid]
    u_grid = np.linspace(0.05, 12, 20)
    l = [lbe_max_cdf(2, beta_prime, 2, u) for u in u_grid]
    for vals in (g, l):
        assert all(0 <= v <= 1 for v in vals)
        assert all(b >= a - 1e-13 for a, b in zip(vals, vals[1:]))


def test_cdf_domain_errors():
    with pytest.raises(DomainError):
        gbe_max_cdf(2, 3, 0.0)
    with pytest.raises(DomainError):
        lbe_max_cdf(2, 2, 1, -1.0)
    with pytest.raises(DomainError):
        lbe_max_cdf(0, 2, 1, 1.0)
