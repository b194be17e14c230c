import math

import numpy as np
import pytest
from scipy import stats

from trunchar import EnsembleSpec
from trunchar.errors import DomainError
from trunchar.quadrature import duality_moment
from trunchar.sampling import (
    MCEstimate,
    MomentQuery,
    beta_product_logdet_sample,
    beta_product_logdet_samples,
    bhny_boundary_sample,
    bhny_boundary_samples,
    block_rng,
    charpoly_value,
    charpoly_values,
    haar_sample,
    haar_truncations,
    mc_moment,
    mc_moments,
    symplectic_form,
    truncate,
)
from trunchar.special_functions import boundary_moment, logdet_mgf


# ---------------------------------------------------------------- Haar matrices

@pytest.mark.parametrize("beta", [1, 2, 4])
@pytest.mark.parametrize("n", [1, 2, 7, 64, 512])
def test_unitarity(beta, n):
    u = haar_sample(beta, n, np.random.default_rng(n))
    e = u.entries
    assert e.shape == (u.rep_dim, u.rep_dim)
    assert np.max(np.abs(e @ e.conj().T - np.eye(u.rep_dim))) <= 1e-12
    if beta == 1:
        assert np.isrealobj(e)
    if beta == 4:
        j = symplectic_form(n)
        assert np.max(np.abs(e @ j @ e.T - j)) <= 1e-12


def test_symplectic_eigenvalues_pair_up():
    for seed in range(5):
        e = haar_sample(4, 6, np.random.default_rng(seed)).entries
        ev = np.linalg.eigvals(e)
        for lam in ev:
            assert np.min(np.abs(ev - np.conj(lam))) < 1e-9


def test_trace_second_moment_unitary():
    spec = EnsembleSpec(2, 5, 5)
    a = haar_truncations(spec, 100_000, block_rng(1, 0))
    tr2 = np.abs(np.trace(a, axis1=1, axis2=2)) ** 2
    se = tr2.std(ddof=1) / math.sqrt(tr2.size)
    assert abs(tr2.mean() - 1.0) < 4 * se


def test_first_entry_is_beta_distributed():
    n = 6
    a = haar_truncations(EnsembleSpec(2, n, 1), 100_000, block_rng(2, 0))
    sq = np.abs(a[:, 0, 0]) ** 2
    assert stats.kstest(sq, stats.beta(1, n - 1).cdf).pvalue > 1e-3


@pytest.mark.parametrize("beta", [1, 2])
def test_truncation_frobenius_mean(beta):
    n, m = 7, 3
    a = haar_truncations(EnsembleSpec(beta, n, m), 100_000, block_rng(3, 0))
    fro = np.sum(np.abs(a) ** 2, axis=(1, 2))
    se = fro.std(ddof=1) / math.sqrt(fro.size)
    assert abs(fro.mean() - m * m / n) < 4 * se


def test_truncate_shapes_and_full():
    for beta in (1, 2, 4):
        u = haar_sample(beta, 5, np.random.default_rng(0))
        assert np.array_equal(truncate(u, 5), u.entries)
        d = 4 if beta == 4 else 2
        assert truncate(u, 2).shape == (d, d)
        with pytest.raises(DomainError):
            truncate(u, 6)


def test_haar_sample_rejects_bad_beta():
    with pytest.raises(DomainError):
        haar_sample(3, 4)


# ---------------------------------------------------------------- integrand

def test_charpoly_zero_matrix():
    for m in (1, 3):
        assert charpoly_value(np.zeros((m, m)), 0.3 + 0.4j, 2, 4) == pytest.approx(0.5 ** (4 * m))


def test_charpoly_two_point_orthogonal():
    vals = set()
    for seed in range(40):
        a = truncate(haar_sample(1, 1, np.random.default_rng(seed)), 1)
        vals.add(round(charpoly_value(a, 0.3, 1, 2), 12))
    assert vals == {round(0.7 ** 2, 12), round(1.3 ** 2, 12)}


def test_charpoly_quaternion_nonnegative():
    a = haar_truncations(EnsembleSpec(4, 5, 3), 100_000, block_rng(4, 0))
    d = a.shape[-1]
    x = 0.6 * np.exp(0.8j)
    shift = np.diag(np.tile([x, np.conj(x)], d // 2))
    dets = np.linalg.det(shift - a)
    assert np.max(np.abs(dets.imag)) < 1e-10 * max(1.0, np.max(np.abs(dets)))
    assert np.min(dets.real) >= -1e-12
    assert np.all(charpoly_values(a, x, 4, 2) >= 0)


def test_charpoly_beta1_needs_real_x():
    with pytest.raises(DomainError):
        charpoly_value(np.zeros((2, 2)), 0.1j, 1, 2)


# ---------------------------------------------------------------- mc_moment

def test_k0_is_exact():
    est = mc_moment(EnsembleSpec(2, 4, 2), MomentQuery.even(0, 0.5), 10)
    assert est.mean == 1 and est.stderr == 0


def test_origin_coverage_rate():
    spec = EnsembleSpec(2, 4, 2)
    hits = sum(mc_moment(spec, MomentQuery.even(1), 4096, seed=s).covers(1 / 6, 3) for s in range(100))
    assert hits >= 99


def test_against_duality_beta1():
    spec = EnsembleSpec(1, 4, 2)
    est = mc_moment(spec, MomentQuery.even(1, 0.5), 200_000, seed=5)
    assert est.covers(duality_moment(spec, 1, 0.5), 4)


@pytest.mark.parametrize("workers", [2, 3, 8])
def test_reproducible_across_workers(workers):
    spec = EnsembleSpec(2, 6, 3)
    queries = [MomentQuery.even(1, 0.4), MomentQuery(1.3, 0.9j)]
    base = mc_moments(spec, queries, 20_000, seed=17, workers=1)
    other = mc_moments(spec, queries, 20_000, seed=17, workers=workers)
    assert base == other
    assert mc_moments(spec, queries, 20_000, seed=18) != base


def test_estimate_fields():
    est = mc_moment(EnsembleSpec(1, 3, 2), MomentQuery.even(1, 0.2), 5000, seed=42)
    assert isinstance(est, MCEstimate) and est.n_samples == 5000 and est.seed == 42
    assert est.z_score(est.mean) == 0
    with pytest.raises(DomainError):
        mc_moment(EnsembleSpec(1, 3, 2), MomentQuery.even(1), 1)


def test_rotation_invariance_unitary():
    spec = EnsembleSpec(2, 5, 3)
    a = haar_truncations(spec, 100_000, block_rng(6, 0))
    b = haar_truncations(spec, 100_000, block_rng(7, 0))
    samples = [charpoly_values(a, 1.0, 2, 1), charpoly_values(b, np.exp(1j), 2, 1),
               charpoly_values(a, 1j, 2, 1)]
    assert stats.ks_2samp(samples[0], samples[1]).pvalue > 1e-3
    assert stats.ks_2samp(samples[1], samples[2]).pvalue > 1e-3


# ---------------------------------------------------------------- product samplers

def test_bhny_examples():
    rng = np.random.default_rng(0)
    s = bhny_boundary_samples(EnsembleSpec(2, 2, 1), 400_000, rng)
    sq = s ** 2
    assert abs(sq.mean() - 1.5) < 4 * sq.std(ddof=1) / math.sqrt(sq.size)
    o = bhny_boundary_samples(EnsembleSpec(1, 1, 1), 10_000, rng)
    assert set(np.round(o, 12)) == {0.0, 2.0}
    assert abs(np.mean(o == 2.0) - 0.5) < 0.02
    q = bhny_boundary_samples(EnsembleSpec(4, 1, 1), 400_000, rng)
    assert abs(q.mean() - 2.0) < 4 * q.std(ddof=1) / math.sqrt(q.size)
    assert bhny_boundary_sample(EnsembleSpec(4, 3, 2), 1) >= 0


@pytest.mark.parametrize("beta", [1, 2, 4])
def test_bhny_matches_boundary_products(beta):
    rng = np.random.default_rng(beta)
    for m in range(1, 5):
        for n in range(m, 7):
            spec = EnsembleSpec(beta, n, m)
            s = bhny_boundary_samples(spec, 100_000, rng)
            for gamma in (1, 2):
                v = s ** gamma
                se = v.std(ddof=1) / math.sqrt(v.size)
                assert abs(v.mean() - boundary_moment(spec, gamma).value) < 4 * se, (spec, gamma)


@pytest.mark.parametrize("beta", [1, 2, 4])
def test_bhny_matches_haar_sampler(beta):
    spec = EnsembleSpec(beta, 5, 3)
    x = 1.0
    q = MomentQuery(2.0, x)
    fast = mc_moment(spec, q, 200_000, seed=1, sampler="bhny")
    slow = mc_moment(spec, q, 200_000, seed=2, sampler="haar")
    assert abs(fast.mean - slow.mean) < 4 * math.hypot(fast.stderr, slow.stderr)


def test_bhny_query_checks():
    with pytest.raises(DomainError):
        mc_moment(EnsembleSpec(2, 4, 2), MomentQuery(2, 0.5), 100, sampler="bhny")
    with pytest.raises(DomainError):
        mc_moment(EnsembleSpec(1, 4, 2), MomentQuery(2, 1j), 100, sampler="bhny")


def test_beta_product_unitary_is_zero():
    rng = np.random.default_rng(0)
    for form in ("m_fold", "kappa_fold"):
        assert np.all(beta_product_logdet_samples(EnsembleSpec(2, 4, 4), form, 100, rng) == 0)
    assert beta_product_logdet_sample(EnsembleSpec(2, 3, 3), "m_fold", 1) == 0


def test_beta_product_moment():
    spec = EnsembleSpec(2, 4, 2)
    est = mc_moment(spec, MomentQuery.even(1), 1_000_000, seed=3, sampler="beta-product")
    assert est.covers(1 / 6, 4)


@pytest.mark.parametrize("beta", [1, 2, 4])
def test_beta_product_forms_agree(beta):
    spec = EnsembleSpec(beta, 7, 4)
    a = beta_product_logdet_samples(spec, "m_fold", 100_000, np.random.default_rng(1))
    b = beta_product_logdet_samples(spec, "kappa_fold", 100_000, np.random.default_rng(2))
    assert stats.ks_2samp(a, b).pvalue > 1e-3


@pytest.mark.parametrize("beta", [1, 2, 4])
def test_beta_product_matches_haar_logdet(beta):
    spec = EnsembleSpec(beta, 6, 3)
    a = haar_truncations(spec, 50_000, block_rng(8, 0))
    _, logabs = np.linalg.slogdet(a)
    haar = logabs / 2 if beta == 4 else logabs
    prod = beta_product_logdet_samples(spec, "kappa_fold", 50_000, np.random.default_rng(9))
    assert stats.ks_2samp(haar, prod).pvalue > 1e-3


def test_beta_product_mgf():
    spec = EnsembleSpec(1, 6, 3)
    v = np.exp(1.5 * beta_product_logdet_samples(spec, "m_fold", 400_000, np.random.default_rng(4)))
    assert abs(v.mean() - logdet_mgf(spec, 1.5).value) < 4 * v.std(ddof=1) / math.sqrt(v.size)


def test_beta_product_query_checks():
    with pytest.raises(DomainError):
        mc_moment(EnsembleSpec(2, 4, 2), MomentQuery(2, 0.5), 100, sampler="beta-product")
    with pytest.raises(DomainError):
        mc_moment(EnsembleSpec(1, 4, 2), MomentQuery(3, 0), 100, sampler="beta-product")
    with pytest.raises(DomainError):
        beta_product_logdet_samples(EnsembleSpec(1, 4, 2), "bogus", 10, np.random.default_rng())
