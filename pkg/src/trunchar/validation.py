"""Self-validation suite.

Each criterion cross-checks independent engines (partition series,
quadrature, Gamma products, Monte Carlo) on a fixed grid and returns a
:class:`CriterionResult`.  Monte Carlo criteria use fixed seeds, so the suite
is deterministic.
"""

from __future__ import annotations

import cmath
import math
import time
from dataclasses import dataclass

import numpy as np

from .asymptotics import (
    boundary_cumulant_sweep,
    strong_approx,
    strong_gbe_factor,
    weak_approx,
    weak_modulus,
)
from .partitions import exact_moment
from .quadrature import duality_moment
from .sampling import (
    MomentQuery,
    beta_product_logdet_samples,
    block_rng,
    haar_sample,
    haar_truncations,
    mc_moments,
    symplectic_form,
)
from .special_functions import (
    EnsembleSpec,
    boundary_moment,
    gamma_limit_mgf,
    logdet_mgf,
)

__all__ = ["CriterionResult", "CRITERIA", "run_criterion", "run_acceptance", "triangle_points"]

N_SE = 4.0


@dataclass(frozen=True)
class CriterionResult:
    number: int
    title: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self, timing=False) -> str:
        tag = "PASS" if self.passed else "FAIL"
        out = f"[{tag}] {self.number}. {self.title}: {self.detail}"
        if timing:
            out += f" ({self.seconds:.1f}s)"
        return out


def _rel(a, b):
    return abs(a - b) / abs(b) if b != 0 else abs(a)


def triangle_points(beta):
    """Evaluation points of the consistency grid for one ``beta``."""
    pts = [0.0, 0.3]
    if beta == 2:
        pts.append(0.5 + 0.2j)
    if beta == 1:
        pts.append(-0.4)
    return pts


_GRID = [(m, n) for m in (2, 3) for n in (4, 6)]


def criterion_triangle(seed=0, workers=1):
    """Partition series vs quadrature vs Monte Carlo."""
    worst_q = {1: 0.0, 2: 0.0, 4: 0.0}
    worst_z = 0.0
    failures = []
    for beta in (1, 2, 4):
        tol = 1e-6 if beta == 4 else 1e-8
        for m, n in _GRID:
            spec = EnsembleSpec(beta, n, m)
            queries = [MomentQuery.even(k, x) for k in (1, 2) for x in triangle_points(beta)]
            ests = mc_moments(spec, queries, 200_000, seed=seed, workers=workers)
            for q, est in zip(queries, ests):
                k = int(q.gamma) // 2
                ex = exact_moment(spec, k)(q.x)
                du = duality_moment(spec, k, q.x)
                err = _rel(du, ex)
                z = abs(est.z_score(ex))
                worst_q[beta] = max(worst_q[beta], err)
                worst_z = max(worst_z, z)
                if err > tol or z > N_SE:
                    failures.append(f"beta={beta} M={m} N={n} k={k} x={q.x}")
    detail = (f"max rel err series/quadrature beta1={worst_q[1]:.1e} beta2={worst_q[2]:.1e} "
              f"beta4={worst_q[4]:.1e}; max |z| MC={worst_z:.2f}")
    if failures:
        detail += "; failing: " + ", ".join(failures[:4])
    return not failures, detail, 300.0


def criterion_gauss_summation(seed=0, workers=1):
    """Series at ``|x| = 1`` vs boundary Gamma products."""
    worst = 0.0
    for beta in (1, 2, 4):
        points = [1.0]
        if beta == 1:
            points.append(-1.0)
        else:
            points.append(cmath.exp(0.7j))
        for m, n in _GRID:
            spec = EnsembleSpec(beta, n, m)
            for k in (1, 2):
                gamma = k if beta == 4 else 2 * k
                for x in points:
                    theta = cmath.phase(x)
                    ref = boundary_moment(spec, gamma, theta).value
                    worst = max(worst, _rel(exact_moment(spec, k)(x), ref))
    return worst <= 1e-10, f"max rel err {worst:.1e} (tol 1e-10)", None


def criterion_bhny(seed=0, workers=1):
    """Recursive boundary samplers vs Gamma products."""
    worst = 0.0
    for beta in (1, 2, 4):
        for m, n in ((1, 2), (2, 4), (3, 4)):
            spec = EnsembleSpec(beta, n, m)
            # for beta=4 the query power is applied to the square root of the 2M-dim det
            queries = [MomentQuery((2 * g if beta == 4 else g), 1.0) for g in (1, 2)]
            ests = mc_moments(spec, queries, 1_000_000, seed=seed, sampler="bhny", workers=workers)
            for g, est in zip((1, 2), ests):
                worst = max(worst, abs(est.z_score(boundary_moment(spec, g).value)))
    return worst <= N_SE, f"max |z| {worst:.2f} over 1e6 draws (limit {N_SE:g})", 120.0


def _mc_mean(values):
    return float(np.mean(values)), float(np.std(values, ddof=1) / math.sqrt(values.size))


def criterion_beta_product(seed=0, workers=1):
    """Both log-Beta representations vs the MGF, and the exact beta=2 second moment."""
    worst = 0.0
    for beta in (1, 2, 4):
        for m, n in ((1, 2), (2, 4), (3, 4), (3, 6)):
            spec = EnsembleSpec(beta, n, m)
            for i, form in enumerate(("m_fold", "kappa_fold")):
                logs = beta_product_logdet_samples(spec, form, 1_000_000, block_rng(seed, 1000 + i))
                for g in (1, 2):
                    mean, se = _mc_mean(np.exp(g * logs))
                    ref = logdet_mgf(spec, g).value
                    worst = max(worst, abs(mean - ref) / se)
    exact = 0.0
    for n in range(1, 13):
        for m in range(1, n + 1):
            ref = math.factorial(m) * math.factorial(n - m) / math.factorial(n)
            exact = max(exact, _rel(logdet_mgf(EnsembleSpec(2, n, m), 2).value, ref))
    ok = worst <= N_SE and exact <= 1e-12
    return ok, f"max |z| {worst:.2f}; E|det A|^2 max rel err {exact:.1e} (tol 1e-12)", None


def criterion_weak(seed=0, workers=1):
    """Laguerre-regime asymptotics vs quadrature."""
    parts, ok = [], True
    for beta, tol in ((2, 0.05), (1, 0.10), (4, 0.10)):
        for kappa in (0, 1):
            errs = []
            for m in (100, 400):
                spec = EnsembleSpec(beta, m + kappa, m)
                ref = duality_moment(spec, 1, weak_modulus(m, 1.0))
                errs.append(_rel(weak_approx(beta, kappa, 1, 1.0, m), ref))
            ok &= errs[0] <= tol and errs[1] < errs[0]
            parts.append(f"b{beta}k{kappa} {errs[0]:.3f}->{errs[1]:.3f}")
    return ok, "rel err M=100->400: " + ", ".join(parts), None


def criterion_strong(seed=0, workers=1):
    """Gaussian-regime asymptotics vs quadrature."""
    parts, ok = [], True
    for k in (1, 2):
        for x in (0.0, 0.4):
            errs = []
            for m in (30, 60):
                spec = EnsembleSpec(2, 2 * m, m)
                errs.append(_rel(strong_approx(spec, k, x), duality_moment(spec, k, x)))
            ok &= errs[1] <= 0.10 and errs[1] < errs[0]
            parts.append(f"k{k} x{x:g} {errs[0]:.3f}->{errs[1]:.3f}")
    factor = max(abs(strong_gbe_factor(EnsembleSpec(2, 2 * m, m), k, 0.0) - 1)
                 for m in (30, 60) for k in (1, 2))
    ok &= factor <= 1e-6
    return ok, "rel err M=30->60: " + ", ".join(parts) + f"; |P-1| at x=0 {factor:.1e}", None


def criterion_clt(seed=0, workers=1):
    """Exact boundary cumulants vs the limit-theorem coefficients."""
    parts, ok = [], True
    for beta in (1, 2, 4):
        lo, hi = boundary_cumulant_sweep(beta, 1, [100, 10_000])
        ratio = hi["variance_ratio"]
        good = 0.9 <= ratio <= 1.1 and abs(hi["skewness"]) < abs(lo["skewness"])
        ok &= good
        parts.append(f"b{beta} var/(v log M)={ratio:.3f} |skew| {abs(lo['skewness']):.3f}->"
                     f"{abs(hi['skewness']):.3f}")
    return ok, "; ".join(parts), 10.0


def criterion_gamma_limit(seed=0, workers=1):
    """Rescaled MGF of log|det A| vs its kappa-fixed limit."""
    parts, ok = [], True
    g, kappa = 1.0, 2
    for beta in (1, 2, 4):
        errs = []
        for m in (100, 1000, 10_000):
            spec = EnsembleSpec(beta, m + kappa, m)
            log_ratio = (logdet_mgf(spec, g).log_value
                         + 0.5 * g * kappa * math.log(beta * m / 2.0)
                         - gamma_limit_mgf(kappa, beta, g).log_value)
            errs.append(abs(math.expm1(log_ratio)))
        ok &= errs[1] <= 0.02 and errs[0] > errs[1] > errs[2]
        parts.append(f"b{beta} " + "->".join(f"{e:.1e}" for e in errs))
    return ok, "rel err M=1e2->1e3->1e4: " + ", ".join(parts), None


def criterion_sampler(seed=0, workers=1):
    """Haar residuals, mean trace and thread-count reproducibility."""
    residual = 0.0
    for beta in (1, 2, 4):
        for n in (1, 2, 16, 64, 256):
            u = haar_sample(beta, n, block_rng(seed, 2000 + n)).entries
            d = u.shape[0]
            residual = max(residual, np.abs(u @ u.conj().T - np.eye(d)).max())
            if beta == 1:
                residual = max(residual, np.abs(u.imag).max() if np.iscomplexobj(u) else 0.0)
            if beta == 4:
                j = symplectic_form(n)
                residual = max(residual, np.abs(u @ j @ u.T - j).max())
    trace_z = 0.0
    for beta in (1, 2, 4):
        for m, n in ((2, 4), (3, 4), (3, 6)):
            spec = EnsembleSpec(beta, n, m)
            a = haar_truncations(spec, 100_000, block_rng(seed, 3000 + 10 * m + n))
            tr = np.einsum("sij,sij->s", a, a.conj()).real
            if beta == 4:
                tr = tr / 2
            mean, se = _mc_mean(tr)
            trace_z = max(trace_z, abs(mean - m * m / n) / se)
    identical = True
    for beta in (1, 2, 4):
        spec = EnsembleSpec(beta, 5, 3)
        queries = [MomentQuery.even(1, 0.3), MomentQuery(1.0, 0.0)]
        runs = [mc_moments(spec, queries, 3 * 4096 + 17, seed=seed + 7, workers=w)
                for w in (1, 2, 8)]
        identical &= runs[0] == runs[1] == runs[2]
    ok = residual <= 1e-12 and trace_z <= N_SE and identical
    return ok, (f"max residual {residual:.1e}; trace |z| {trace_z:.2f}; "
                f"workers 1/2/8 identical: {identical}"), None


CRITERIA = {
    1: ("Triangle consistency grid", criterion_triangle),
    2: ("Gauss summation", criterion_gauss_summation),
    3: ("BHNY samplers", criterion_bhny),
    4: ("Beta-product identities", criterion_beta_product),
    5: ("Weak asymptotics", criterion_weak),
    6: ("Strong asymptotics", criterion_strong),
    7: ("CLT coefficients", criterion_clt),
    8: ("Gamma limit", criterion_gamma_limit),
    9: ("Sampler sanity", criterion_sampler),
}


def run_criterion(number, seed=0, workers=1) -> CriterionResult:
    title, fn = CRITERIA[number]
    start = time.perf_counter()
    ok, detail, budget = fn(seed=seed, workers=workers)
    elapsed = time.perf_counter() - start
    if budget is not None and elapsed > budget:
        ok = False
        detail += f"; runtime {elapsed:.0f}s over the {budget:.0f}s budget"
    return CriterionResult(number, title, bool(ok), detail, elapsed)


def run_acceptance(numbers=None, seed=0, workers=1) -> list:
    """Run the selected criteria (all by default) in order."""
    numbers = sorted(CRITERIA) if numbers is None else list(numbers)
    return [run_criterion(n, seed, workers) for n in numbers]
