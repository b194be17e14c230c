"""Moments of characteristic polynomials of truncated Haar random matrices.

Four engines compute the same quantities independently:

* :mod:`trunchar.partitions`: exact partition (Jack polynomial) series,
* :mod:`trunchar.quadrature`: k-fold dual integrals by Selberg-weighted quadrature,
* :mod:`trunchar.special_functions`: closed-form Gamma products,
* :mod:`trunchar.sampling`: Monte Carlo over Haar samples and product representations.

:mod:`trunchar.asymptotics` holds the large-``M`` formulas and
:mod:`trunchar.validation` the cross-checking suite behind ``trunchar validate``.
"""

from .asymptotics import (
    CLTParams,
    clt_params_boundary,
    clt_params_origin,
    strong_approx,
    weak_approx,
)
from .errors import ConvergenceWarning, DomainError, InsufficientNodesError, PoleError
from .partitions import (
    Partition,
    SeriesEstimate,
    SeriesPolynomial,
    enumerate_partitions,
    exact_moment,
    gen_pochhammer,
    jack_dprime,
    jack_identity_value,
    noninteger_moment,
)
from .quadrature import (
    QuadratureSpec,
    duality_moment,
    duality_moment_general,
    duality_moment_mc,
    gbe_max_cdf,
    lbe_max_cdf,
    odd_moment_real,
)
from .sampling import (
    HaarMatrix,
    MCEstimate,
    MomentQuery,
    beta_product_logdet_sample,
    bhny_boundary_sample,
    charpoly_value,
    haar_sample,
    mc_moment,
    mc_moments,
    truncate,
)
from .special_functions import (
    EnsembleSpec,
    GammaProductValue,
    boundary_moment,
    gamma_limit_mgf,
    haar_group_moment,
    laguerre_const,
    logdet_cumulants,
    logdet_mgf,
    mehta_const,
    selberg_const,
    skn_const,
)

__version__ = "0.1.0"
