"""Negative hypergeometric increments and the Pólya insertion urn.

The increment ``ΔX_{n+1}`` given ``X_n = k`` is the number of black balls
drawn without replacement before the first white one, from an urn with
``M = N - n + n(n-1)/2 - k`` balls of which ``K = N - n`` are white.
"""

from fractions import Fraction
import math

import numpy as np
from scipy.special import gammaln

from growthlab.constants import PMF_EXACT_MAX_BALLS
from growthlab.state import SeedSpec, WeakComposition

SAMPLING_METHODS = ("sequential", "inverse", "beta-binomial")


def _check_urn(M, K):
    if not 0 <= K <= M:
        raise ValueError(f"need 0 <= K <= M, got M={M}, K={K}")
    if K == 0 and M > 0:
        raise ValueError("no white balls: increment undefined")


def _log_comb(a, b):
    return gammaln(a + 1) - gammaln(b + 1) - gammaln(a - b + 1)


def neg_hypergeom_pmf(M, K, ell, exact=False):
    """Probability of drawing ``ell`` black balls before the first white.

    Parameters
    ----------
    M : int
        Total number of balls.

    K : int
        Number of white balls, ``1 <= K <= M``.

    ell : int
        Number of black balls, ``0 <= ell <= M - K``.

    exact : bool, default: False
        Return a ``fractions.Fraction`` instead of a float.

    Returns
    -------
    float or fractions.Fraction
        ``C(M - ell - 1, K - 1) / C(M, K)``.

    Examples
    --------
    >>> from growthlab.urn import neg_hypergeom_pmf
    >>> neg_hypergeom_pmf(3, 1, 0, exact=True)
    Fraction(1, 3)
    """
    _check_urn(M, K)
    if not 0 <= ell <= M - K:
        return Fraction(0) if exact else 0.0
    if M == 0:
        return Fraction(1) if exact else 1.0
    if exact:
        return Fraction(math.comb(M - ell - 1, K - 1), math.comb(M, K))
    if M <= PMF_EXACT_MAX_BALLS:
        # int / int true division is correctly rounded
        return math.comb(M - ell - 1, K - 1) / math.comb(M, K)
    return float(np.exp(_log_comb(M - ell - 1, K - 1) - _log_comb(M, K)))


def neg_hypergeom_pmf_vector(M, K):
    """Whole pmf on ``0..M-K`` by the ratio recurrence

    ``p(ell + 1) / p(ell) = (M - K - ell) / (M - ell - 1)``, ``p(0) = K / M``.
    """
    _check_urn(M, K)
    if M == 0:
        return np.ones(1)
    ell = np.arange(M - K, dtype=np.float64)
    ratios = (M - K - ell) / (M - ell - 1)
    return (K / M) * np.concatenate(([1.0], np.cumprod(ratios)))


def conditional_increment_moments(M, K):
    """Mean and variance of the number of black balls before the first
    white one.

    Returns
    -------
    tuple of float
        ``((M - K) / (K + 1), (M + 1)(M - K)K / ((K + 1)^2 (K + 2)))``.

    Examples
    --------
    >>> from growthlab.urn import conditional_increment_moments
    >>> conditional_increment_moments(3, 1)
    (1.0, 0.6666666666666666)
    """
    if K < 1:
        raise ValueError(f"need K >= 1 white balls, got K={K}")
    _check_urn(M, K)
    mean = (M - K) / (K + 1)
    var = (M + 1) * (M - K) * K / ((K + 1) ** 2 * (K + 2))
    return mean, var


def _sample_sequential(M, K, rng):
    black = M - K
    ell = 0
    while black > 0 and rng.random() * (M - ell) < black:
        black -= 1
        ell += 1
    return ell


def _sample_inverse(M, K, rng):
    u = rng.random()
    p = K / M
    cdf = p
    ell = 0
    while u >= cdf and ell < M - K:
        p *= (M - K - ell) / (M - ell - 1)
        ell += 1
        cdf += p
    return ell


def neg_hypergeom_sample(M, K, rng, method="sequential", size=None):
    """Exact draw of the number of black balls before the first white one.

    Parameters
    ----------
    M : int or numpy.ndarray
        Total number of balls.  Arrays are accepted by the
        ``"beta-binomial"`` method only.

    K : int or numpy.ndarray
        Number of white balls, at least 1.

    rng : numpy.random.Generator
        Source of randomness.

    method : str, default: "sequential"
        ``"sequential"`` draws balls one by one (cost proportional to the
        value), ``"inverse"`` inverts the cdf with the ratio recurrence and
        ``"beta-binomial"`` uses the representation ``Binomial(M - K, p)``
        with ``p ~ Beta(1, K)``, which vectorises over arrays.

    size : int, optional
        Number of independent draws for the ``"beta-binomial"`` method.

    Returns
    -------
    int or numpy.ndarray
    """
    if method == "beta-binomial":
        M = np.asarray(M, dtype=np.int64)
        K = np.asarray(K, dtype=np.int64)
        if np.any(K < 1) or np.any(K > M):
            raise ValueError("need 1 <= K <= M for every draw")
        shape = size if size is not None else np.broadcast(M, K).shape
        p = rng.beta(1.0, K, size=shape)
        draws = rng.binomial(M - K, p, size=shape)
        return int(draws) if np.ndim(draws) == 0 else draws
    if size is not None:
        return np.array([neg_hypergeom_sample(M, K, rng, method) for _ in range(size)])
    _check_urn(M, K)
    if K == 0:
        return 0
    if method == "sequential":
        return _sample_sequential(M, K, rng)
    elif method == "inverse":
        return _sample_inverse(M, K, rng)
    raise ValueError(f"unknown sampling method {method!r}, expected one of {SAMPLING_METHODS}")


def polya_insertion(K, n_black, seed, initial=None):
    """Insert ``n_black`` black balls one by one, each uniformly among all
    positions of a row that starts with ``K`` white balls.

    Started from an empty row, the resulting weak composition of
    ``n_black`` into ``K + 1`` parts is uniform over all
    ``C(n_black + K, K)`` compositions.

    Parameters
    ----------
    K : int
        Number of white balls (delimiters).

    n_black : int
        Number of black balls to insert.

    seed : SeedSpec or numpy.random.Generator
        Source of randomness.

    initial : WeakComposition or sequence of int, optional
        ``K + 1`` runs of black balls already in the row.  Each run of
        ``g`` balls offers ``g + 1`` insertion positions.

    Returns
    -------
    WeakComposition
        The runs after the insertions, ``initial`` included.
    """
    if K < 0 or n_black < 0:
        raise ValueError("ball counts must be nonnegative")
    rng = seed.generator() if isinstance(seed, SeedSpec) else seed
    if initial is None:
        parts = np.zeros(K + 1, dtype=np.int64)
    else:
        parts = np.array(tuple(initial), dtype=np.int64)
        if len(parts) != K + 1 or (parts < 0).any():
            raise ValueError(f"initial runs must be {K + 1} nonnegative counts, got {initial}")
    for _ in range(n_black):
        # a gap holding g black balls offers g + 1 insertion positions
        position = rng.integers(parts.sum() + K + 1)
        gap = np.searchsorted(np.cumsum(parts + 1), position, side="right")
        parts[gap] += 1
    return WeakComposition(parts)
