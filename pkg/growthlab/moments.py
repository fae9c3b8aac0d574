"""Exact finite-N moments of the edge count.

Every table comes in two numeric modes: ``"rational"`` works with
``fractions.Fraction`` and is the ground truth for small ``N``;
``"float"`` uses compensated summation and scales to ``N = 10**6``.
"""

from dataclasses import dataclass
from fractions import Fraction
import functools
import math
import os

import numpy as np

from growthlab.check_imports import assert_full_module_variant, pandas as pd
from growthlab.state import Trajectory, n_pairs

MODES = ("rational", "float")


def _check_hour(N, n, low=1, high=None):
    high = N if high is None else high
    if N < 2:
        raise ValueError(f"N must be >= 2, got {N}")
    if not low <= n <= high:
        raise ValueError(f"hour n={n} outside {low}..{high} for N={N}")


def _mode(exact):
    return "rational" if exact else "float"


@dataclass
class MomentTable:
    """Exact mean and variance of ``X_n`` for ``n = 1..N``.

    ``mu[n - 1]`` is ``μ_n`` and ``sigma2[n - 1]`` is ``σ_n^2``.  In
    rational mode both are lists of ``fractions.Fraction``, otherwise
    float arrays.
    """

    N: int
    mu: object
    sigma2: object
    mode: str = "float"

    def rows(self):
        """``(n, mu, sigma2)`` tuples"""
        return [(n + 1, self.mu[n], self.sigma2[n]) for n in range(self.N)]

    def __repr__(self):
        info = "growthlab.MomentTable object\n"
        info += "N: %d\n" % self.N
        info += "Mode: %s\n" % self.mode
        info += "Mean at N: %s\n" % float(self.mu[-1])
        info += "Largest variance: %s" % float(max(self.sigma2))
        return info

    @assert_full_module_variant
    def to_dataframe(self):
        """Table as a ``pandas.DataFrame`` with columns ``n``, ``mu``,
        ``sigma2`` (floats in either mode)."""
        return pd.DataFrame(
            {
                "n": np.arange(1, self.N + 1),
                "mu": [float(v) for v in self.mu],
                "sigma2": [float(v) for v in self.sigma2],
            }
        )


@dataclass
class CompensatorSeries:
    """Compensator ``C_n`` of one trajectory together with the path, so
    that the martingale ``X_n - C_n`` is at hand."""

    c: np.ndarray
    x: np.ndarray

    def martingale(self):
        """``X_n - C_n`` for ``n = 1..N``"""
        return self.x - self.c

    def __repr__(self):
        s = "--- Compensator ---" + os.linesep
        s += f"C_N: {self.c[-1]:.6f}{os.linesep}"
        s += f"X_N - C_N: {self.x[-1] - self.c[-1]:.6f}"
        return s


@functools.lru_cache(maxsize=16)
def harmonic_partial_sums(N):
    """``S[n] = sum_{j=1..n} 1 / (N - j + 1)`` for ``n = 0..N - 1``.

    Accumulated from the small terms upward with Neumaier compensation.
    The array is cached per ``N`` and read-only.
    """
    out = np.zeros(N)
    total = 0.0
    carry = 0.0
    for j in range(1, N):
        term = 1.0 / (N - j + 1)
        t = total + term
        if abs(total) >= abs(term):
            carry += (total - t) + term
        else:
            carry += (term - t) + total
        total = t
        out[j] = total + carry
    out.setflags(write=False)
    return out


def _harmonic_exact(N, n):
    return sum((Fraction(1, N - j + 1) for j in range(1, n)), Fraction(0))


def mean_edges(N, n, exact=False):
    """Closed form of ``μ_n = E[X_n]``.

    ``μ_n = C(n, 2) + (n - 1)(N - n) - N(N - n + 1) sum_{j<n} 1/(N - j + 1)``

    The two large terms cancel to ``O(1/N)`` at small ``n``, so float mode
    sums the equivalent positive series
    ``μ_n = sum_{j<n} (n - j)(j - 1)/(N - j + 1)`` instead.

    Examples
    --------
    >>> from growthlab.moments import mean_edges
    >>> mean_edges(4, 4, exact=True)
    Fraction(5, 3)
    """
    _check_hour(N, n)
    if exact:
        return n_pairs(n) + (n - 1) * (N - n) - N * (N - n + 1) * _harmonic_exact(N, n)
    j = np.arange(1, n, dtype=np.float64)
    return math.fsum((n - j) * (j - 1) / (N - j + 1))


def mean_table(N, exact=False):
    """``μ_1..μ_N`` from the recursion
    ``μ_{n+1} = μ_n + (C(n, 2) - μ_n) / (N - n + 1)``."""
    _check_hour(N, 2)
    if exact:
        mu = [Fraction(0)]
        for n in range(1, N):
            mu.append(mu[-1] + (n_pairs(n) - mu[-1]) / Fraction(N - n + 1))
        return mu
    mu = np.zeros(N)
    for n in range(1, N):
        mu[n] = mu[n - 1] + (n_pairs(n) - mu[n - 1]) / (N - n + 1)
    return mu


def mean_diff(N, n, exact=False):
    """``μ_{n+1} - μ_n = -(n - 1)(N - n)/(N - n + 1) + N sum_{i<n} 1/(N - i + 1)``"""
    _check_hour(N, n, high=N - 1)
    if exact:
        return Fraction(-(n - 1) * (N - n), N - n + 1) + N * _harmonic_exact(N, n)
    return -(n - 1) * (N - n) / (N - n + 1) + N * harmonic_partial_sums(N)[n - 1]


def second_difference_mean(N, n, exact=False):
    """``E[ΔX_{n+1} - ΔX_n] = (n - 1) / (N - n + 1)``"""
    _check_hour(N, n, low=2, high=N - 1)
    value = Fraction(n - 1, N - n + 1)
    return value if exact else float(value)


def variance_recursion(N, mu):
    """``σ_n^2`` from ``σ_{n+1}^2 - σ_n^2 = [(N - n) d (d + 1) - 2 σ_n^2] / (N - n + 2)``
    with ``d = μ_{n+1} - μ_n``."""
    sigma2 = [mu[0] * 0]
    for n in range(1, N):
        d = mu[n] - mu[n - 1]
        s = sigma2[-1]
        sigma2.append(s + ((N - n) * d * (d + 1) - 2 * s) / (N - n + 2))
    return sigma2


def variance_closed_form(N, mu):
    """``σ_n^2 = (N-n+1)(N-n+2) sum_{j<n} d_j (d_j + 1) / ((N-j+1)(N-j+2))``"""
    if isinstance(mu, np.ndarray):
        j = np.arange(1, N, dtype=np.float64)
        d = np.diff(mu)
        terms = d * (d + 1) / ((N - j + 1) * (N - j + 2))
        n = np.arange(1, N + 1, dtype=np.float64)
        return (N - n + 1) * (N - n + 2) * np.concatenate(([0.0], np.cumsum(terms)))
    sigma2 = [Fraction(0)]
    acc = Fraction(0)
    for j in range(1, N):
        d = mu[j] - mu[j - 1]
        acc += d * (d + 1) / ((N - j + 1) * (N - j + 2))
        sigma2.append((N - j) * (N - j + 1) * acc)
    return sigma2


def variance_table(N, exact=False, rtol=1e-9):
    """``σ_1^2..σ_N^2`` by the recursion, cross-checked against the closed
    form.

    Raises
    ------
    RuntimeError
        If the two formulas disagree (beyond ``rtol`` in float mode, at all
        in rational mode).
    """
    mu = mean_table(N, exact)
    recursion = variance_recursion(N, mu)
    closed = variance_closed_form(N, mu)
    if exact:
        if recursion != closed:
            raise RuntimeError("variance recursion and closed form disagree")
        return recursion
    recursion = np.asarray(recursion, dtype=np.float64)
    scale = np.maximum(np.abs(closed), 1.0)
    if np.any(np.abs(recursion - closed) > rtol * scale):
        raise RuntimeError("variance recursion and closed form disagree")
    return recursion


def moment_table(N, mode="float"):
    """Build the :class:`MomentTable` of ``N``.

    Examples
    --------
    >>> from growthlab.moments import moment_table
    >>> moment_table(3, mode="rational").rows()[-1]
    (3, Fraction(1, 2), Fraction(1, 4))
    """
    if mode not in MODES:
        raise ValueError(f"unknown numeric mode {mode!r}, expected one of {MODES}")
    exact = mode == "rational"
    return MomentTable(N, mean_table(N, exact), variance_table(N, exact), mode)


def second_moment_virtual(N, n, exact=False):
    """``E[(C(n, 2) - X_n)^2]``, the second moment of the number of
    virtual edges at hour ``n``.

    The bivariate sum over ``i < j`` is accumulated through the prefix
    ``P_j = sum_{i<j} (i - 1)/(N - i + 1)``, so the cost is ``O(n)``.
    """
    _check_hour(N, n)
    a = (N - n + 1) * (N - n + 2)
    if exact:
        diag = Fraction(0)
        cross = Fraction(0)
        prefix = Fraction(0)
        for i in range(1, n + 1):
            diag += Fraction((i - 1) * (i - 2), (N - i + 1) * (N - i + 2))
            cross += Fraction(i - 1, N - i + 2) * prefix
            prefix += Fraction(i - 1, N - i + 1)
        return (n_pairs(n) - mean_edges(N, n, exact=True)) + a * diag + 2 * a * cross
    i = np.arange(1, n + 1, dtype=np.float64)
    diag = np.sum((i - 1) * (i - 2) / ((N - i + 1) * (N - i + 2)))
    prefix = np.concatenate(([0.0], np.cumsum((i - 1) / (N - i + 1))[:-1]))
    cross = np.sum((i - 1) / (N - i + 2) * prefix)
    return (n_pairs(n) - mean_edges(N, n)) + a * diag + 2 * a * cross


def last_stage_second_moment(N, exact=False):
    """``E[ΔX_{N+1}^2]``"""
    return second_moment_virtual(N, N, exact)


def compensator(traj):
    """Compensator ``C_n = sum_{j<n} (C(j, 2) - X_j) / (N - j + 1)`` of a
    trajectory.

    Returns
    -------
    CompensatorSeries
    """
    x = traj.x if isinstance(traj, Trajectory) else np.asarray(traj)
    return CompensatorSeries(compensator_paths(x), x)


def compensator_paths(x):
    """Compensators of a batch of paths, ``x`` of shape ``(..., N)``."""
    x = np.asarray(x)
    N = x.shape[-1]
    j = np.arange(1, N)
    terms = (j * (j - 1) / 2 - x[..., :-1]) / (N - j + 1)
    zeros = np.zeros(x.shape[:-1] + (1,))
    return np.concatenate((zeros, np.cumsum(terms, axis=-1)), axis=-1)


def second_martingale(x, mu=None):
    """``(X_n - μ_n) / (N - n + 1)`` for a path or a batch of paths."""
    x = x.x if isinstance(x, Trajectory) else np.asarray(x)
    N = x.shape[-1]
    mu = mean_table(N) if mu is None else mu
    n = np.arange(1, N + 1)
    return (x - mu) / (N - n + 1)


def first_edge_survival(N, n, exact=False):
    """``P[ξ_N > n] = prod_{j=2..n-1} (N - j) / (C(j, 2) + N - j)``,
    accumulated in log space.

    Examples
    --------
    >>> from growthlab.moments import first_edge_survival
    >>> first_edge_survival(10, 4, exact=True)
    Fraction(28, 45)
    """
    _check_hour(N, n)
    if exact:
        p = Fraction(1)
        for j in range(2, n):
            p *= Fraction(N - j, n_pairs(j) + N - j)
        return p
    j = np.arange(2, n, dtype=np.float64)
    return float(np.exp(-np.sum(np.log1p(j * (j - 1) / 2 / (N - j)))))


def first_edge_pmf(N, n, exact=False):
    """``P[ξ_N = n]`` for ``n = 3..N``, or the probability of no edge
    before the last vertex for ``n = N + 1``."""
    _check_hour(N, n, high=N + 1)
    if n == N + 1:
        return first_edge_survival(N, N, exact)
    if n < 3:
        return Fraction(0) if exact else 0.0
    m = n - 1
    hit = Fraction(n_pairs(m), n_pairs(m) + N - m)
    if exact:
        return hit * first_edge_survival(N, m, exact=True)
    return float(hit) * first_edge_survival(N, m)


def last_stage_mean(N, exact=False):
    """``E[ΔX_{N+1}] = N (h_N - 1)`` with ``h_N`` the harmonic number.

    Examples
    --------
    >>> from growthlab.moments import last_stage_mean
    >>> last_stage_mean(4, exact=True)
    Fraction(13, 3)
    """
    _check_hour(N, N)
    if exact:
        return N * _harmonic_exact(N, N)
    return N * harmonic_partial_sums(N)[N - 1]


def variance_bound(N, n):
    """Upper bound ``5 (N - n + 2) N^2 log^2(N / (N - n + 1))`` on
    ``σ_n^2``, valid for ``n > N / 2``."""
    _check_hour(N, n)
    return 5 * (N - n + 2) * N**2 * math.log(N / (N - n + 1)) ** 2
