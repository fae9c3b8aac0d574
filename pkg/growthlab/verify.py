"""Monte Carlo checks of the growth process.

Each ``check_*`` function confronts one of the samplers with an exact
formula or a limit law and returns a list of :class:`GofReport`.  The
verdict thresholds live in :class:`Thresholds`; every check accepts a
``thresholds=`` argument.  All checks are deterministic given their
parameters and the :class:`~growthlab.state.SeedSpec`.
"""

from collections import Counter
from dataclasses import dataclass, field, fields, replace
from fractions import Fraction
import itertools
import math
import os
import warnings

import numpy as np
from scipy import stats
from tqdm import tqdm

from growthlab.asymptotics import (
    check_grid,
    cov_kernel,
    early_poisson_cumulative,
    erlang_mean,
    first_edge_limit_cdf,
    first_edge_limit_moment,
    gamma_dirichlet_sample,
    moment_curve_gaps,
    phi,
    psi,
    simulate_limit_diffusion,
    terminal_poisson_mean,
)
from growthlab.check_imports import assert_full_module_variant, pandas as pd
from growthlab.constants import (
    DEFAULT_SEED,
    EULER_DELTA,
    EULER_STEP,
    FIRST_EDGE_OFFSET,
    ORACLE_JOINT_MAX_N,
    ORACLE_MAX_N,
)
from growthlab.model import (
    aged_increments,
    edge_probability,
    exact_joint_distribution,
    exact_marginals,
    first_edge_times,
    pool_from_trajectory,
    run_replicates,
    sample_paths,
    silent_progress,
    simulate_pool,
    simulate_urn_batch,
    split_aged_recent,
)
from growthlab.moments import (
    compensator_paths,
    first_edge_survival,
    last_stage_mean,
    mean_edges,
    mean_table,
    moment_table,
    second_difference_mean,
    second_martingale,
    second_moment_virtual,
)
from growthlab.state import ModelParams, SeedSpec, n_pairs

TESTS = ("KS", "chi-square", "TV-vs-oracle", "z-score", "relative-error", "identity", "gap")
SAMPLERS = ("pool", "urn", "insertion")
VARIANCE_SE = ("normal", "empirical")


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating, Fraction)):
        value = float(value)
        return value if math.isfinite(value) else str(value)
    return value


@dataclass(frozen=True)
class McEstimate:
    """Monte Carlo estimate of a mean.

    ``stderr`` is ``sqrt(variance / reps)``.
    """

    mean: float
    variance: float
    stderr: float
    reps: int

    def __post_init__(self):
        if self.reps < 2:
            raise ValueError(f"an estimate needs reps >= 2, got {self.reps}")

    @classmethod
    def from_sample(cls, sample):
        sample = np.asarray(sample, dtype=np.float64).ravel()
        reps = len(sample)
        if reps < 2:
            raise ValueError(f"an estimate needs at least 2 values, got {reps}")
        variance = float(np.var(sample, ddof=1))
        return cls(float(np.mean(sample)), variance, math.sqrt(variance / reps), reps)

    @property
    def variance_stderr(self):
        """Normal-theory standard error ``s^2 sqrt(2 / (reps - 1))`` of the
        sample variance."""
        return self.variance * math.sqrt(2 / (self.reps - 1))

    def zscore(self, target):
        """Distance to ``target`` in standard errors."""
        diff = abs(self.mean - float(target))
        if diff <= 1e-12 * max(1.0, abs(float(target))):
            return 0.0
        return diff / self.stderr if self.stderr > 0 else math.inf


@dataclass
class GofReport:
    """Outcome of one statistical or exact check.

    Parameters
    ----------
    name : str
        Identifier of the check, e.g. ``"mean-X50"``.

    test : str
        One of :data:`TESTS`.

    statistic : float
        Nonnegative test statistic (KS distance, chi-square value, total
        variation, absolute z-score, relative error, mismatch count or gap).

    p_value : float, optional
        Present for tests with a reference distribution.

    sample_size : int
        Replicates behind the statistic, 0 for exact checks.

    passed : bool
        Verdict at the configured threshold.

    details : dict
        Parameters and intermediate values of the check.
    """

    name: str
    test: str
    statistic: float
    p_value: float = None
    sample_size: int = 0
    passed: bool = True
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.test not in TESTS:
            raise ValueError(f"unknown test {self.test!r}, expected one of {TESTS}")
        self.statistic = float(self.statistic)
        if not self.statistic >= 0:
            raise ValueError(f"statistic must be >= 0, got {self.statistic}")
        if self.p_value is not None:
            self.p_value = float(self.p_value)
            if not 0 <= self.p_value <= 1:
                raise ValueError(f"p_value must lie in [0, 1], got {self.p_value}")
        self.passed = bool(self.passed)

    def to_dict(self):
        """JSON-ready representation"""
        return _jsonable(
            {
                "name": self.name,
                "test": self.test,
                "statistic": self.statistic,
                "p_value": self.p_value,
                "sample_size": self.sample_size,
                "passed": self.passed,
                "details": self.details,
            }
        )

    def __repr__(self):
        s = f"--- {self.name} ---{os.linesep}"
        s += f"Test:        {self.test}{os.linesep}"
        s += f"Statistic:   {self.statistic:.6g}{os.linesep}"
        if self.p_value is not None:
            s += f"p-value:     {self.p_value:.4g}{os.linesep}"
        s += f"Sample size: {self.sample_size}{os.linesep}"
        s += f"Verdict:     {'pass' if self.passed else 'FAIL'}"
        return s


def all_passed(reports):
    return all(report.passed for report in reports)


@assert_full_module_variant
def reports_to_dataframe(reports):
    """GofReport set as a ``pandas.DataFrame``, one row per report."""
    rows = [report.to_dict() for report in reports]
    for row in rows:
        row.pop("details")
    return pd.DataFrame(rows)


@dataclass(frozen=True)
class Thresholds:
    """Verdict thresholds of the checks.

    Relative tolerances are fractions of the target value.  ``erlang_mean_rtol``
    applies at lag 0 and widens linearly with the lag: lag ``i`` uses
    ``(1 + i)`` times the value.

    The terminal limits are approached at rate ``1 / log N``.
    ``terminal_ks_max`` and ``terminal_corr_max`` hold for every lag.  Their
    defaults are set for ``N = 1000``, where the scaled increments sit about
    0.1 to 0.14 in KS distance from ``Exp(1)`` and neighbouring increments
    correlate at about 0.2.
    """

    se_multiple: float = 3.0
    tv_max: float = 0.01
    chi2_p_min: float = 0.001
    fluid_gap_max: float = 0.05
    curve_phi_gap: float = 0.01
    curve_psi_gap: float = 0.005
    first_edge_ks_max: float = 0.02
    first_edge_moment_rtol: float = 0.05
    poisson_rtol: float = 0.05
    poisson_corr_max: float = 0.05
    fluctuation_var_rtol: float = 0.15
    fluctuation_cov_rtol: float = 0.20
    normal_ks_p_min: float = 0.01
    terminal_ks_max: float = 0.2
    terminal_corr_max: float = 0.35
    erlang_mean_rtol: float = 0.1
    terminal_count_rtol: float = 0.3
    diffusion_var_rtol: float = 0.02
    diffusion_cov_rtol: float = 0.05
    euler_var_rtol: float = 0.05
    gamma_dirichlet_ks_max: float = 0.01
    identity_rtol: float = 1e-8

    def override(self, **values):
        """Copy with some thresholds replaced.

        Examples
        --------
        >>> from growthlab.verify import Thresholds
        >>> Thresholds().override(tv_max="0.02").tv_max
        0.02
        """
        known = {f.name for f in fields(self)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ValueError(f"unknown thresholds {unknown}, expected some of {sorted(known)}")
        return replace(self, **{k: float(v) for k, v in values.items()})


@dataclass
class FluctuationSample:
    """Scaled fluctuations ``Y_N(t) = (X_{⌊tN⌋} - N^2 φ(t)/2) / N^{3/2}``.

    ``y[r, i]`` is ``Y_N(t_grid[i])`` on replicate ``r``.
    """

    t_grid: np.ndarray
    y: np.ndarray

    @classmethod
    def from_paths(cls, x, t_grid):
        """Build from a ``(reps, N)`` matrix of edge counts."""
        x = np.asarray(x, dtype=np.float64)
        N = x.shape[1]
        t = np.asarray(t_grid, dtype=np.float64)
        if np.any(t < 0) or np.any(t > 1):
            raise ValueError("fluctuation times must lie in [0, 1]")
        n = np.floor(t * N + 1e-9).astype(np.int64)
        padded = np.concatenate((np.zeros((len(x), 1)), x), axis=1)
        y = (padded[:, n] - N**2 * phi(t) / 2) / N**1.5
        if not np.all(np.isfinite(y)):
            raise ValueError("non-finite fluctuation values")
        return cls(t, y)

    def at(self, t):
        idx = np.flatnonzero(np.isclose(self.t_grid, t, rtol=0, atol=1e-12))
        if not len(idx):
            raise ValueError(f"time {t} is not on the grid")
        return self.y[:, idx[0]]


def _zscore_report(name, sample, target, thresholds, **details):
    est = McEstimate.from_sample(sample)
    z = est.zscore(target)
    p = 1.0 if z == 0 else float(2 * stats.norm.sf(z))
    details.update(mean=est.mean, stderr=est.stderr, target=float(target))
    return GofReport(name, "z-score", z, p, est.reps, z <= thresholds.se_multiple, details)


def _variance_report(name, sample, target, thresholds, variance_se="normal", **details):
    sample = np.asarray(sample, dtype=np.float64)
    est = McEstimate.from_sample(sample)
    target = float(target)
    if variance_se == "normal":
        se = est.variance_stderr
    elif variance_se == "empirical":
        m4 = float(np.mean((sample - est.mean) ** 4))
        reps = est.reps
        se = math.sqrt(max(m4 - est.variance**2 * (reps - 3) / (reps - 1), 0.0) / reps)
    else:
        raise ValueError(f"unknown variance_se {variance_se!r}, expected one of {VARIANCE_SE}")
    diff = abs(est.variance - target)
    if diff <= 1e-12 * max(1.0, abs(target)):
        z = 0.0
    else:
        z = diff / se if se > 0 else math.inf
    p = 1.0 if z == 0 else float(2 * stats.norm.sf(z))
    details.update(variance=est.variance, stderr=se, target=target)
    return GofReport(name, "z-score", z, p, est.reps, z <= thresholds.se_multiple, details)


def _relative_report(name, value, target, rtol, sample_size, **details):
    value, target = float(value), float(target)
    error = abs(value - target) / abs(target) if target != 0 else abs(value)
    details.update(value=value, target=target, rtol=rtol)
    return GofReport(name, "relative-error", error, None, sample_size, error < rtol, details)


def _count(sample):
    if isinstance(sample, (Counter, dict)):
        return Counter(sample)
    arr = np.asarray(sample)
    if arr.ndim == 2:
        return Counter(map(tuple, arr.tolist()))
    return Counter(arr.ravel().tolist())


def _pool_bins(weights, minimum=5.0):
    """Group consecutive bins until each group carries ``minimum`` weight;
    a light remainder joins the last group."""
    groups, current, acc = [], [], 0.0
    for i, w in enumerate(weights):
        current.append(i)
        acc += w
        if acc >= minimum:
            groups.append(current)
            current, acc = [], 0.0
    if current:
        if groups:
            groups[-1].extend(current)
        else:
            groups.append(current)
    return groups


def ks_test(sample, cdf, name="ks", p_min=0.001, statistic_max=None):
    """One-sample Kolmogorov-Smirnov test with the asymptotic Kolmogorov
    p-value.

    Parameters
    ----------
    sample : array_like
        Observations.

    cdf : callable
        Continuous reference cdf, evaluated on a sorted array.

    name : str, default: "ks"
        Report name.

    p_min : float, default: 0.001
        Pass when the p-value is at least this.

    statistic_max : float, optional
        Pass when the statistic is below this instead.

    Returns
    -------
    GofReport
    """
    x = np.sort(np.asarray(sample, dtype=np.float64).ravel())
    n = len(x)
    if n < 1:
        raise ValueError("KS test needs a nonempty sample")
    F = np.asarray(cdf(x), dtype=np.float64)
    i = np.arange(1, n + 1)
    d = float(max(np.max(i / n - F), np.max(F - (i - 1) / n), 0.0))
    p = float(stats.kstwobign.sf(d * math.sqrt(n)))
    passed = p >= p_min if statistic_max is None else d < statistic_max
    return GofReport(name, "KS", d, min(max(p, 0.0), 1.0), n, passed)


def chi_square(sample, pmf, name="chi-square", p_min=0.001):
    """Chi-square goodness of fit against a pmf, pooling neighbouring bins
    with expected count below 5.

    ``pmf`` is a dict ``value -> prob`` or a sequence indexed by value.
    Observations outside the support of ``pmf`` give an infinite
    statistic.
    """
    pmf = dict(pmf) if isinstance(pmf, dict) else dict(enumerate(pmf))
    counts = _count(sample)
    n = sum(counts.values())
    keys = sorted(set(pmf) | set(counts))
    observed = np.array([counts.get(k, 0) for k in keys], dtype=np.float64)
    expected = np.array([float(pmf.get(k, 0)) * n for k in keys])
    if np.any((expected == 0) & (observed > 0)):
        return GofReport(name, "chi-square", math.inf, 0.0, n, False, {"outside_support": True})
    keep = expected > 0
    observed, expected = observed[keep], expected[keep]
    groups = _pool_bins(expected)
    obs = np.array([observed[g].sum() for g in groups])
    exp = np.array([expected[g].sum() for g in groups])
    dof = len(groups) - 1
    if dof < 1:
        return GofReport(name, "chi-square", 0.0, 1.0, n, True, {"dof": 0})
    statistic = float(np.sum((obs - exp) ** 2 / exp))
    p = float(stats.chi2.sf(statistic, dof))
    return GofReport(name, "chi-square", statistic, p, n, p >= p_min, {"dof": dof})


def chi_square_two_sample(counts_a, counts_b, name="chi-square-2", p_min=0.001):
    """Chi-square test that two samples share one law, by a ``2 x k``
    contingency table with columns pooled until every expected cell is at
    least 5."""
    a, b = _count(counts_a), _count(counts_b)
    keys = sorted(set(a) | set(b))
    table = np.array([[a.get(k, 0) for k in keys], [b.get(k, 0) for k in keys]], dtype=np.float64)
    rows = table.sum(axis=1)
    if np.any(rows == 0):
        raise ValueError("both samples must be nonempty")
    total = rows.sum()
    groups = _pool_bins(table.sum(axis=0) * rows.min() / total)
    pooled = np.stack([table[:, g].sum(axis=1) for g in groups], axis=1)
    n = int(total)
    if pooled.shape[1] < 2:
        return GofReport(name, "chi-square", 0.0, 1.0, n, True, {"dof": 0})
    statistic, p, dof, _ = stats.chi2_contingency(pooled, correction=False)
    return GofReport(name, "chi-square", statistic, p, n, p >= p_min, {"dof": int(dof)})


def tv_distance(empirical, oracle):
    """Total variation distance between an empirical law (counts or
    samples) and an oracle pmf ``dict value -> prob``.

    Examples
    --------
    >>> from growthlab.verify import tv_distance
    >>> tv_distance({0: 3, 1: 1}, {0: 0.5, 1: 0.5})
    0.25
    """
    counts = _count(empirical)
    total = sum(counts.values())
    keys = set(counts) | set(oracle)
    return 0.5 * sum(abs(counts.get(k, 0) / total - float(oracle.get(k, 0))) for k in keys)


def _quarter_hours(N):
    return sorted({max(1, N // 4), max(1, N // 2), max(1, 3 * N // 4), N})


def _padded(x):
    x = np.asarray(x, dtype=np.float64)
    return np.concatenate((np.zeros((len(x), 1)), x), axis=1)


def _cube_root(N):
    r = round(N ** (1 / 3))
    return r if r**3 == N else N ** (1 / 3)


def check_moments(
    N, reps, seed, thresholds=None, threads=1, progress=tqdm, variance_se="normal"
):
    """Empirical mean and variance of ``X_n`` at ``n = N/4, N/2, 3N/4, N``
    against the exact moment table.

    ``variance_se`` selects the standard error of the sample variance:
    ``"normal"`` (``s^2 sqrt(2/(reps - 1))``) or ``"empirical"`` (from the
    fourth sample moment).
    """
    thresholds = thresholds or Thresholds()
    if reps < 100:
        raise ValueError(f"moment checks need reps >= 100, got {reps}")
    x = simulate_urn_batch(ModelParams(N), reps, seed, threads=threads, progress=progress)
    table = moment_table(N, "rational" if N <= ORACLE_MAX_N else "float")
    reports = []
    for n in _quarter_hours(N):
        sample = x[:, n - 1]
        reports.append(_zscore_report(f"mean-X{n}", sample, table.mu[n - 1], thresholds, N=N, n=n))
        reports.append(
            _variance_report(
                f"variance-X{n}", sample, table.sigma2[n - 1], thresholds, variance_se, N=N, n=n
            )
        )
    return reports


def check_sampler_equivalence(
    N, reps, seed, thresholds=None, threads=1, progress=tqdm, samplers=SAMPLERS
):
    """Joint law of ``(X_1, ..., X_N)`` of every sampler against the exact
    path law (total variation) and against each other (chi-square).

    Sampler ``s`` runs replicates ``s * reps`` to ``(s + 1) * reps - 1`` of
    the seed.
    """
    thresholds = thresholds or Thresholds()
    params = ModelParams(N)
    oracle = exact_joint_distribution(params, exact=False, max_N=ORACLE_JOINT_MAX_N)
    counts = {}
    reports = []
    for s, name in enumerate(samplers):
        offset = SeedSpec(seed.master_seed, seed.replicate_index + s * reps)
        paths = sample_paths(name, params, reps, offset, threads, progress)
        counts[name] = _count(paths)
        tv = tv_distance(counts[name], oracle)
        reports.append(
            GofReport(
                f"tv-{name}", "TV-vs-oracle", tv, None, reps, tv < thresholds.tv_max,
                {"N": N, "sampler": name},
            )
        )
    for a, b in itertools.combinations(samplers, 2):
        report = chi_square_two_sample(counts[a], counts[b], f"chi2-{a}-{b}", thresholds.chi2_p_min)
        report.details.update(N=N)
        reports.append(report)
    return reports


def check_martingales(N, reps, seed, thresholds=None, threads=1, progress=tqdm):
    """Zero-mean checks of ``X_n - C_n`` and ``(X_n - μ_n)/(N - n + 1)``,
    monotonicity of the compensator on every path, and the mean second
    difference of ``X`` at ``n = N/2``."""
    thresholds = thresholds or Thresholds()
    x = simulate_urn_batch(ModelParams(N), reps, seed, threads=threads, progress=progress)
    x = x.astype(np.float64)
    c = compensator_paths(x)
    second = second_martingale(x, mean_table(N))
    reports = []
    for n in _quarter_hours(N):
        drift = x[:, n - 1] - c[:, n - 1]
        reports.append(_zscore_report(f"martingale-X-C-{n}", drift, 0, thresholds, n=n))
        centered = second[:, n - 1]
        reports.append(_zscore_report(f"martingale-centered-{n}", centered, 0, thresholds, n=n))
    violations = int(np.count_nonzero(np.diff(c, axis=1) < -1e-9))
    reports.append(
        GofReport("compensator-monotone", "identity", violations, None, reps, violations == 0)
    )
    if N >= 3:
        n = max(2, N // 2)
        padded = _padded(x)
        d2 = padded[:, n + 1] - 2 * padded[:, n] + padded[:, n - 1]
        reports.append(
            _zscore_report(
                f"second-difference-{n}", d2, second_difference_mean(N, n), thresholds, n=n
            )
        )
    return reports


def fluid_sup_gap(x):
    """``sup_t |2 X_{⌊tN⌋} / N^2 - φ(t)|`` per replicate.

    The path is constant on each ``[n/N, (n+1)/N)`` and ``φ`` is
    increasing, so the supremum is attained at an endpoint.
    """
    reps, N = np.shape(x)
    level = 2 * _padded(x) / N**2
    left = phi(np.arange(N + 1) / N)
    right = np.append(left[1:], left[-1])
    return np.maximum(np.abs(level - left), np.abs(level - right)).max(axis=1)


def check_fluid_limit(N_list, reps, seed, thresholds=None, threads=1, progress=tqdm):
    """Mean sup-gap to ``φ`` for each ``N``: strictly decreasing along
    ``N_list`` and below ``fluid_gap_max`` at the largest ``N``."""
    thresholds = thresholds or Thresholds()
    N_list = sorted(N_list)
    reports = []
    gaps = []
    for idx, N in enumerate(N_list):
        stream = seed.spawn(seed.replicate_index + idx)
        x = simulate_urn_batch(ModelParams(N), reps, stream, threads=threads, progress=progress)
        gap = float(np.mean(fluid_sup_gap(x)))
        gaps.append(gap)
        largest = idx == len(N_list) - 1
        passed = gap < thresholds.fluid_gap_max if largest else True
        reports.append(GofReport(f"fluid-gap-N{N}", "gap", gap, None, reps, passed, {"N": N}))
    if len(gaps) > 1:
        rises = sum(b >= a for a, b in zip(gaps, gaps[1:]))
        reports.append(
            GofReport(
                "fluid-gap-decreasing", "identity", rises, None, reps, rises == 0, {"gaps": gaps}
            )
        )
    return reports


def check_first_edge(N, reps, seed, thresholds=None, threads=1, progress=tqdm):
    """Law of the first edge hour ``ξ_N``: KS of ``N^{-1/3} ξ_N`` against
    ``1 - exp(-x^3/6)``, ``E[ξ_N^3]/N`` against 6, and the exact survival
    ``P[ξ_N > n]`` at ``n = ⌊N^{1/3}⌋``.

    ``P[ξ_N > n] ≈ exp(-(n - 1)^3 / 6N)``, so ``ξ_N - 1`` is the limit time
    rounded up to a whole hour.  The KS and moment checks read each sample
    at the middle of its hour, ``ξ_N - 3/2``.
    """
    thresholds = thresholds or Thresholds()
    xi = first_edge_times(ModelParams(N), reps, seed, threads, progress).astype(np.float64)
    scale = _cube_root(N)
    centred = xi - FIRST_EDGE_OFFSET
    reports = [
        ks_test(
            centred / scale,
            first_edge_limit_cdf,
            name="first-edge-ks",
            statistic_max=thresholds.first_edge_ks_max,
        )
    ]
    reports.append(
        _relative_report(
            "first-edge-cube-moment",
            np.mean(centred**3) / N,
            first_edge_limit_moment(3),
            thresholds.first_edge_moment_rtol,
            reps,
        )
    )
    n = max(2, int(math.floor(scale)))
    reports.append(
        _zscore_report("first-edge-survival", xi > n, first_edge_survival(N, n), thresholds, n=n)
    )
    return reports


def check_early_poisson(N, T, reps, seed, edges=None, thresholds=None, threads=1, progress=tqdm):
    """Edge counts in bins of the ``N^{1/3}`` clock against the Poisson
    process with cumulative rate ``t^3/6``.

    The runs are truncated at hour ``⌊T N^{1/3}⌋``.  ``edges`` are the bin
    boundaries on the clock, default ``(0, 2T/3, T)``.  Means and variances
    of every bin are compared with ``Λ(b) - Λ(a)``, and all cross-bin
    correlations must be small.
    """
    thresholds = thresholds or Thresholds()
    if T < 0:
        raise ValueError(f"T must be >= 0, got {T}")
    if T == 0:
        return [GofReport("early-poisson-empty", "identity", 0.0, None, reps, True, {"T": 0})]
    edges = np.asarray((0, 2 * T / 3, T) if edges is None else edges, dtype=np.float64)
    if edges[0] != 0 or np.any(np.diff(edges) <= 0) or edges[-1] != T:
        raise ValueError("bin edges must increase from 0 to T")
    hours = np.floor(edges * _cube_root(N) + 1e-9).astype(np.int64)
    stop = int(hours[-1])
    if not 1 <= stop <= N:
        raise ValueError(f"T={T} puts the last bin at hour {stop}, outside 1..{N}")
    x = simulate_urn_batch(
        ModelParams(N), reps, seed, stop=stop, threads=threads, progress=progress
    )
    padded = _padded(x)
    counts = padded[:, hours[1:]] - padded[:, hours[:-1]]
    reports = []
    for b in range(len(edges) - 1):
        a_, b_ = edges[b], edges[b + 1]
        target = early_poisson_cumulative(b_) - early_poisson_cumulative(a_)
        bin_ = {"bin": [float(a_), float(b_)]}
        reports.append(
            _relative_report(f"early-poisson-mean-{b}", np.mean(counts[:, b]), target,
                             thresholds.poisson_rtol, reps, **bin_)
        )
        reports.append(
            _relative_report(f"early-poisson-variance-{b}", np.var(counts[:, b], ddof=1), target,
                             thresholds.poisson_rtol, reps, **bin_)
        )
    for a, b in itertools.combinations(range(counts.shape[1]), 2):
        rho = _correlation(counts[:, a], counts[:, b])
        reports.append(
            GofReport(f"early-poisson-correlation-{a}-{b}", "gap", abs(rho), None, reps,
                      abs(rho) < thresholds.poisson_corr_max, {"rho": rho})
        )
    return reports


def _correlation(a, b):
    if np.std(a) == 0 or np.std(b) == 0:
        return 0.0
    return float(np.corrcoef(a, b)[0, 1])


def check_gaussian_fluctuations(
    N,
    reps,
    seed,
    t_grid=None,
    cov_pair=(0.3, 0.6),
    compare_diffusion=False,
    thresholds=None,
    threads=1,
    progress=tqdm,
):
    """Fluctuations ``Y_N`` against the limit diffusion: variance at
    ``t = 0.5`` against ``ψ``, covariance of ``cov_pair`` against the
    kernel, KS normality of the standardized ``Y_N(0.5)``, and optionally a
    two-sample KS against exact diffusion draws."""
    thresholds = thresholds or Thresholds()
    s, t = cov_pair
    times = sorted({0.0, 0.5, s, t} | set(t_grid if t_grid is not None else ()))
    x = simulate_urn_batch(ModelParams(N), reps, seed, threads=threads, progress=progress)
    sample = FluctuationSample.from_paths(x, times)
    mid = sample.at(0.5)
    reports = [
        _relative_report("fluctuation-variance", np.var(mid, ddof=1), psi(0.5),
                         thresholds.fluctuation_var_rtol, reps, t=0.5),
        _relative_report("fluctuation-covariance", np.cov(sample.at(s), sample.at(t))[0, 1],
                         cov_kernel(s, t), thresholds.fluctuation_cov_rtol, reps, s=s, t=t),
    ]
    standardized = (mid - mid.mean()) / mid.std(ddof=1)
    reports.append(
        ks_test(standardized, stats.norm.cdf, "fluctuation-normality", thresholds.normal_ks_p_min)
    )
    zeros = int(np.count_nonzero(sample.at(0.0)))
    reports.append(GofReport("fluctuation-origin", "identity", zeros, None, reps, zeros == 0))
    if compare_diffusion:
        stream = seed.spawn(seed.replicate_index + 1)
        limit = simulate_limit_diffusion([0, 0.5], stream, n_paths=reps)
        statistic, p = stats.ks_2samp(mid - mid.mean(), limit.at(0.5))
        reports.append(
            GofReport("fluctuation-vs-diffusion", "KS", statistic, p, reps,
                      p >= thresholds.normal_ks_p_min)
        )
    return reports


def check_last_stage(N, reps, seed, m=2, x=1.0, thresholds=None, threads=1, progress=tqdm):
    """Terminal regime on full trajectories.

    (a) ``E[ΔX_{N+1}]`` against ``N(h_N - 1)`` and the identity
    ``N(h_N - 1) = C(N, 2) - μ_N``; (b) KS of ``ΔX_{N+1-i}/(N log N)``,
    ``i = 0..m``, against ``Exp(1)``; (c) correlations among those scaled
    increments; (d) means of ``(C(N, 2) - X_{N-j})/(N log N)`` against the
    Erlang means ``j + 1``; (e) the number of scaled terminal atoms in
    ``[0, x]`` against the unit-rate Poisson mean ``x``.

    The limits in (b) to (e) are reached at a logarithmic rate; see
    :class:`Thresholds` for the tolerances at ``N = 1000``.
    """
    thresholds = thresholds or Thresholds()
    if not 0 <= m <= N - 2:
        raise ValueError(f"m must lie in 0..{N - 2}, got {m}")
    if N < 1000:
        warnings.warn(
            f"terminal limit laws are calibrated at N >= 1000, got N={N}; "
            "treat the limit-law verdicts as qualitative",
            stacklevel=2,
        )
    paths = simulate_urn_batch(ModelParams(N), reps, seed, threads=threads, progress=progress)
    # deficit[:, j] = C(N, 2) - X_{N-j}
    deficit = n_pairs(N) - _padded(paths)[:, ::-1]
    increments = np.diff(deficit[:, : m + 1], axis=1, prepend=0)
    scale = N * math.log(N)

    exact_mean = last_stage_mean(N)
    reports = [_zscore_report("last-stage-mean", deficit[:, 0], exact_mean, thresholds, N=N)]
    identity = abs(exact_mean - (n_pairs(N) - mean_edges(N, N))) / exact_mean
    reports.append(
        GofReport("last-stage-mean-identity", "identity", identity, None, 0,
                  identity <= thresholds.identity_rtol, {"N": N})
    )
    for i in range(m + 1):
        reports.append(
            ks_test(increments[:, i] / scale, stats.expon.cdf, f"terminal-ks-lag{i}",
                    statistic_max=thresholds.terminal_ks_max)
        )
    if m >= 1:
        rho = max(
            abs(_correlation(increments[:, a], increments[:, b]))
            for a, b in itertools.combinations(range(m + 1), 2)
        )
        reports.append(
            GofReport("terminal-correlation", "gap", rho, None, reps,
                      rho < thresholds.terminal_corr_max, {"m": m})
        )
    for j in range(m + 1):
        reports.append(
            _relative_report(f"terminal-erlang-mean-{j}", np.mean(deficit[:, j]) / scale,
                             erlang_mean(j), thresholds.erlang_mean_rtol * (1 + j), reps, j=j)
        )
    atoms = np.count_nonzero(deficit[:, :N] / scale <= x, axis=1)
    reports.append(
        _relative_report("terminal-poisson-count", np.mean(atoms), terminal_poisson_mean(x),
                         thresholds.terminal_count_rtol, reps, x=x)
    )
    return reports


def check_exact_oracle(N_max=10):
    """Rational moment formulas against the exact dynamic program for
    every ``N = 2..N_max`` and every hour.

    Compares the mean (recursion and closed form), the variance, the second
    moment of the virtual edges and the terminal mean.  Each report counts
    mismatches.
    """
    if N_max > ORACLE_MAX_N:
        raise ValueError(f"exact oracle limited to N <= {ORACLE_MAX_N}, got N_max={N_max}")
    reports = []
    for N in range(2, N_max + 1):
        table = moment_table(N, "rational")
        laws = exact_marginals(ModelParams(N), exact=True)
        mismatches = 0
        for n, law in enumerate(laws, start=1):
            mean = sum((k * p for k, p in law.items()), Fraction(0))
            var = sum((k * k * p for k, p in law.items()), Fraction(0)) - mean**2
            virtual = sum(((n_pairs(n) - k) ** 2 * p for k, p in law.items()), Fraction(0))
            mismatches += mean != table.mu[n - 1]
            mismatches += mean != mean_edges(N, n, exact=True)
            mismatches += var != table.sigma2[n - 1]
            mismatches += virtual != second_moment_virtual(N, n, exact=True)
        mismatches += last_stage_mean(N, exact=True) != n_pairs(N) - table.mu[-1]
        reports.append(
            GofReport(
                f"exact-oracle-N{N}", "identity", mismatches, None, 0, mismatches == 0, {"N": N}
            )
        )
    return reports


def check_edge_probability(
    N, n, edges, reps, seed, thresholds=None, threads=1, progress=tqdm
):
    """Frequency of each edge ``i <- j`` at hour ``n`` on tracked pool
    runs against ``(n - j)/(N - j + 1)``."""
    thresholds = thresholds or Thresholds()
    for i, j in edges:
        edge_probability(N, n, i, j)
    runs = run_replicates(
        simulate_pool, ModelParams(N), reps, seed, threads, progress, track_edges=True
    )
    pools = [pool_from_trajectory(run, n) for run in runs]
    reports = []
    for i, j in edges:
        hits = np.array([pool.edge_flags[i, j] for pool in pools], dtype=np.float64)
        reports.append(
            _zscore_report(f"edge-{i}-{j}", hits, edge_probability(N, n, i, j), thresholds,
                           N=N, n=n, i=i, j=j)
        )
    return reports


def check_aged_recent(
    N, m, reps, seed, n=None, hour=None, thresholds=None, threads=1, progress=tqdm
):
    """Aged/recent split on tracked pool runs.

    The split identity ``aged + recent = X_n - X_m`` and the bound
    ``aged <= C(m, 2) - X_m`` on every path, the mean second difference at
    ``hour`` (default ``N/2``), and equal means of the aged increments
    after ``m`` (pairwise, on per-path differences).  ``n`` defaults to
    ``m + 3``.
    """
    thresholds = thresholds or Thresholds()
    n = min(m + 3, N) if n is None else n
    hour = N // 2 if hour is None else hour
    if not 2 <= hour <= N - 1:
        raise ValueError(f"hour must lie in 2..{N - 1}, got {hour}")
    runs = run_replicates(
        simulate_pool, ModelParams(N), reps, seed, threads, progress, track_edges=True
    )
    violations = 0
    aged = []
    d2 = []
    for run in runs:
        split = split_aged_recent(run, m, n)
        violations += split.total != run.X(n) - run.X(m)
        violations += split.aged > n_pairs(m) - run.X(m)
        aged.append(aged_increments(run, m, n))
        d2.append(run.X(hour + 1) - 2 * run.X(hour) + run.X(hour - 1))
    reports = [
        GofReport("aged-recent-identity", "identity", violations, None, reps, violations == 0)
    ]
    reports.append(
        _zscore_report(f"second-difference-{hour}", d2, second_difference_mean(N, hour), thresholds,
                       N=N, n=hour)
    )
    aged = np.array(aged, dtype=np.float64)
    for a, b in itertools.combinations(range(n - m), 2):
        reports.append(
            _zscore_report(f"aged-exchangeable-{m + a + 1}-{m + b + 1}", aged[:, a] - aged[:, b], 0,
                           thresholds, m=m)
        )
    return reports


def check_moment_curves(N_list, thresholds=None, upto=0.9):
    """Gaps of ``2 μ_n / N^2`` to ``φ`` and of ``σ_n^2 / N^3`` to ``ψ`` over
    ``n <= upto N``: both shrink along ``N_list`` and are small at the
    largest ``N``.  Exact tables only, no simulation."""
    thresholds = thresholds or Thresholds()
    N_list = sorted(N_list)
    gaps = [moment_curve_gaps(N, upto) for N in N_list]
    reports = []
    for idx, (N, (phi_gap, psi_gap)) in enumerate(zip(N_list, gaps)):
        largest = idx == len(N_list) - 1
        reports.append(
            GofReport(f"phi-curve-gap-N{N}", "gap", phi_gap, None, 0,
                      phi_gap < thresholds.curve_phi_gap if largest else True, {"N": N})
        )
        reports.append(
            GofReport(f"psi-curve-gap-N{N}", "gap", psi_gap, None, 0,
                      psi_gap < thresholds.curve_psi_gap if largest else True, {"N": N})
        )
    if len(gaps) > 1:
        for which, column in (("phi", 0), ("psi", 1)):
            values = [g[column] for g in gaps]
            rises = sum(b >= a for a, b in zip(values, values[1:]))
            reports.append(
                GofReport(f"{which}-curve-gap-decreasing", "identity", rises, None, 0, rises == 0,
                          {"gaps": values})
            )
    return reports


def check_limit_diffusion(
    paths,
    seed,
    grid=(0.0, 0.3, 0.5, 0.6, 1.0),
    cov_pair=(0.3, 0.6),
    euler_paths=10_000,
    delta=EULER_DELTA,
    dt=EULER_STEP,
    thresholds=None,
):
    """Exact-method diffusion paths against ``ψ`` and the covariance
    kernel, pinned endpoints, and the Euler scheme against the exact method
    on ``Var[Y(0.5)]``.  ``euler_paths=0`` skips the Euler comparison."""
    thresholds = thresholds or Thresholds()
    s, t = cov_pair
    grid = check_grid(sorted(set(grid) | {0.0, 0.5, s, t}))
    exact = simulate_limit_diffusion(grid, seed, n_paths=paths)
    mid = exact.at(0.5)
    exact_var = np.var(mid, ddof=1)
    reports = [
        _relative_report("diffusion-variance", exact_var, psi(0.5), thresholds.diffusion_var_rtol,
                         paths, t=0.5),
        _relative_report("diffusion-covariance", np.cov(exact.at(s), exact.at(t))[0, 1],
                         cov_kernel(s, t), thresholds.diffusion_cov_rtol, paths, s=s, t=t),
    ]
    pinned = int(np.count_nonzero(exact.at(0.0)))
    if grid[-1] == 1:
        pinned += int(np.count_nonzero(exact.at(1.0)))
    reports.append(GofReport("diffusion-endpoints", "identity", pinned, None, paths, pinned == 0))
    if euler_paths:
        euler = simulate_limit_diffusion(
            grid, seed.spawn(seed.replicate_index + 1), "euler", euler_paths, delta, dt
        )
        reports.append(
            _relative_report("euler-variance", np.var(euler.at(0.5), ddof=1), exact_var,
                             thresholds.euler_var_rtol, euler_paths, delta=delta, dt=dt)
        )
    return reports


def check_gamma_dirichlet(m, samples, seed, thresholds=None):
    """Coordinates of the gamma-Dirichlet product against ``Exp(1)``."""
    thresholds = thresholds or Thresholds()
    draws = gamma_dirichlet_sample(m, seed.generator(), size=samples)
    return [
        ks_test(draws[:, i], stats.expon.cdf, f"gamma-dirichlet-ks-{i}",
                statistic_max=thresholds.gamma_dirichlet_ks_max)
        for i in range(m + 1)
    ]


@dataclass
class SuiteConfig:
    """Parameters shared by the suites of :func:`run_suite`.

    ``None`` fields fall back to the suite's own default size.
    """

    seed: SeedSpec = field(default_factory=lambda: SeedSpec(DEFAULT_SEED))
    N: int = None
    reps: int = None
    m: int = None
    paths: int = None
    t_grid: tuple = None
    thresholds: Thresholds = field(default_factory=Thresholds)
    threads: int = 1
    progress: object = silent_progress

    def get(self, name, default):
        value = getattr(self, name)
        return default if value is None else value

    @property
    def common(self):
        return {"thresholds": self.thresholds, "threads": self.threads, "progress": self.progress}


def _samplers_suite(cfg):
    reports = []
    for N in (cfg.N,) if cfg.N else (3, 4, 5):
        reports += check_sampler_equivalence(N, cfg.get("reps", 100_000), cfg.seed, **cfg.common)
    return reports


def _edge_probability_suite(cfg):
    N = cfg.get("N", 30)
    n = 2 * N // 3
    edges = [(1, 2), (1, n)] + ([(5, 10)] if n >= 10 else [])
    return check_edge_probability(N, n, edges, cfg.get("reps", 10_000), cfg.seed, **cfg.common)


def _fluid_suite(cfg):
    N_list = (max(2, cfg.N // 4), cfg.N) if cfg.N else (500, 2000)
    return check_fluid_limit(N_list, cfg.get("reps", 100), cfg.seed, **cfg.common)


def _moment_curves_suite(cfg):
    N_list = (max(2, cfg.N // 4), cfg.N) if cfg.N else (500, 2000)
    return check_moment_curves(N_list, cfg.thresholds)


SUITES = {
    "exact-oracle": lambda cfg: check_exact_oracle(cfg.get("N", 10)),
    "samplers": _samplers_suite,
    "edge-probability": _edge_probability_suite,
    "moments": lambda cfg: check_moments(
        cfg.get("N", 8), cfg.get("reps", 100_000), cfg.seed, **cfg.common
    ),
    "martingales": lambda cfg: check_martingales(
        cfg.get("N", 100), cfg.get("reps", 10_000), cfg.seed, **cfg.common
    ),
    "aged-recent": lambda cfg: check_aged_recent(
        cfg.get("N", 30), cfg.get("N", 30) // 3, cfg.get("reps", 10_000), cfg.seed, **cfg.common
    ),
    "fluid": _fluid_suite,
    "moment-curves": _moment_curves_suite,
    "first-edge": lambda cfg: check_first_edge(
        cfg.get("N", 10**6), cfg.get("reps", 10_000), cfg.seed, **cfg.common
    ),
    "early-poisson": lambda cfg: check_early_poisson(
        cfg.get("N", 10**6), 3, cfg.get("reps", 10_000), cfg.seed, **cfg.common
    ),
    "fluctuations": lambda cfg: check_gaussian_fluctuations(
        cfg.get("N", 2000), cfg.get("reps", 4000), cfg.seed, t_grid=cfg.t_grid, **cfg.common
    ),
    "diffusion": lambda cfg: check_limit_diffusion(
        cfg.get("paths", 100_000), cfg.seed, thresholds=cfg.thresholds
    ),
    "last-stage": lambda cfg: check_last_stage(
        cfg.get("N", 1000), cfg.get("reps", 1000), cfg.seed, m=cfg.get("m", 2), **cfg.common
    ),
    "gamma-dirichlet": lambda cfg: check_gamma_dirichlet(
        cfg.get("m", 2), cfg.get("reps", 100_000), cfg.seed, cfg.thresholds
    ),
}


def run_suite(names, config=None):
    """Run the named suites (``"all"`` for every suite) and collect their
    reports in order.

    Examples
    --------
    >>> from growthlab.verify import run_suite, all_passed
    >>> all_passed(run_suite(["exact-oracle"]))
    True
    """
    config = config or SuiteConfig()
    names = [names] if isinstance(names, str) else list(names)
    if "all" in names:
        names = list(SUITES)
    unknown = [name for name in names if name not in SUITES]
    if unknown:
        raise ValueError(f"unknown suites {unknown}, expected some of {sorted(SUITES)}")
    reports = []
    for name in names:
        for report in SUITES[name](config):
            report.details.setdefault("suite", name)
            reports.append(report)
    return reports
