"""Limit objects of the growth process.

The fluid limit ``φ`` of ``2 X_{tN} / N^2``, the variance curve ``ψ`` of the
Gaussian fluctuations ``Y_N(t)``, their covariance kernel, the limit laws of
the first edge and of the terminal stage, and a simulator of the limit
diffusion ``dY = -Y/(1 - t) dt + (log(1 - t) + t) dB``.
"""

from dataclasses import dataclass
import math
import os

import numpy as np
from scipy import integrate, special, stats

from growthlab.constants import EULER_DELTA, EULER_STEP, QUAD_EPS, QUAD_TOL
from growthlab.moments import mean_table, variance_table
from growthlab.state import SeedSpec

LIMIT_LAW_KINDS = ("first-edge", "exp-one", "erlang", "poisson-early", "poisson-terminal")
DIFFUSION_METHODS = ("exact", "euler")


def _check_unit_interval(t):
    arr = np.asarray(t, dtype=np.float64)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0) or np.any(arr > 1):
        raise ValueError(f"t must lie in [0, 1], got {t}")
    return arr


def _scalar(arr, t):
    return float(arr) if np.ndim(t) == 0 else arr


def log_one_minus(t):
    """``L(t) = log(1 - t)``"""
    return np.log1p(-_check_unit_interval(t))


def phi(t):
    """Fluid limit ``φ(t) = 2(1 - t)L + 2t - t^2`` with ``φ(1) = 1``.

    Examples
    --------
    >>> from growthlab.asymptotics import phi
    >>> round(phi(0.5), 6)
    0.056853
    """
    arr = _check_unit_interval(t)
    with np.errstate(divide="ignore", invalid="ignore"):
        L = np.log1p(-arr)
        value = np.where(arr < 1, 2 * (1 - arr) * L + 2 * arr - arr**2, 1.0)
    return _scalar(value, t)


def psi(t):
    """Variance curve ``ψ(t) = (1 - t){(2 - t)L^2 + 2(3 - t)L + t(6 - t)}``.

    ``ψ(1) = 0``.  Near ``t = 0`` the bracket cancels to order ``t^5``; the
    result is clipped at zero so that rounding never makes it negative.

    Examples
    --------
    >>> from growthlab.asymptotics import psi
    >>> round(psi(0.5), 7)
    0.0024718
    """
    arr = _check_unit_interval(t)
    with np.errstate(divide="ignore", invalid="ignore"):
        L = np.log1p(-arr)
        bracket = (2 - arr) * L**2 + 2 * (3 - arr) * L + arr * (6 - arr)
        value = np.where(arr < 1, np.maximum((1 - arr) * bracket, 0.0), 0.0)
    return _scalar(value, t)


def _g(s):
    return (s + math.log1p(-s)) / (1 - s)


def phi_integral(t):
    """``φ(t)`` by quadrature of ``2 ∫_0^t s(t - s)/(1 - s) ds``."""
    t = float(_check_unit_interval(t))
    upper = min(t, 1 - QUAD_EPS)
    value, _ = integrate.quad(
        lambda s: s * (t - s) / (1 - s), 0, upper, epsabs=QUAD_TOL, epsrel=QUAD_TOL
    )
    return 2 * value


def psi_integral(t):
    """``ψ(t)`` by quadrature of ``(1 - t)^2 ∫_0^t g(s)^2 ds`` with
    ``g(s) = (s + log(1 - s)) / (1 - s)``."""
    t = float(_check_unit_interval(t))
    if t == 1:
        return 0.0
    value, _ = integrate.quad(
        lambda s: _g(s) ** 2, 0, min(t, 1 - QUAD_EPS), epsabs=QUAD_TOL, epsrel=QUAD_TOL
    )
    return (1 - t) ** 2 * value


def psi_double_integral(t):
    """``ψ(t)`` by quadrature of
    ``2(1 - t) ∬_{0<x<y<t} x y (t - y) / ((1 - x)(1 - y)^2) dx dy``."""
    t = float(_check_unit_interval(t))
    if t == 1:
        return 0.0
    value, _ = integrate.dblquad(
        lambda x, y: x * y * (t - y) / ((1 - x) * (1 - y) ** 2),
        0,
        t,
        0,
        lambda y: y,
        epsabs=QUAD_TOL,
        epsrel=QUAD_TOL,
    )
    return 2 * (1 - t) * value


def cov_kernel(s, t):
    """Covariance ``Cov(Y(s), Y(t)) = (1 - t)/(1 - s) ψ(s)`` for
    ``0 <= s <= t <= 1``.

    Raises
    ------
    ValueError
        If ``s > t`` or either time is outside ``[0, 1]``.
    """
    _check_unit_interval([s, t])
    if s > t:
        raise ValueError(f"cov_kernel needs s <= t, got s={s}, t={t}")
    if s == 1:
        return 0.0
    return (1 - t) / (1 - s) * psi(s)


class LimitKernel:
    """Namespace of the deterministic limit curves and their kernel."""

    L = staticmethod(log_one_minus)
    phi = staticmethod(phi)
    psi = staticmethod(psi)
    cov = staticmethod(cov_kernel)


def _check_nonnegative(x, name):
    arr = np.asarray(x, dtype=np.float64)
    if np.any(arr < 0):
        raise ValueError(f"{name} must be >= 0, got {x}")
    return arr


def first_edge_limit_cdf(x):
    """Limit cdf ``1 - exp(-x^3/6)`` of ``N^{-1/3} ξ_N``."""
    arr = _check_nonnegative(x, "x")
    return _scalar(-np.expm1(-(arr**3) / 6), x)


def first_edge_limit_survival(x):
    """``exp(-x^3/6)``"""
    arr = _check_nonnegative(x, "x")
    return _scalar(np.exp(-(arr**3) / 6), x)


def first_edge_limit_moment(alpha):
    """``E[ξ^α] = 6^{α/3} Γ(1 + α/3)`` of the first-edge limit.

    Examples
    --------
    >>> from growthlab.asymptotics import first_edge_limit_moment
    >>> round(first_edge_limit_moment(3), 12)
    6.0
    """
    _check_nonnegative(alpha, "alpha")
    return _scalar(6 ** (np.asarray(alpha) / 3) * special.gamma(1 + np.asarray(alpha) / 3), alpha)


def first_edge_limit_sample(size, rng):
    """Draws of the first-edge limit: the cube root of ``Exp(mean 6)``."""
    return np.cbrt(6 * rng.standard_exponential(size))


def early_poisson_rate(t):
    """Rate ``λ(t) = t^2 / 2`` of the early edge process on the ``N^{1/3}``
    clock."""
    arr = _check_nonnegative(t, "t")
    return _scalar(arr**2 / 2, t)


def early_poisson_cumulative(t):
    """``Λ(t) = t^3 / 6``"""
    arr = _check_nonnegative(t, "t")
    return _scalar(arr**3 / 6, t)


def erlang_cdf(m, x):
    """cdf of ``Gamma(m + 1, 1)``, the limit of the scaled virtual-edge
    deficit ``m`` hours before the end."""
    if m < 0:
        raise ValueError(f"m must be >= 0, got {m}")
    return stats.gamma(m + 1).cdf(_check_nonnegative(x, "x"))


def erlang_mean(m):
    return m + 1


def gamma_dirichlet_sample(m, rng, size=None):
    """Product of ``γ ~ Gamma(m + 1, 1)`` with an independent uniform point
    of the ``m``-simplex.

    The coordinates are i.i.d. ``Exp(1)``.

    Returns
    -------
    numpy.ndarray
        Shape ``(m + 1,)`` or ``(size, m + 1)``.
    """
    if m < 0:
        raise ValueError(f"m must be >= 0, got {m}")
    gamma = rng.gamma(m + 1, size=size)
    simplex = rng.dirichlet(np.ones(m + 1), size=size)
    return np.asarray(gamma)[..., None] * simplex


def terminal_poisson_mean(x):
    """Mean count of scaled terminal atoms in ``[0, x]`` (unit rate)."""
    return float(_check_nonnegative(x, "x"))


@dataclass(frozen=True)
class LimitLaw:
    """One of the limit laws of the process.

    Parameters
    ----------
    kind : str
        ``"first-edge"`` (cdf ``1 - exp(-x^3/6)``), ``"exp-one"``,
        ``"erlang"`` (``Gamma(m + 1, 1)``), ``"poisson-early"`` (cumulative
        rate ``t^3/6``) or ``"poisson-terminal"`` (unit rate).

    m : int, default: 0
        Shape parameter of the Erlang law.
    """

    kind: str
    m: int = 0

    def __post_init__(self):
        if self.kind not in LIMIT_LAW_KINDS:
            raise ValueError(f"unknown limit law {self.kind!r}, expected one of {LIMIT_LAW_KINDS}")

    def cdf(self, x):
        if self.kind == "first-edge":
            return first_edge_limit_cdf(x)
        if self.kind in ("exp-one", "erlang"):
            m = self.m if self.kind == "erlang" else 0
            return erlang_cdf(m, x)
        raise ValueError(f"{self.kind} is a point process, it has no cdf")

    def mean(self):
        if self.kind == "first-edge":
            return first_edge_limit_moment(1)
        if self.kind == "erlang":
            return erlang_mean(self.m)
        if self.kind == "exp-one":
            return 1.0
        raise ValueError(f"{self.kind} is a point process, use cumulative_rate")

    def cumulative_rate(self, t):
        if self.kind == "poisson-early":
            return early_poisson_cumulative(t)
        if self.kind == "poisson-terminal":
            return terminal_poisson_mean(t)
        raise ValueError(f"{self.kind} is not a point process")


def moment_curve_gaps(N, upto=0.9):
    """Largest gaps ``|2 μ_n / N^2 - φ(n/N)|`` and ``|σ_n^2 / N^3 - ψ(n/N)|``
    over ``n <= upto * N``.

    Returns
    -------
    tuple of float
        ``(phi_gap, psi_gap)``.
    """
    n = np.arange(1, int(upto * N) + 1)
    t = n / N
    mu = mean_table(N)[n - 1]
    sigma2 = variance_table(N)[n - 1]
    phi_gap = float(np.max(np.abs(2 * mu / N**2 - phi(t))))
    psi_gap = float(np.max(np.abs(sigma2 / N**3 - psi(t))))
    return phi_gap, psi_gap


@dataclass
class DiffusionPath:
    """Paths of the limit diffusion on a time grid.

    ``y[p, i]`` is ``Y(grid[i])`` on path ``p``.
    """

    grid: np.ndarray
    y: np.ndarray

    @property
    def n_paths(self):
        return self.y.shape[0]

    def at(self, t):
        """Values at grid time ``t`` across paths."""
        idx = np.flatnonzero(np.isclose(self.grid, t, rtol=0, atol=1e-12))
        if not len(idx):
            raise ValueError(f"time {t} is not on the grid")
        return self.y[:, idx[0]]

    def __repr__(self):
        s = "--- Diffusion Paths ---" + os.linesep
        s += f"Paths:       {self.n_paths}{os.linesep}"
        s += f"Grid points: {len(self.grid)}"
        return s


def check_grid(grid):
    """Validate a time grid and return it as a float array."""
    grid = _check_unit_interval(grid).ravel()
    if not len(grid) or grid[0] != 0:
        raise ValueError("the grid must start at t = 0")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("the grid must be strictly increasing")
    return grid


def _exact_paths(grid, n_paths, rng):
    inner = grid[grid < 1]
    # M(t) = Y(t) / (1 - t) has independent increments with variance ∫ g^2
    variances = np.zeros(len(inner))
    for i in range(1, len(inner)):
        v, _ = integrate.quad(
            lambda s: _g(s) ** 2,
            inner[i - 1],
            min(inner[i], 1 - QUAD_EPS),
            epsabs=QUAD_TOL,
            epsrel=QUAD_TOL,
        )
        variances[i] = max(v, 0.0)
    z = rng.standard_normal((n_paths, len(inner)))
    m = np.cumsum(np.sqrt(variances) * z, axis=1)
    y = np.zeros((n_paths, len(grid)))
    y[:, : len(inner)] = (1 - inner) * m
    return y


def _euler_paths(grid, n_paths, rng, delta, dt):
    steps = int(math.floor((1 - delta) / dt + 1e-9))
    t_end = steps * dt
    y = np.zeros((n_paths, len(grid)))
    # grid time g in [k dt, (k+1) dt] is read off by linear interpolation
    hooks = {}
    for i, g in enumerate(grid):
        if g <= t_end:
            k = min(int(g / dt), steps - 1)
            hooks.setdefault(k, []).append((i, g / dt - k))
    current = np.zeros(n_paths)
    for k in range(steps):
        t = k * dt
        sigma = math.log1p(-t) + t
        noise = sigma * math.sqrt(dt) * rng.standard_normal(n_paths)
        nxt = current - current / (1 - t) * dt + noise
        for i, w in hooks.get(k, ()):
            y[:, i] = (1 - w) * current + w * nxt
        current = nxt
    tail = grid > t_end
    # Y(1) = 0; in between, interpolate linearly from the last Euler node
    y[:, tail] = current[:, None] * ((1 - grid[tail]) / (1 - t_end))
    return y


def simulate_limit_diffusion(
    grid, seed, method="exact", n_paths=1, delta=EULER_DELTA, dt=EULER_STEP
):
    """Simulate paths of the limit diffusion ``Y``.

    Parameters
    ----------
    grid : array_like
        Strictly increasing times in ``[0, 1]`` starting at 0.

    seed : SeedSpec or numpy.random.Generator
        Source of randomness.

    method : str, default: "exact"
        ``"exact"`` writes ``Y(t) = (1 - t) M(t)`` with ``M`` a Gaussian
        process with independent increments and draws those increments
        directly, which is exact in law on any grid.  ``"euler"`` runs an
        Euler-Maruyama scheme on ``[0, 1 - delta]`` and sets ``Y(1) = 0``.

    n_paths : int, default: 1
        Number of independent paths.

    delta : float, default: EULER_DELTA
        Distance to ``t = 1`` at which the Euler scheme stops.

    dt : float, default: EULER_STEP
        Euler step.

    Returns
    -------
    DiffusionPath

    Examples
    --------
    >>> from growthlab import SeedSpec, simulate_limit_diffusion
    >>> path = simulate_limit_diffusion([0, 0.5, 1], SeedSpec(3), n_paths=2)
    >>> bool((path.y[:, [0, 2]] == 0).all())
    True
    """
    grid = check_grid(grid)
    if n_paths < 1:
        raise ValueError(f"n_paths must be >= 1, got {n_paths}")
    rng = seed.generator() if isinstance(seed, SeedSpec) else seed
    if method == "exact":
        y = _exact_paths(grid, n_paths, rng)
    elif method == "euler":
        if not 0 < delta < 1 or not 0 < dt < 1 - delta:
            raise ValueError(f"need 0 < delta < 1 and 0 < dt < 1 - delta, got {delta}, {dt}")
        y = _euler_paths(grid, n_paths, rng, delta, dt)
    else:
        raise ValueError(
            f"unknown diffusion method {method!r}, expected one of {DIFFUSION_METHODS}"
        )
    return DiffusionPath(grid, y)
