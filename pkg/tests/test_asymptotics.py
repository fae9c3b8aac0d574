import math

from hypothesis import given, strategies as st
import numpy as np
import pytest
from scipy import integrate

from growthlab.asymptotics import (
    DiffusionPath,
    LimitKernel,
    LimitLaw,
    check_grid,
    cov_kernel,
    early_poisson_cumulative,
    early_poisson_rate,
    erlang_cdf,
    erlang_mean,
    first_edge_limit_cdf,
    first_edge_limit_moment,
    first_edge_limit_sample,
    first_edge_limit_survival,
    gamma_dirichlet_sample,
    log_one_minus,
    moment_curve_gaps,
    phi,
    phi_integral,
    psi,
    psi_double_integral,
    psi_integral,
    simulate_limit_diffusion,
    terminal_poisson_mean,
)
from growthlab.state import SeedSpec

unit = st.floats(0, 0.99)


def test_curve_endpoints():
    assert phi(0) == 0
    assert phi(1) == 1
    assert psi(0) == 0
    assert psi(1) == 0
    assert log_one_minus(0) == 0


def test_curves_vectorise():
    t = np.array([0.0, 0.25, 0.5, 1.0])
    assert phi(t) == pytest.approx([phi(v) for v in t])
    assert psi(t) == pytest.approx([psi(v) for v in t])
    assert LimitKernel.phi(0.5) == phi(0.5)
    assert LimitKernel.L(0.5) == pytest.approx(math.log(0.5))


@pytest.mark.parametrize("t", [-0.1, 1.1, math.nan])
def test_curves_reject_outside(t):
    with pytest.raises(ValueError):
        phi(t)
    with pytest.raises(ValueError):
        psi(t)


@given(unit)
def test_phi_matches_integral(t):
    assert phi(t) == pytest.approx(phi_integral(t), abs=1e-9)


@given(unit)
def test_psi_matches_integral(t):
    assert psi(t) == pytest.approx(psi_integral(t), abs=1e-9)


@pytest.mark.parametrize("t", [0.2, 0.5, 0.8])
def test_psi_matches_double_integral(t):
    assert psi(t) == pytest.approx(psi_double_integral(t), rel=1e-6)


@given(unit)
def test_psi_nonnegative(t):
    assert psi(t) >= 0


@pytest.mark.parametrize("t", [0.1, 0.4, 0.7])
def test_phi_solves_its_ode(t):
    # phi' = -2(t + L) and (1 - t) phi'' = 2 t, by central differences
    h = 1e-4
    d1 = (phi(t + h) - phi(t - h)) / (2 * h)
    d2 = (phi(t + h) - 2 * phi(t) + phi(t - h)) / h**2
    assert d1 == pytest.approx(-2 * (t + math.log1p(-t)), abs=1e-7)
    assert (1 - t) * d2 == pytest.approx(2 * t, abs=1e-5)


@pytest.mark.parametrize("t", [0.2, 0.5, 0.8])
def test_psi_solves_its_ode(t):
    # psi' = -2 psi / (1 - t) + (t + L)^2, the variance equation of the diffusion
    h = 1e-5
    d1 = (psi(t + h) - psi(t - h)) / (2 * h)
    L = math.log1p(-t)
    assert d1 == pytest.approx(-2 * psi(t) / (1 - t) + (t + L) ** 2, abs=1e-7)


def test_cov_kernel():
    assert cov_kernel(0.3, 0.3) == pytest.approx(psi(0.3))
    assert cov_kernel(0.3, 0.6) == pytest.approx(0.4 / 0.7 * psi(0.3))
    assert cov_kernel(0.3, 1.0) == 0
    assert cov_kernel(1.0, 1.0) == 0
    with pytest.raises(ValueError, match="s <= t"):
        cov_kernel(0.6, 0.3)


def test_first_edge_limit():
    assert first_edge_limit_cdf(0) == 0
    x = np.linspace(0, 3, 7)
    assert first_edge_limit_cdf(x) + first_edge_limit_survival(x) == pytest.approx(np.ones(7))
    assert first_edge_limit_moment(3) == pytest.approx(6.0)
    mean, _ = integrate.quad(first_edge_limit_survival, 0, np.inf)
    assert first_edge_limit_moment(1) == pytest.approx(mean)
    sample = first_edge_limit_sample(50_000, np.random.default_rng(1))
    assert np.mean(sample**3) == pytest.approx(6.0, rel=0.03)
    with pytest.raises(ValueError):
        first_edge_limit_cdf(-1)


def test_poisson_rates():
    assert early_poisson_rate(2.0) == 2.0
    assert early_poisson_cumulative(3.0) == pytest.approx(4.5)
    assert terminal_poisson_mean(2.5) == 2.5
    t = np.array([0.5, 1.0])
    assert early_poisson_cumulative(t) == pytest.approx(t**3 / 6)


def test_erlang():
    assert erlang_cdf(0, 1.0) == pytest.approx(1 - math.exp(-1))
    assert erlang_cdf(1, 1.0) == pytest.approx(1 - 2 * math.exp(-1))
    assert erlang_mean(3) == 4
    with pytest.raises(ValueError):
        erlang_cdf(-1, 1.0)


def test_gamma_dirichlet_is_exponential():
    rng = np.random.default_rng(3)
    draws = gamma_dirichlet_sample(2, rng, size=40_000)
    assert draws.shape == (40_000, 3)
    assert draws.mean(axis=0) == pytest.approx(np.ones(3), rel=0.03)
    assert draws.var(axis=0) == pytest.approx(np.ones(3), rel=0.06)
    corr = np.corrcoef(draws.T)
    assert np.all(np.abs(corr[np.triu_indices(3, 1)]) < 0.03)
    assert gamma_dirichlet_sample(0, rng).shape == (1,)


def test_limit_law():
    assert LimitLaw("exp-one").cdf(1.0) == pytest.approx(1 - math.exp(-1))
    assert LimitLaw("erlang", 2).mean() == 3
    assert LimitLaw("first-edge").mean() == pytest.approx(first_edge_limit_moment(1))
    assert LimitLaw("poisson-early").cumulative_rate(3.0) == pytest.approx(4.5)
    with pytest.raises(ValueError, match="no cdf"):
        LimitLaw("poisson-terminal").cdf(1.0)
    with pytest.raises(ValueError, match="not a point process"):
        LimitLaw("erlang").cumulative_rate(1.0)
    with pytest.raises(ValueError, match="unknown limit law"):
        LimitLaw("gaussian")


def test_moment_curve_gaps_shrink():
    small = moment_curve_gaps(100)
    large = moment_curve_gaps(2000)
    assert large[0] < small[0]
    assert large[1] < small[1]


def test_check_grid():
    assert check_grid([0, 0.5, 1]).tolist() == [0, 0.5, 1]
    with pytest.raises(ValueError, match="start"):
        check_grid([0.1, 0.5])
    with pytest.raises(ValueError, match="increasing"):
        check_grid([0, 0.5, 0.5])
    with pytest.raises(ValueError):
        check_grid([0, 1.5])


@pytest.mark.parametrize("method", ["exact", "euler"])
def test_diffusion_shape_and_endpoints(method):
    path = simulate_limit_diffusion([0, 0.25, 0.5, 1.0], SeedSpec(1), method, n_paths=5)
    assert isinstance(path, DiffusionPath)
    assert path.y.shape == (5, 4)
    assert path.n_paths == 5
    assert np.all(path.at(0) == 0)
    assert np.all(path.at(1.0) == 0)
    assert "Paths:       5" in repr(path)
    with pytest.raises(ValueError, match="not on the grid"):
        path.at(0.3)


def test_diffusion_reproducible():
    a = simulate_limit_diffusion([0, 0.5], SeedSpec(7), n_paths=3)
    b = simulate_limit_diffusion([0, 0.5], SeedSpec(7), n_paths=3)
    assert np.array_equal(a.y, b.y)


def test_exact_diffusion_covariance():
    grid = [0, 0.5, 0.6, 1.0]
    path = simulate_limit_diffusion(grid, np.random.default_rng(11), n_paths=40_000)
    y5, y6 = path.at(0.5), path.at(0.6)
    assert y5.var() == pytest.approx(psi(0.5), rel=0.05)
    assert y6.var() == pytest.approx(psi(0.6), rel=0.05)
    assert np.mean(y5 * y6) == pytest.approx(cov_kernel(0.5, 0.6), rel=0.06)


def test_euler_diffusion_variance():
    path = simulate_limit_diffusion([0, 0.5], SeedSpec(5), "euler", n_paths=20_000, dt=1e-3)
    assert path.at(0.5).var() == pytest.approx(psi(0.5), rel=0.06)


def test_diffusion_invalid_arguments():
    with pytest.raises(ValueError, match="unknown diffusion method"):
        simulate_limit_diffusion([0, 1], SeedSpec(0), "milstein")
    with pytest.raises(ValueError):
        simulate_limit_diffusion([0, 1], SeedSpec(0), n_paths=0)
    with pytest.raises(ValueError):
        simulate_limit_diffusion([0, 1], SeedSpec(0), "euler", delta=0)
