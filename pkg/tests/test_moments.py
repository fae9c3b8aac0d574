from fractions import Fraction
import math

from hypothesis import given, strategies as st
import numpy as np
import pytest

from growthlab.model import (
    exact_distribution,
    exact_marginals,
    silent_progress,
    simulate_urn_batch,
)
from growthlab.moments import (
    compensator,
    compensator_paths,
    first_edge_pmf,
    first_edge_survival,
    harmonic_partial_sums,
    last_stage_mean,
    last_stage_second_moment,
    mean_diff,
    mean_edges,
    mean_table,
    moment_table,
    second_difference_mean,
    second_martingale,
    second_moment_virtual,
    variance_bound,
    variance_closed_form,
    variance_recursion,
    variance_table,
)
from growthlab.state import ModelParams, SeedSpec, Trajectory, n_pairs


def test_small_tables():
    table = moment_table(3, "rational")
    assert table.rows() == [(1, 0, 0), (2, 0, 0), (3, Fraction(1, 2), Fraction(1, 4))]
    assert "Mean at N: 0.5" in repr(table)
    assert moment_table(3).rows()[-1] == (3, 0.5, 0.25)
    with pytest.raises(ValueError, match="numeric mode"):
        moment_table(3, "decimal")


@given(st.integers(2, 40))
def test_closed_form_mean_matches_recursion(N):
    mu = mean_table(N, exact=True)
    assert [mean_edges(N, n, exact=True) for n in range(1, N + 1)] == mu


@given(st.integers(2, 40))
def test_variance_formulas_agree(N):
    mu = mean_table(N, exact=True)
    assert variance_recursion(N, mu) == variance_closed_form(N, mu)


@pytest.mark.parametrize("N", [5, 50, 500])
def test_float_mode_tracks_rational(N):
    mu = mean_table(N, exact=True)
    sigma2 = variance_table(N, exact=True)
    assert mean_table(N) == pytest.approx([float(v) for v in mu], rel=1e-9)
    assert variance_table(N) == pytest.approx([float(v) for v in sigma2], rel=1e-8, abs=1e-9)
    closed = [mean_edges(N, n) for n in range(1, N + 1)]
    assert closed == pytest.approx([float(v) for v in mu], rel=1e-12)


@pytest.mark.parametrize("N", [10**5, 10**6])
def test_float_closed_form_mean_at_scale(N):
    mu = mean_table(N)
    for n in (1, 2, 3, 4, 10, 1000, N // 2, N - 1, N):
        assert mean_edges(N, n) == pytest.approx(mu[n - 1], rel=1e-9)
    for n in (3, 4, 10):
        assert mean_edges(N, n) == pytest.approx(float(mean_edges(N, n, exact=True)), rel=1e-12)


def test_float_mode_scales():
    N = 10**6
    mu_last = mean_edges(N, N)
    # C(N, 2) - mu_N = N (h_N - 1)
    assert n_pairs(N) - mu_last == pytest.approx(N * (math.log(N) + np.euler_gamma - 1), rel=1e-6)
    assert variance_table(2000)[-1] > 0


def test_moments_match_oracle():
    N = 8
    for n, law in enumerate(exact_marginals(ModelParams(N)), start=1):
        virtual = sum((n_pairs(n) - k) ** 2 * p for k, p in law.items())
        assert second_moment_virtual(N, n, exact=True) == virtual
        assert second_moment_virtual(N, n) == pytest.approx(float(virtual))


def test_second_moment_virtual_small():
    assert second_moment_virtual(3, 3, exact=True) == Fraction(13, 2)
    assert last_stage_second_moment(3) == pytest.approx(6.5)


def test_mean_differences():
    N = 12
    mu = mean_table(N, exact=True)
    for n in range(1, N):
        assert mean_diff(N, n, exact=True) == mu[n] - mu[n - 1]
        assert mean_diff(N, n) == pytest.approx(float(mu[n] - mu[n - 1]), abs=1e-12)
    for n in range(2, N):
        expected = (mu[n] - mu[n - 1]) - (mu[n - 1] - mu[n - 2])
        assert second_difference_mean(N, n, exact=True) == expected
    with pytest.raises(ValueError):
        mean_diff(N, N)
    with pytest.raises(ValueError):
        second_difference_mean(N, 1)


def test_last_stage_mean():
    for N in range(2, 15):
        assert last_stage_mean(N, exact=True) == n_pairs(N) - mean_edges(N, N, exact=True)
    assert last_stage_mean(4) == pytest.approx(13 / 3)


def test_harmonic_partial_sums():
    S = harmonic_partial_sums(7)
    assert S[0] == 0
    assert S[-1] == pytest.approx(sum(1 / k for k in range(2, 8)))
    with pytest.raises(ValueError):
        S[0] = 1.0


@pytest.mark.parametrize("N", [3, 10, 40])
def test_first_edge_pmf_is_a_law(N):
    pmf = [first_edge_pmf(N, n, exact=True) for n in range(1, N + 2)]
    assert pmf[0] == pmf[1] == 0
    assert sum(pmf) == 1
    assert sum(first_edge_pmf(N, n) for n in range(1, N + 2)) == pytest.approx(1.0)


def test_first_edge_survival():
    assert first_edge_survival(10, 4, exact=True) == Fraction(28, 45)
    assert first_edge_survival(10, 4) == pytest.approx(28 / 45)
    assert first_edge_survival(10, 2) == 1.0
    N = 6
    # no edge before hour n means X_n = 0
    for n in range(1, N + 1):
        assert first_edge_survival(N, n, exact=True) == exact_distribution(ModelParams(N), n).get(
            0, 0
        )


def test_compensator_of_trajectory():
    traj = Trajectory(ModelParams(4), np.array([0, 0, 1, 2]), 4)
    series = compensator(traj)
    # C_n = sum_{j<n} (C(j, 2) - X_j) / (N - j + 1)
    assert series.c.tolist() == pytest.approx([0, 0, 1 / 3, 1 / 3 + 2 / 2])
    assert series.martingale() == pytest.approx(traj.x - series.c)
    assert "C_N" in repr(series)


def test_martingales_are_centred():
    params = ModelParams(40)
    x = simulate_urn_batch(params, 20_000, SeedSpec(77), progress=silent_progress)
    residual = x - compensator_paths(x)
    m = second_martingale(x)
    for values in (residual[:, -1], residual[:, 20], m[:, -1], m[:, 30]):
        assert abs(values.mean()) < 5 * values.std(ddof=1) / np.sqrt(len(values))


def test_second_martingale_single_path():
    traj = Trajectory(ModelParams(3), np.array([0, 0, 1]), 2)
    assert second_martingale(traj).tolist() == pytest.approx([0, 0, 0.5])


@pytest.mark.parametrize("N", [100, 1000])
def test_variance_bound_holds(N):
    sigma2 = variance_table(N)
    for n in range(N // 2 + 1, N + 1):
        assert sigma2[n - 1] < variance_bound(N, n)


@pytest.mark.parametrize("N, n", [(1, 1), (5, 0), (5, 6)])
def test_invalid_hours(N, n):
    with pytest.raises(ValueError):
        mean_edges(N, n)
