import json
import math

import numpy as np
import pytest
from scipy import stats

from growthlab.asymptotics import first_edge_limit_cdf
from growthlab.constants import FIRST_EDGE_OFFSET
from growthlab.moments import first_edge_survival
from growthlab.state import SeedSpec
from growthlab.verify import (
    SUITES,
    FluctuationSample,
    GofReport,
    McEstimate,
    SuiteConfig,
    Thresholds,
    all_passed,
    check_aged_recent,
    check_early_poisson,
    check_edge_probability,
    check_exact_oracle,
    check_first_edge,
    check_fluid_limit,
    check_gamma_dirichlet,
    check_gaussian_fluctuations,
    check_last_stage,
    check_limit_diffusion,
    check_martingales,
    check_moment_curves,
    check_moments,
    check_sampler_equivalence,
    chi_square,
    chi_square_two_sample,
    fluid_sup_gap,
    ks_test,
    run_suite,
    tv_distance,
)

# fixed-seed checks use wider margins than the defaults
LOOSE = Thresholds(se_multiple=5.0)


def names(reports):
    return [report.name for report in reports]


def failing(reports):
    return [report for report in reports if not report.passed]


def test_mc_estimate():
    est = McEstimate.from_sample([1.0, 2.0, 3.0])
    assert est.mean == 2.0
    assert est.variance == 1.0
    assert est.stderr == pytest.approx(math.sqrt(1 / 3))
    assert est.zscore(2.0) == 0.0
    assert est.zscore(2.0 + est.stderr) == pytest.approx(1.0)
    assert est.variance_stderr == pytest.approx(1.0)
    with pytest.raises(ValueError):
        McEstimate.from_sample([1.0])


def test_gof_report_validation():
    report = GofReport("x", "KS", 0.1, 0.5, 10, True, {"ratio": math.inf})
    assert report.to_dict()["details"] == {"ratio": "inf"}
    json.dumps(report.to_dict())
    assert "Verdict:     pass" in repr(report)
    with pytest.raises(ValueError, match="unknown test"):
        GofReport("x", "t-test", 0.1)
    with pytest.raises(ValueError, match="statistic"):
        GofReport("x", "KS", -0.1)
    with pytest.raises(ValueError, match="p_value"):
        GofReport("x", "KS", 0.1, 1.5)


def test_all_passed():
    assert all_passed([GofReport("a", "gap", 0.0), GofReport("b", "gap", 1.0)])
    assert not all_passed([GofReport("a", "gap", 0.0, passed=False)])
    assert all_passed([])


def test_thresholds_override():
    custom = Thresholds().override(tv_max=0.2)
    assert custom.tv_max == 0.2
    assert Thresholds().tv_max == 0.01
    with pytest.raises(ValueError, match="unknown thresholds"):
        Thresholds().override(nonsense=1)


def test_ks_test():
    rng = np.random.default_rng(1)
    good = ks_test(rng.standard_exponential(5000), stats.expon.cdf)
    assert good.passed and good.test == "KS"
    bad = ks_test(rng.standard_exponential(5000) + 0.2, stats.expon.cdf)
    assert not bad.passed
    capped = ks_test(rng.standard_exponential(5000), stats.expon.cdf, statistic_max=0.5)
    assert capped.passed
    with pytest.raises(ValueError):
        ks_test([], stats.expon.cdf)


def test_chi_square():
    rng = np.random.default_rng(2)
    pmf = {0: 0.5, 1: 0.3, 2: 0.2}
    sample = rng.choice(3, size=5000, p=[0.5, 0.3, 0.2])
    assert chi_square(sample, pmf).passed
    assert not chi_square(rng.choice(3, size=5000), pmf).passed
    outside = chi_square([0, 1, 3], pmf)
    assert not outside.passed and math.isinf(outside.statistic)


def test_chi_square_two_sample():
    rng = np.random.default_rng(3)
    a = rng.poisson(2.0, 5000)
    b = rng.poisson(2.0, 5000)
    c = rng.poisson(2.6, 5000)
    assert chi_square_two_sample(a, b).passed
    assert not chi_square_two_sample(a, c).passed
    with pytest.raises(ValueError):
        chi_square_two_sample(a, [])


def test_tv_distance():
    assert tv_distance({0: 3, 1: 1}, {0: 0.5, 1: 0.5}) == 0.25
    assert tv_distance([0, 1, 1, 1], {0: 0.25, 1: 0.75}) == 0.0
    assert tv_distance([2, 2], {0: 1.0}) == 1.0


def test_exact_oracle():
    reports = check_exact_oracle(8)
    assert names(reports) == [f"exact-oracle-N{N}" for N in range(2, 9)]
    assert all_passed(reports)
    with pytest.raises(ValueError):
        check_exact_oracle(13)


def test_check_moments():
    reports = check_moments(8, 20_000, SeedSpec(1), LOOSE, progress=lambda it, **kw: it)
    assert names(reports)[:2] == ["mean-X2", "variance-X2"]
    assert not failing(reports)
    empirical = check_moments(8, 20_000, SeedSpec(1), LOOSE, variance_se="empirical")
    assert not failing(empirical)
    with pytest.raises(ValueError, match="reps"):
        check_moments(8, 50, SeedSpec(1))


def test_check_sampler_equivalence():
    thresholds = LOOSE.override(tv_max=0.04)
    reports = check_sampler_equivalence(4, 10_000, SeedSpec(2), thresholds)
    assert names(reports) == [
        "tv-pool",
        "tv-urn",
        "tv-insertion",
        "chi2-pool-urn",
        "chi2-pool-insertion",
        "chi2-urn-insertion",
    ]
    assert not failing(reports)


def test_check_martingales():
    reports = check_martingales(60, 5000, SeedSpec(3), LOOSE)
    assert "compensator-monotone" in names(reports)
    assert "second-difference-30" in names(reports)
    assert not failing(reports)


def test_fluid_sup_gap():
    x = np.zeros((2, 10))
    gaps = fluid_sup_gap(x)
    assert gaps.shape == (2,)
    assert gaps == pytest.approx([1.0, 1.0])


def test_check_fluid_limit():
    reports = check_fluid_limit([800, 50], 50, SeedSpec(4), LOOSE.override(fluid_gap_max=0.1))
    assert names(reports) == ["fluid-gap-N50", "fluid-gap-N800", "fluid-gap-decreasing"]
    assert not failing(reports)


def test_check_first_edge():
    thresholds = LOOSE.override(first_edge_ks_max=0.05, first_edge_moment_rtol=0.1)
    reports = check_first_edge(10**6, 5000, SeedSpec(5), thresholds)
    assert names(reports) == ["first-edge-ks", "first-edge-cube-moment", "first-edge-survival"]
    assert not failing(reports)


def test_first_edge_midpoint_law_close_to_limit():
    # sup distance between the exact law of (xi - 3/2) / N^(1/3) and the limit cdf
    N = 10**6
    scale = N ** (1 / 3)
    gap = 0.0
    for n in range(3, 600):
        cdf = 1 - first_edge_survival(N, n)
        for z in ((n - FIRST_EDGE_OFFSET) / scale, (n + 1 - FIRST_EDGE_OFFSET) / scale):
            gap = max(gap, abs(cdf - first_edge_limit_cdf(z)))
    assert gap < 0.008


def test_first_edge_suite_at_default_thresholds():
    reports = run_suite(["first-edge"], SuiteConfig())
    assert names(reports) == ["first-edge-ks", "first-edge-cube-moment", "first-edge-survival"]
    assert not failing(reports)


def test_check_early_poisson():
    thresholds = LOOSE.override(poisson_rtol=0.15, poisson_corr_max=0.08)
    reports = check_early_poisson(10**6, 3, 5000, SeedSpec(6), thresholds=thresholds)
    assert len(reports) == 5
    assert not failing(reports)


def test_check_early_poisson_edge_cases():
    empty = check_early_poisson(1000, 0, 10, SeedSpec(0))
    assert names(empty) == ["early-poisson-empty"] and empty[0].passed
    with pytest.raises(ValueError):
        check_early_poisson(1000, -1, 10, SeedSpec(0))
    with pytest.raises(ValueError, match="bin edges"):
        check_early_poisson(1000, 3, 10, SeedSpec(0), edges=(0, 2, 1))


def test_fluctuation_sample():
    x = np.zeros((3, 4))
    sample = FluctuationSample.from_paths(x, [0.0, 1.0])
    assert sample.at(0.0).tolist() == [0, 0, 0]
    assert sample.at(1.0) == pytest.approx(np.full(3, -16 / 2 / 8))
    with pytest.raises(ValueError):
        FluctuationSample.from_paths(x, [1.5])
    with pytest.raises(ValueError):
        sample.at(0.5)


def test_check_gaussian_fluctuations():
    thresholds = LOOSE.override(
        fluctuation_var_rtol=0.3, fluctuation_cov_rtol=0.3, normal_ks_p_min=1e-4
    )
    reports = check_gaussian_fluctuations(
        1000, 2000, SeedSpec(7), cov_pair=(0.5, 0.6), compare_diffusion=True, thresholds=thresholds
    )
    assert names(reports) == [
        "fluctuation-variance",
        "fluctuation-covariance",
        "fluctuation-normality",
        "fluctuation-origin",
        "fluctuation-vs-diffusion",
    ]
    assert not failing(reports)


def test_check_last_stage_small_N():
    with pytest.warns(UserWarning, match="calibrated"):
        reports = check_last_stage(200, 300, SeedSpec(8), m=1, thresholds=LOOSE)
    by_name = {report.name: report for report in reports}
    assert by_name["last-stage-mean"].passed
    assert by_name["last-stage-mean-identity"].passed
    assert {"terminal-ks-lag0", "terminal-ks-lag1", "terminal-correlation"} <= set(by_name)
    assert "terminal-poisson-count" in by_name
    with pytest.raises(ValueError):
        check_last_stage(200, 10, SeedSpec(8), m=199)


def test_last_stage_suite_at_default_thresholds():
    reports = run_suite(["last-stage"], SuiteConfig())
    assert names(reports) == [
        "last-stage-mean",
        "last-stage-mean-identity",
        "terminal-ks-lag0",
        "terminal-ks-lag1",
        "terminal-ks-lag2",
        "terminal-correlation",
        "terminal-erlang-mean-0",
        "terminal-erlang-mean-1",
        "terminal-erlang-mean-2",
        "terminal-poisson-count",
    ]
    assert not failing(reports)


def test_check_edge_probability():
    reports = check_edge_probability(10, 6, [(1, 2), (3, 5)], 2000, SeedSpec(9), LOOSE)
    assert names(reports) == ["edge-1-2", "edge-3-5"]
    assert not failing(reports)
    with pytest.raises(ValueError):
        check_edge_probability(10, 6, [(3, 7)], 10, SeedSpec(9))


def test_check_aged_recent():
    reports = check_aged_recent(12, 4, 2000, SeedSpec(10), thresholds=LOOSE)
    assert names(reports)[:2] == ["aged-recent-identity", "second-difference-6"]
    assert len(reports) == 2 + 3
    assert not failing(reports)
    with pytest.raises(ValueError):
        check_aged_recent(12, 4, 10, SeedSpec(10), hour=12)


def test_check_moment_curves():
    reports = check_moment_curves([1000, 100])
    assert names(reports)[-2:] == ["phi-curve-gap-decreasing", "psi-curve-gap-decreasing"]
    assert all_passed(reports[-2:])


def test_check_limit_diffusion():
    thresholds = Thresholds(diffusion_var_rtol=0.06, diffusion_cov_rtol=0.5, euler_var_rtol=0.15)
    reports = check_limit_diffusion(20_000, SeedSpec(11), euler_paths=2000, dt=1e-3,
                                    thresholds=thresholds)
    assert names(reports) == [
        "diffusion-variance",
        "diffusion-covariance",
        "diffusion-endpoints",
        "euler-variance",
    ]
    assert not failing(reports)


def test_check_gamma_dirichlet():
    thresholds = Thresholds(gamma_dirichlet_ks_max=0.02)
    reports = check_gamma_dirichlet(2, 20_000, SeedSpec(12), thresholds)
    assert len(reports) == 3
    assert not failing(reports)


def test_run_suite():
    reports = run_suite(["exact-oracle"], SuiteConfig(N=6))
    assert len(reports) == 5
    assert {report.details["suite"] for report in reports} == {"exact-oracle"}
    assert all_passed(reports)
    with pytest.raises(ValueError, match="unknown suites"):
        run_suite(["everything"])


def test_suite_config():
    config = SuiteConfig(reps=10)
    assert config.get("reps", 5) == 10
    assert config.get("N", 7) == 7
    assert set(config.common) == {"thresholds", "threads", "progress"}
    assert "exact-oracle" in SUITES and len(SUITES) == 14
