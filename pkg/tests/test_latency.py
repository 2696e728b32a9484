import math

import mpmath
import numpy as np
import pytest

from latarb.errors import InvalidStats, ParseError
from latarb.latency import (ALLOW_NEGATIVE, PHYSICAL, EmpiricalLatency, GaussianLatency,
                            LatencyPair, load_latency_csv, norm_cdf)
from latarb.scenario import data_path

mpmath.mp.dps = 40


def mp_phi(x):
    return float(mpmath.ncdf(x))


def test_cdf_matches_high_precision_oracle():
    dist = GaussianLatency(103, 25.7)
    ts = np.linspace(103 - 6 * 25.7, 103 + 6 * 25.7, 10_000)
    got = dist.cdf(ts)
    want = np.array([mp_phi((mpmath.mpf(t) - 103) / mpmath.mpf("25.7")) for t in ts])
    assert np.max(np.abs(got - want)) <= 1e-10


def test_cdf_at_mean_is_half():
    assert GaussianLatency(51, 28).cdf(51) == 0.5


def test_albany_chicago_cdf():
    got = GaussianLatency(103, 25.7).cdf(154)
    assert got == pytest.approx(mp_phi(mpmath.mpf(51) / mpmath.mpf("25.7")), abs=1e-12)
    assert abs(got - 0.9762) < 5e-4


def test_norm_cdf_tails():
    assert norm_cdf(-40.0) == pytest.approx(mp_phi(-40), rel=1e-10)
    assert 1 - norm_cdf(8.0) == pytest.approx(mp_phi(-8), rel=1e-3)


def test_empirical_cdf_counts():
    dist = EmpiricalLatency([9, 5, 7])
    assert list(dist.samples) == [5, 7, 9]
    assert dist.cdf(7) == pytest.approx(2 / 3)
    assert dist.cdf_strict(7) == pytest.approx(1 / 3)
    assert dist.cdf(4.9) == 0 and dist.cdf(dist.max_support()) == 1


def test_cdf_monotone_in_unit_interval():
    for dist in (GaussianLatency(51, 28), EmpiricalLatency([5, 7, 7, 9, 30])):
        ts = np.linspace(-100, 300, 2001)
        c = dist.cdf(ts)
        assert np.all(np.diff(c) >= 0)
        assert c.min() >= 0 and c.max() <= 1


def test_max_support():
    assert GaussianLatency(51, 28).max_support() == math.inf
    assert EmpiricalLatency([12.5]).max_support() == 12.5
    catalog = load_latency_csv(data_path("wondernetwork-2021.csv"))
    assert catalog["kampala-chi"].max_support() == 671
    assert catalog["kampala-nyc"].max_support() == 640
    assert catalog["knoxville-nyc"].max_support() == 70
    assert catalog["knoxville-chi"].max_support() == 80


def test_invalid_gaussian():
    with pytest.raises(InvalidStats):
        GaussianLatency(100, 0)
    with pytest.raises(InvalidStats):
        GaussianLatency(100, -1)


def test_vanishing_noise():
    dist = GaussianLatency(100, 1e-9)
    draws = dist.sample(np.random.default_rng(1), 1000)
    assert np.max(np.abs(draws - 100)) < 1e-6


def test_untruncated_moments():
    draws = GaussianLatency(51, 28).sample(np.random.default_rng(11), 1_000_000, mode=ALLOW_NEGATIVE)
    assert abs(draws.mean() - 51) < 0.1
    assert abs(draws.std() - 28) < 0.1
    assert draws.min() < 0


def truncated_moments(mu, sigma):
    """Mean and sd of N(mu, sigma) conditioned on being positive, by quadrature."""
    pdf = lambda x: mpmath.npdf(x, mu, sigma)
    mass = mpmath.quad(pdf, [0, mpmath.inf])
    m1 = mpmath.quad(lambda x: x * pdf(x), [0, mpmath.inf]) / mass
    m2 = mpmath.quad(lambda x: x * x * pdf(x), [0, mpmath.inf]) / mass
    return float(m1), float(mpmath.sqrt(m2 - m1 * m1)), float(1 - mass)


def test_physical_sampling_truncation_is_quantified():
    mean, sd, dropped = truncated_moments(51, 28)
    assert dropped == pytest.approx(0.034, abs=5e-4)
    draws = GaussianLatency(51, 28).sample(np.random.default_rng(11), 1_000_000, mode=PHYSICAL)
    assert draws.min() > 0
    se = sd / 1000
    assert abs(draws.mean() - mean) < 4 * se
    assert abs(draws.std() - sd) < 0.1
    # the truncation moves the mean by ~2.2 ms, far outside +-0.1
    assert mean - 51 == pytest.approx(2.2, abs=0.1)


def test_empirical_uniform_resampling():
    draws = EmpiricalLatency([5, 7, 9]).sample(np.random.default_rng(3), 300_000)
    for v in (5, 7, 9):
        assert abs(np.mean(draws == v) - 1 / 3) < 0.01


def test_sampling_reproducible():
    dist = GaussianLatency(51, 28)
    a = dist.sample(np.random.default_rng(42), 1000)
    b = dist.sample(np.random.default_rng(42), 1000)
    assert np.array_equal(a, b)
    assert isinstance(dist.sample(np.random.default_rng(42)), float)


def test_pair_requires_positive_h():
    with pytest.raises(InvalidStats):
        LatencyPair(GaussianLatency(1, 1), GaussianLatency(1, 1), 0)


def write(path, text):
    path.write_text(text)
    return path


def test_catalog_gaussian_rows(tmp_path):
    cat = load_latency_csv(write(tmp_path / "c.csv",
                                 "name,kind,p1,p2\nalbany-nyc,gaussian,51,28\n"
                                 "albany-chi,gaussian,103,25.7\n"))
    assert cat["albany-nyc"] == GaussianLatency(51, 28)
    assert cat["albany-chi"] == GaussianLatency(103, 25.7)


def test_catalog_rejects_negative_sigma(tmp_path):
    with pytest.raises(InvalidStats, match=":2:"):
        load_latency_csv(write(tmp_path / "c.csv", "name,kind,p1,p2\nbad,gaussian,51,-1\n"))


def test_catalog_parse_error_has_line_number(tmp_path):
    path = write(tmp_path / "c.csv", "name,kind,p1,p2\nok,gaussian,1,1\nbad,gaussian,x,2\n")
    with pytest.raises(ParseError) as err:
        load_latency_csv(path)
    assert err.value.line == 3
    assert err.value.exit_code == 2


def test_catalog_unknown_kind(tmp_path):
    with pytest.raises(ParseError):
        load_latency_csv(write(tmp_path / "c.csv", "name,kind,p1,p2\nx,lognormal,1,1\n"))


def test_catalog_empirical_relative_path(tmp_path):
    (tmp_path / "s").mkdir()
    write(tmp_path / "s" / "a.csv", "# synthetic\nlatency_ms\n3\n1\n2\n")
    cat = load_latency_csv(write(tmp_path / "c.csv", "name,kind,p1,p2\na,empirical,s/a.csv,\n"))
    assert list(cat["a"].samples) == [1, 2, 3]


def test_empirical_sample_file_bad_value(tmp_path):
    write(tmp_path / "a.csv", "latency_ms\n3\nfast\n")
    with pytest.raises(ParseError) as err:
        load_latency_csv(write(tmp_path / "c.csv", "name,kind,p1,p2\na,empirical,a.csv,\n"))
    assert err.value.line == 3


def test_bundled_catalog_albany_values():
    cat = load_latency_csv(data_path("wondernetwork-2021.csv"))
    assert cat["albany-nyc"] == GaussianLatency(51, 28)
    assert cat["albany-chi"] == GaussianLatency(103, 25.7)
    assert cat["kampala-nyc"].mean == pytest.approx(440, abs=5)
    assert cat["kampala-chi"].mean == pytest.approx(440, abs=5)
