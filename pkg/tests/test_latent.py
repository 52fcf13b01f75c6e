import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats
from scipy.special import digamma

from dplsm import latent
from dplsm.latent import ClusterTable


# --- base measure ----------------------------------------------------------------

def test_angles_need_two_dimensions():
    with pytest.raises(ValueError):
        latent.sample_angles(1)


def test_angle_means():
    rng = np.random.default_rng(0)
    a2 = latent.sample_angles(2, rng, 100_000)
    assert a2.shape == (100_000, 1)
    assert abs(a2.mean() - math.pi) < 0.02
    a3 = latent.sample_angles(3, rng, 100_000)
    assert abs(a3[:, 1].mean() - math.pi / 2) < 0.02
    assert a3[:, 1].min() > 0 and a3[:, 1].max() < math.pi


def test_sine_angle_matches_its_cdf():
    # theta with density sin(theta)/2 on (0, pi) has CDF (1 - cos theta) / 2
    th = latent.sample_angles(3, np.random.default_rng(1), 20_000)[:, 1]
    assert stats.kstest(th, lambda t: (1 - np.cos(t)) / 2).pvalue > 0.01


@pytest.mark.parametrize("D", [2, 3, 4])
def test_directions_match_normalized_gaussians(D):
    rng = np.random.default_rng(D)
    u = latent.spherical_to_cartesian(np.ones(100_000),
                                      latent.sample_angles(D, rng, 100_000))
    g = rng.normal(size=(100_000, D))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    np.testing.assert_allclose(u.mean(axis=0), g.mean(axis=0), atol=0.01)
    np.testing.assert_allclose(u.var(axis=0), g.var(axis=0), atol=0.01)
    np.testing.assert_allclose(u.var(axis=0), 1 / D, atol=0.01)


@pytest.mark.parametrize("kappa", [1.0, 2.0, 5.0])
def test_radius_mean_is_one(kappa):
    r = latent.sample_radius(kappa, np.random.default_rng(2), 100_000)
    assert abs(r.mean() - 1) < 0.01


def test_radius_special_cases():
    rng = np.random.default_rng(3)
    assert stats.kstest(latent.sample_radius(1.0, rng, 20_000), "expon").pvalue > 0.01
    # half-normal with mean one has scale sqrt(pi / 2)
    r2 = latent.sample_radius(2.0, rng, 20_000)
    assert stats.kstest(r2, "halfnorm", args=(0, math.sqrt(math.pi / 2))).pvalue > 0.01


def test_radius_rejects_bad_shape():
    with pytest.raises(ValueError):
        latent.sample_radius(0.0)
    with pytest.raises(ValueError):
        latent.radius_density(-1.0, 1.0)


def test_radius_density_values():
    assert latent.radius_density(0.0, 1.0) == pytest.approx(1.0)
    assert latent.radius_density(2.0, 1.0) == pytest.approx(0.13534, abs=1e-5)


@pytest.mark.parametrize("kappa", [0.5, 1.0, 2.0, 5.0])
def test_radius_density_normalized_with_unit_mean(kappa):
    f = lambda r: latent.radius_density(r, kappa)
    assert integrate.quad(f, 0, np.inf)[0] == pytest.approx(1, abs=1e-6)
    assert integrate.quad(lambda r: r * f(r), 0, np.inf)[0] == pytest.approx(1, abs=1e-6)


@pytest.mark.parametrize("kappa", [1.0, 2.0, 5.0])
def test_h0_radius_ks_against_density(kappa):
    # numeric CDF from quadrature of the density, independent of radius_cdf
    z = latent.sample_h0(kappa, 2, np.random.default_rng(4), 5_000)
    rho = np.linalg.norm(z, axis=1)
    cdf = np.vectorize(lambda x: integrate.quad(
        lambda r: latent.radius_density(r, kappa), 0, x)[0])
    assert stats.kstest(rho, cdf).pvalue > 0.01
    np.testing.assert_allclose(cdf(rho[:50]), latent.radius_cdf(rho[:50], kappa),
                               atol=1e-8)


def test_spherical_examples():
    np.testing.assert_allclose(latent.spherical_to_cartesian(1.0, [0.0]), [1, 0], atol=1e-15)
    np.testing.assert_allclose(latent.spherical_to_cartesian(2.0, [math.pi / 2]),
                               [0, 2], atol=1e-15)
    np.testing.assert_allclose(
        latent.spherical_to_cartesian(1.0, [math.pi / 2, math.pi / 2]), [0, 0, 1],
        atol=1e-15)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.01, 100), st.integers(2, 6), st.integers(0, 2**31))
def test_cartesian_norm_equals_radius(rho, D, seed):
    th = latent.sample_angles(D, np.random.default_rng(seed))
    z = latent.spherical_to_cartesian(rho, th)
    assert np.linalg.norm(z) == pytest.approx(rho, rel=1e-12)


def test_h0_moments():
    z = latent.sample_h0(2.0, 2, np.random.default_rng(5), 100_000)
    assert abs(np.linalg.norm(z, axis=1).mean() - 1) < 0.01
    assert np.all(np.abs(z.mean(axis=0)) < 0.01)


def test_h0_kappa2_matches_normal_direction_times_halfnormal_radius():
    # oracle: direction of a bivariate normal draw times an independent
    # half-normal radius scaled to mean one
    rng = np.random.default_rng(6)
    z = latent.sample_h0(2.0, 2, rng, 20_000)
    g = rng.normal(size=(20_000, 2))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    g *= np.abs(rng.normal(size=(20_000, 1))) * math.sqrt(math.pi / 2)
    for c in range(2):
        assert stats.ks_2samp(z[:, c], g[:, c]).pvalue > 0.01
    assert stats.ks_2samp(np.linalg.norm(z, axis=1),
                          np.linalg.norm(g, axis=1)).pvalue > 0.01


def test_h0_logpdf_integrates_to_one():
    # 2-D polar integration of the Cartesian density
    f = lambda r: 2 * math.pi * r * math.exp(
        latent.h0_logpdf(np.array([r, 0.0]), 1.7))
    assert integrate.quad(f, 0, np.inf)[0] == pytest.approx(1, abs=1e-6)


def test_h0_logpdf_3d_matches_monte_carlo():
    # probability of a small box: sampled frequency vs integrated density
    rng = np.random.default_rng(7)
    z = latent.sample_h0(2.0, 3, rng, 400_000)
    hits = np.all(np.abs(z - 0.4) < 0.2, axis=1)
    box = hits.mean()
    se = math.sqrt(box * (1 - box) / hits.size)
    mid = 0.2 + 0.4 * (np.arange(40) + 0.5) / 40
    g = np.stack(np.meshgrid(mid, mid, mid), -1).reshape(-1, 3)
    est = np.exp(latent.h0_logpdf(g, 2.0)).mean() * 0.4 ** 3
    assert abs(est - box) < 4 * se


# --- distances -------------------------------------------------------------------

def test_distances():
    assert latent.latent_distance([0, 0], [3, 4]) == 5
    assert latent.latent_distance([1, 2], [1, 2]) == 0
    with pytest.raises(ValueError):
        latent.latent_distance([0, 0], [0, 0, 0])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=4, max_size=4))
def test_distance_symmetric(v):
    a, b = v[:2], v[2:]
    assert latent.latent_distance(a, b) == latent.latent_distance(b, a)


def test_pairwise_distances():
    a = np.array([[0, 0], [3, 4]])
    np.testing.assert_allclose(latent.pairwise_distances(a), [[0, 5], [5, 0]])


# --- Polya urn ---------------------------------------------------------------------

def test_crp_edge_cases():
    rng = np.random.default_rng(8)
    assert np.all(latent.crp_simulate(2.0, 1, rng, 20) == 1)
    assert np.all(latent.crp_simulate(1e-9, 100, rng, 50) == 1)
    assert latent.crp_partition(1e-9, 100, rng).max() == 0


def test_expected_mass_points_closed_form():
    assert latent.expected_mass_points(0.5, 4781) == pytest.approx(4.583, abs=1e-3)
    assert latent.expected_mass_points(20, 4781) == pytest.approx(109.62, abs=1e-2)
    assert latent.expected_mass_points(300, 4781) == pytest.approx(848.9, abs=0.1)


def test_exact_expectation_is_digamma_difference():
    for a, n in [(0.5, 1000), (20, 4781), (300, 100)]:
        direct = sum(a / (a + i) for i in range(n))
        assert latent.expected_mass_points_exact(a, n) == pytest.approx(direct, rel=1e-10)
        assert direct == pytest.approx(a * (digamma(a + n) - digamma(a)), rel=1e-10)


def test_k_distribution_matches_sequential_urn():
    # independent oracle: tables opened by the sequential urn
    rng = np.random.default_rng(9)
    ks = np.array([latent.crp_partition(3.0, 40, rng).max() + 1 for _ in range(4000)])
    pmf = latent.crp_k_distribution(3.0, 40)
    assert pmf.sum() == pytest.approx(1)
    expect = np.arange(pmf.size) @ pmf
    assert abs(ks.mean() - expect) < 3 * ks.std() / math.sqrt(ks.size)


def test_bernoulli_counts_match_sequential_urn():
    rng = np.random.default_rng(10)
    fast = latent.crp_simulate(5.0, 200, rng, 3000)
    slow = np.array([latent.crp_partition(5.0, 200, rng).max() + 1 for _ in range(1500)])
    assert stats.ks_2samp(fast, slow).pvalue > 0.01


@pytest.mark.parametrize("alpha, n", [(20, 1000), (300, 1000), (20, 100), (300, 4781)])
def test_crp_mean_near_asymptotic_formula(alpha, n):
    k = latent.crp_simulate(alpha, n, np.random.default_rng(11), 500)
    assert abs(k.mean() / latent.expected_mass_points(alpha, n) - 1) < 0.05


# --- cluster table -----------------------------------------------------------------

def test_cluster_table_operations():
    cl = ClusterTable(np.array([[0.0, 0], [1, 1]]), [0, 0, 1])
    assert cl.k == 2
    assert cl.remove(2) is not None and cl.k == 1          # singleton removal
    cl.assign_new(2, [5.0, 5.0])
    assert cl.k == 2 and cl.occupancy[-1] == 1
    assert cl.remove(0) is None and cl.k == 2               # occupancy 2 -> 1
    assert cl.occupancy[0] == 1
    with pytest.raises(ValueError):
        cl.assign(0, 7)
    cl.assign(0, 1)
    cl.check()


def test_cluster_table_rejects_bad_input():
    with pytest.raises(ValueError):
        ClusterTable(np.zeros((2, 2)), [0, 0])              # empty site
    with pytest.raises(ValueError):
        ClusterTable(np.zeros((1, 2)), [0, 1])


def test_from_coordinates_groups_identical_rows():
    cl = ClusterTable.from_coordinates([[0, 0], [1, 0], [0, 0]])
    assert cl.k == 2 and sorted(cl.occupancy) == [1, 2]
    np.testing.assert_array_equal(cl.coordinates(), [[0, 0], [1, 0], [0, 0]])


def test_move_relocates_members():
    cl = ClusterTable(np.array([[0.0, 0]]), [0, 0])
    cl.move(0, [2.0, 3.0])
    np.testing.assert_array_equal(cl.coordinates(), [[2, 3], [2, 3]])


@settings(max_examples=80, deadline=None)
@given(st.integers(2, 12), st.lists(st.tuples(st.integers(0, 11), st.integers(0, 20)),
                                    max_size=40))
def test_occupancy_always_sums_to_n(n, ops):
    rng = np.random.default_rng(0)
    cl = ClusterTable(rng.normal(size=(n, 2)), np.arange(n))
    for who, where in ops:
        i = who % n
        cl.remove(i)
        if where < cl.k and cl.k > 0:
            cl.assign(i, where)
        else:
            cl.assign_new(i, rng.normal(size=2))
        assert cl.occupancy.sum() == n
        cl.check()
