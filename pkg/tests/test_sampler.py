import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats
from scipy.special import gammaln

from dplsm import latent
from dplsm.data import DyadTable, ObservationWindow
from dplsm.latent import ClusterTable
from dplsm.model import (DyadIndex, LinkCoefficients, PopulationParams,
                         aggregated_loglik, dyad_loglik, evaluation_bound)
from dplsm.sampler import (ChainState, ConfigError, HyperpriorConfig,
                           SamplerConfig, escobar_west_mixture, initial_state,
                           run_chain,
                           scaling_experiment, update_alpha, update_kappa,
                           update_sites, update_xi, update_z)

HYPER = HyperpriorConfig()
PARAMS = PopulationParams(LinkCoefficients(0.0, 1.0, 1.0, -1.0, 0.5, 1.0), 0.5)


def empty_table(n, T=26):
    return DyadTable(n, ObservationWindow(0, T), {})


def batch_se(x, n_batches=20):
    b = np.array_split(np.asarray(x, dtype=float), n_batches)
    means = np.array([v.mean() for v in b])
    return means.std(ddof=1) / math.sqrt(n_batches)


# --- configuration -------------------------------------------------------------------

def test_hyperprior_defaults_from_moments():
    assert HYPER.alpha_shape / HYPER.alpha_rate == pytest.approx(4)
    assert HYPER.alpha_shape / HYPER.alpha_rate ** 2 == pytest.approx(80)
    assert HYPER.kappa_shape / HYPER.kappa_rate == pytest.approx(3)
    assert HYPER.kappa_shape / HYPER.kappa_rate ** 2 == pytest.approx(5)


@pytest.mark.parametrize("kw", [dict(n_aux=0), dict(sweeps=5, burn_in=6), dict(D=1),
                                dict(thin=0), dict(step_scale=-1), dict(singleton="x")])
def test_config_rejects(kw):
    with pytest.raises(ConfigError):
        SamplerConfig(**kw)


def test_hyper_rejects():
    with pytest.raises(ConfigError):
        HyperpriorConfig(alpha_shape=0)
    with pytest.raises(ConfigError):
        HyperpriorConfig(fixed_alpha=-1)


# --- concentration -------------------------------------------------------------------

def test_escobar_west_weight_example():
    w, lo, hi, rate = escobar_west_mixture(10, 100, 0.5, HYPER)
    assert w == pytest.approx(0.1102, abs=1e-4)
    assert (lo, hi) == pytest.approx((9.2, 10.2))
    assert rate == pytest.approx(0.05 + math.log(2))
    printed = HyperpriorConfig(alpha_branch="printed")
    assert escobar_west_mixture(10, 100, 0.5, printed)[2] == pytest.approx(1.2)


def test_alpha_draws_match_mixture_density():
    rng = np.random.default_rng(0)
    draws = np.array([update_alpha(1.0, 10, 100, HYPER, rng, eta=0.5)
                      for _ in range(5000)])
    w, rate = 9.2 / (100 * (0.05 + math.log(2)) + 9.2), 0.05 + math.log(2)
    cdf = lambda x: (w * stats.gamma.cdf(x, 10.2, scale=1 / rate)
                     + (1 - w) * stats.gamma.cdf(x, 9.2, scale=1 / rate))
    assert stats.kstest(draws, cdf).pvalue > 0.01


def test_alpha_chain_targets_exact_posterior():
    # oracle: gamma prior times alpha**k Gamma(alpha) / Gamma(alpha + n) on a grid
    k, n = 6, 50
    grid = np.linspace(1e-4, 20, 20001)
    logf = (-0.8 * np.log(grid) - 0.05 * grid + k * np.log(grid)
            + gammaln(grid) - gammaln(grid + n))
    pdf = np.exp(logf - logf.max())
    cdf_grid = integrate.cumulative_trapezoid(pdf, grid, initial=0)
    cdf_grid /= cdf_grid[-1]
    rng = np.random.default_rng(1)
    a, out = 1.0, []
    for _ in range(6000):
        a = update_alpha(a, k, n, HYPER, rng)
        out.append(a)
    thinned = np.array(out[::3])
    assert stats.kstest(thinned, lambda x: np.interp(x, grid, cdf_grid)).pvalue > 0.01


def test_alpha_needs_a_site():
    with pytest.raises(ValueError):
        update_alpha(1.0, 0, 10, HYPER, np.random.default_rng())


def test_alpha_data_free_limit():
    # strong prior dominates: draws concentrate at the prior mean
    hyper = HyperpriorConfig(alpha_shape=4e4, alpha_rate=1e4)
    rng = np.random.default_rng(2)
    draws = [update_alpha(4.0, 1, 10, hyper, rng) for _ in range(500)]
    assert np.mean(draws) == pytest.approx(4.0, rel=0.01)


# --- radius shape --------------------------------------------------------------------

def test_kappa_concentrates_near_truth():
    # oracle: grid posterior mean for each replicate's radii; the band applies
    # to the average over replicates since single replicates stray outside it
    rng = np.random.default_rng(3)
    grid = np.linspace(0.05, 15, 6000)
    prior = stats.gamma.logpdf(grid, 1.8, scale=1 / 0.6)
    means = []
    for _ in range(6):
        radii = latent.sample_radius(2.0, rng, 200)
        lp = prior + np.array([latent.radius_logpdf(radii, g).sum() for g in grid])
        w = np.exp(lp - lp.max())
        w /= w.sum()
        sd = math.sqrt(w @ grid ** 2 - (w @ grid) ** 2)
        draws = np.array([update_kappa(radii, HYPER, 1000, rng) for _ in range(300)])
        assert abs(draws.mean() - w @ grid) < 4 * sd / math.sqrt(300)
        means.append(draws.mean())
    assert 1.5 <= np.mean(means) <= 2.7


def test_kappa_without_radii_returns_prior():
    rng = np.random.default_rng(4)
    draws = [update_kappa(np.zeros(0), HYPER, 1000, rng) for _ in range(3000)]
    assert stats.kstest(draws, "gamma", args=(1.8, 0, 1 / 0.6)).pvalue > 0.01


def test_kappa_single_radius_matches_grid_sampler():
    # oracle: inverse-CDF sampling from prior times radius density on a grid
    rng = np.random.default_rng(5)
    grid = np.linspace(1e-3, 25, 20000)
    post = stats.gamma.pdf(grid, 1.8, scale=1 / 0.6) * np.array(
        [latent.radius_density(1.0, g) for g in grid])
    cdf = np.cumsum(post)
    cdf /= cdf[-1]
    ref = np.interp(rng.uniform(size=4000), cdf, grid)
    sir = np.array([update_kappa(np.array([1.0]), HYPER, 1000, rng) for _ in range(4000)])
    assert stats.ks_2samp(sir, ref).pvalue > 0.01


# --- link and variance parameters --------------------------------------------------------

def test_zero_step_never_moves():
    rng = np.random.default_rng(6)
    p, ll = PARAMS, -10.0
    for _ in range(50):
        p2, ll2, acc = update_xi(p, lambda q: -10.0, ll, HYPER, 0.0, rng)
        assert acc and p2 == p and ll2 == ll


def test_equal_posterior_always_accepted():
    # a flat likelihood with a wide prior and a tiny step: ratio ~ 1
    rng = np.random.default_rng(7)
    hyper = HyperpriorConfig(xi_var=1e12)
    acc = [update_xi(PARAMS, lambda q: 0.0, 0.0, hyper, 1e-3, rng)[2] for _ in range(200)]
    assert all(acc)


def test_flat_likelihood_recovers_xi_prior():
    cfg = SamplerConfig(variant="baseline", sweeps=12000, burn_in=1000, step_scale=3.0,
                        seed=8, flat_likelihood=True, site_moves=0)
    out = run_chain(empty_table(5), cfg, HyperpriorConfig(fixed_alpha=1.0))
    xi = np.array([d.params.to_xi() for d in out.draws])
    for c in range(xi.shape[1]):
        se = batch_se(xi[:, c])
        assert abs(xi[:, c].mean()) < 3 * se
        assert abs(xi[:, c].var() - 10) < 3 * batch_se((xi[:, c]) ** 2)


# --- latent coordinates ----------------------------------------------------------------

def state_for(sites, assignment, alpha=1.0, kappa=2.0, params=PARAMS, seed=0):
    return ChainState(ClusterTable(np.asarray(sites, float), assignment), params,
                      alpha, kappa, np.random.default_rng(seed))


def test_zero_alpha_never_opens_sites():
    st_ = state_for([[0, 0], [1, 1]], [0, 0, 1, 1, 1], alpha=0.0)
    idx = DyadIndex(empty_table(5))
    for _ in range(50):
        update_z(st_, idx, 3)
        # sites can empty out but no new location ever appears
        assert {tuple(s) for s in st_.clusters.sites} <= {(0.0, 0.0), (1.0, 1.0)}


def test_two_person_urn_is_fair():
    # after removing 0 it is a singleton: join the other site (weight 1)
    # or keep its own coordinate as the only proposal (weight alpha / m = 1)
    idx = DyadIndex(empty_table(2))
    joined = 0
    for s in range(4000):
        st_ = state_for([[0, 0], [1, 1]], [0, 1], alpha=1.0, seed=s)
        update_z(st_, idx, 1, flat=True, order=[0])
        joined += st_.clusters.k == 1
    assert abs(joined / 4000 - 0.5) < 3 * math.sqrt(0.25 / 4000)


def test_likelihood_ratio_drives_assignment():
    # person 0 has contacts with site A's members only; place site B so the
    # oracle (total log-likelihood difference) gives a ratio near 100:1
    T = 26
    table = DyadTable(5, ObservationWindow(0, T), {(0, 1): 6, (0, 2): 4})
    idx = DyadIndex(table)
    assign_a = np.array([0, 0, 0, 1, 1])
    assign_b = np.array([1, 0, 0, 1, 1])

    def ratio(xb):
        sites = np.array([[0.0, 0.0], [xb, 0.0]])
        la = aggregated_loglik(table, ClusterTable(sites, assign_a), PARAMS)[0]
        lb = aggregated_loglik(table, ClusterTable(sites, assign_b), PARAMS)[0]
        return math.exp(la - lb)

    lo, hi = 0.01, 10.0
    for _ in range(60):
        mid = (lo + hi) / 2
        lo, hi = (mid, hi) if ratio(mid) < 100 else (lo, mid)
    xb = (lo + hi) / 2
    assert ratio(xb) == pytest.approx(100, rel=1e-3)
    reps, in_a = 4000, 0
    for s in range(reps):
        st_ = state_for([[0, 0], [xb, 0]], assign_a, alpha=1e-12, seed=s)
        update_z(st_, idx, 3, order=[0])
        in_a += st_.clusters.assignment[0] == st_.clusters.assignment[1]
    # both sites hold two others once 0 is removed
    p = 100 / 101
    assert abs(in_a / reps - p) < 3 * math.sqrt(p * (1 - p) / reps)


def test_occupancy_conserved():
    rng = np.random.default_rng(9)
    table = DyadTable(30, ObservationWindow(0, 26),
                      {(i, i + 1): 2 for i in range(0, 29, 2)})
    idx = DyadIndex(table)
    st_ = state_for(rng.normal(size=(30, 2)), np.arange(30), alpha=2.0)
    for _ in range(20):
        update_z(st_, idx, 3)
        update_sites(st_, idx, 0.3)
        assert st_.clusters.occupancy.sum() == 30
        st_.clusters.check()


@pytest.mark.parametrize("singleton", ["neal", "augmented"])
def test_flat_urn_matches_crp(singleton):
    n, alpha = 12, 1.5
    cfg = SamplerConfig(variant="baseline", sweeps=6000, burn_in=200, seed=10,
                        flat_likelihood=True, singleton=singleton)
    out = run_chain(empty_table(n), cfg, HyperpriorConfig(fixed_alpha=alpha))
    ks = np.array([d.k for d in out.draws])
    pmf = latent.crp_k_distribution(alpha, n)
    assert abs(ks.mean() - np.arange(pmf.size) @ pmf) < 3 * batch_se(ks)
    for k in (1, 2, 3, 4):
        assert abs((ks == k).mean() - pmf[k]) < max(3 * batch_se(ks == k), 0.01)


def test_fixed_alpha_flat_large_population():
    cfg = SamplerConfig(variant="baseline", sweeps=120, burn_in=40, seed=11,
                        flat_likelihood=True, site_moves=0)
    out = run_chain(empty_table(1000), cfg, HyperpriorConfig(fixed_alpha=20))
    target = 20 * math.log(1020 / 20)
    assert target == pytest.approx(78.6, abs=0.05)
    assert abs(np.mean([d.k for d in out.draws]) / target - 1) < 0.15


def test_site_moves_leave_base_measure_invariant():
    # with a flat likelihood the move targets the base measure itself
    st_ = state_for([[0.5, 0.5]], [0, 0], kappa=1.5, seed=12)
    idx = DyadIndex(empty_table(2))
    radii = []
    for t in range(40000):
        update_sites(st_, idx, 0.8, flat=True)
        if t % 10 == 0:
            radii.append(np.linalg.norm(st_.clusters.sites[0]))
    radii = np.array(radii[100:])
    assert abs(radii.mean() - 1) < 3 * batch_se(radii)
    assert stats.kstest(radii[::4], lambda r: latent.radius_cdf(r, 1.5)).pvalue > 0.001


def test_detailed_balance_small_instance():
    # oracle: prior draws of (kappa, partition, sites) reweighted by the likelihood
    n, alpha, T = 4, 1.0, 26
    table = DyadTable(n, ObservationWindow(0, T), {(0, 1): 5, (2, 3): 3, (0, 2): 1})
    rng = np.random.default_rng(13)
    S = 100_000
    kap = rng.gamma(1.8, 1 / 0.6, S)
    labels = np.array([latent.crp_partition(alpha, n, rng) for _ in range(S)])
    coords = np.empty((S, n, 2))
    for s in range(S):
        sites = latent.sample_h0(kap[s], 2, rng, size=labels[s].max() + 1)
        coords[s] = sites[labels[s]]
    ll = np.zeros(S)
    for i in range(n):
        for j in range(i + 1, n):
            d = np.linalg.norm(coords[:, i] - coords[:, j], axis=1)
            ll += dyad_loglik(np.full(S, table.nonempty.get((i, j), 0)), d, T, PARAMS)
    w = np.exp(ll - ll.max())
    w /= w.sum()
    k = labels.max(axis=1) + 1
    ref = np.array([w[k == kk].sum() for kk in range(1, 5)])

    cfg = SamplerConfig(sweeps=15000, burn_in=500, step_scale=0.0, adapt=False,
                        seed=14, site_step=0.5)
    st0 = initial_state(n, cfg, HYPER, np.random.default_rng(15))
    st0.params = PARAMS
    out = run_chain(table, cfg, HyperpriorConfig(fixed_alpha=alpha), state=st0)
    ks = np.array([d.k for d in out.draws])
    for kk in range(1, 5):
        hit = (ks == kk).astype(float)
        assert abs(hit.mean() - ref[kk - 1]) < max(4 * batch_se(hit), 0.01), kk


# --- chain driver -------------------------------------------------------------------

def two_cluster_table(seed=0):
    from dplsm.synth import cluster_coordinates, simulate_records
    from dplsm.data import build_dyad_table
    coords, labels = cluster_coordinates([20, 20], [[-3, 0], [3, 0]])
    params = PopulationParams(LinkCoefficients(1.0, 2.0, 1.0, -1.0, 0.3, 1.0), 0.1)
    recs, _ = simulate_records(coords, params, 26, rng=seed)
    return build_dyad_table(recs, 40, ObservationWindow(0, 26)), labels


def test_no_draws_when_all_burn_in():
    table, _ = two_cluster_table()
    out = run_chain(table, SamplerConfig(sweeps=5, burn_in=5, seed=0))
    assert out.draws == [] and out.summary()["mean_k"] is None


def test_chain_is_reproducible():
    table, _ = two_cluster_table()
    cfg = SamplerConfig(sweeps=15, burn_in=5, seed=3)
    a, b = run_chain(table, cfg), run_chain(table, cfg)
    np.testing.assert_array_equal(a.loglik_trace, b.loglik_trace)
    np.testing.assert_array_equal(a.xi_trace, b.xi_trace)
    np.testing.assert_array_equal(a.draws[-1].assignment, b.draws[-1].assignment)


def test_eval_counts_within_bound():
    table, _ = two_cluster_table()
    out = run_chain(table, SamplerConfig(sweeps=20, burn_in=0, seed=1))
    for d in out.draws:
        assert d.eval_count <= evaluation_bound(d.k, table.n_nonempty)
        assert d.occupancy.sum() == 40 and d.k == d.occupancy.size


def test_zero_step_chain_keeps_xi():
    table, _ = two_cluster_table()
    out = run_chain(table, SamplerConfig(sweeps=10, burn_in=2, seed=2, step_scale=0.0,
                                         adapt=False))
    assert out.acceptance_rate == 1.0
    assert np.all(out.xi_trace == out.xi_trace[0])


def test_two_far_clusters_recovered():
    table, labels = two_cluster_table(4)
    out = run_chain(table, SamplerConfig(sweeps=400, burn_in=200, seed=5))
    ks = np.array([d.k for d in out.draws])
    assert np.bincount(ks).argmax() <= 10
    within = labels[:, None] == labels[None, :]
    off = ~np.eye(40, dtype=bool)
    from dplsm.model import dyad_params
    from dplsm.latent import pairwise_distances
    for d in out.draws:
        p = dyad_params(pairwise_distances(d.coordinates()), d.params).p
        assert p[within & off].mean() > p[~within].mean()


def test_state_mismatch_rejected():
    table, _ = two_cluster_table()
    cfg = SamplerConfig(sweeps=2, burn_in=0)
    st_ = state_for([[0, 0]], [0, 0, 0])
    with pytest.raises(ConfigError):
        run_chain(table, cfg, state=st_)


def test_scaling_experiment_rows():
    table, _ = two_cluster_table()
    rows = scaling_experiment(table, [0.5, 20], [10, 40], sweeps=6, burn_in=2, seed=0)
    assert [(r["n"], r["alpha"]) for r in rows] == [(10, 0.5), (10, 20), (40, 0.5), (40, 20)]
    for r in rows:
        assert r["mean_evals"] <= r["eval_bound"] + 1e-9
    with pytest.raises(ValueError):
        scaling_experiment(table, [1], [41], sweeps=2, burn_in=0)


@settings(max_examples=15, deadline=None)
@given(st.integers(2, 15), st.floats(0.1, 10), st.integers(0, 2**31))
def test_update_z_keeps_valid_partition(n, alpha, seed):
    rng = np.random.default_rng(seed)
    edges = {(i, j): int(rng.integers(1, 5)) for i in range(n) for j in range(i + 1, n)
             if rng.uniform() < 0.3}
    idx = DyadIndex(DyadTable(n, ObservationWindow(0, 26), edges))
    st_ = state_for(rng.normal(size=(n, 2)), np.arange(n), alpha=alpha, seed=seed)
    update_z(st_, idx, 2)
    cl = st_.clusters
    cl.check()
    assert cl.occupancy.sum() == n and np.all(cl.occupancy >= 1)
    assert len({tuple(s) for s in cl.sites}) == cl.k
