"""Gibbs sampler for the Dirichlet-process latent space model.

One sweep updates every latent coordinate (auxiliary-proposal Polya urn
moves), then the concentration, the radius shape, and the link and variance
parameters.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Optional

import numba
import numpy as np
from scipy.special import gammaln

from . import latent
from .latent import ClusterTable
from .model import (DyadIndex, PopulationParams, Variant, XI_NAMES,
                    aggregated_loglik, dyad_loglik)

log = logging.getLogger(__name__)


# acceptance targeted by the adaptive site-move step during burn-in
SITE_TARGET = 0.3


class SamplerError(RuntimeError):
    """Numerical failure inside a sampler step."""


class ConfigError(ValueError):
    pass


@dataclass
class HyperpriorConfig:
    """Hyperpriors; gamma priors use shape/rate.

    The concentration prior has mean 4 and variance 80, the radius-shape
    prior mean 3 and variance 5, and the transformed link/variance vector a
    normal prior with mean ``xi_mean`` and covariance ``xi_var * I``.
    """

    alpha_shape: float = 0.2
    alpha_rate: float = 0.05
    kappa_shape: float = 1.8
    kappa_rate: float = 0.6
    xi_mean: float = 0.0
    xi_var: float = 10.0
    fixed_alpha: Optional[float] = None
    # "canonical": second gamma branch has shape alpha_shape + k;
    # "printed": shape alpha_shape + 1
    alpha_branch: str = "canonical"

    def __post_init__(self):
        for name in ("alpha_shape", "alpha_rate", "kappa_shape",
                     "kappa_rate", "xi_var"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.fixed_alpha is not None and not self.fixed_alpha > 0:
            raise ConfigError("fixed_alpha must be positive")
        if self.alpha_branch not in ("canonical", "printed"):
            raise ConfigError(f"unknown alpha_branch {self.alpha_branch!r}")


@dataclass
class SamplerConfig:
    variant: Variant = Variant.FULL
    D: int = 2
    n_aux: int = 3
    sweeps: int = 1000
    burn_in: int = 500
    thin: int = 1
    step_scale: float = 0.3
    adapt: bool = True
    target_accept: float = 0.23
    xi_steps: int = 1
    sir_pool: int = 1000
    seed: Optional[int] = None
    # "neal": a singleton's own coordinate fills one of the n_aux proposal
    # slots; "augmented": it is kept in addition to n_aux fresh draws
    singleton: str = "neal"
    # ignore the data entirely (prior simulation)
    flat_likelihood: bool = False
    kappa_init: float = 2.0
    # Metropolis moves of site locations per sweep (0 disables)
    site_moves: int = 1
    site_step: float = 0.1

    def __post_init__(self):
        self.variant = Variant(self.variant)
        if self.D < 2:
            raise ConfigError("D must be at least 2")
        if self.n_aux < 1:
            raise ConfigError("n_aux must be at least 1")
        if not self.sweeps >= self.burn_in >= 0:
            raise ConfigError("need sweeps >= burn_in >= 0")
        if self.thin < 1 or self.xi_steps < 1 or self.sir_pool < 1:
            raise ConfigError("thin, xi_steps and sir_pool must be >= 1")
        if self.step_scale < 0 or self.site_step < 0:
            raise ConfigError("step scales must be nonnegative")
        if self.site_moves < 0:
            raise ConfigError("site_moves must be nonnegative")
        if self.singleton not in ("neal", "augmented"):
            raise ConfigError(f"unknown singleton policy {self.singleton!r}")


@dataclass
class ChainState:
    clusters: ClusterTable
    params: PopulationParams
    alpha: float
    kappa: float
    rng: np.random.Generator
    sweep: int = 0


@dataclass
class PosteriorDraw:
    sweep: int
    alpha: float
    kappa: float
    params: PopulationParams
    sites: np.ndarray
    occupancy: np.ndarray
    assignment: np.ndarray
    loglik: float
    eval_count: int

    @property
    def k(self) -> int:
        return int(self.sites.shape[0])

    def coordinates(self):
        return self.sites[self.assignment]

    def clusters(self) -> ClusterTable:
        return ClusterTable(self.sites, self.assignment)


@dataclass
class ChainOutput:
    draws: list
    config: SamplerConfig
    hyper: HyperpriorConfig
    n_individuals: int
    T: float
    acceptance_rate: float = float("nan")
    step_scale: float = float("nan")
    site_acceptance_rate: float = float("nan")
    site_step: float = float("nan")
    k_trace: np.ndarray = field(default_factory=lambda: np.zeros(0, int))
    alpha_trace: np.ndarray = field(default_factory=lambda: np.zeros(0))
    kappa_trace: np.ndarray = field(default_factory=lambda: np.zeros(0))
    xi_trace: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    loglik_trace: np.ndarray = field(default_factory=lambda: np.zeros(0))
    eval_trace: np.ndarray = field(default_factory=lambda: np.zeros(0, int))
    wall_time: float = 0.0

    @property
    def variant(self) -> Variant:
        return self.config.variant

    def summary(self) -> dict:
        ks = np.array([d.k for d in self.draws])
        ev = np.array([d.eval_count for d in self.draws])
        return {
            "variant": self.variant.value,
            "n_individuals": self.n_individuals,
            "n_draws": len(self.draws),
            "acceptance_rate": float(self.acceptance_rate),
            "step_scale": float(self.step_scale),
            "site_acceptance_rate": float(self.site_acceptance_rate),
            "site_step": float(self.site_step),
            "mean_k": float(ks.mean()) if ks.size else None,
            "mean_eval_count": float(ev.mean()) if ev.size else None,
            "wall_time": self.wall_time,
            "config": {**asdict(self.config), "variant": self.variant.value},
            "hyper": asdict(self.hyper),
        }


# --- concentration ----------------------------------------------------------------

def escobar_west_mixture(k, n, eta, hyper: HyperpriorConfig):
    """Two-gamma mixture for the concentration given the auxiliary ``eta``.

    Returns ``(w, shape_lo, shape_hi, rate)``: with probability ``w`` the
    draw is gamma(``shape_hi``, ``rate``), otherwise gamma(``shape_lo``, ``rate``).
    """
    rate = hyper.alpha_rate - np.log(eta)
    odds_num = hyper.alpha_shape + k - 1
    w = odds_num / (n * rate + odds_num)
    hi = hyper.alpha_shape + (k if hyper.alpha_branch == "canonical" else 1)
    return w, hyper.alpha_shape + k - 1, hi, rate


def update_alpha(alpha, k, n, hyper: HyperpriorConfig, rng, eta=None):
    """One auxiliary-variable update of the concentration."""
    if k < 1:
        raise ValueError("need at least one occupied site")
    if eta is None:
        eta = rng.beta(alpha + 1.0, n)
    w, lo, hi, rate = escobar_west_mixture(k, n, eta, hyper)
    shape = hi if rng.uniform() < w else lo
    if shape <= 0:
        # k = 1 with the printed form can leave a zero shape in the lower branch
        shape = hi
    return float(rng.gamma(shape, 1.0 / rate))


def alpha_log_posterior(alpha, k, n, hyper):
    """Unnormalized log density of the concentration given ``k`` sites."""
    alpha = np.asarray(alpha, dtype=float)
    return ((hyper.alpha_shape - 1) * np.log(alpha) - hyper.alpha_rate * alpha
            + k * np.log(alpha) + gammaln(alpha) - gammaln(alpha + n))


# --- radius shape -------------------------------------------------------------------

def kappa_log_likelihood(kappa, radii):
    """Sum of radius log densities for each value in ``kappa``."""
    kappa = np.atleast_1d(np.asarray(kappa, dtype=float))
    radii = np.asarray(radii, dtype=float)
    lg1 = gammaln(1.0 / kappa)
    lg2 = gammaln(2.0 / kappa)
    k = radii.size
    if k == 0:
        return np.zeros_like(kappa)
    with np.errstate(divide="ignore", over="ignore"):
        log_r = np.log(radii)
        tail = np.sum(np.exp(kappa[:, None] * (log_r[None, :] + (lg2 - lg1)[:, None])),
                      axis=1)
    return k * (np.log(kappa) + lg2 - 2 * lg1) - tail


def update_kappa(radii, hyper: HyperpriorConfig, pool_size, rng):
    """Sampling-importance-resampling draw of the radius shape.

    Candidates come from the gamma prior and are weighted by the radius
    likelihood of the current sites.
    """
    pool = rng.gamma(hyper.kappa_shape, 1.0 / hyper.kappa_rate, pool_size)
    pool = pool[pool > 0]
    if pool.size == 0:
        raise SamplerError("SIR pool underflowed to zero")
    logw = kappa_log_likelihood(pool, radii)
    finite = np.isfinite(logw)
    if not finite.any():
        raise SamplerError(
            f"all SIR weights vanished (k={np.size(radii)}, "
            f"max radius={np.max(radii) if np.size(radii) else None}, "
            f"pool range=({pool.min():.3g}, {pool.max():.3g}))")
    logw = np.where(finite, logw, -np.inf)
    w = np.exp(logw - logw.max())
    w /= w.sum()
    return float(pool[rng.choice(pool.size, p=w)])


# --- link and variance parameters ----------------------------------------------------

def xi_log_prior(xi, hyper):
    xi = np.asarray(xi, dtype=float)
    return -0.5 * np.sum((xi - hyper.xi_mean) ** 2) / hyper.xi_var


def update_xi(params, loglik_fn, current_loglik, hyper, step, rng):
    """Random-walk Metropolis step on the transformed parameter vector.

    The prior is normal on the transformed scale, so the proposal is
    symmetric there and no Jacobian enters the ratio.

    Returns ``(params, loglik, accepted)``.
    """
    xi = params.to_xi()
    prop = xi + step * rng.standard_normal(xi.size)
    new = PopulationParams.from_xi(prop, params.variant)
    new_ll = loglik_fn(new)
    log_ratio = (new_ll + xi_log_prior(prop, hyper)
                 - current_loglik - xi_log_prior(xi, hyper))
    if np.isfinite(log_ratio) and np.log(rng.uniform()) < log_ratio:
        return new, new_ll, True
    return params, current_loglik, False


# --- latent coordinates -------------------------------------------------------------

@numba.njit(cache=True)
def _log_logistic(x):
    if x >= 0:
        return -math.log1p(math.exp(-x))
    return x - math.log1p(math.exp(x))


@numba.njit(cache=True)
def _candidate_kernel(cands, targets, y, mult, T, b1p, b2p, b3p,
                      b1mu, b2mu, b3mu, logv):
    c, D = cands.shape
    m = targets.shape[0]
    out = np.zeros(c)
    logT = math.log(T)
    for a in range(c):
        tot = 0.0
        for b in range(m):
            dd = 0.0
            for t in range(D):
                diff = cands[a, t] - targets[b, t]
                dd += diff * diff
            d = math.sqrt(dd)
            x = b1p
            logmu = b1mu
            if d > 0.0:
                if b2p > 0.0:
                    x -= b2p * d ** b3p
                if b2mu > 0.0:
                    logmu -= b2mu * d ** b3mu
            logp = _log_logistic(x)
            log1mp = logp - x
            r = math.exp(2.0 * logmu - logv)
            rate = math.exp(logmu - logv)
            # log1p(T / rate), finite even when mu underflows
            x2 = logT + logv - logmu
            if x2 > 0.0:
                l1 = x2 + math.log1p(math.exp(-x2))
            else:
                l1 = math.log1p(math.exp(x2))
            lz = -r * l1
            if y[b] == 0.0:
                u = logp + lz
                hi = max(u, log1mp)
                v = hi + math.log(math.exp(u - hi) + math.exp(log1mp - hi))
            elif r == 0.0:
                v = -math.inf
            else:
                v = (logp + math.lgamma(r + y[b]) - math.lgamma(r) + lz
                     - y[b] * math.log(rate + T))
            tot += mult[b] * v
        out[a] = tot
    return out


def _candidate_loglik(cands, clusters, i, index, params, T):
    """Log-likelihood of all dyads touching ``i`` for each candidate coordinate.

    Dyads from ``i`` to empty partners at site ``s`` share one value, so each
    candidate costs one evaluation per site plus one per nonempty partner.
    """
    sites = clusters.sites
    nbrs, ys = index.neighbors(i)
    nb_site = clusters.assignment[nbrs]
    empties = clusters.occupancy - np.bincount(nb_site, minlength=clusters.k)
    use = np.nonzero(empties)[0]
    # one column per site with empty partners, then one per nonempty partner
    targets = np.concatenate([sites[use], sites[nb_site]])
    y = np.concatenate([np.zeros(use.size), ys])
    mult = np.concatenate([empties[use].astype(float), np.ones(ys.size)])
    return _candidate_kernel(np.ascontiguousarray(cands), targets, y, mult,
                             float(T), *_kernel_params(params))


def _kernel_params(params):
    c = params.coefficients
    if params.variant is Variant.FULL:
        b2mu, b3mu = c.beta2mu, c.beta3mu
    else:
        b2mu, b3mu = 0.0, 1.0
    if params.variant is Variant.BASELINE:
        b2p, b3p = 0.0, 1.0
    else:
        b2p, b3p = c.beta2p, c.beta3p
    return (c.beta1p, b2p, b3p, c.beta1mu, b2mu, b3mu, float(np.log(params.v)))


def update_z(state: ChainState, index: DyadIndex, n_aux: int, *,
             flat=False, singleton="neal", order=None):
    """Reassign every individual in turn with auxiliary base-measure proposals.

    Existing sites are weighted by their occupancy excluding ``i`` and each
    proposal by ``alpha / n_aux``, both times the likelihood of ``i``'s
    dyads. A singleton's own coordinate is reused as a proposal.
    """
    cl = state.clusters
    rng = state.rng
    n = cl.n
    alpha = state.alpha
    flat = flat or state.params.variant is Variant.BASELINE
    fresh = latent.sample_h0(state.kappa, cl.D, rng, size=n * (n_aux + 1))
    pos = 0
    log_new = np.log(alpha / n_aux) if alpha > 0 else -np.inf
    for i in (range(n) if order is None else order):
        own = cl.remove(i)
        if own is None:
            m_fresh = n_aux
        elif singleton == "neal":
            m_fresh = n_aux - 1
        else:
            m_fresh = n_aux
        aux = fresh[pos:pos + m_fresh]
        pos += m_fresh
        if own is not None:
            aux = np.vstack([own[None, :], aux])
        k = cl.k
        logw = np.empty(k + aux.shape[0])
        logw[:k] = np.log(cl.occupancy)
        logw[k:] = log_new
        if not flat:
            cands = np.vstack([cl.sites, aux])
            logw += _candidate_loglik(cands, cl, i, index, state.params, index.T)
        top = logw.max()
        if not np.isfinite(top):
            raise SamplerError(f"no admissible site for individual {i}")
        w = np.exp(logw - top)
        j = int(np.searchsorted(np.cumsum(w), rng.uniform() * w.sum(), side="right"))
        j = min(j, w.size - 1)
        if j < k:
            cl.assign(i, j)
        else:
            cl.assign_new(i, aux[j - k])
    return cl


def update_sites(state: ChainState, index: DyadIndex, step, *, flat=False):
    """Random-walk Metropolis move of each site's location given its members.

    The target is the base-measure density times the likelihood of every dyad
    between the site's members and everyone else (dyads inside the site keep
    distance zero). Returns the number of accepted moves.
    """
    cl = state.clusters
    rng = state.rng
    k, D = cl.k, cl.D
    if step <= 0 or k == 0:
        return 0
    flat = flat or state.params.variant is Variant.BASELINE
    kp = _kernel_params(state.params)
    order = np.argsort(cl.assignment, kind="stable")
    bounds = np.r_[0, np.cumsum(cl.occupancy)]
    props = cl.sites + step * rng.normal(size=(k, D))
    log_u = np.log(rng.uniform(size=k))
    lp_old = latent.h0_logpdf(cl.sites, state.kappa)
    lp_new = latent.h0_logpdf(props, state.kappa)
    accepted = 0
    for c in range(k):
        delta = lp_new[c] - lp_old[c]
        if not flat:
            members = order[bounds[c]:bounds[c + 1]]
            nb, ys = [], []
            for i in members:
                a, y = index.neighbors(i)
                nb.append(a)
                ys.append(y)
            nb = np.concatenate(nb)
            ys = np.concatenate(ys).astype(float)
            nb_site = cl.assignment[nb]
            out = nb_site != c
            nb_site, ys = nb_site[out], ys[out]
            empties = (members.size * cl.occupancy
                       - np.bincount(nb_site, minlength=k))
            empties[c] = 0
            use = np.nonzero(empties)[0]
            sites = cl.sites
            targets = np.concatenate([sites[use], sites[nb_site]])
            y = np.concatenate([np.zeros(use.size), ys])
            mult = np.concatenate([empties[use].astype(float), np.ones(ys.size)])
            cands = np.vstack([sites[c], props[c]])
            ll = _candidate_kernel(cands, targets, y, mult, float(index.T), *kp)
            delta += ll[1] - ll[0]
        if log_u[c] < delta:
            cl.move(c, props[c])
            accepted += 1
    return accepted


# --- chain driver ---------------------------------------------------------------------

def initial_state(n, config: SamplerConfig, hyper: HyperpriorConfig, rng):
    """Everyone at their own base-measure draw; parameters at prior means."""
    coords = latent.sample_h0(config.kappa_init, config.D, rng, size=n)
    clusters = ClusterTable(coords, np.arange(n))
    xi = np.full(len(XI_NAMES[config.variant]), hyper.xi_mean)
    params = PopulationParams.from_xi(xi, config.variant)
    alpha = hyper.fixed_alpha or hyper.alpha_shape / hyper.alpha_rate
    return ChainState(clusters, params, float(alpha), config.kappa_init, rng)


def run_chain(table, config: SamplerConfig, hyper: HyperpriorConfig = None,
              state: ChainState = None, progress=None) -> ChainOutput:
    """Run the full sampler and collect thinned post-burn-in draws."""
    hyper = hyper or HyperpriorConfig()
    index = DyadIndex(table)
    n = index.n
    rng = np.random.default_rng(config.seed)
    if state is None:
        state = initial_state(n, config, hyper, rng)
    elif state.clusters.n != n:
        raise ConfigError("initial state does not match the table")
    if state.params.variant is not config.variant:
        raise ConfigError("initial state variant does not match config")
    if hyper.fixed_alpha is not None:
        state.alpha = float(hyper.fixed_alpha)

    if config.flat_likelihood:
        def loglik(p):
            return 0.0
    else:
        def loglik(p):
            return aggregated_loglik(table, state.clusters, p, index)[0]

    step = config.step_scale
    log_step = np.log(step) if step > 0 else None
    n_acc = n_prop = 0
    site_step = config.site_step
    log_site = np.log(site_step) if site_step > 0 else None
    site_acc = site_prop = 0
    t0 = time.perf_counter()
    draws = []
    k_tr, a_tr, kap_tr, xi_tr, ll_tr, ev_tr = [], [], [], [], [], []
    for s in range(1, config.sweeps + 1):
        state.sweep = s
        update_z(state, index, config.n_aux, flat=config.flat_likelihood,
                 singleton=config.singleton)
        burning = s <= config.burn_in
        for _ in range(config.site_moves):
            kk = state.clusters.k
            acc_s = update_sites(state, index, site_step,
                                 flat=config.flat_likelihood)
            if burning and config.adapt and site_step > 0:
                log_site += (acc_s / kk - SITE_TARGET) / np.sqrt(s)
                site_step = float(np.exp(log_site))
            elif not burning:
                site_acc += acc_s
                site_prop += kk
        k = state.clusters.k
        if hyper.fixed_alpha is None:
            state.alpha = update_alpha(state.alpha, k, n, hyper, rng)
        radii = np.sqrt(np.sum(state.clusters.sites ** 2, axis=1))
        state.kappa = update_kappa(radii, hyper, config.sir_pool, rng)
        cur = loglik(state.params)
        for _ in range(config.xi_steps):
            state.params, cur, acc = update_xi(state.params, loglik, cur,
                                               hyper, step, rng)
            if not burning:
                n_acc += acc
                n_prop += 1
            if burning and config.adapt and log_step is not None:
                # Robbins-Monro toward the target rate; frozen after burn-in
                log_step += (acc - config.target_accept) / np.sqrt(s)
                step = float(np.exp(log_step))
        if config.flat_likelihood:
            ll, ev = 0.0, 0
        else:
            ll, ev = aggregated_loglik(table, state.clusters, state.params, index)
        k_tr.append(k)
        a_tr.append(state.alpha)
        kap_tr.append(state.kappa)
        xi_tr.append(state.params.to_xi())
        ll_tr.append(ll)
        ev_tr.append(ev)
        if not burning and (s - config.burn_in) % config.thin == 0:
            cl = state.clusters
            draws.append(PosteriorDraw(
                sweep=s, alpha=state.alpha, kappa=state.kappa,
                params=state.params, sites=cl.sites.copy(),
                occupancy=cl.occupancy.copy(),
                assignment=cl.assignment.copy(), loglik=ll, eval_count=ev))
        if progress is not None:
            progress(s, state)
    return ChainOutput(
        draws=draws, config=config, hyper=hyper, n_individuals=n, T=index.T,
        acceptance_rate=n_acc / n_prop if n_prop else float("nan"),
        step_scale=step,
        site_acceptance_rate=site_acc / site_prop if site_prop else float("nan"),
        site_step=site_step, k_trace=np.array(k_tr), alpha_trace=np.array(a_tr),
        kappa_trace=np.array(kap_tr), xi_trace=np.array(xi_tr),
        loglik_trace=np.array(ll_tr), eval_trace=np.array(ev_tr),
        wall_time=time.perf_counter() - t0)


def subsample_table(table, size, rng):
    """Induced sub-network on ``size`` randomly chosen individuals."""
    from .data import DyadTable

    n = table.n_individuals
    if size > n:
        raise ValueError(f"subsample {size} exceeds N={n}")
    keep = np.sort(rng.choice(n, size, replace=False))
    new_id = -np.ones(n, dtype=np.int64)
    new_id[keep] = np.arange(size)
    sub = {}
    for (i, j), y in table.nonempty.items():
        a, b = new_id[i], new_id[j]
        if a >= 0 and b >= 0:
            sub[(int(a), int(b))] = y
    return DyadTable(size, table.window, sub)


def scaling_experiment(table, alphas, sizes, *, sweeps=200, burn_in=100,
                       variant=Variant.FULL, seed=None, **config_kw):
    """Posterior mean cluster count and likelihood-evaluation count for
    fixed concentrations on growing sub-networks.

    Returns a list of dicts with keys ``n``, ``alpha``, ``mean_k``,
    ``mean_evals``, ``eval_bound``, ``n_nonempty``, ``n_dyads``,
    ``expected_k``.
    """
    rng = np.random.default_rng(seed)
    rows = []
    for size in sizes:
        sub = subsample_table(table, size, rng)
        for a in alphas:
            cfg = SamplerConfig(variant=variant, sweeps=sweeps, burn_in=burn_in,
                                seed=int(rng.integers(2 ** 32)), **config_kw)
            out = run_chain(sub, cfg, HyperpriorConfig(fixed_alpha=a))
            ks = np.array([d.k for d in out.draws])
            ev = np.array([d.eval_count for d in out.draws])
            bound = ks * (ks - 1) / 2 + 1 + sub.n_nonempty
            rows.append({
                "n": size, "alpha": a, "mean_k": float(ks.mean()),
                "mean_evals": float(ev.mean()),
                "eval_bound": float(bound.mean()),
                "n_nonempty": sub.n_nonempty, "n_dyads": sub.n_dyads,
                "expected_k": float(latent.expected_mass_points(a, size)),
            })
    return rows
