"""Dyad-level probability model.

A dyad is open with probability ``p``; an open dyad produces contacts as a
Poisson process whose rate is gamma distributed with mean ``mu`` and
variance ``v``. ``p`` and ``mu`` may decay with latent distance.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import expit, gammaln

from .data import DyadTable, ObservationWindow


class Variant(str, enum.Enum):
    BASELINE = "baseline"
    HMCR = "hmcr"
    FULL = "full"


# names of the unconstrained parameter vector, per variant; "log_" entries are
# stored on the log scale
XI_NAMES = {
    Variant.BASELINE: ("beta1p", "beta1mu", "log_v"),
    Variant.HMCR: ("beta1p", "log_beta2p", "log_beta3p", "beta1mu", "log_v"),
    Variant.FULL: ("beta1p", "log_beta2p", "log_beta3p",
                   "beta1mu", "log_beta2mu", "log_beta3mu", "log_v"),
}


@dataclass(frozen=True)
class LinkCoefficients:
    beta1p: float = 0.0
    beta2p: float = 0.0
    beta3p: float = 1.0
    beta1mu: float = 0.0
    beta2mu: float = 0.0
    beta3mu: float = 1.0

    def __post_init__(self):
        for name in ("beta2p", "beta3p", "beta2mu", "beta3mu"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")


@dataclass(frozen=True)
class PopulationParams:
    coefficients: LinkCoefficients
    v: float
    variant: Variant = Variant.FULL

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        if not self.v > 0:
            raise ValueError("gamma variance must be positive")
        c = self.coefficients
        if self.variant is Variant.BASELINE and (c.beta2p or c.beta2mu):
            object.__setattr__(self, "coefficients",
                               replace(c, beta2p=0.0, beta2mu=0.0))
        elif self.variant is Variant.HMCR and c.beta2mu:
            object.__setattr__(self, "coefficients", replace(c, beta2mu=0.0))

    def to_xi(self):
        c = self.coefficients
        out = []
        for n in XI_NAMES[self.variant]:
            if n == "log_v":
                out.append(np.log(self.v))
            elif n.startswith("log_"):
                out.append(np.log(getattr(c, n[4:])))
            else:
                out.append(getattr(c, n))
        return np.array(out)

    @classmethod
    def from_xi(cls, xi, variant):
        variant = Variant(variant)
        names = XI_NAMES[variant]
        xi = np.asarray(xi, dtype=float)
        if xi.shape != (len(names),):
            raise ValueError(f"{variant.value} expects {len(names)} values")
        kw = {}
        for n, x in zip(names, xi):
            if n.startswith("log_"):
                kw[n[4:]] = float(np.exp(x))
            else:
                kw[n] = float(x)
        v = kw.pop("v")
        return cls(LinkCoefficients(**kw), v, variant)

    def named(self) -> dict:
        """Coefficients and variance as a flat dict (constrained scale)."""
        c = self.coefficients
        d = {"beta1p": c.beta1p, "beta1mu": c.beta1mu, "v": self.v}
        if self.variant is not Variant.BASELINE:
            d.update(beta2p=c.beta2p, beta3p=c.beta3p)
        if self.variant is Variant.FULL:
            d.update(beta2mu=c.beta2mu, beta3mu=c.beta3mu)
        return d

    @classmethod
    def from_named(cls, d, variant):
        d = dict(d)
        v = d.pop("v")
        return cls(LinkCoefficients(**d), v, variant)


@dataclass(frozen=True)
class DyadParams:
    p: np.ndarray
    mu: np.ndarray
    v: float

    @property
    def r(self):
        return self.mu ** 2 / self.v

    @property
    def a(self):
        return self.mu / self.v


def _check_distance(d):
    d = np.asarray(d, dtype=float)
    if np.any(d < 0):
        raise ValueError("latent distance must be nonnegative")
    return d


def _decay(d, b2, b3):
    # b2 * d ** b3 with 0 ** b3 = 0 (b3 > 0 is enforced by the log scale)
    return b2 * np.power(d, b3)


def link_logit_p(d, b1, b2, b3):
    return b1 - _decay(_check_distance(d), b2, b3)


def link_p(d, b1, b2=0.0, b3=1.0):
    """Open probability ``logistic(b1 - b2 * d ** b3)``."""
    x = link_logit_p(d, b1, b2, b3)
    return expit(x)


def link_mu(d, b1, b2=0.0, b3=1.0):
    """Mean contact rate ``exp(b1 - b2 * d ** b3)``."""
    return np.exp(b1 - _decay(_check_distance(d), b2, b3))


def dyad_params(d, params: PopulationParams) -> DyadParams:
    c = params.coefficients
    d = _check_distance(d)
    if params.variant is Variant.BASELINE:
        p = link_p(np.zeros_like(d), c.beta1p)
        mu = link_mu(np.zeros_like(d), c.beta1mu)
    elif params.variant is Variant.HMCR:
        p = link_p(d, c.beta1p, c.beta2p, c.beta3p)
        mu = link_mu(np.zeros_like(d), c.beta1mu)
    else:
        p = link_p(d, c.beta1p, c.beta2p, c.beta3p)
        mu = link_mu(d, c.beta1mu, c.beta2mu, c.beta3mu)
    return DyadParams(p, mu, params.v)


def _log_terms(d, params):
    """log p, log(1-p), log mu at distance ``d`` (stable in the tails)."""
    c = params.coefficients
    d = np.asarray(d, dtype=float)
    if params.variant is Variant.BASELINE:
        x = np.full(d.shape, c.beta1p)
        logmu = np.full(d.shape, c.beta1mu)
    else:
        x = c.beta1p - _decay(d, c.beta2p, c.beta3p)
        if params.variant is Variant.FULL:
            logmu = c.beta1mu - _decay(d, c.beta2mu, c.beta3mu)
        else:
            logmu = np.full(d.shape, c.beta1mu)
    return -np.logaddexp(0.0, -x), -np.logaddexp(0.0, x), logmu


def _loglik_core(y, T, logp, log1mp, logmu, logv):
    # log[(1-p) I(y=0) + p G(r+y)/G(r) (a/(a+T))^r (a+T)^-y], r = mu^2/v, a = mu/v
    y = np.asarray(y, dtype=float)
    r = np.exp(2 * logmu - logv)
    a = np.exp(logmu - logv)
    # log1p(T / a) written so it stays finite when mu underflows
    log_zero_open = -r * np.logaddexp(0.0, np.log(T) + logv - logmu)
    with np.errstate(invalid="ignore", divide="ignore"):
        nb = np.where(y > 0, gammaln(r + y) - gammaln(r), 0.0)
        nb = np.where((y > 0) & (r == 0), -np.inf, nb)
    nb = nb + log_zero_open - y * np.log(a + T)
    open_part = logp + nb
    return np.where(y == 0, np.logaddexp(log1mp, open_part), open_part)


def marginal_loglik(y_star, T, p, mu, v):
    """Log marginal likelihood of ``y_star`` contacts over duration ``T``
    with the gamma-distributed rate integrated out.

    This is the likelihood of the event times (not the count pmf), so it
    carries no ``T**y / y!`` factor.
    """
    y = np.asarray(y_star)
    p = np.asarray(p, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if np.any(y < 0) or not np.all(np.equal(np.mod(y, 1), 0)):
        raise ValueError("contact counts must be nonnegative integers")
    if not T > 0:
        raise ValueError("duration must be positive")
    if np.any((p < 0) | (p > 1)) or np.any(mu <= 0) or not v > 0:
        raise ValueError("invalid dyad parameters")
    with np.errstate(divide="ignore"):
        logp = np.log(p)
        log1mp = np.log1p(-p)
    out = _loglik_core(y, T, logp, log1mp, np.log(mu), np.log(v))
    return out if out.ndim else float(out)


def dyad_loglik(y, d, T, params: PopulationParams):
    """Log marginal likelihood at latent distance ``d`` (vectorized)."""
    logp, log1mp, logmu = _log_terms(d, params)
    return _loglik_core(y, T, logp, log1mp, logmu, np.log(params.v))


def empty_loglik(d, T, params):
    return dyad_loglik(np.zeros(np.shape(d)), d, T, params)


# --- aggregation over distance classes ----------------------------------------

class DyadIndex:
    """Array view of a :class:`DyadTable` for repeated likelihood work."""

    def __init__(self, table: DyadTable):
        self.table = table
        self.n = table.n_individuals
        self.T = table.T
        self.i, self.j, self.y = table.arrays()
        # symmetric adjacency lists in CSR form
        src = np.r_[self.i, self.j]
        dst = np.r_[self.j, self.i]
        yy = np.r_[self.y, self.y]
        order = np.lexsort((dst, src))
        self.nbr = dst[order]
        self.nbr_y = yy[order].astype(float)
        self.indptr = np.r_[0, np.cumsum(np.bincount(src, minlength=self.n))]

    def neighbors(self, i):
        s, e = self.indptr[i], self.indptr[i + 1]
        return self.nbr[s:e], self.nbr_y[s:e]


def class_multiplicities(index: DyadIndex, assignment, k):
    """Empty-dyad counts per site pair.

    Returns ``(cross, same)``: ``cross`` is a (k, k) upper-triangular array of
    empty dyads between distinct sites; ``same`` is a length-k array of empty
    dyads within each site.
    """
    occ = np.bincount(assignment, minlength=k).astype(np.int64)
    total = np.triu(np.outer(occ, occ), 1)
    same_total = occ * (occ - 1) // 2
    if index.i.size:
        a = assignment[index.i]
        b = assignment[index.j]
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        ne = np.bincount(lo * k + hi, minlength=k * k).reshape(k, k)
        same = same_total - np.diag(ne)
        cross = total - np.triu(ne, 1)
    else:
        same, cross = same_total, total
    return cross, same


def aggregated_loglik(table, clusters, params: PopulationParams, index=None):
    """Total log-likelihood of ``table`` under a clustered configuration.

    Empty dyads are grouped by site pair: every cross-site pair shares one
    distance and every same-site pair sits at distance zero, so empty dyads
    need at most ``k*(k-1)/2 + 1`` likelihood evaluations. Nonempty dyads are
    evaluated one by one.

    Returns
    -------
    total : float
    n_evals : int
        Likelihood evaluations performed.
    """
    index = index or DyadIndex(table)
    if clusters.n != index.n:
        raise ValueError(
            f"configuration has {clusters.n} individuals, table {index.n}")
    assignment = clusters.assignment
    if np.any(assignment < 0):
        raise ValueError("configuration has unassigned individuals")
    k = clusters.k
    sites = clusters.sites
    cross, same = class_multiplicities(index, assignment, k)
    total = 0.0
    n_evals = 0
    a, b = np.nonzero(cross)
    if a.size:
        d = np.sqrt(np.sum((sites[a] - sites[b]) ** 2, axis=1))
        ll = empty_loglik(d, index.T, params)
        total += float(np.dot(cross[a, b], ll))
        n_evals += a.size
    n_same = int(same.sum())
    if n_same:
        total += n_same * float(empty_loglik(0.0, index.T, params))
        n_evals += 1
    if index.y.size:
        d = np.sqrt(np.sum((sites[assignment[index.i]]
                            - sites[assignment[index.j]]) ** 2, axis=1))
        total += float(np.sum(dyad_loglik(index.y, d, index.T, params)))
        n_evals += index.y.size
    return total, n_evals


def brute_force_loglik(table, coords, params):
    """Per-dyad sum over all ``N(N-1)/2`` dyads; an oracle for the grouped sum."""
    coords = np.asarray(coords, dtype=float)
    n = table.n_individuals
    total = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            y = table.nonempty.get((i, j), 0)
            d = float(np.sqrt(np.sum((coords[i] - coords[j]) ** 2)))
            dp = dyad_params(d, params)
            total += marginal_loglik(y, table.T, float(dp.p), float(dp.mu), dp.v)
    return total


def evaluation_bound(k, n_nonempty):
    """Upper bound on evaluations per full likelihood: ``C(k,2) + 1 + nonempty``."""
    return k * (k - 1) // 2 + 1 + n_nonempty


# --- simulation and prediction --------------------------------------------------

def _upper_pairs(n):
    return np.triu_indices(n, 1)


def pair_params(coords, params, rows=None, cols=None):
    """p and mu for every dyad (i < j) of ``coords``; returns flat arrays and
    the index pair arrays."""
    coords = np.asarray(coords, dtype=float)
    if rows is None:
        rows, cols = _upper_pairs(coords.shape[0])
    d = np.sqrt(np.sum((coords[rows] - coords[cols]) ** 2, axis=1))
    dp = dyad_params(d, params)
    return dp, rows, cols


def simulate_latent_dyads(coords, params, rng=None):
    """Draw the open indicator and contact rate of every dyad.

    Returns ``(rows, cols, open, rate)`` over dyads ``rows < cols``.
    """
    rng = np.random.default_rng(rng)
    dp, rows, cols = pair_params(coords, params)
    is_open = rng.uniform(size=rows.size) < dp.p
    rate = np.zeros(rows.size)
    if is_open.any():
        r, a = dp.r[is_open], dp.a[is_open]
        rate[is_open] = rng.gamma(r, 1.0 / a)
    return rows, cols, is_open, rate


def simulate_network(clusters, params, T, rng=None, window=None,
                     condition_on: DyadTable = None):
    """Simulate a :class:`DyadTable` of duration ``T``.

    Each dyad is open with probability ``p``; open dyads draw a gamma rate
    and a Poisson(rate * T) contact count. With ``condition_on``, open state
    and rate are drawn from their posterior given that table's counts
    instead of the prior (a posterior predictive for a later window).
    """
    rng = np.random.default_rng(rng)
    coords = clusters.coordinates() if hasattr(clusters, "coordinates") else clusters
    n = coords.shape[0]
    window = window or ObservationWindow(0, int(np.ceil(T)))
    dp, rows, cols = pair_params(coords, params)
    r, a, p = dp.r, dp.a, dp.p
    if condition_on is None:
        is_open = rng.uniform(size=rows.size) < p
        shape, rate_param = r, a
    else:
        y0 = np.zeros(rows.size)
        ci, cj, cy = condition_on.arrays()
        if ci.size:
            flat = ci * n - ci * (ci + 1) // 2 + (cj - ci - 1)
            y0[flat] = cy
        T0 = condition_on.T
        q0 = np.exp(-r * np.log1p(T0 / a))
        p_open = np.where(y0 > 0, 1.0, p * q0 / ((1 - p) + p * q0))
        is_open = rng.uniform(size=rows.size) < p_open
        shape, rate_param = r + y0, a + T0
    counts = np.zeros(rows.size, dtype=np.int64)
    if is_open.any():
        lam = rng.gamma(shape[is_open], 1.0 / rate_param[is_open])
        counts[is_open] = rng.poisson(lam * T)
    hit = counts > 0
    return DyadTable(n, window, dict(zip(zip(rows[hit].tolist(), cols[hit].tolist()),
                                          counts[hit].tolist())))


def expected_nonempty(clusters, params, T):
    """Expected number of nonempty dyads, ``sum p * (1 - (a/(a+T))**r)``."""
    coords = clusters.coordinates() if hasattr(clusters, "coordinates") else clusters
    dp, _, _ = pair_params(coords, params)
    return float(np.sum(dp.p * (1 - np.exp(-dp.r * np.log1p(T / dp.a)))))


def prob_nonempty_future(T, T_h, p, mu, v, y_star=0):
    """Probability that a dyad with ``y_star`` contacts over ``T`` has at
    least one contact in a following window of length ``T_h``.

    Zero counts leave the gamma shape at ``r`` and move the rate to ``a + T``;
    ``y_star > 0`` shifts the shape to ``r + y_star`` and fixes the dyad open.
    """
    p = np.asarray(p, dtype=float)
    mu = np.asarray(mu, dtype=float)
    y = np.asarray(y_star, dtype=float)
    if not T > 0 or T_h < 0:
        raise ValueError("need T > 0 and T_h >= 0")
    if np.any((p < 0) | (p > 1)) or np.any(mu <= 0) or not v > 0:
        raise ValueError("invalid dyad parameters")
    r = mu ** 2 / v
    a = mu / v
    q0 = np.exp(-r * np.log1p(T / a))
    denom = (1 - p) + p * q0
    with np.errstate(invalid="ignore", divide="ignore"):
        open_post = np.where(y > 0, 1.0, np.where(denom > 0, p * q0 / denom, 0.0))
    # P(no contact in T_h | open, data) = ((a+T)/(a+T+T_h)) ** (r + y)
    none_later = np.exp(-(r + y) * np.log1p(T_h / (a + T)))
    out = open_post * (1 - none_later)
    return out if out.ndim else float(out)
