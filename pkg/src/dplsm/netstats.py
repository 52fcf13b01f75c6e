"""Network statistics, posterior predictive checks, and link-formation lift."""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .data import DyadTable, ObservationWindow, n_dyads
from .model import prob_nonempty_future, dyad_params, simulate_network

log = logging.getLogger(__name__)

QUANTILES = (0.025, 0.25, 0.5, 0.75, 0.975)


# --- graph views ----------------------------------------------------------------

@dataclass(frozen=True)
class BinaryNetwork:
    """Undirected simple graph on ``n`` nodes, edges as canonical pairs."""

    n: int
    i: np.ndarray
    j: np.ndarray
    weight: np.ndarray = None

    @classmethod
    def from_table(cls, table: DyadTable):
        i, j, y = table.arrays()
        return cls(table.n_individuals, i, j, y)

    @classmethod
    def from_edges(cls, n, edges):
        e = np.array(sorted({(min(a, b), max(a, b)) for a, b in edges if a != b}),
                     dtype=np.int64).reshape(-1, 2)
        return cls(n, e[:, 0], e[:, 1], np.ones(len(e), dtype=np.int64))

    @property
    def n_edges(self) -> int:
        return int(self.i.size)

    def adjacency(self, weighted=False):
        w = self.weight if weighted and self.weight is not None else np.ones(self.i.size)
        a = sparse.coo_matrix((np.r_[w, w].astype(float),
                               (np.r_[self.i, self.j], np.r_[self.j, self.i])),
                              shape=(self.n, self.n))
        return a.tocsr()


def _net(x):
    return x if isinstance(x, BinaryNetwork) else BinaryNetwork.from_table(x)


def _hist(values, minlength=0):
    values = np.asarray(values, dtype=np.int64)
    if values.size == 0:
        return np.zeros(minlength, dtype=np.int64)
    return np.bincount(values, minlength=minlength)


# --- descriptive statistics -----------------------------------------------------------

def degrees(net):
    net = _net(net)
    return np.bincount(np.r_[net.i, net.j], minlength=net.n)


def degree_distribution(net):
    """Histogram of node degrees over ``0..max``."""
    return _hist(degrees(net))


def shared_partners(net):
    """Number of common neighbours of each edge, in edge order."""
    net = _net(net)
    if net.n_edges == 0:
        return np.zeros(0, dtype=np.int64)
    a = net.adjacency()
    a2 = a @ a
    return np.asarray(a2[net.i, net.j]).ravel().astype(np.int64)


def dyadwise_shared_partners(net):
    """Histogram of shared-partner counts over nonempty dyads."""
    return _hist(shared_partners(net))


def triangle_count(net) -> int:
    net = _net(net)
    if net.n_edges == 0:
        return 0
    return int(shared_partners(net).sum()) // 3


def connected_triples(net) -> int:
    d = degrees(net)
    return int(np.sum(d * (d - 1) // 2))


def clustering_coefficient(net, kind="transitivity") -> float:
    """Global transitivity ``3 * triangles / connected triples``, or the
    mean local coefficient with ``kind="local"`` (nodes of degree < 2
    count as zero)."""
    net = _net(net)
    if kind == "transitivity":
        triples = connected_triples(net)
        return 3 * triangle_count(net) / triples if triples else 0.0
    if kind == "local":
        if net.n_edges == 0:
            return 0.0
        a = net.adjacency()
        tri = np.asarray((a @ a).multiply(a).sum(axis=1)).ravel() / 2
        d = degrees(net)
        pairs = d * (d - 1) / 2
        local = np.divide(tri, pairs, out=np.zeros_like(tri), where=pairs > 0)
        return float(local.mean())
    raise ValueError(f"unknown clustering kind {kind!r}")


def geodesic_matrix(net, rows=None):
    """Hop distances from ``rows`` (default all nodes); ``inf`` if unreachable."""
    net = _net(net)
    a = net.adjacency()
    return csgraph.shortest_path(a, method="D", unweighted=True,
                                 directed=False, indices=rows)


@dataclass
class GeodesicSummary:
    hist: np.ndarray          # hist[d] = pairs at distance d (d >= 1)
    unreachable: int
    mean: float
    sd: float


def geodesic_distribution(net, chunk=512) -> GeodesicSummary:
    """Distances over all unordered pairs; unreachable pairs are counted
    separately and excluded from the mean."""
    net = _net(net)
    n = net.n
    counts = np.zeros(1, dtype=np.int64)
    unreachable = 0
    for s in range(0, n, chunk):
        rows = np.arange(s, min(n, s + chunk))
        dist = geodesic_matrix(net, rows)
        upper = np.arange(n)[None, :] > rows[:, None]
        dd = dist[upper]
        fin = np.isfinite(dd)
        unreachable += int((~fin).sum())
        h = np.bincount(dd[fin].astype(np.int64))
        if h.size > counts.size:
            counts = np.r_[counts, np.zeros(h.size - counts.size, dtype=np.int64)]
        counts[:h.size] += h
    total = counts.sum()
    if total:
        d = np.arange(counts.size)
        mean = float((d * counts).sum() / total)
        sd = float(np.sqrt(((d - mean) ** 2 * counts).sum() / total))
    else:
        mean = sd = float("nan")
    return GeodesicSummary(counts, unreachable, mean, sd)


def density(table) -> tuple[float, float]:
    """(nonempty fraction, empty fraction) of all dyads."""
    n = table.n_individuals if isinstance(table, DyadTable) else table.n
    m = table.n_nonempty if isinstance(table, DyadTable) else table.n_edges
    total = n_dyads(n)
    if total == 0:
        return 0.0, 1.0
    return m / total, 1 - m / total


def calls_distribution(table: DyadTable):
    """Histogram of contact counts over nonempty dyads (index = count)."""
    return _hist(list(table.nonempty.values()))


def _mean_sd(x):
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return float("nan"), float("nan")
    return float(x.mean()), float(x.std())


@dataclass
class NetworkStats:
    degree_hist: np.ndarray
    shared_partner_hist: np.ndarray
    geodesic: GeodesicSummary
    calls_hist: np.ndarray
    density: float
    clustering: float

    def hists(self) -> dict:
        g = self.geodesic
        return {"degree": self.degree_hist,
                "shared_partners": self.shared_partner_hist,
                "geodesic": np.r_[g.hist, g.unreachable],
                "calls": self.calls_hist}


def network_stats(table: DyadTable, clustering_kind="transitivity",
                  geodesics=True) -> NetworkStats:
    net = BinaryNetwork.from_table(table)
    geo = (geodesic_distribution(net) if geodesics
           else GeodesicSummary(np.zeros(1, np.int64), 0, float("nan"), float("nan")))
    return NetworkStats(
        degree_hist=degree_distribution(net),
        shared_partner_hist=dyadwise_shared_partners(net),
        geodesic=geo,
        calls_hist=calls_distribution(table),
        density=density(table)[0],
        clustering=clustering_coefficient(net, clustering_kind))


def descriptive_report(calib, holdout, full) -> dict:
    """Per-window descriptive table: one dict per row label, keyed by window."""
    rows = {}
    for name, t in (("calibration", calib), ("holdout", holdout), ("full", full)):
        net = BinaryNetwork.from_table(t)
        geo = geodesic_distribution(net)
        deg = degrees(net)
        calls = np.array(list(t.nonempty.values()))
        sp = shared_partners(net)
        col = {
            "weeks": t.T,
            "customers": t.n_individuals,
            "nonempty_dyads": t.n_nonempty,
            "empty_proportion": density(t)[1],
            "clustering_coefficient": clustering_coefficient(net),
            "degree_mean_sd": _mean_sd(deg),
            "geodesic_mean_sd": (geo.mean, geo.sd),
            "unreachable_pairs": geo.unreachable,
            "calls_per_nonempty_mean_sd": _mean_sd(calls),
            "shared_partners_mean_sd": _mean_sd(sp),
        }
        for k, v in col.items():
            rows.setdefault(k, {})[name] = v
    return rows


def format_report(report: dict) -> str:
    cols = ("calibration", "holdout", "full")
    lines = [f"{'':36s}" + "".join(f"{c:>20s}" for c in cols)]
    for row, vals in report.items():
        cells = []
        for c in cols:
            v = vals[c]
            if isinstance(v, tuple):
                cells.append(f"{v[0]:.1f} ({v[1]:.1f})")
            elif isinstance(v, float) and not float(v).is_integer():
                cells.append(f"{v:.4f}")
            else:
                cells.append(f"{int(v):,d}")
        lines.append(f"{row:36s}" + "".join(f"{c:>20s}" for c in cells))
    return "\n".join(lines)


def random_graph_expectations(n, mean_degree):
    """Small-world reference values for a random graph: mean geodesic
    ``ln n / ln k`` and clustering ``k / n``."""
    if not mean_degree > 1:
        raise ValueError("mean degree must exceed 1")
    if mean_degree >= n - 1 or mean_degree / n > 0.5:
        warnings.warn("dense graph: random-graph approximations do not apply",
                      RuntimeWarning, stacklevel=2)
    return math.log(n) / math.log(mean_degree), mean_degree / n


def erdos_renyi(n, mean_degree, rng=None, T=26) -> DyadTable:
    """G(n, p) with ``p = mean_degree / (n - 1)`` as a one-contact DyadTable."""
    rng = np.random.default_rng(rng)
    total = n_dyads(n)
    m = rng.binomial(total, mean_degree / (n - 1))
    flat = rng.choice(total, m, replace=False)
    i, j = _unflatten(flat, n)
    return DyadTable(n, ObservationWindow(0, T),
                     dict(zip(zip(i.tolist(), j.tolist()), [1] * m)))


def _unflatten(flat, n):
    """Row-major index over the strict upper triangle -> (i, j)."""
    flat = np.asarray(flat, dtype=np.int64)
    # row i starts at i*n - i*(i+1)/2
    b = 2 * n - 1
    i = np.floor((b - np.sqrt(b * b - 8.0 * flat)) / 2).astype(np.int64)
    start = i * n - i * (i + 1) // 2
    # guard against rounding at row boundaries
    over = flat >= start + (n - 1 - i)
    i[over] += 1
    start = i * n - i * (i + 1) // 2
    under = flat < start
    i[under] -= 1
    start = i * n - i * (i + 1) // 2
    j = flat - start + i + 1
    return i, j


# --- posterior predictive checks ----------------------------------------------------

@dataclass
class PpcReport:
    """Observed statistics against simulated quantile envelopes.

    ``hists[name]`` holds ``observed`` (proportions per bin), ``envelope``
    (5 x bins, quantiles ``QUANTILES``) and ``outside`` (observed outside
    the 2.5-97.5% band). ``scalars[name]`` holds the same for density and
    clustering.
    """

    n_replicates: int
    hists: dict = field(default_factory=dict)
    scalars: dict = field(default_factory=dict)

    def coverage(self, names=None) -> float:
        """Fraction of histogram bins (up to each observed maximum) whose
        observed proportion lies inside the 95% envelope."""
        inside = []
        for name, h in self.hists.items():
            if names and name not in names:
                continue
            inside.extend(~h["outside"][: h["n_observed_bins"]])
        return float(np.mean(inside)) if inside else float("nan")

    def to_dict(self) -> dict:
        def conv(x):
            if isinstance(x, np.ndarray):
                return x.tolist()
            if isinstance(x, (np.floating, np.integer, np.bool_)):
                return x.item()
            return x
        return {
            "n_replicates": self.n_replicates,
            "quantiles": list(QUANTILES),
            "hists": {k: {kk: conv(vv) for kk, vv in v.items()}
                      for k, v in self.hists.items()},
            "scalars": {k: {kk: conv(vv) for kk, vv in v.items()}
                        for k, v in self.scalars.items()},
            "coverage": self.coverage(),
        }


def _proportions(h):
    h = np.asarray(h, dtype=float)
    s = h.sum()
    return h / s if s else h


def run_ppc(draws, holdout: DyadTable, replicates=100, rng=None,
            condition_on: DyadTable = None, clustering_kind="transitivity"):
    """Simulate holdout-length networks from posterior draws and compare
    their statistics with ``holdout``.

    Draws are used in turn (cycling if ``replicates`` exceeds their number).
    With ``condition_on`` (the calibration table) each dyad's open state and
    rate are drawn given its calibration counts.
    """
    if not draws:
        raise ValueError("need at least one posterior draw")
    rng = np.random.default_rng(rng)
    obs = network_stats(holdout, clustering_kind)
    sims = []
    for r in range(replicates):
        d = draws[r % len(draws)]
        sim = simulate_network(d.coordinates(), d.params, holdout.T, rng,
                               window=holdout.window, condition_on=condition_on)
        sims.append(network_stats(sim, clustering_kind))
    report = PpcReport(replicates)
    obs_h = obs.hists()
    for name in obs_h:
        sim_h = [s.hists()[name] for s in sims]
        if name == "geodesic":
            # keep the unreachable bucket last while padding distances
            obs_vec = obs_h[name]
            width = max([len(obs_vec)] + [len(x) for x in sim_h])
            obs_p = _proportions(_pad_geo(obs_vec, width))
            mat = np.array([_proportions(_pad_geo(x, width)) for x in sim_h])
            n_obs_bins = width
        else:
            width = max([len(obs_h[name])] + [len(x) for x in sim_h])
            obs_p = _proportions(np.pad(obs_h[name], (0, width - len(obs_h[name]))))
            mat = np.array([_proportions(np.pad(x, (0, width - len(x)))) for x in sim_h])
            n_obs_bins = len(obs_h[name])
        env = np.quantile(mat, QUANTILES, axis=0)
        outside = (obs_p < env[0]) | (obs_p > env[-1])
        report.hists[name] = {"observed": obs_p, "envelope": env,
                              "outside": outside, "n_observed_bins": n_obs_bins}
    for name, o, vals in (("density", obs.density, [s.density for s in sims]),
                          ("clustering", obs.clustering,
                           [s.clustering for s in sims])):
        env = np.quantile(vals, QUANTILES)
        report.scalars[name] = {"observed": o, "envelope": env,
                                "outside": bool(o < env[0] or o > env[-1])}
    return report


def _pad_geo(h, width):
    dist, unreach = h[:-1], h[-1]
    return np.r_[np.pad(dist, (0, width - 1 - len(dist))), unreach]


# --- link-formation lift ----------------------------------------------------------

@dataclass
class LiftResult:
    q: float
    micro: float          # pooled hits / pooled conversions
    macro: float          # mean over individuals of hits / conversions
    n_individuals: int    # individuals with at least one conversion
    hits: int
    conversions: int


def _dense(table: DyadTable):
    n = table.n_individuals
    m = np.zeros((n, n), dtype=bool)
    i, j, _ = table.arrays()
    m[i, j] = m[j, i] = True
    return m


def lift(scores, calib: DyadTable, holdout: DyadTable, q, tiebreak=None, rng=None):
    """Top-``q`` lift of a dyad scoring rule.

    For each individual ``i``, the candidates are all ``j`` with no
    calibration contact. They are ranked by ``scores[i, j]`` (descending),
    then ``tiebreak[i, j]`` (descending), then uniformly at random. The top
    ``max(1, ceil(q * candidates))`` are taken; ``i``'s lift is the fraction
    of its holdout conversions (candidates contacted in holdout) that fall in
    that set. Random scores give about ``q``; a perfect ranking gives one
    whenever each top set can hold all of ``i``'s conversions.
    """
    if not 0 < q < 1:
        raise ValueError("q must be a fraction in (0, 1)")
    rng = np.random.default_rng(rng)
    n = calib.n_individuals
    if holdout.n_individuals != n:
        raise ValueError("calibration and holdout cover different populations")
    scores = np.asarray(scores, dtype=float)
    if scores.shape != (n, n):
        raise ValueError(f"scores must be ({n}, {n})")
    c_adj = _dense(calib)
    h_adj = _dense(holdout)
    hits_all = conv_all = 0
    per = []
    for i in range(n):
        cand = ~c_adj[i]
        cand[i] = False
        idx = np.nonzero(cand)[0]
        if idx.size == 0:
            continue
        conv = h_adj[i, idx]
        n_conv = int(conv.sum())
        if n_conv == 0:
            continue
        s = scores[i, idx]
        if np.isnan(s).any():
            raise ValueError(f"missing scores for individual {i}")
        keys = [rng.uniform(size=idx.size)]
        if tiebreak is not None:
            keys.append(-np.asarray(tiebreak[i, idx], dtype=float))
        keys.append(-s)
        order = np.lexsort(keys)
        top = max(1, math.ceil(q * idx.size))
        hits = int(conv[order[:top]].sum())
        hits_all += hits
        conv_all += n_conv
        per.append(hits / n_conv)
    micro = hits_all / conv_all if conv_all else float("nan")
    macro = float(np.mean(per)) if per else float("nan")
    return LiftResult(q, micro, macro, len(per), hits_all, conv_all)


def random_scorer(n, rng=None):
    rng = np.random.default_rng(rng)
    s = rng.uniform(size=(n, n))
    return np.triu(s, 1) + np.triu(s, 1).T


def oracle_scorer(holdout: DyadTable):
    return _dense(holdout).astype(float)


def observed_scorer(calib: DyadTable):
    """Condition-on-observed rule: calibration-nonempty dyads score 1, every
    calibration-empty dyad scores 0 (so all candidates tie)."""
    return _dense(calib).astype(float)


def geodesic_scorer(calib: DyadTable, tiebreak="random"):
    """Negative calibration geodesic distance (unreachable -> -inf).

    Returns ``(scores, tiebreak_matrix)``; with ``tiebreak="calls"`` the
    second matrix holds the largest total contact count along any shortest
    path, otherwise ``None`` (ties broken at random by :func:`lift`).
    """
    net = BinaryNetwork.from_table(calib)
    dist = geodesic_matrix(net)
    scores = -dist
    np.fill_diagonal(scores, np.nan)
    if tiebreak == "random":
        return scores, None
    if tiebreak != "calls":
        raise ValueError(f"unknown tiebreak {tiebreak!r}")
    return scores, path_call_volume(net, dist)


def path_call_volume(net: BinaryNetwork, dist=None):
    """Max over shortest paths of the summed contact counts along the path."""
    n = net.n
    if dist is None:
        dist = geodesic_matrix(net)
    src = np.r_[net.i, net.j]
    dst = np.r_[net.j, net.i]
    w = np.r_[net.weight, net.weight].astype(float)
    vol = np.zeros((n, n))
    for s in range(n):
        ds = dist[s]
        best = np.full(n, -np.inf)
        best[s] = 0.0
        lev_src = ds[src]
        ok = np.isfinite(lev_src) & (ds[dst] == lev_src + 1)
        e_src, e_dst, e_w, e_lev = src[ok], dst[ok], w[ok], lev_src[ok]
        order = np.argsort(e_lev, kind="stable")
        e_src, e_dst, e_w, e_lev = e_src[order], e_dst[order], e_w[order], e_lev[order]
        bounds = np.r_[0, np.nonzero(np.diff(e_lev))[0] + 1, e_lev.size]
        for a, b in zip(bounds[:-1], bounds[1:]):
            np.maximum.at(best, e_dst[a:b], best[e_src[a:b]] + e_w[a:b])
        best[~np.isfinite(best)] = 0.0
        vol[s] = best
    return vol


def model_scorer(draws, calib: DyadTable, T_h):
    """Posterior mean probability that each dyad is contacted during a
    following window of length ``T_h`` (dense, diagonal NaN)."""
    if not draws:
        raise ValueError("need at least one posterior draw")
    n = calib.n_individuals
    T = calib.T
    acc = np.zeros((n, n))
    ci, cj, cy = calib.arrays()
    for d in draws:
        sites = d.sites
        diff = sites[:, None, :] - sites[None, :, :]
        dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        dp = dyad_params(dist, d.params)
        site_prob = prob_nonempty_future(T, T_h, dp.p, dp.mu, dp.v)
        a = d.assignment
        acc += site_prob[np.ix_(a, a)]
        if ci.size:
            dd = dist[a[ci], a[cj]]
            dpp = dyad_params(dd, d.params)
            pr = prob_nonempty_future(T, T_h, dpp.p, dpp.mu, dpp.v, y_star=cy)
            acc[ci, cj] += pr - site_prob[a[ci], a[cj]]
            acc[cj, ci] += pr - site_prob[a[ci], a[cj]]
    acc /= len(draws)
    np.fill_diagonal(acc, np.nan)
    return acc


def posterior_mean_p(draws, n=None):
    """Posterior mean open probability for every dyad (dense)."""
    n = n or draws[0].assignment.size
    acc = np.zeros((n, n))
    for d in draws:
        sites = d.sites
        diff = sites[:, None, :] - sites[None, :, :]
        dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        p = dyad_params(dist, d.params).p
        acc += p[np.ix_(d.assignment, d.assignment)]
    acc /= len(draws)
    np.fill_diagonal(acc, np.nan)
    return acc
