"""Synthetic contact data with known latent structure."""

from __future__ import annotations

import numpy as np

from . import latent
from .data import InteractionRecord
from .model import PopulationParams, pair_params, simulate_latent_dyads


def cluster_coordinates(sizes, centers, spread=0.0, rng=None):
    """Coordinates for groups of ``sizes`` individuals around ``centers``.

    With ``spread > 0`` members scatter as isotropic normals of that s.d.;
    with zero spread each group is a single point mass.
    Returns ``(coords, labels)``.
    """
    rng = np.random.default_rng(rng)
    centers = np.asarray(centers, dtype=float)
    labels = np.repeat(np.arange(len(sizes)), sizes)
    coords = centers[labels].copy()
    if spread > 0:
        coords += rng.normal(0.0, spread, coords.shape)
    return coords, labels


def crp_coordinates(n, alpha, kappa, D=2, rng=None):
    """Coordinates from a Polya-urn partition with base-measure sites."""
    rng = np.random.default_rng(rng)
    labels = latent.crp_partition(alpha, n, rng)
    sites = latent.sample_h0(kappa, D, rng, size=labels.max() + 1)
    return sites[labels], labels


def simulate_records(coords, params: PopulationParams, n_weeks, rng=None,
                     block=None):
    """Timestamped contacts over weeks ``0..n_weeks-1``.

    Each dyad's open state and gamma rate are drawn once and persist over
    the whole span; an open dyad's contacts are a Poisson process, so the
    count is Poisson(rate * n_weeks) with uniform contact times.

    ``block=(labels, p_within, p_between)`` replaces the distance link for
    the open probability by a two-level rule on group labels; rates still
    follow the distance link for ``mu``.

    Returns ``(records, truth)`` where ``truth`` has per-dyad arrays
    ``rows``, ``cols``, ``open``, ``rate``, ``p``, ``mu``, ``counts``.
    """
    rng = np.random.default_rng(rng)
    coords = np.asarray(coords, dtype=float)
    if block is None:
        rows, cols, is_open, rate = simulate_latent_dyads(coords, params, rng)
        dp, _, _ = pair_params(coords, params, rows, cols)
        p = dp.p
    else:
        labels, pw, pb = block
        labels = np.asarray(labels)
        dp, rows, cols = pair_params(coords, params)
        p = np.where(labels[rows] == labels[cols], pw, pb).astype(float)
        is_open = rng.uniform(size=rows.size) < p
        rate = np.zeros(rows.size)
        if is_open.any():
            rate[is_open] = rng.gamma(dp.r[is_open], 1.0 / dp.a[is_open])
    counts = np.zeros(rows.size, dtype=np.int64)
    counts[is_open] = rng.poisson(rate[is_open] * n_weeks)
    hit = np.nonzero(counts)[0]
    records = []
    for e in hit:
        weeks = np.sort(rng.integers(0, n_weeks, counts[e]))
        a, b = int(rows[e]), int(cols[e])
        for w in weeks.tolist():
            # direction is irrelevant to the model; alternate for realism
            records.append(InteractionRecord(a, b, w) if w % 2 == 0
                           else InteractionRecord(b, a, w))
    truth = {"rows": rows, "cols": cols, "open": is_open, "rate": rate,
             "p": p, "mu": dp.mu, "counts": counts}
    return records, truth


def nested_cluster_coordinates(n_groups=2, n_sub=5, size=20, separation=4.0,
                               ring=1.0):
    """Point-mass sub-sites on rings around well-separated group centers.

    Group centers sit on a circle of diameter ``separation``; each group has
    ``n_sub`` sub-sites evenly spaced on a ring of radius ``ring`` around its
    center, each holding ``size`` individuals. Returns
    ``(coords, group_labels, site_labels)``.
    """
    g_ang = 2 * np.pi * np.arange(n_groups) / n_groups
    centers = 0.5 * separation * np.c_[np.cos(g_ang), np.sin(g_ang)]
    s_ang = 2 * np.pi * np.arange(n_sub) / n_sub
    offsets = ring * np.c_[np.cos(s_ang), np.sin(s_ang)]
    sites = (centers[:, None, :] + offsets[None, :, :]).reshape(-1, 2)
    site_labels = np.repeat(np.arange(sites.shape[0]), size)
    return sites[site_labels].copy(), site_labels // n_sub, site_labels
