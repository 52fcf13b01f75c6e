"""Draw files: one JSON object per line, one line per stored draw.

Fields of each record::

    sweep       int     sweep index the draw was taken at
    variant     str     "baseline" | "hmcr" | "full"
    alpha       float   DP concentration
    kappa       float   radius shape
    k           int     number of occupied sites
    xi          object  link coefficients and gamma variance by name
    loglik      float   total log-likelihood of the calibration data
    eval_count  int     likelihood evaluations for that total
    sites       [[float]]  k site coordinates
    occupancy   [int]      members per site
    assignment  [int]      site index per individual (0..N-1 order)

Per-individual coordinates are ``sites[assignment]``. Site labels are only
meaningful within a record.
"""

from __future__ import annotations

import json

import numpy as np

from .model import PopulationParams, Variant
from .sampler import PosteriorDraw


def draw_to_record(draw: PosteriorDraw) -> dict:
    return {
        "sweep": int(draw.sweep),
        "variant": draw.params.variant.value,
        "alpha": float(draw.alpha),
        "kappa": float(draw.kappa),
        "k": draw.k,
        "xi": {k: float(v) for k, v in draw.params.named().items()},
        "loglik": float(draw.loglik),
        "eval_count": int(draw.eval_count),
        "sites": np.asarray(draw.sites).tolist(),
        "occupancy": np.asarray(draw.occupancy).astype(int).tolist(),
        "assignment": np.asarray(draw.assignment).astype(int).tolist(),
    }


def record_to_draw(rec: dict) -> PosteriorDraw:
    variant = Variant(rec["variant"])
    sites = np.asarray(rec["sites"], dtype=float)
    if sites.ndim != 2 or sites.shape[0] != rec["k"]:
        raise ValueError(f"draw at sweep {rec.get('sweep')}: k disagrees with sites")
    return PosteriorDraw(
        sweep=int(rec["sweep"]), alpha=float(rec["alpha"]),
        kappa=float(rec["kappa"]),
        params=PopulationParams.from_named(rec["xi"], variant),
        sites=sites, occupancy=np.asarray(rec["occupancy"], dtype=np.int64),
        assignment=np.asarray(rec["assignment"], dtype=np.int64),
        loglik=float(rec["loglik"]), eval_count=int(rec["eval_count"]))


def write_draws(path, draws):
    with open(path, "w", encoding="utf-8") as fh:
        for d in draws:
            fh.write(json.dumps(draw_to_record(d), separators=(",", ":")))
            fh.write("\n")


def read_draws(path):
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(record_to_draw(json.loads(line)))
            except (KeyError, ValueError, TypeError) as e:
                raise ValueError(f"{path}:{lineno}: bad draw record ({e})") from e
    return out
