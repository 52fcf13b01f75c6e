"""Command-line runs: simulate, fit, stats, ppc, predict, export, scaling.

Every command reads one JSON config (``--config``), applies flag overrides,
validates the result, and writes it back as ``config.json`` in the output
directory next to its other outputs.

Exit codes: 0 success, 2 config error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import netstats as ns
from .data import (DataError, ObservationWindow, build_dyad_table, data_span,
                   read_records_csv, split_windows, write_records_csv)
from .draws import read_draws, write_draws
from .model import PopulationParams, Variant, XI_NAMES
from .sampler import (ConfigError, HyperpriorConfig, SamplerConfig,
                      SamplerError, run_chain, scaling_experiment)
from .synth import (cluster_coordinates, crp_coordinates,
                    nested_cluster_coordinates, simulate_records)

log = logging.getLogger("dplsm")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

DEFAULTS = {
    "variant": "full",
    "D": 2,
    "seed": 0,
    "threads": 1,
    "input": None,
    "out": None,
    "draws": None,
    # first holdout week; None splits the data span in half
    "boundary_week": None,
    # [start, end) weeks of the data; None uses the observed span
    "span": None,
    # preload ids "0".."n-1" so individuals without contacts are kept
    "population_size": None,
    # "calibration" fits the window before boundary_week, "full" the span
    "fit_window": "calibration",
    "sampler": {
        "sweeps": 1000, "burn_in": 500, "thin": 1, "n_aux": 3,
        "step_scale": 0.3, "adapt": True, "target_accept": 0.23,
        "xi_steps": 1, "sir_pool": 1000, "singleton": "neal",
        "kappa_init": 2.0,
    },
    "hyper": {
        "alpha_shape": 0.2, "alpha_rate": 0.05, "kappa_shape": 1.8,
        "kappa_rate": 0.6, "xi_mean": 0.0, "xi_var": 10.0,
        "fixed_alpha": None, "alpha_branch": "canonical",
    },
    "simulate": {
        # "clusters" | "nested" | "crp"
        "generator": "clusters",
        "sizes": [10, 10],
        "centers": [[-1.0, 0.0], [1.0, 0.0]],
        "spread": 0.0,
        "nested": {"n_groups": 2, "n_sub": 5, "size": 20,
                   "separation": 8.0, "ring": 1.0},
        "crp": {"n": 100, "alpha": 5.0, "kappa": 2.0},
        "params": {"beta1p": 2.0, "beta2p": 2.0, "beta3p": 1.0,
                   "beta1mu": -2.0, "beta2mu": 0.5, "beta3mu": 1.0,
                   "v": 0.02},
        # block mode: open probability by cluster membership instead of
        # by distance (clusters generator only)
        "p_within": None,
        "p_between": None,
        "weeks": 52,
    },
    "stats": {"clustering": "transitivity"},
    "ppc": {"replicates": 100, "conditional": False},
    "predict": {
        "q": [0.001, 0.002, 0.01],
        "scorers": ["random", "observed", "geodesic", "geodesic_calls",
                    "model", "oracle"],
        "write_scores": True,
    },
    "export": {"draw": "max_loglik", "jitter": False, "half_width": 0.03,
               "svg": True, "edges": False},
    "scaling": {"alphas": [0.5, 20, 300], "sizes": [100, 200],
                "sweeps": 200, "burn_in": 100},
}


# --- config handling --------------------------------------------------------------------

def _merge(base, over, where=""):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if k not in base:
            raise ConfigError(f"unknown config key {where}{k!r}")
        if isinstance(base[k], dict) and k not in ("params",):
            if not isinstance(v, dict):
                raise ConfigError(f"config key {where}{k!r} must be an object")
            out[k] = _merge(base[k], v, f"{where}{k}.")
        else:
            out[k] = v
    return out


def load_config(path=None, overrides=None) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                user = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON ({e})") from None
        if not isinstance(user, dict):
            raise ConfigError(f"{path}: top level must be an object")
        # an echoed config records the command that wrote it
        user.pop("command", None)
        cfg = _merge(cfg, user)
    for dotted, value in (overrides or {}).items():
        node = cfg
        *head, last = dotted.split(".")
        for h in head:
            node = node[h]
        node[last] = value
    return cfg


def _check_path(cfg, key, kind="file"):
    p = cfg.get(key)
    if p is None:
        raise ConfigError(f"missing required setting {key!r}")
    ok = Path(p).is_file() if kind == "file" else Path(p).is_dir()
    if not ok:
        raise ConfigError(f"{key} does not exist: {p}")
    return Path(p)


def _variant(cfg) -> Variant:
    try:
        return Variant(cfg["variant"])
    except ValueError:
        raise ConfigError(f"unknown variant {cfg['variant']!r}") from None


def sampler_config(cfg) -> SamplerConfig:
    try:
        return SamplerConfig(variant=_variant(cfg), D=int(cfg["D"]),
                             seed=cfg["seed"], **cfg["sampler"])
    except TypeError as e:
        raise ConfigError(str(e)) from None


def hyper_config(cfg) -> HyperpriorConfig:
    try:
        return HyperpriorConfig(**cfg["hyper"])
    except TypeError as e:
        raise ConfigError(str(e)) from None


def _out_dir(cfg) -> Path:
    if cfg["out"] is None:
        raise ConfigError("missing required setting 'out'")
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _echo_config(cfg, out: Path, command: str):
    with open(out / "config.json", "w", encoding="utf-8") as fh:
        json.dump({"command": command, **cfg}, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, default=_jsonable)
        fh.write("\n")


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.integer, np.floating, np.bool_)):
        return x.item()
    if isinstance(x, tuple):
        return list(x)
    raise TypeError(f"not serializable: {type(x)}")


# --- data loading -----------------------------------------------------------------------

def load_tables(cfg):
    """Read the input CSV; returns ``(calib, holdout, full, ids)``."""
    path = _check_path(cfg, "input")
    known = None
    if cfg["population_size"] is not None:
        known = [str(i) for i in range(int(cfg["population_size"]))]
    records, n, info = read_records_csv(path, known_ids=known)
    span = (ObservationWindow(*cfg["span"]) if cfg["span"] is not None
            else data_span(records))
    boundary = cfg["boundary_week"]
    if boundary is None:
        boundary = (span.start_week + span.end_week) // 2
    outside = [r for r in records if not span.contains(r.week)]
    if outside:
        raise DataError(f"{len(outside)} records fall outside span "
                        f"[{span.start_week}, {span.end_week})")
    calib, hold = split_windows(records, n, int(boundary), span)
    full = build_dyad_table(records, n, span)
    return calib, hold, full, info["ids"]


def load_draws(cfg):
    path = _check_path(cfg, "draws")
    try:
        draws = read_draws(path)
    except ValueError as e:
        raise DataError(str(e)) from None
    if not draws:
        raise DataError(f"{path}: no draws")
    return draws


# --- commands ---------------------------------------------------------------------------

def cmd_simulate(cfg):
    out = _out_dir(cfg)
    sim = cfg["simulate"]
    rng = np.random.default_rng(cfg["seed"])
    variant = _variant(cfg)
    gen = sim["generator"]
    if gen == "clusters":
        centers = np.asarray(sim["centers"], dtype=float)
        if len(sim["sizes"]) != len(centers):
            raise ConfigError("simulate.sizes and simulate.centers differ in length")
        coords, labels = cluster_coordinates(sim["sizes"], centers,
                                             sim["spread"], rng)
    elif gen == "nested":
        coords, labels, _ = nested_cluster_coordinates(**sim["nested"])
    elif gen == "crp":
        c = sim["crp"]
        coords, labels = crp_coordinates(c["n"], c["alpha"], c["kappa"],
                                         int(cfg["D"]), rng)
    else:
        raise ConfigError(f"unknown generator {gen!r}")
    # keep only the coefficients the variant uses
    keys = PopulationParams.from_xi(np.zeros(len(XI_NAMES[variant])),
                                    variant).named()
    named = {k: v for k, v in sim["params"].items() if k in keys}
    try:
        params = PopulationParams.from_named(named, variant)
    except (TypeError, ValueError, KeyError) as e:
        raise ConfigError(f"simulate.params: {e}") from None
    weeks = int(sim["weeks"])
    if weeks < 1:
        raise ConfigError("simulate.weeks must be positive")
    block = None
    if sim["p_within"] is not None or sim["p_between"] is not None:
        if gen != "clusters":
            raise ConfigError("p_within/p_between need the clusters generator")
        pw, pb = sim["p_within"], sim["p_between"]
        if pw is None or pb is None or not (0 <= pw <= 1 and 0 <= pb <= 1):
            raise ConfigError("p_within and p_between must both be in [0, 1]")
        block = (labels, float(pw), float(pb))
    records, truth = simulate_records(coords, params, weeks, rng, block=block)
    write_records_csv(out / "records.csv", records)
    _write_json(out / "truth.json", {
        "n_individuals": int(coords.shape[0]), "weeks": weeks,
        "variant": variant.value, "params": params.named(),
        "coordinates": coords, "labels": np.asarray(labels),
    })
    with open(out / "truth_dyads.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("i", "j", "p", "mu", "open", "rate", "count"))
        for row in zip(truth["rows"].tolist(), truth["cols"].tolist(),
                       truth["p"].tolist(), truth["mu"].tolist(),
                       truth["open"].astype(int).tolist(),
                       truth["rate"].tolist(), truth["counts"].tolist()):
            w.writerow((row[0], row[1], repr(row[2]), repr(row[3]), row[4],
                        repr(row[5]), row[6]))
    # let a later run on this output see everyone over the full span
    cfg["population_size"] = int(coords.shape[0])
    cfg["span"] = [0, weeks]
    _echo_config(cfg, out, "simulate")
    print(f"wrote {len(records)} records for {coords.shape[0]} individuals to {out}")


def cmd_fit(cfg):
    calib, hold, full, _ = load_tables(cfg)
    table = {"calibration": calib, "full": full}.get(cfg["fit_window"])
    if table is None:
        raise ConfigError(f"unknown fit_window {cfg['fit_window']!r}")
    sc, hc = sampler_config(cfg), hyper_config(cfg)
    out = _out_dir(cfg)
    _echo_config(cfg, out, "fit")
    every = max(1, sc.sweeps // 20)

    def progress(s, state):
        if s % every == 0:
            log.info("sweep %d/%d k=%d alpha=%.3g", s, sc.sweeps,
                     state.clusters.k, state.alpha)

    res = run_chain(table, sc, hc, progress=progress)
    write_draws(out / "draws.jsonl", res.draws)
    summary = res.summary()
    summary["window"] = [table.window.start_week, table.window.end_week]
    summary["n_nonempty"] = table.n_nonempty
    _write_json(out / "summary.json", summary)
    names = XI_NAMES[sc.variant]
    with open(out / "trace.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("sweep", "k", "alpha", "kappa", "loglik", "eval_count") + names)
        for s in range(len(res.k_trace)):
            w.writerow((s + 1, int(res.k_trace[s]), repr(float(res.alpha_trace[s])),
                        repr(float(res.kappa_trace[s])),
                        repr(float(res.loglik_trace[s])), int(res.eval_trace[s]),
                        *(repr(float(x)) for x in res.xi_trace[s])))
    print(f"{len(res.draws)} draws, mean k {summary['mean_k']}, "
          f"acceptance {summary['acceptance_rate']:.3f}, "
          f"{summary['wall_time']:.1f}s -> {out}")


def cmd_stats(cfg):
    calib, hold, full, _ = load_tables(cfg)
    out = _out_dir(cfg)
    _echo_config(cfg, out, "stats")
    report = ns.descriptive_report(calib, hold, full)
    _write_json(out / "stats.json", report)
    with open(out / "stats.txt", "w", encoding="utf-8") as fh:
        fh.write(ns.format_report(report) + "\n")
    kind = cfg["stats"]["clustering"]
    for name, t in (("calibration", calib), ("holdout", hold), ("full", full)):
        st = ns.network_stats(t, kind)
        for hname, h in st.hists().items():
            with open(out / f"hist_{name}_{hname}.csv", "w", newline="",
                      encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(("bin", "count"))
                labels = list(range(len(h)))
                if hname == "geodesic":
                    labels[-1] = "unreachable"
                for b, c in zip(labels, h.tolist()):
                    w.writerow((b, c))
    print(ns.format_report(report))


def cmd_ppc(cfg):
    calib, hold, _, _ = load_tables(cfg)
    draws = load_draws(cfg)
    out = _out_dir(cfg)
    _echo_config(cfg, out, "ppc")
    p = cfg["ppc"]
    rep = ns.run_ppc(draws, hold, int(p["replicates"]),
                     rng=np.random.default_rng(cfg["seed"]),
                     condition_on=calib if p["conditional"] else None,
                     clustering_kind=cfg["stats"]["clustering"])
    _write_json(out / "ppc.json", rep.to_dict())
    for name, h in rep.hists.items():
        with open(out / f"ppc_{name}.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("bin", "observed") + tuple(f"q{q}" for q in ns.QUANTILES)
                       + ("outside",))
            for b in range(h["observed"].size):
                w.writerow((b, repr(float(h["observed"][b])),
                            *(repr(float(x)) for x in h["envelope"][:, b]),
                            int(h["outside"][b])))
    print(f"coverage {rep.coverage():.3f}; clustering "
          f"{'outside' if rep.scalars['clustering']['outside'] else 'inside'}"
          " its envelope")


def cmd_predict(cfg):
    calib, hold, _, _ = load_tables(cfg)
    pc = cfg["predict"]
    qs = [float(q) for q in pc["q"]]
    for q in qs:
        if not 0 < q < 1:
            raise ConfigError(f"q must be in (0, 1), got {q}")
    out = _out_dir(cfg)
    rng = np.random.default_rng(cfg["seed"])
    n = calib.n_individuals
    rows = []
    model_scores = None
    for name in pc["scorers"]:
        tiebreak = None
        if name == "random":
            scores = ns.random_scorer(n, rng)
        elif name == "observed":
            scores = ns.observed_scorer(calib)
        elif name == "geodesic":
            scores, tiebreak = ns.geodesic_scorer(calib, "random")
        elif name == "geodesic_calls":
            scores, tiebreak = ns.geodesic_scorer(calib, "calls")
        elif name == "model":
            scores = model_scores = ns.model_scorer(load_draws(cfg), calib, hold.T)
        elif name == "oracle":
            scores = ns.oracle_scorer(hold)
        else:
            raise ConfigError(f"unknown scorer {name!r}")
        for q in qs:
            r = ns.lift(scores, calib, hold, q, tiebreak=tiebreak, rng=rng)
            rows.append({"scorer": name, **asdict(r)})
    _echo_config(cfg, out, "predict")
    _write_json(out / "lift.json", rows)
    with open(out / "lift.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    if model_scores is not None and pc["write_scores"]:
        iu = np.triu_indices(n, 1)
        np.savez_compressed(out / "scores.npz", i=iu[0], j=iu[1],
                            score=model_scores[iu])
    for r in rows:
        print(f"{r['scorer']:>15s}  q={r['q']:<6g} lift {r['micro']:.4f} "
              f"(per-person {r['macro']:.4f})")


def _select_draw(draws, rule):
    if rule == "max_loglik":
        return max(draws, key=lambda d: d.loglik)
    if rule == "last":
        return draws[-1]
    if isinstance(rule, int):
        for d in draws:
            if d.sweep == rule:
                return d
        raise ConfigError(f"no stored draw at sweep {rule}")
    raise ConfigError(f"unknown draw selection {rule!r}")


def cmd_export(cfg):
    ex = cfg["export"]
    if not ex["half_width"] >= 0:
        raise ConfigError("export.half_width must be nonnegative")
    draws = load_draws(cfg)
    d = _select_draw(draws, ex["draw"])
    if ex["svg"] and d.sites.shape[1] > 2:
        raise ConfigError(f"SVG export needs D=2 (draw has D={d.sites.shape[1]}); "
                          "set export.svg to false and use the CSV")
    ids = None
    calib = None
    if cfg["input"] is not None:
        calib, _, _, ids = load_tables(cfg)
        if calib.n_individuals != d.assignment.size:
            raise DataError("input and draws cover different populations")
    out = _out_dir(cfg)
    _echo_config(cfg, out, "export")
    coords = d.coordinates().copy()
    if ex["jitter"]:
        rng = np.random.default_rng(cfg["seed"])
        h = ex["half_width"]
        coords += rng.uniform(-h, h, coords.shape)
    with open(out / "coordinates.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("individual",) + tuple(f"x{t + 1}" for t in range(coords.shape[1]))
                   + ("site",))
        for i in range(coords.shape[0]):
            w.writerow((ids[i] if ids else i, *(repr(float(x)) for x in coords[i]),
                        int(d.assignment[i])))
    if ex["svg"]:
        edges = None
        if ex["edges"]:
            if calib is None:
                raise ConfigError("export.edges needs input to read observed edges")
            ci, cj, _ = calib.arrays()
            edges = list(zip(ci.tolist(), cj.tolist()))
        (out / "scatter.svg").write_text(
            svg_scatter(coords, edges, title=f"sweep {d.sweep}, k={d.k}"),
            encoding="utf-8")
    print(f"exported sweep {d.sweep} (k={d.k}, loglik {d.loglik:.2f}) to {out}")


def svg_scatter(coords, edges=None, title="", size=600, pad=30):
    """Minimal SVG scatter of 2-D coordinates with optional edge lines."""
    coords = np.asarray(coords, dtype=float)
    lo, hi = coords.min(axis=0), coords.max(axis=0)
    span = float(max(hi - lo)) or 1.0
    sc = (size - 2 * pad) / span

    def xy(c):
        return pad + (c[0] - lo[0]) * sc, size - pad - (c[1] - lo[1]) * sc

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" '
             f'height="{size}" viewBox="0 0 {size} {size}">',
             '<rect width="100%" height="100%" fill="white"/>']
    if title:
        parts.append(f'<text x="{pad}" y="{pad - 10}" font-size="12" '
                     f'font-family="sans-serif">{title}</text>')
    if edges:
        parts.append('<g stroke="#999" stroke-width="0.3" stroke-opacity="0.5">')
        for a, b in edges:
            (x1, y1), (x2, y2) = xy(coords[a]), xy(coords[b])
            parts.append(f'<line x1="{x1:.2f}" y1="{y1:.2f}" x2="{x2:.2f}" y2="{y2:.2f}"/>')
        parts.append("</g>")
    parts.append('<g fill="#1f4e79" fill-opacity="0.6">')
    for c in coords:
        x, y = xy(c)
        parts.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="2"/>')
    parts.append("</g></svg>")
    return "\n".join(parts) + "\n"


def cmd_scaling(cfg):
    calib, _, _, _ = load_tables(cfg)
    out = _out_dir(cfg)
    _echo_config(cfg, out, "scaling")
    s = cfg["scaling"]
    too_big = [n for n in s["sizes"] if n > calib.n_individuals]
    if too_big:
        raise ConfigError(f"scaling.sizes {too_big} exceed N={calib.n_individuals}")
    kw = {k: v for k, v in cfg["sampler"].items() if k not in ("sweeps", "burn_in")}
    rows = scaling_experiment(calib, s["alphas"], s["sizes"], sweeps=s["sweeps"],
                              burn_in=s["burn_in"], variant=_variant(cfg),
                              seed=cfg["seed"], D=int(cfg["D"]), **kw)
    _write_json(out / "scaling.json", rows)
    with open(out / "scaling.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    print(f"{'n':>6s} {'alpha':>7s} {'mean k':>8s} {'E(k)':>8s} {'evals':>10s} {'dyads':>10s}")
    for r in rows:
        print(f"{r['n']:6d} {r['alpha']:7g} {r['mean_k']:8.1f} {r['expected_k']:8.1f} "
              f"{r['mean_evals']:10.0f} {r['n_dyads']:10d}")


COMMANDS = {"simulate": cmd_simulate, "fit": cmd_fit, "stats": cmd_stats,
            "ppc": cmd_ppc, "predict": cmd_predict, "export": cmd_export,
            "scaling": cmd_scaling}


# --- entry point ------------------------------------------------------------------------

def build_parser():
    ap = argparse.ArgumentParser(
        prog="dplsm",
        description="Dirichlet-process latent space model for dyadic contact data.")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="JSON config file")
    ap.add_argument("--input", help="contact CSV (caller_id,callee_id,week)")
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--draws", help="draw file (JSON lines) from `fit`")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--threads", type=int, help="cap on worker threads")
    ap.add_argument("--variant", choices=[v.value for v in Variant])
    ap.add_argument("--boundary-week", type=int)
    ap.add_argument("--fixed-alpha", type=float)
    ap.add_argument("--q", type=float, action="append",
                    help="lift fraction (repeatable)")
    ap.add_argument("--sweeps", type=int)
    ap.add_argument("--burn-in", type=int)
    ap.add_argument("--population-size", type=int)
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def _overrides(args) -> dict:
    o = {}
    for flag, key in (("input", "input"), ("out", "out"), ("draws", "draws"),
                      ("seed", "seed"), ("threads", "threads"),
                      ("variant", "variant"), ("boundary_week", "boundary_week"),
                      ("fixed_alpha", "hyper.fixed_alpha"), ("q", "predict.q"),
                      ("sweeps", "sampler.sweeps"), ("burn_in", "sampler.burn_in"),
                      ("population_size", "population_size")):
        val = getattr(args, flag)
        if val is not None:
            o[key] = val
    return o


def _check_threads(n):
    # every kernel here runs on one thread, so any positive cap is honoured
    if not isinstance(n, int) or n < 1:
        raise ConfigError("threads must be a positive integer")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, _overrides(args))
        if int(cfg["D"]) < 2:
            raise ConfigError("D must be at least 2")
        _check_threads(cfg["threads"])
        COMMANDS[args.command](cfg)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except (SamplerError, FloatingPointError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as e:
        # invalid settings rejected by the library
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
