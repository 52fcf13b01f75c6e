"""Fit the model to a simulated two-group network and see what it recovers.

Two groups sit far apart in a 2-D latent space, each made of five tight
sub-sites. Contacts are simulated for 52 weeks; the first 26 are used to fit
and the rest are held out. The script prints

* how often the posterior puts within-group dyads closer than cross-group ones,
* rank agreement between predicted and true open probabilities,
* lift at 1% for the model against a random scorer,
* posterior predictive coverage of the holdout network statistics.

Runs in about a minute on one core.

    python3 demos/synthetic_recovery.py
"""

import time

import numpy as np
from scipy import stats

from dplsm import netstats as ns
from dplsm.data import ObservationWindow, split_windows
from dplsm.model import LinkCoefficients, PopulationParams
from dplsm.sampler import SamplerConfig, run_chain
from dplsm.synth import nested_cluster_coordinates, simulate_records


def main(sweeps=1500, seed=0):
    truth = PopulationParams(LinkCoefficients(2.0, 2.0, 1.0, -2.0, 0.5, 1.0), 0.02)
    coords, groups, _ = nested_cluster_coordinates(n_groups=2, n_sub=5, size=20,
                                                   separation=8.0, ring=1.0)
    n = coords.shape[0]
    records, dyads = simulate_records(coords, truth, 52, np.random.default_rng(seed))
    calib, hold = split_windows(records, n, 26, ObservationWindow(0, 52))
    print(f"{n} people, {calib.n_nonempty} nonempty calibration dyads, "
          f"{hold.n_nonempty} in the holdout")

    t0 = time.perf_counter()
    out = run_chain(calib, SamplerConfig(variant="full", sweeps=sweeps,
                                         burn_in=sweeps // 3, thin=5, seed=seed))
    print(f"{sweeps} sweeps in {time.perf_counter() - t0:.0f}s, "
          f"mean number of sites {np.mean([d.k for d in out.draws]):.1f}")

    iu = np.triu_indices(n, 1)
    same = (groups[:, None] == groups[None, :])[iu]
    p_hat = ns.posterior_mean_p(out.draws)[iu]
    p_true = np.zeros((n, n))
    p_true[dyads["rows"], dyads["cols"]] = dyads["p"]
    print(f"posterior mean p: within {p_hat[same].mean():.3f}, "
          f"cross {p_hat[~same].mean():.3f}")
    print(f"Spearman vs true p: "
          f"{stats.spearmanr(p_hat, p_true[iu]).correlation:.3f}")

    scores = ns.model_scorer(out.draws, calib, hold.T)
    model = ns.lift(scores, calib, hold, 0.01, rng=0).micro
    rand = np.mean([ns.lift(ns.random_scorer(n, r), calib, hold, 0.01, rng=r).micro
                    for r in range(20)])
    print(f"lift@1%: model {model:.3f}, random {rand:.4f}")

    rep = ns.run_ppc(out.draws, hold, replicates=100, rng=seed)
    print(f"PPC coverage of holdout statistics: {100 * rep.coverage():.1f}%")
    c = rep.scalars["clustering"]
    print(f"clustering observed {c['observed']:.3f}, "
          f"95% band [{c['envelope'][0]:.3f}, {c['envelope'][-1]:.3f}]")


if __name__ == "__main__":
    main()
