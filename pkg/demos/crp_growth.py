"""How many sites does the Chinese-restaurant prior create?

Compares the simulated mean number of occupied sites with the exact
expectation and with the large-N approximation a*ln((a+N)/a). The
approximation is poor for small concentration, which is worth knowing
before reading it as a rule of thumb.

    python3 demos/crp_growth.py
"""

import numpy as np
from scipy.special import digamma

from dplsm import latent


def main(seed=0):
    rng = np.random.default_rng(seed)
    print(f"{'alpha':>6} {'N':>6} {'simulated':>10} {'exact':>8} {'approx':>8}")
    for a in (0.5, 5, 20, 300):
        for n in (100, 1000, 4781):
            sim = latent.crp_simulate(a, n, rng, 500).mean()
            exact = a * (digamma(a + n) - digamma(a))
            approx = latent.expected_mass_points(a, n)
            print(f"{a:>6g} {n:>6} {sim:>10.2f} {exact:>8.2f} {approx:>8.2f}")


if __name__ == "__main__":
    main()
