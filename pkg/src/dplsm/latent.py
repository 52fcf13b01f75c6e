"""Latent coordinates: the spherical base measure, cluster tables, and the
Polya-urn machinery of the Dirichlet process prior."""

from __future__ import annotations

import numpy as np
from scipy.special import digamma, gammainc, gammaln


def _rng(rng):
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


def _check_kappa(kappa):
    if not kappa > 0:
        raise ValueError(f"radius shape must be positive, got {kappa}")


# --- base measure -------------------------------------------------------------

def sample_angles(D: int, rng=None, size=None):
    """Draw angles of a uniformly distributed direction in ``D`` dimensions.

    The first angle is uniform on (0, 2*pi); angle ``j >= 2`` has density
    proportional to ``sin(theta) ** (j - 1)`` on (0, pi) and is drawn by
    rejection from the uniform.

    Returns an array of shape ``(D - 1,)`` or ``(size, D - 1)``.
    """
    if D < 2:
        raise ValueError(f"need D >= 2, got {D}")
    rng = _rng(rng)
    n = 1 if size is None else int(size)
    out = np.empty((n, D - 1))
    out[:, 0] = rng.uniform(0.0, 2 * np.pi, n)
    for j in range(2, D):
        col = np.empty(n)
        todo = np.arange(n)
        while todo.size:
            # acceptance rate ~ sqrt(2 / (pi * j)), oversample accordingly
            m = todo.size
            theta = rng.uniform(0.0, np.pi, m)
            keep = rng.uniform(0.0, 1.0, m) < np.sin(theta) ** (j - 1)
            col[todo[keep]] = theta[keep]
            todo = todo[~keep]
        out[:, j - 1] = col
    return out[0] if size is None else out


def _log_radius_scale(kappa):
    # log of Gamma(2/kappa) / Gamma(1/kappa), the factor that pins E(rho) = 1
    return gammaln(2.0 / kappa) - gammaln(1.0 / kappa)


def _scaled_power(rho, kappa):
    # (rho * scale) ** kappa, in logs so small kappa cannot overflow the scale
    with np.errstate(divide="ignore"):
        return np.exp(kappa * (np.log(rho) + _log_radius_scale(kappa)))


def sample_radius(kappa: float, rng=None, size=None):
    """Draw radii with density :func:`radius_density` (mean one).

    ``rho ** kappa`` is gamma with shape ``1/kappa`` and rate
    ``(Gamma(2/kappa) / Gamma(1/kappa)) ** kappa``.
    """
    _check_kappa(kappa)
    rng = _rng(rng)
    w = rng.gamma(1.0 / kappa, np.exp(-kappa * _log_radius_scale(kappa)), size)
    return w ** (1.0 / kappa)


def radius_logpdf(rho, kappa):
    """Log density of the unit-mean folded generalized-Laplace radius."""
    _check_kappa(kappa)
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0):
        raise ValueError("radius must be nonnegative")
    lg1 = gammaln(1.0 / kappa)
    lg2 = gammaln(2.0 / kappa)
    return np.log(kappa) + lg2 - 2 * lg1 - _scaled_power(rho, kappa)


def radius_density(rho, kappa):
    return np.exp(radius_logpdf(rho, kappa))


def radius_cdf(rho, kappa):
    _check_kappa(kappa)
    rho = np.asarray(rho, dtype=float)
    return gammainc(1.0 / kappa, _scaled_power(np.maximum(rho, 0), kappa))


def spherical_to_cartesian(rho, theta):
    """Map radius ``rho`` and angles ``theta`` (last axis) to Cartesian
    coordinates; broadcasts over leading axes.

    The full-circle angle ``theta[..., 0]`` is the innermost one and the
    angle with the highest sine power comes first, so power-sine angles
    give a uniform direction.
    """
    theta = np.asarray(theta, dtype=float)
    rho = np.asarray(rho, dtype=float)
    D = theta.shape[-1] + 1
    z = np.empty(theta.shape[:-1] + (D,))
    sin_prod = np.ones(theta.shape[:-1])
    for j in range(D - 1):
        th = theta[..., D - 2 - j]
        z[..., j] = sin_prod * np.cos(th)
        sin_prod = sin_prod * np.sin(th)
    z[..., D - 1] = sin_prod
    return z * rho[..., None]


def sample_h0(kappa: float, D: int, rng=None, size=None):
    """Draw latent coordinates from the base measure: uniform direction
    times a unit-mean radius with shape ``kappa``."""
    rng = _rng(rng)
    theta = sample_angles(D, rng, size=1 if size is None else size)
    rho = sample_radius(kappa, rng, size=theta.shape[0])
    z = spherical_to_cartesian(rho, theta)
    return z[0] if size is None else z


def h0_logpdf(z, kappa):
    """Log density of the base measure at Cartesian points ``z`` (last axis).

    A uniform direction times a radius with density ``f`` gives
    ``f(|z|) / (|z| ** (D - 1) * A_D)`` with ``A_D`` the unit-sphere area.
    """
    z = np.asarray(z, dtype=float)
    D = z.shape[-1]
    rho = np.sqrt(np.sum(z * z, axis=-1))
    log_area = np.log(2.0) + 0.5 * D * np.log(np.pi) - gammaln(0.5 * D)
    with np.errstate(divide="ignore"):
        return radius_logpdf(rho, kappa) - (D - 1) * np.log(rho) - log_area


def latent_distance(za, zb):
    za = np.asarray(za, dtype=float)
    zb = np.asarray(zb, dtype=float)
    if za.shape[-1] != zb.shape[-1]:
        raise ValueError(
            f"dimension mismatch: {za.shape[-1]} vs {zb.shape[-1]}")
    return np.sqrt(np.sum((za - zb) ** 2, axis=-1))


def pairwise_distances(a, b=None):
    """Euclidean distance matrix between the rows of ``a`` and ``b``."""
    a = np.asarray(a, dtype=float)
    b = a if b is None else np.asarray(b, dtype=float)
    diff = a[:, None, :] - b[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


# --- Polya urn ------------------------------------------------------------------

def crp_partition(alpha: float, n: int, rng=None):
    """Seat ``n`` individuals sequentially by the Polya urn; return labels."""
    if not alpha > 0:
        raise ValueError("concentration must be positive")
    rng = _rng(rng)
    labels = np.empty(n, dtype=np.int64)
    counts = []
    for i in range(n):
        u = rng.uniform(0.0, alpha + i)
        if u < alpha or not counts:
            labels[i] = len(counts)
            counts.append(1)
            continue
        c = np.cumsum(counts)
        j = int(np.searchsorted(c, u - alpha, side="right"))
        labels[i] = j
        counts[j] += 1
    return labels


def crp_simulate(alpha: float, n: int, rng=None, size=None):
    """Number of occupied sites after seating ``n`` individuals.

    Individual ``i`` (0-based) opens a new site with probability
    ``alpha / (alpha + i)`` independently of how earlier individuals were
    seated, so the urn's cluster count is drawn as a sum of those Bernoulli
    trials. :func:`crp_partition` seats people explicitly.
    """
    if not alpha > 0:
        raise ValueError("concentration must be positive")
    if n < 1:
        raise ValueError("need at least one individual")
    rng = _rng(rng)
    probs = alpha / (alpha + np.arange(n))
    reps = 1 if size is None else int(size)
    k = np.empty(reps, dtype=np.int64)
    chunk = max(1, 2_000_000 // n)
    for s in range(0, reps, chunk):
        e = min(reps, s + chunk)
        k[s:e] = (rng.uniform(size=(e - s, n)) < probs).sum(axis=1)
    return int(k[0]) if size is None else k


def expected_mass_points(alpha: float, n: int) -> float:
    """Large-``n`` approximation ``alpha * log((alpha + n) / alpha)``."""
    return alpha * np.log((alpha + n) / alpha)


def expected_mass_points_exact(alpha: float, n: int) -> float:
    """Exact urn expectation ``alpha * (digamma(alpha + n) - digamma(alpha))``."""
    return float(alpha * (digamma(alpha + n) - digamma(alpha)))


def crp_k_distribution(alpha: float, n: int):
    """Exact probabilities of ``k = 1..n`` occupied sites (index 0 is k=0).

    Uses the Poisson-binomial recursion over the independent new-site
    indicators; fine for ``n`` up to a few thousand.
    """
    probs = alpha / (alpha + np.arange(n))
    dist = np.zeros(n + 1)
    dist[0] = 1.0
    for i, p in enumerate(probs):
        dist[1:i + 2] = dist[1:i + 2] * (1 - p) + dist[0:i + 1] * p
        dist[0] *= 1 - p
    return dist


# --- cluster table --------------------------------------------------------------

class ClusterTable:
    """Individuals assigned to ``k`` distinct latent sites.

    Attributes
    ----------
    sites : ndarray, shape (k, D)
    assignment : ndarray, shape (N,)
        Site index per individual, or -1 while the individual is removed.
    occupancy : ndarray, shape (k,)

    Empty sites are deleted immediately, so site indices are not stable.
    """

    def __init__(self, sites, assignment):
        sites = np.atleast_2d(np.asarray(sites, dtype=float))
        assignment = np.asarray(assignment, dtype=np.int64).copy()
        k = sites.shape[0]
        if assignment.size and (assignment.min() < 0 or assignment.max() >= k):
            raise ValueError("assignment refers to a nonexistent site")
        occ = np.bincount(assignment, minlength=k)
        if np.any(occ == 0):
            raise ValueError("every site must have at least one member")
        self._sites = sites.copy()
        self.assignment = assignment
        self._occ = occ.astype(np.int64)
        self._k = k

    @classmethod
    def from_coordinates(cls, coords):
        """Group identical rows of ``coords`` into sites."""
        coords = np.asarray(coords, dtype=float)
        sites, inv = np.unique(coords, axis=0, return_inverse=True)
        return cls(sites, inv.ravel())

    @property
    def k(self) -> int:
        return self._k

    @property
    def D(self) -> int:
        return self._sites.shape[1]

    @property
    def n(self) -> int:
        return self.assignment.size

    @property
    def sites(self):
        return self._sites[: self._k]

    @property
    def occupancy(self):
        return self._occ[: self._k]

    def coordinates(self):
        """Per-individual coordinates, shape (N, D)."""
        return self.sites[self.assignment]

    def copy(self):
        out = ClusterTable.__new__(ClusterTable)
        out._sites = self._sites.copy()
        out.assignment = self.assignment.copy()
        out._occ = self._occ.copy()
        out._k = self._k
        return out

    def remove(self, i: int):
        """Detach individual ``i`` from its site.

        Returns the coordinate of the deleted site if ``i`` was its only
        member, else ``None``.
        """
        s = int(self.assignment[i])
        if s < 0:
            raise ValueError(f"individual {i} is not assigned")
        self.assignment[i] = -1
        self._occ[s] -= 1
        if self._occ[s] > 0:
            return None
        coord = self._sites[s].copy()
        last = self._k - 1
        if s != last:
            self._sites[s] = self._sites[last]
            self._occ[s] = self._occ[last]
            self.assignment[self.assignment == last] = s
        self._occ[last] = 0
        self._k -= 1
        return coord

    def assign(self, i: int, site: int):
        if self.assignment[i] >= 0:
            raise ValueError(f"individual {i} is already assigned")
        if not 0 <= site < self._k:
            raise ValueError(f"no site {site} (k={self._k})")
        self.assignment[i] = site
        self._occ[site] += 1

    def assign_new(self, i: int, coord) -> int:
        """Open a fresh site at ``coord`` holding only ``i``; return its index."""
        if self.assignment[i] >= 0:
            raise ValueError(f"individual {i} is already assigned")
        if self._k == self._sites.shape[0]:
            grow = max(8, self._k)
            self._sites = np.vstack([self._sites, np.zeros((grow, self.D))])
            self._occ = np.r_[self._occ, np.zeros(grow, dtype=np.int64)]
        s = self._k
        self._sites[s] = coord
        self._occ[s] = 1
        self.assignment[i] = s
        self._k += 1
        return s

    def move(self, site: int, coord):
        """Relocate every member of ``site`` to ``coord``."""
        if not 0 <= site < self._k:
            raise ValueError(f"no site {site} (k={self._k})")
        self._sites[site] = coord

    def check(self):
        """Raise if occupancy and assignment disagree."""
        occ = np.bincount(self.assignment, minlength=self._k)
        if occ.size != self._k or not np.array_equal(occ, self.occupancy):
            raise AssertionError("occupancy inconsistent with assignment")
        if np.any(self.occupancy < 1):
            raise AssertionError("empty site retained")
