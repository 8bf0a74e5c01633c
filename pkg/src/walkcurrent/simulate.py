"""Microscopic simulation of the space-time particle current.

For scaling parameter n, the current Y_n(t, r) counts, with sign, the
particles that sit on the wrong side of the moving reference line
floor(n*v*t) + floor(r*sqrt(n)) at time n*t relative to where they started:
+1 for a particle started right of the line's anchor that ends at or below
the line, -1 for one started at or left of the anchor that ends above it.

Replicas are simulated only inside a certified start-site window; the
probability that any omitted particle could have affected any measured
value is bounded by Chernoff tails and kept below an explicit tolerance.
An exact single-point distribution oracle (convolution over window sites)
is provided for validation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Optional, Tuple

import numpy as np
from scipy import stats

from .errors import TruncationBudgetError, WindowUnreachableError
from .kernel import JumpKernel, chernoff_log_tail, sample_displacement, walk_pmf
from .occupancy import OccupancyModel

REPLICA_STREAM = 0
TILT_STREAM = 1

# Floor with a one-sided snap guard: products such as n*v*t that are exact
# integers in real arithmetic must not floor down on a 1-ulp float error.
BRACKET_GUARD = 1e-9


def bracket(x: float) -> int:
    """Gauss bracket floor(x), guarded against float jitter just below ints."""
    return int(math.floor(x + BRACKET_GUARD))


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    """Everything a current-simulation experiment needs, seeds included."""

    n: int
    T: float
    S: float
    t_grid: Tuple[float, ...]
    r_grid: Tuple[float, ...]
    kernel: JumpKernel
    occupancy: OccupancyModel
    master_seed: int
    replicas: int = 1
    window_tol: float = 1e-6
    max_window_sites: int = 4_000_000

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be a positive integer")
        if not (self.T > 0.0 and self.S > 0.0):
            raise ValueError("T and S must be positive")
        tg = tuple(float(t) for t in self.t_grid)
        rg = tuple(float(r) for r in self.r_grid)
        if not tg or any(b <= a for a, b in zip(tg, tg[1:])):
            raise ValueError("t_grid must be nonempty and strictly ascending")
        if not rg or any(b <= a for a, b in zip(rg, rg[1:])):
            raise ValueError("r_grid must be nonempty and strictly ascending")
        if tg[0] < 0.0 or tg[-1] > self.T:
            raise ValueError("t_grid must lie in [0, T]")
        if rg[0] < -self.S or rg[-1] > self.S:
            raise ValueError("r_grid must lie in [-S, S]")
        if not (0.0 < self.window_tol <= 1e-4):
            raise ValueError("window_tol must lie in (0, 1e-4]")
        if self.replicas < 1:
            raise ValueError("replicas must be >= 1")
        object.__setattr__(self, "t_grid", tg)
        object.__setattr__(self, "r_grid", rg)

    @property
    def sqrt_n(self) -> float:
        return math.sqrt(self.n)

    def anchors(self) -> list[int]:
        """Start-site anchor floor(r*sqrt(n)) for each grid r."""
        return [bracket(r * self.sqrt_n) for r in self.r_grid]

    def line_shifts(self) -> list[int]:
        """Reference-line shift floor(n*v*t) for each grid t."""
        return [bracket(self.n * self.kernel.v * t) for t in self.t_grid]

    def grid_points(self) -> list[Tuple[float, float]]:
        return [(t, r) for t in self.t_grid for r in self.r_grid]


@dataclass(frozen=True, eq=False)
class CurrentField:
    """One replica's currents on the (t_grid x r_grid) lattice of points."""

    values: np.ndarray   # int64, shape (len(t_grid), len(r_grid))
    scaled: np.ndarray   # values * n**-0.25
    replica_seed: int


def replica_rng(master_seed: int, stream: int, index: int) -> np.random.Generator:
    """Deterministic per-replica generator; independent of execution order."""
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(stream, int(index)))
    return np.random.Generator(np.random.PCG64(seq))


# --------------------------------------------------------------------------
# certified start-site window
# --------------------------------------------------------------------------

def _window_sites(config: ExperimentConfig, width: int) -> int:
    lo = bracket(-config.S * config.sqrt_n) - width
    hi = bracket(config.S * config.sqrt_n) + width
    return hi - lo + 1


def window_bound(config: ExperimentConfig, width: int) -> float:
    """Expected number of out-of-window particles that could affect any
    measured point, bounded by two-sided Chernoff tails per distance.

    A particle at distance d beyond either window edge must move against
    its own centering by at least d - 1 lattice sites to sit on the wrong
    side of any measured line, at some measured time; union-bound over grid
    times and both edges.
    """
    rho0 = config.occupancy.rho0
    if rho0 == 0.0:
        return 0.0
    total = 0.0
    cutoff = 1e-4 * config.window_tol
    for t in config.t_grid:
        if t <= 0.0:
            continue
        tau = config.n * t
        d0 = width + 1
        acc = 0.0
        while True:
            ds = np.arange(d0, d0 + 512, dtype=float)
            terms = np.minimum(
                np.exp(chernoff_log_tail(config.kernel, tau, np.maximum(ds - 1.0, 0.0))),
                1.0)
            acc += float(terms.sum())
            if rho0 * 2.0 * acc > config.window_tol:
                return rho0 * 2.0 * acc  # already failed; no need to finish
            last, prev = terms[-1], terms[-2]
            if last == 0.0:
                break
            ratio = last / prev
            if ratio < 1.0:
                # the log-bound is concave in d, so the tail is dominated
                # by a geometric series with this ratio
                rem = last * ratio / (1.0 - ratio)
                if rem < cutoff:
                    acc += rem
                    break
            d0 += 512
            if d0 > 50_000_000:
                raise WindowUnreachableError("tail bound would not converge")
        total += 2.0 * acc
    return rho0 * total


def truncation_radius(config: ExperimentConfig) -> int:
    """Smallest window width on a doubling grid meeting window_tol."""
    width = 16
    while True:
        if _window_sites(config, width) > config.max_window_sites:
            raise WindowUnreachableError(
                f"window would need more than {config.max_window_sites} sites")
        if window_bound(config, width) <= config.window_tol:
            return width
        width *= 2


# --------------------------------------------------------------------------
# replica simulation
# --------------------------------------------------------------------------

def signed_crossing_count(starts: np.ndarray, positions: np.ndarray,
                          anchor: int, line: int) -> int:
    """Net current for given particles: +1 per (start > anchor, pos <= line),
    -1 per (start <= anchor, pos > line)."""
    right = starts > anchor
    plus = int(np.count_nonzero(right & (positions <= line)))
    minus = int(np.count_nonzero(~right & (positions > line)))
    return plus - minus


def simulate_replica(config: ExperimentConfig, replica_index: int,
                     window: Optional[int] = None,
                     return_particles: bool = False):
    """Simulate one replica of the current field.

    Draws the occupancy profile on the certified window, evolves every
    particle jointly across the time grid via independent increments, and
    counts signed crossings for each (t, r).  Deterministic given
    (master_seed, replica_index).
    """
    if not (0 <= replica_index < config.replicas):
        raise ValueError("replica_index out of range")
    w = truncation_radius(config) if window is None else int(window)
    lo = bracket(-config.S * config.sqrt_n) - w
    hi = bracket(config.S * config.sqrt_n) + w
    rng = replica_rng(config.master_seed, REPLICA_STREAM, replica_index)

    counts = config.occupancy.sample_counts(rng, hi - lo + 1)
    starts = np.repeat(np.arange(lo, hi + 1, dtype=np.int64), counts)
    pos = starts.copy()

    anchors = config.anchors()
    shifts = config.line_shifts()
    values = np.zeros((len(config.t_grid), len(config.r_grid)), np.int64)
    snapshots = []
    prev_t = 0.0
    for k, t in enumerate(config.t_grid):
        gap = config.n * (t - prev_t)
        prev_t = t
        if gap > 0.0:
            pos = pos + sample_displacement(config.kernel, gap, rng, size=starts.size)
        if return_particles:
            snapshots.append(pos.copy())
        for i, anchor in enumerate(anchors):
            values[k, i] = signed_crossing_count(starts, pos, anchor, anchor + shifts[k])

    fieldval = CurrentField(values=values, scaled=values * config.n ** -0.25,
                            replica_seed=replica_index)
    if return_particles:
        return fieldval, starts, snapshots
    return fieldval


def run_ensemble(config: ExperimentConfig,
                 window: Optional[int] = None) -> Iterator[CurrentField]:
    """Yield all replicas in index order; each depends only on its own seed."""
    w = truncation_radius(config) if window is None else int(window)
    for i in range(config.replicas):
        yield simulate_replica(config, i, window=w)


# --------------------------------------------------------------------------
# exact single-point distribution oracle
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CurrentPmf:
    """Exact pmf of Y_n(t, r) on offset_min .. offset_min+len(masses)-1."""

    offset_min: int
    masses: np.ndarray
    deficit: float

    def support(self) -> np.ndarray:
        return np.arange(self.offset_min, self.offset_min + self.masses.size)

    def mean(self) -> float:
        return float(np.dot(self.support(), self.masses))

    def var(self) -> float:
        s = self.support().astype(float)
        m = self.mean()
        return float(np.dot((s - m) ** 2, self.masses))

    def tail_geq(self, k: int) -> float:
        """P(Y >= k), summed from the top of the support."""
        idx = max(0, int(k) - self.offset_min)
        return float(self.masses[idx:].sum())


def _poisson_site_pmf(mu: float, tail_tol: float) -> tuple[np.ndarray, float]:
    if mu == 0.0:
        return np.array([1.0]), 0.0
    k_max = int(stats.poisson.isf(tail_tol, mu)) + 1
    while stats.poisson.sf(k_max, mu) >= tail_tol:
        k_max += 1
    pmf = stats.poisson.pmf(np.arange(k_max + 1), mu)
    return pmf, float(stats.poisson.sf(k_max, mu))


def _finite_site_pmf(values: np.ndarray, probs: np.ndarray, p: float) -> np.ndarray:
    # law of Binomial(eta, p) with eta drawn from the finite occupancy law
    vmax = int(values[-1])
    out = np.zeros(vmax + 1)
    for v, pv in zip(values, probs):
        out[:int(v) + 1] += pv * stats.binom.pmf(np.arange(int(v) + 1), int(v), p)
    return out


def exact_current_pmf(config: ExperimentConfig, t: float, r: float,
                      site_tail_tol: float = 1e-14,
                      window: Optional[int] = None) -> CurrentPmf:
    """Exact distribution of Y_n(t, r) by convolution over window sites.

    Site m > anchor contributes +Binomial(count, p_m) and site m <= anchor
    contributes -Binomial(count, q_m), where p_m is the walk's exact
    probability of ending at or below the reference line and q_m = 1 - p_m.
    Occupancy must be Poisson (thinned to an exact Poisson contribution,
    truncated at site_tail_tol per site) or finitely supported.
    """
    occ = config.occupancy
    if occ.kind == "geometric":
        raise ValueError("exact pmf needs a finite or Poisson occupancy law")
    w = truncation_radius(config) if window is None else int(window)
    lo = bracket(-config.S * config.sqrt_n) - w
    hi = bracket(config.S * config.sqrt_n) + w
    anchor = bracket(r * config.sqrt_n)
    line = anchor + bracket(config.n * config.kernel.v * t)

    tau = config.n * t
    if tau > 0.0:
        wp = walk_pmf(config.kernel, tau, mass_tol=1e-12)
        walk_deficit = wp.deficit
    else:
        wp = None
        walk_deficit = 0.0

    sites = np.arange(lo, hi + 1)
    if wp is None:
        p_site = (sites <= line).astype(float)  # X(0) = 0: below iff m <= line
    else:
        p_site = np.asarray(wp.cdf(line - sites), float)

    acc = np.array([1.0])
    acc_min = 0
    deficit = walk_deficit
    for m, p in zip(sites, p_site):
        is_right = m > anchor
        cross = p if is_right else 1.0 - p
        if cross <= 0.0:
            continue
        if occ.kind == "poisson":
            site_pmf, d = _poisson_site_pmf(occ.rho0 * cross, site_tail_tol)
            deficit += d
        else:
            site_pmf = _finite_site_pmf(occ._values if occ.kind == "custom"
                                        else np.array([int(occ.rho0)]),
                                        occ._probs if occ.kind == "custom"
                                        else np.array([1.0]),
                                        cross)
        if site_pmf.size == 1:
            continue
        if is_right:
            acc = np.convolve(acc, site_pmf)
        else:
            acc = np.convolve(acc, site_pmf[::-1])
            acc_min -= site_pmf.size - 1
        if acc.size > 4_000_000:
            raise TruncationBudgetError("current pmf support exceeded the cap")

    nz = np.nonzero(acc)[0]
    lo_i, hi_i = int(nz[0]), int(nz[-1])
    return CurrentPmf(offset_min=acc_min + lo_i, masses=acc[lo_i:hi_i + 1],
                      deficit=float(deficit))
