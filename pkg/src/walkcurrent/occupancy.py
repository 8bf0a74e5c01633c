"""Initial occupancy laws: per-site samplers and their cumulant apparatus.

Each model is a nonnegative-integer law used i.i.d. across lattice sites.
Besides sampling, a model exposes its log-MGF, the tilted mean (the log-MGF
derivative), and the convex dual -- the three ingredients the rate-function
module consumes.  Models are restricted to an analytically whitelisted set
(Poisson, deterministic, geometric, finite custom pmf) so every constraint
the rest of the package relies on is checkable at construction time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp

from .errors import MgfDomainError

INF = math.inf


@dataclass(frozen=True, eq=False)
class OccupancyModel:
    """Per-site occupancy law with mean rho0 and variance v0.

    Use the classmethod constructors; `kind` is one of "poisson",
    "deterministic", "geometric", "custom".
    """

    kind: str
    rho0: float
    v0: float
    # geometric: success ratio s = rho/(1+rho); custom: support/probs arrays
    _s: float = 0.0
    _values: Optional[np.ndarray] = field(default=None)
    _probs: Optional[np.ndarray] = field(default=None)

    # ---------------------------------------------------------------- ctors
    @classmethod
    def poisson(cls, rho: float) -> "OccupancyModel":
        if not rho > 0.0:
            raise ValueError("poisson occupancy needs rho > 0")
        return cls(kind="poisson", rho0=float(rho), v0=float(rho))

    @classmethod
    def deterministic(cls, count: int) -> "OccupancyModel":
        c = int(count)
        if c < 0 or c != count:
            raise ValueError("deterministic occupancy needs a nonnegative integer")
        return cls(kind="deterministic", rho0=float(c), v0=0.0)

    @classmethod
    def geometric(cls, rho: float) -> "OccupancyModel":
        if not rho > 0.0:
            raise ValueError("geometric occupancy needs mean rho > 0")
        s = rho / (1.0 + rho)
        return cls(kind="geometric", rho0=float(rho), v0=float(rho * (1.0 + rho)), _s=s)

    @classmethod
    def custom(cls, pmf: Sequence[Tuple[int, float]]) -> "OccupancyModel":
        if not pmf:
            raise ValueError("custom occupancy needs at least one (value, prob) pair")
        vals = []
        probs = []
        for v, p in pmf:
            iv = int(v)
            if iv != v or iv < 0:
                raise ValueError(f"occupancy value {v!r} is not a nonnegative integer")
            p = float(p)
            if p < 0.0 or not math.isfinite(p):
                raise ValueError(f"probability for value {v} must be finite and >= 0")
            if p > 0.0:
                vals.append(iv)
                probs.append(p)
        if not vals:
            raise ValueError("custom occupancy has zero total mass")
        order = np.argsort(vals)
        values = np.asarray(vals, np.int64)[order]
        if np.any(np.diff(values) == 0):
            raise ValueError("custom occupancy has duplicate values")
        parr = np.asarray(probs, float)[order]
        parr = parr / parr.sum()
        mean = float(np.dot(values, parr))
        var = float(np.dot((values - mean) ** 2, parr))
        return cls(kind="custom", rho0=mean, v0=var, _values=values, _probs=parr)

    # ------------------------------------------------------------ cumulants
    @property
    def mgf_domain_is_real(self) -> bool:
        """True when the log-MGF is finite for every real tilt."""
        return self.kind != "geometric"

    @property
    def mgf_radius(self) -> float:
        """Supremum of admissible tilts (inf unless geometric)."""
        if self.kind == "geometric":
            return -math.log(self._s)
        return INF

    def log_mgf(self, theta: float) -> float:
        """log E exp(theta * count)."""
        th = float(theta)
        if self.kind == "poisson":
            return self.rho0 * math.expm1(th)
        if self.kind == "deterministic":
            return self.rho0 * th
        if self.kind == "geometric":
            if th >= self.mgf_radius:
                raise MgfDomainError(
                    f"geometric occupancy log-MGF diverges at theta={th:.6g} "
                    f"(radius {self.mgf_radius:.6g})")
            return math.log1p(-self._s) - math.log1p(-self._s * math.exp(th))
        return float(logsumexp(th * self._values, b=self._probs))

    def log_mgf_prime(self, theta: float) -> float:
        """d/dtheta log_mgf = mean of the law tilted by exp(theta * count)."""
        th = float(theta)
        if self.kind == "poisson":
            return self.rho0 * math.exp(th)
        if self.kind == "deterministic":
            return self.rho0
        if self.kind == "geometric":
            if th >= self.mgf_radius:
                raise MgfDomainError("geometric occupancy tilt beyond MGF radius")
            se = self._s * math.exp(th)
            return se / (1.0 - se)
        ext = th * self._values.astype(float)
        m = ext.max()
        w = self._probs * np.exp(ext - m)
        return float(np.dot(self._values, w) / w.sum())

    def log_mgf_dual(self, x: float) -> float:
        """Convex dual sup_theta {theta*x - log_mgf(theta)} for x >= 0.

        Returns math.inf where the dual diverges (values the law cannot
        tilt to), e.g. any x != c for a deterministic count c.
        """
        x = float(x)
        if x < 0.0:
            raise ValueError("occupancy dual is defined for x >= 0")
        if self.kind == "poisson":
            rho = self.rho0
            if x == 0.0:
                return rho
            return x * math.log(x / rho) - x + rho
        if self.kind == "deterministic":
            return 0.0 if x == self.rho0 else INF
        if self.kind == "geometric":
            s = self._s
            if x == 0.0:
                return -math.log1p(-s)
            th = math.log(x) - math.log(s) - math.log1p(x)
            return th * x - self.log_mgf(th)
        return self._custom_dual(x)

    def _custom_dual(self, x: float) -> float:
        vmin = float(self._values[0])
        vmax = float(self._values[-1])
        if x < vmin or x > vmax:
            return INF
        if x == vmin:
            return -math.log(self._probs[0])
        if x == vmax:
            return -math.log(self._probs[-1])
        th = brentq(lambda t: self.log_mgf_prime(t) - x, -200.0, 200.0,
                    xtol=1e-13, rtol=8.9e-16, maxiter=200)
        return th * x - self.log_mgf(th)

    # ------------------------------------------------------------- sampling
    def sample_counts(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """i.i.d. per-site counts, as an int64 array of the given size."""
        size = int(size)
        if self.kind == "poisson":
            return rng.poisson(self.rho0, size=size).astype(np.int64)
        if self.kind == "deterministic":
            return np.full(size, int(self.rho0), np.int64)
        if self.kind == "geometric":
            # numpy's geometric counts trials >= 1; subtract for support {0,1,...}
            return (rng.geometric(1.0 - self._s, size=size) - 1).astype(np.int64)
        return rng.choice(self._values, size=size, p=self._probs).astype(np.int64)


@dataclass(frozen=True, eq=False)
class OccupancyProfile:
    """A sampled stretch of the lattice: counts[i] particles at site_min + i."""

    site_min: int
    counts: np.ndarray

    def __post_init__(self):
        if np.any(self.counts < 0):
            raise ValueError("occupancy counts must be nonnegative")

    def sites(self) -> np.ndarray:
        return np.arange(self.site_min, self.site_min + self.counts.size)


def sample_profile(model: OccupancyModel, site_min: int, site_count: int,
                   rng: np.random.Generator) -> OccupancyProfile:
    """Draw i.i.d. occupancies for site_count sites starting at site_min."""
    if site_count < 0:
        raise ValueError("site_count must be >= 0")
    return OccupancyProfile(site_min=int(site_min),
                            counts=model.sample_counts(rng, site_count))
