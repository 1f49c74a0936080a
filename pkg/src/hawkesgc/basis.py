"""Gaussian basis kernels and data-driven choice of the basis family.

The selection rule estimates the pooled event-time density with a Gaussian
KDE (Silverman bandwidth ``h``), bounds the tail of its spectrum above a
cut-off ``omega0``, and picks the smallest ``omega0`` whose tail mass stays
below a residual budget. Sampling theory then fixes ``M = ceil(T omega0 / pi)``
evenly spaced centers of width ``sigma = 1 / omega0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf, erfc, erfcinv

from .model import Dataset

_SQRT2 = math.sqrt(2.0)
_HALF_GAUSS = math.sqrt(math.pi / 2.0)


@dataclass(frozen=True)
class BasisConfig:
    centers: np.ndarray
    sigma: float
    horizon: float

    def __post_init__(self):
        centers = np.array(self.centers, dtype=np.float64).reshape(-1)
        if centers.size < 1:
            raise ValueError("need at least one basis function")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if np.any(np.diff(centers) < 0) or centers.min() < 0:
            raise ValueError("centers must be nonnegative and nondecreasing")
        centers.setflags(write=False)
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "sigma", float(self.sigma))
        object.__setattr__(self, "horizon", float(self.horizon))

    @classmethod
    def uniform(cls, num_basis: int, horizon: float, sigma: float) -> "BasisConfig":
        """Centers ``(m - 1) T / M`` for m = 1..M."""
        centers = np.arange(num_basis) * (horizon / num_basis)
        return cls(centers, sigma, horizon)

    @property
    def M(self) -> int:
        return int(self.centers.size)

    @property
    def omega0(self) -> float:
        return 1.0 / self.sigma

    def _check(self, m):
        if not 0 <= m < self.M:
            raise IndexError(f"basis index {m} outside range({self.M})")

    def kernel(self, m: int, t):
        self._check(m)
        return np.exp(-((np.asarray(t, dtype=float) - self.centers[m]) ** 2)
                      / (2.0 * self.sigma ** 2))

    def cumulative(self, m: int, t):
        self._check(m)
        return _cumulative(np.asarray(t, dtype=float), self.centers[m], self.sigma)

    def evaluate(self, t) -> np.ndarray:
        """All kernels at ``t``; shape ``t.shape + (M,)``."""
        t = np.asarray(t, dtype=float)[..., None]
        return np.exp(-((t - self.centers) ** 2) / (2.0 * self.sigma ** 2))

    def cumulative_all(self, t) -> np.ndarray:
        """``K_m(t)`` for every m; shape ``t.shape + (M,)``."""
        return _cumulative(np.asarray(t, dtype=float)[..., None], self.centers, self.sigma)

    def total_mass(self) -> np.ndarray:
        """``K_m(inf)`` for every m."""
        return self.sigma * _HALF_GAUSS * (1.0 + erf(self.centers / (_SQRT2 * self.sigma)))

    def to_dict(self) -> dict:
        return {
            "M": self.M,
            "omega0": self.omega0,
            "sigma": self.sigma,
            "centers": self.centers.tolist(),
            "horizon": self.horizon,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BasisConfig":
        centers = np.asarray(d["centers"], dtype=float)
        if "sigma" in d:
            sigma = float(d["sigma"])
        else:
            sigma = 1.0 / float(d["omega0"])
        horizon = d.get("horizon")
        if horizon is None:
            m = centers.size
            horizon = m * (centers[1] - centers[0]) if m > 1 else max(float(centers[0]), sigma)
        return cls(centers, sigma, float(horizon))


def _cumulative(t, center, sigma):
    """``sigma sqrt(pi/2) (erf(p) - erf(q))`` with p = (t - c)/(sqrt2 sigma),
    q = -c/(sqrt2 sigma), evaluated through erfc where both share a sign so
    far-away centers keep their tiny positive mass."""
    scale = _SQRT2 * sigma
    p, q = np.broadcast_arrays((t - center) / scale, -np.asarray(center) / scale)
    with np.errstate(invalid="ignore"):
        diff = np.where(q >= 0, erfc(q) - erfc(p),
                        np.where(p <= 0, erfc(-p) - erfc(-q), erf(p) - erf(q)))
    return sigma * _HALF_GAUSS * diff


@dataclass(frozen=True)
class SpectralEstimate:
    bandwidth: float
    total_events: int
    residual_bound: float


def silverman_bandwidth(data: Dataset) -> float:
    """Rule-of-thumb KDE bandwidth of the pooled timestamps.

    Uses the population standard deviation of all event times.
    """
    times = np.concatenate([s.times for s in data.sequences]) if len(data) else np.empty(0)
    if times.size < 2:
        raise ValueError("need at least two events to estimate a bandwidth")
    spread = float(np.std(times))
    if not spread > 0:
        raise ValueError("event times have zero spread")
    return (4.0 * spread ** 5 / (3.0 * times.size)) ** 0.2


def spectral_tail(omega0, bandwidth: float, total_events: int, variant: str = "exact"):
    """Upper bound on the KDE spectrum's mass above ``omega0``.

    ``"exact"`` integrates the Gaussian envelope exactly; ``"printed"`` is the
    non-decaying closed form ``pi N (1 - erf(omega0 h) / sqrt(2))`` kept for
    comparison.
    """
    omega0 = np.asarray(omega0, dtype=float)
    if variant == "exact":
        return math.pi * total_events * erfc(omega0 * bandwidth / _SQRT2)
    if variant == "printed":
        return math.pi * total_events * (1.0 - erf(omega0 * bandwidth) / _SQRT2)
    raise ValueError(f"unknown tail variant {variant!r}")


def _smallest_cutoff(epsilon, h, n, variant):
    tail = lambda w: float(spectral_tail(w, h, n, variant))
    if tail(0.0) <= epsilon:
        return 0.0
    lo, hi = 0.0, 100.0 / h
    while tail(hi) > epsilon:
        if hi > 1e6 / h:
            floor = math.pi * n * (1.0 - 1.0 / _SQRT2)
            raise ValueError(
                f"residual bound {epsilon:g} is below the attainable floor {floor:g}"
            )
        lo, hi = hi, 2.0 * hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if tail(mid) > epsilon:
            lo = mid
        else:
            hi = mid
    omega = hi
    if variant == "exact":
        polished = _SQRT2 * float(erfcinv(epsilon / (math.pi * n))) / h
        if np.isfinite(polished):
            # nudge up until the bound holds in floating point
            while tail(polished) > epsilon:
                polished = math.nextafter(polished, math.inf)
            if polished < omega:
                omega = polished
    return omega


def select_basis(data: Dataset, epsilon: float | None = None, *, rho: float = 0.01,
                 horizon: float | None = None, variant: str = "exact") -> BasisConfig:
    """Choose Gaussian bases for ``data``.

    ``epsilon`` is the absolute residual bound; when omitted it is
    ``rho * pi * total_events``. ``horizon`` defaults to the longest
    sequence horizon.
    """
    h = silverman_bandwidth(data)
    n = data.total_events
    if epsilon is None:
        if not rho > 0:
            raise ValueError("rho must be positive")
        epsilon = rho * math.pi * n
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    T = data.max_horizon if horizon is None else float(horizon)
    if not T > 0:
        raise ValueError("horizon must be positive")
    omega0 = _smallest_cutoff(epsilon, h, n, variant)
    if omega0 <= 0:
        # any cut-off meets the budget: a single wide basis at the origin
        return BasisConfig(np.zeros(1), T / math.pi, T)
    sigma = 1.0 / omega0
    # omega0 is stored as 1 / sigma; keep the bound true after the round trip
    while spectral_tail(1.0 / sigma, h, n, variant) > epsilon:
        sigma = math.nextafter(sigma, 0.0)
    return BasisConfig.uniform(num_basis_for(T, 1.0 / sigma), T, sigma)


def num_basis_for(horizon: float, omega0: float) -> int:
    x = horizon * omega0 / math.pi
    return max(1, math.ceil(x * (1.0 - 1e-12)))


def spectral_estimate(data: Dataset, epsilon: float) -> SpectralEstimate:
    return SpectralEstimate(silverman_bandwidth(data), data.total_events, float(epsilon))
