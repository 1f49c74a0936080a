"""Ground-truth Hawkes processes and exact sampling by thinning.

Random streams come from numpy's counter-based Philox generator. A sequence
sampled with ``seed`` is identical on every run and platform with the same
backend (compiled kernels and the numpy fallback sum in different orders).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _backend
from .basis import BasisConfig
from .model import Dataset, EventSequence, GrangerGraph, ModelParams

FAMILIES = ("sine_like", "piecewise_constant", "basis_expansion")
FAMILY_ALIASES = {"sine": "sine_like", "pwc": "piecewise_constant", "basis": "basis_expansion"}


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed)))


@dataclass(frozen=True)
class GroundTruth:
    """A Hawkes process with known base rates and impact functions.

    For the sine-like family ``phi_uv(t) = b (1 - cos(w t - pi s))`` on
    ``[0, (2 - s) pi / w]``; ``window="printed"`` uses
    ``[0, (2 - s) / (4 pi w)]`` instead. The piecewise-constant family is
    ``b`` wherever the sine-like kernel reaches ``b`` and 0 elsewhere.
    Pairs with ``b == 0`` have no influence.
    """

    mu: np.ndarray
    family: str
    amplitude: np.ndarray | None = None
    frequency: np.ndarray | None = None
    shift: np.ndarray | None = None
    window: str = "continuous"
    params: ModelParams | None = None
    basis: BasisConfig | None = None

    def __post_init__(self):
        family = FAMILY_ALIASES.get(self.family, self.family)
        if family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        object.__setattr__(self, "family", family)
        mu = np.array(self.mu, dtype=float).reshape(-1)
        if np.any(mu < 0):
            raise ValueError("base rates must be nonnegative")
        object.__setattr__(self, "mu", mu)
        U = mu.size
        if family == "basis_expansion":
            if self.params is None or self.basis is None:
                raise ValueError("basis_expansion needs params and basis")
            if self.params.num_types != U or self.params.num_basis != self.basis.M:
                raise ValueError("params do not match mu / basis")
            return
        if self.window not in ("continuous", "printed"):
            raise ValueError(f"unknown support window {self.window!r}")
        arrays = {}
        for name in ("amplitude", "frequency", "shift"):
            a = np.array(getattr(self, name), dtype=float)
            if a.shape != (U, U):
                raise ValueError(f"{name} must have shape ({U}, {U})")
            arrays[name] = a
        if np.any(arrays["amplitude"] < 0):
            raise ValueError("amplitudes must be nonnegative")
        live = arrays["amplitude"] > 0
        if np.any(arrays["frequency"][live] <= 0):
            raise ValueError("frequencies of active pairs must be positive")
        for name, a in arrays.items():
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @property
    def num_types(self) -> int:
        return int(self.mu.size)

    # --- sine-like helpers -------------------------------------------------

    def support_end(self) -> np.ndarray:
        """Right end of each kernel's support; inf for Gaussian bases."""
        U = self.num_types
        if self.family == "basis_expansion":
            end = np.where(self.params.group_norms() > 0, np.inf, 0.0)
            return end
        b, w, s = self.amplitude, self.frequency, self.shift
        safe_w = np.where(b > 0, w, 1.0)
        if self.window == "continuous":
            end = (2.0 - s) * math.pi / safe_w
        else:
            end = (2.0 - s) / (4.0 * math.pi * safe_w)
        return np.where(b > 0, end, 0.0).reshape(U, U)

    def _phase(self):
        return math.pi * self.shift

    def kernel_values(self, t) -> np.ndarray:
        """All impact functions at lags ``t``; shape (U, U) + t.shape."""
        t = np.asarray(t, dtype=float)
        if self.family == "basis_expansion":
            return np.einsum("uvm,...m->uv...", self.params.A, self.basis.evaluate(t))
        b = self.amplitude[..., None]
        w = self.frequency[..., None]
        ph = self._phase()[..., None]
        end = self.support_end()[..., None]
        flat = t.reshape(-1)
        inside = (flat >= 0) & (flat <= end) & (b > 0)
        cosv = np.cos(w * flat - ph)
        if self.family == "sine_like":
            vals = np.where(inside, b * (1.0 - cosv), 0.0)
        else:
            vals = np.where(inside & (cosv <= 0.0), b, 0.0)
        return vals.reshape((self.num_types, self.num_types) + t.shape)

    def kernel(self, u: int, v: int, t):
        """``phi_uv(t)`` for a single pair (0-based types)."""
        U = self.num_types
        if not (0 <= u < U and 0 <= v < U):
            raise IndexError(f"type index outside range({U})")
        out = self.kernel_values(t)[u, v]
        return float(out) if np.ndim(out) == 0 else out

    def _sine_remaining_sup(self, x, b, w, ph, end):
        """sup of b (1 - cos(w s - ph)) over s in [x, end]; 0 if x > end."""
        val = lambda s: b * (1.0 - np.cos(w * s - ph))
        # peaks where w s - ph = pi + 2 pi k
        k = np.ceil((w * x - ph - math.pi) / (2.0 * math.pi))
        peak = (math.pi + ph + 2.0 * math.pi * k) / w
        sup = np.where(peak <= end, 2.0 * b, np.maximum(val(x), val(end)))
        return np.where((x <= end) & (b > 0), sup, 0.0)

    def remaining_sup(self, lags, sources) -> np.ndarray:
        """Upper bounds on ``phi[:, src](s)`` for all ``s >= lag``; shape (U, n).

        Each bound is nonincreasing in the lag, which is what makes a
        bound computed at time t valid until the next accepted event.
        """
        lags = np.asarray(lags, dtype=float)
        sources = np.asarray(sources, dtype=np.int64)
        if self.family == "basis_expansion":
            c, sig = self.basis.centers, self.basis.sigma
            kmax = np.where(lags[:, None] <= c, 1.0,
                            np.exp(-((lags[:, None] - c) ** 2) / (2 * sig * sig)))
            return np.einsum("unm,nm->un", self.params.A[:, sources], kmax)
        b = self.amplitude[:, sources]
        w = np.where(b > 0, self.frequency[:, sources], 1.0)
        ph = self._phase()[:, sources]
        end = self.support_end()[:, sources]
        sup = self._sine_remaining_sup(lags[None, :], b, w, ph, end)
        if self.family == "piecewise_constant":
            sup = np.where(sup >= b * (1.0 - 1e-12), b, 0.0) * (b > 0)
        return sup

    def integral(self, x=np.inf) -> np.ndarray:
        """``int_0^x phi_uv(s) ds`` for every pair; shape (U, U) + x.shape."""
        x = np.asarray(x, dtype=float)
        if self.family == "basis_expansion":
            K = self.basis.cumulative_all(x)
            return np.einsum("uvm,...m->uv...", self.params.A, K)
        extra = (None,) * x.ndim
        b, s = self.amplitude[(...,) + extra], self.shift[(...,) + extra]
        w = np.where(b > 0, self.frequency[(...,) + extra], 1.0)
        ph = math.pi * s
        y = np.clip(x, 0.0, self.support_end()[(...,) + extra])
        if self.family == "sine_like":
            val = b * (y - (np.sin(w * y - ph) - np.sin(-ph)) / w)
        else:
            val = b * (_nonpositive_cos_measure(w * y - ph) - _nonpositive_cos_measure(-ph)) / w
        return np.where(b > 0, val, 0.0)

    def branching_matrix(self) -> np.ndarray:
        return self.integral(np.inf)

    def spectral_radius(self) -> float:
        B = self.branching_matrix()
        return float(np.max(np.abs(np.linalg.eigvals(B))))

    def graph(self) -> GrangerGraph:
        """True Granger graph: edge v -> u iff phi_uv is not identically zero."""
        if self.family == "basis_expansion":
            return GrangerGraph(self.params.group_norms() > 0)
        return GrangerGraph(self.amplitude > 0)

    def to_dict(self) -> dict:
        d = {"family": self.family, "U": self.num_types, "mu": self.mu.tolist()}
        if self.family == "basis_expansion":
            d["A"] = self.params.A.tolist()
            d["basis"] = self.basis.to_dict()
        else:
            d.update(amplitude=self.amplitude.tolist(), frequency=self.frequency.tolist(),
                     shift=self.shift.tolist(), window=self.window)
        d["adjacency"] = self.graph().adjacency.astype(int).tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GroundTruth":
        if d["family"] == "basis_expansion":
            return cls(d["mu"], "basis_expansion",
                       params=ModelParams(d["mu"], d["A"]),
                       basis=BasisConfig.from_dict(d["basis"]))
        return cls(d["mu"], d["family"], np.asarray(d["amplitude"]), np.asarray(d["frequency"]),
                   np.asarray(d["shift"]), d.get("window", "continuous"))


def _nonpositive_cos_measure(theta):
    """Measure of {phi in [0, theta] : cos(phi) <= 0}, extended to all reals."""
    theta = np.asarray(theta, dtype=float)
    turns = np.floor(theta / (2.0 * math.pi))
    r = theta - 2.0 * math.pi * turns
    return turns * math.pi + np.clip(r - math.pi / 2.0, 0.0, math.pi)


def compensator(gt: GroundTruth, seq: EventSequence, t) -> np.ndarray:
    """``int_0^t lambda_u`` for every type at times ``t``; shape (U,) + t.shape."""
    t = np.asarray(t, dtype=float)
    flat = t.reshape(-1)
    out = gt.mu[:, None] * flat[None, :]
    for j, (tj, v) in enumerate(zip(seq.times, seq.types)):
        lags = np.maximum(flat - tj, 0.0)
        out += gt.integral(lags)[:, v]
    return out.reshape((gt.num_types,) + t.shape)


def rescaled_intervals(gt: GroundTruth, seq: EventSequence) -> np.ndarray:
    """Compensator increments between consecutive events of each type.

    Under the true model these are i.i.d. Exponential(1) (time rescaling).
    """
    comp = compensator(gt, seq, seq.times)
    parts = []
    for u in range(gt.num_types):
        at = comp[u, seq.types == u]
        parts.append(np.diff(np.concatenate([[0.0], at])))
    return np.concatenate(parts) if parts else np.empty(0)


def ground_truth_kernel(gt: GroundTruth, u: int, v: int, t):
    return gt.kernel(u, v, t)


def _excitation(gt: GroundTruth, t, times, types, out):
    if gt.family == "basis_expansion":
        past = times < t
        lags = t - times[past]
        kern = gt.basis.evaluate(lags)
        out += np.einsum("jm,ujm->u", kern, gt.params.A[:, types[past]])
        return out
    return _backend.sine_intensity(
        t, times, types, gt.amplitude, gt.frequency, np.ascontiguousarray(gt._phase()),
        np.ascontiguousarray(gt.support_end()), gt.family == "piecewise_constant", out)


def sample(gt: GroundTruth, horizon: float, seed: int, check_stationary: bool = True
           ) -> EventSequence:
    """Draw one sequence on ``[0, horizon]`` by Ogata thinning.

    The dominating rate is the total base rate plus, for every live past
    event, the supremum of its kernels over the remaining support. One
    uniform per proposal decides both acceptance and the event type.
    """
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    if check_stationary and gt.spectral_radius() >= 1.0:
        raise ValueError("ground truth is not stationary (spectral radius >= 1)")
    rng = make_rng(seed)
    U = gt.num_types
    mu_total = float(gt.mu.sum())
    col_end = gt.support_end().max(axis=0) if U else np.zeros(0)
    times: list[float] = []
    types: list[int] = []
    live_t = np.empty(0)
    live_u = np.empty(0, dtype=np.int64)
    t = 0.0
    lam = np.empty(U)
    while True:
        if live_t.size:
            keep = (t - live_t) <= col_end[live_u]
            live_t, live_u = live_t[keep], live_u[keep]
        bound = mu_total
        if live_t.size:
            bound += float(gt.remaining_sup(t - live_t, live_u).sum())
        if bound <= 0.0:
            break
        t += rng.exponential(1.0 / bound)
        if t > horizon:
            break
        lam[:] = gt.mu
        _excitation(gt, t, live_t, live_u, lam)
        total = float(lam.sum())
        if total > bound * (1.0 + 1e-9):
            raise RuntimeError(f"thinning bound violated: {total} > {bound}")
        x = rng.uniform() * bound
        if x < total:
            u = int(np.searchsorted(np.cumsum(lam), x, side="right"))
            u = min(u, U - 1)
            times.append(t)
            types.append(u)
            live_t = np.append(live_t, t)
            live_u = np.append(live_u, u)
    return EventSequence(np.array(times), np.array(types, dtype=np.int64), horizon)


def sample_many(gt: GroundTruth, num_sequences: int, horizon: float, seed: int) -> Dataset:
    """Sequence c (1-based) is drawn with seed ``seed + c``."""
    if gt.spectral_radius() >= 1.0:
        raise ValueError("ground truth is not stationary (spectral radius >= 1)")
    seqs = tuple(sample(gt, horizon, seed + c, check_stationary=False)
                 for c in range(1, num_sequences + 1))
    return Dataset(seqs, gt.num_types)


# (amplitude, angular frequency, phase flag) from the synthetic study
_BLOCK_PARAMS = {
    "inner": (0.05, 0.6 * math.pi, 1.0),    # u, v in {1, 2, 3}
    "outer": (0.05, 0.4 * math.pi, 0.0),    # u, v in {4, 5}
    "mixed": (0.02, 0.2 * math.pi, 0.0),    # one of u, v is 4, the other in {1, 2, 3}
}


def synthetic_tables(num_types: int = 5):
    """Amplitude, frequency and shift matrices of the synthetic study."""
    U = num_types
    b, w, s = np.zeros((U, U)), np.zeros((U, U)), np.zeros((U, U))
    first, second = [0, 1, 2], [3, 4]

    def put(rows, cols, key):
        for u in rows:
            for v in cols:
                if u < U and v < U:
                    b[u, v], w[u, v], s[u, v] = _BLOCK_PARAMS[key]

    put(first, first, "inner")
    put(second, second, "outer")
    put([3], first, "mixed")
    put(first, [3], "mixed")
    return b, w, s


def make_synthetic(num_sequences: int, horizon: float = 50.0, family: str = "sine_like",
                   seed: int = 0, num_types: int = 5, window: str = "continuous"):
    """Synthetic study data: base rates ~ Uniform[0, 1/U], block kernel table.

    Returns ``(dataset, ground_truth)``.
    """
    rng = make_rng(seed)
    mu = rng.uniform(0.0, 1.0 / num_types, size=num_types)
    b, w, s = synthetic_tables(num_types)
    gt = GroundTruth(mu, family, b, w, s, window=window)
    return sample_many(gt, num_sequences, horizon, seed), gt
