"""Gaussian RBF temporal kernels and multivariate self-exciting intensities.

The kernel is a vector of L Gaussian densities of the time lag (minutes).
A cluster's intensity is the sum over past events of the dot product
between the interaction weights of the (target, source) pair and the
kernel evaluated at the lag.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

# Gaussian tail below exp(-0.5*z^2)/sqrt(2*pi*sigma^2) at z = NUMERIC_TAIL_Z
# is ~1e-15 of the peak; lags beyond it are numerically irrelevant.
NUMERIC_TAIL_Z = 8.5


@dataclass(frozen=True)
class RBFKernel:
    """Vector of L Gaussian basis functions with fixed means and deviations.

    Means must be strictly increasing and deviations positive; both are in
    minutes. ``support_horizon`` (last mean + 2 deviations) is the window
    within which a cluster is considered to still be replicating.
    """

    means: tuple[float, ...]
    sigmas: tuple[float, ...]

    def __post_init__(self):
        if len(self.means) != len(self.sigmas) or not self.means:
            raise ValueError("means and sigmas must be non-empty and equal length")
        if any(s <= 0 for s in self.sigmas):
            raise ValueError("all deviations must be positive")
        if any(b <= a for a, b in zip(self.means, self.means[1:])):
            raise ValueError("means must be strictly increasing")

    @property
    def size(self) -> int:
        return len(self.means)

    @property
    def support_horizon(self) -> float:
        return self.means[-1] + 2.0 * self.sigmas[-1]

    @property
    def numeric_horizon(self) -> float:
        """Lag beyond which every basis function is below numeric noise."""
        return self.means[-1] + NUMERIC_TAIL_Z * self.sigmas[-1]

    def cutoff_for(self, floor: float) -> float:
        """Smallest lag beyond which every basis function stays <= floor.

        Used to truncate sums exactly when contributions below ``floor``
        are clamped away downstream.
        """
        cut = 0.0
        for mu, sig in zip(self.means, self.sigmas):
            peak = 1.0 / math.sqrt(2.0 * math.pi * sig * sig)
            if floor >= peak:
                continue
            z = math.sqrt(2.0 * math.log(peak / floor))
            cut = max(cut, mu + z * sig)
        return min(max(cut, 0.0), self.numeric_horizon)

    def evaluate(self, dt: float) -> np.ndarray:
        """Kernel vector at a single nonnegative lag."""
        if dt < 0:
            raise ValueError(f"negative lag: {dt}")
        mu = np.asarray(self.means)
        sig = np.asarray(self.sigmas)
        return np.exp(-((dt - mu) ** 2) / (2.0 * sig ** 2)) / np.sqrt(2.0 * np.pi * sig ** 2)

    def evaluate_many(self, dts: np.ndarray) -> np.ndarray:
        """Kernel matrix (n_lags x L) for an array of nonnegative lags."""
        dts = np.asarray(dts, dtype=float)
        if dts.size and dts.min() < 0:
            raise ValueError("negative lag")
        mu = np.asarray(self.means)
        sig = np.asarray(self.sigmas)
        z = (dts[:, None] - mu[None, :]) / sig[None, :]
        return np.exp(-0.5 * z * z) / np.sqrt(2.0 * np.pi * sig ** 2)[None, :]

    def integral(self, lo: float, hi: float) -> np.ndarray:
        """Per-entry integral of the kernel over the lag interval [lo, hi]."""
        from scipy.stats import norm
        mu = np.asarray(self.means)
        sig = np.asarray(self.sigmas)
        return norm.cdf((hi - mu) / sig) - norm.cdf((lo - mu) / sig)


def kernel_eval(kernel: RBFKernel, dt: float) -> np.ndarray:
    """Evaluate the kernel vector at lag ``dt`` (minutes)."""
    return kernel.evaluate(dt)


def intensity(c: int, t: float, history: Mapping[int, Sequence[float]],
              alpha: np.ndarray, kernel: RBFKernel,
              truncate: bool = True) -> float:
    """Intensity of cluster ``c`` at time ``t`` given all strictly earlier events.

    ``history`` maps cluster index -> nondecreasing event times; ``alpha`` is
    the K x K x L interaction tensor. Events older than the numeric horizon
    are skipped when ``truncate`` is set (their contribution is below noise).
    """
    if t < 0:
        raise ValueError(f"negative time: {t}")
    K = alpha.shape[0]
    if c >= K or c < 0:
        raise ValueError(f"cluster index {c} out of range for K={K}")
    horizon = kernel.numeric_horizon
    total = 0.0
    for src, times in history.items():
        if src >= K:
            raise ValueError(f"history cluster index {src} out of range for K={K}")
        lags = np.asarray([t - ti for ti in times
                           if ti < t and (not truncate or t - ti <= horizon)])
        if lags.size == 0:
            continue
        kappa = kernel.evaluate_many(lags)  # (n, L)
        total += float(kappa.sum(axis=0) @ alpha[c, src])
    return total


def lambda0_heuristic(kernel: RBFKernel) -> float:
    """Background concentration: value of one Gaussian entry evaluated 2
    deviations away from its center (uses the first entry's deviation)."""
    sig = kernel.sigmas[0]
    return math.exp(-2.0) / math.sqrt(2.0 * math.pi * sig * sig)


_PRESETS: dict[str, tuple[RBFKernel, float]] = {
    "minute": (RBFKernel(means=(0.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0),
                         sigmas=(5.0,) * 9), 0.01),
    "hour": (RBFKernel(means=(0.0, 120.0, 240.0, 360.0, 480.0),
                       sigmas=(60.0,) * 5), 0.001),
    "day": (RBFKernel(means=(0.0, 1440.0, 2880.0, 4320.0, 5760.0, 7200.0, 8640.0),
                      sigmas=(720.0,) * 7), 0.0001),
}


def preset(name: str) -> tuple[RBFKernel, float]:
    """Named kernel preset and its background concentration.

    ``minute``: centers every 10 min up to 80, sigma 5 min; ``hour``:
    centers every 2 h up to 8 h, sigma 1 h; ``day``: centers every day up
    to 6 days, sigma half a day.
    """
    try:
        return _PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown kernel preset {name!r}; "
                         f"expected one of {sorted(_PRESETS)}") from None


def kernel_to_dict(kernel: RBFKernel) -> dict:
    return {"means": list(kernel.means), "sigmas": list(kernel.sigmas)}


def kernel_from_dict(obj: dict) -> RBFKernel:
    return RBFKernel(means=tuple(float(x) for x in obj["means"]),
                     sigmas=tuple(float(x) for x in obj["sigmas"]))
