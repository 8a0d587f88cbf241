"""Spatial efficiency of the large-system limit and its optimal on-user fraction.

The limiting effective-SNR measure is represented by weighted atoms. For an
on-user fraction ``sbar`` the best users are admitted down to a threshold
``eta_sbar``; users exactly at the threshold fill whatever on-slots remain.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import integrate, optimize

from .scheme import eta as eta_value

__all__ = [
    "EtaDistribution",
    "Threshold",
    "NonUnimodalError",
    "QuadratureError",
    "tail_mass",
    "eta_threshold",
    "spatial_efficiency",
    "efficiency_curve",
    "count_local_maxima",
    "golden_section_max",
    "optimal_sbar",
    "threshold_for_density",
    "derivative_atomless",
    "log_positivity_margin",
    "load_eta_distribution",
    "save_eta_distribution",
]

GRID_POINTS = 1024
GRID_EPS = 1e-6


class NonUnimodalError(ArithmeticError):
    """The efficiency profile on the scan grid has more than one local maximum."""

    def __init__(self, grid, values, n_maxima):
        super().__init__(f"efficiency profile has {n_maxima} local maxima on the scan grid")
        self.grid = grid
        self.values = values
        self.n_maxima = n_maxima


class QuadratureError(ArithmeticError):
    pass


@dataclass(frozen=True)
class EtaDistribution:
    """Weighted atoms ``(eta, weight)`` with unit total weight, plus user density ``mbar``."""

    etas: np.ndarray
    weights: np.ndarray
    mbar: float

    def __post_init__(self):
        etas = np.atleast_1d(np.asarray(self.etas, dtype=np.float64))
        weights = np.atleast_1d(np.asarray(self.weights, dtype=np.float64))
        if etas.size == 0:
            raise ValueError("empty distribution")
        if etas.shape != weights.shape:
            raise ValueError("etas and weights differ in length")
        if not np.all(np.isfinite(etas)) or np.any(etas < 0):
            raise ValueError("eta values must be finite and >= 0")
        if np.any(weights <= 0):
            raise ValueError("weights must be positive")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {weights.sum():.15g}, not 1")
        if not (self.mbar > 0 and math.isfinite(self.mbar)):
            raise ValueError("mbar must be positive")
        # merge duplicates, sort ascending
        uniq, inv = np.unique(etas, return_inverse=True)
        merged = np.zeros(uniq.size)
        np.add.at(merged, inv, weights)
        for name, arr in (("etas", uniq), ("weights", merged)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "mbar", float(self.mbar))

    @classmethod
    def from_population(cls, eta_values, mbar: float) -> "EtaDistribution":
        """Empirical measure of a finite population of eta values."""
        vals = np.asarray(eta_values, dtype=np.float64)
        return cls(vals, np.full(vals.size, 1.0 / vals.size), mbar)

    @classmethod
    def from_system(cls, L: int, gammas, rates, rho: float) -> "EtaDistribution":
        """Eta atoms of a finite system, using ``rbar_i = R_i / L`` and ``mbar = m / L``."""
        gammas = np.asarray(gammas, dtype=np.float64)
        rbar = np.asarray(rates, dtype=np.float64) / L
        return cls.from_population(eta_value(rho, gammas, rbar), len(gammas) / L)


@dataclass(frozen=True)
class Threshold:
    value: float
    all_admitted: bool


def tail_mass(dist: EtaDistribution, x: float, strict: bool) -> float:
    """``mbar * mu((x, inf))`` if ``strict`` else ``mbar * mu([x, inf))``."""
    mask = dist.etas > x if strict else dist.etas >= x
    return dist.mbar * float(dist.weights[mask].sum())


def eta_threshold(dist: EtaDistribution, sbar: float) -> Threshold:
    """``sup{eta : mbar * mu([eta, inf)) > sbar}``.

    When even the whole population does not exceed ``sbar`` (``mbar <= sbar``)
    every user is admitted; the threshold is then reported as 0, the eta of the
    zero-gain padding users that fill the remaining slots.
    """
    if not 0 < sbar < 1:
        raise ValueError("sbar must lie in (0, 1)")
    # non-strict tails at each atom, ascending atoms -> descending tails
    tails = dist.mbar * np.cumsum(dist.weights[::-1])[::-1]
    above = np.flatnonzero(tails > sbar)
    if above.size == 0:
        return Threshold(0.0, True)
    return Threshold(float(dist.etas[above[-1]]), False)


def spatial_efficiency(dist: EtaDistribution, sbar: float, log=np.log2) -> float:
    """Asymptotic sum throughput per antenna at on-user fraction ``sbar``."""
    if not 0 < sbar < 1:
        return 0.0
    thr = eta_threshold(dist, sbar)
    gain = (1.0 - sbar) / sbar
    strict = dist.etas > thr.value
    head = dist.mbar * float(np.sum(dist.weights[strict] * log(1.0 + dist.etas[strict] * gain)))
    rest = sbar - dist.mbar * float(dist.weights[strict].sum())
    return head + rest * float(log(1.0 + thr.value * gain))


def efficiency_curve(dist: EtaDistribution, sbars, log=np.log2) -> np.ndarray:
    return np.array([spatial_efficiency(dist, float(s), log=log) for s in np.asarray(sbars)])


def count_local_maxima(values, rtol: float = 1e-12) -> int:
    """Local maxima of a sampled profile, counting each flat plateau once."""
    v = np.asarray(values, dtype=np.float64)
    tol = rtol * max(1.0, float(np.max(np.abs(v))))
    runs = [v[0]]
    for x in v[1:]:
        if abs(x - runs[-1]) > tol:
            runs.append(x)
    if len(runs) == 1:
        return 1
    r = np.array(runs)
    left = np.concatenate(([-np.inf], r[:-1]))
    right = np.concatenate((r[1:], [-np.inf]))
    return int(np.sum((r > left) & (r > right)))


INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section_max(f, a: float, b: float, tol: float = 1e-5, max_iter: int = 200):
    """Maximize a unimodal ``f`` on ``[a, b]``; returns ``(x, f(x))``."""
    x1 = b - INVPHI * (b - a)
    x2 = a + INVPHI * (b - a)
    f1, f2 = f(x1), f(x2)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if f1 >= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - INVPHI * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + INVPHI * (b - a)
            f2 = f(x2)
    x = x1 if f1 >= f2 else x2
    return x, max(f1, f2)


def optimal_sbar(dist: EtaDistribution, tolerance: float = 1e-5, grid_points: int = GRID_POINTS,
                 log=np.log2):
    """Unique maximizer of the spatial efficiency over ``(0, 1)``.

    A grid scan brackets the maximum (and checks that the profile is unimodal),
    then golden-section search refines it to ``tolerance``.
    """
    if not tolerance > 0:
        raise ValueError("tolerance must be positive")
    grid = np.linspace(GRID_EPS, 1.0 - GRID_EPS, grid_points)
    vals = efficiency_curve(dist, grid, log=log)
    n_max = count_local_maxima(vals)
    if n_max != 1:
        raise NonUnimodalError(grid, vals, n_max)
    k = int(np.argmax(vals))
    a, b = grid[max(k - 1, 0)], grid[min(k + 1, grid_points - 1)]
    x, fx = golden_section_max(lambda s: spatial_efficiency(dist, s, log=log), a, b, tolerance)
    if fx < vals[k]:
        x, fx = float(grid[k]), float(vals[k])
    return float(x), float(fx)


def _f(eta, s):
    return np.log1p(eta * (1.0 - s) / s)


def _df_ds(eta, s):
    return -(eta / s**2) / (1.0 + eta * (1.0 - s) / s)


def threshold_for_density(density, s: float, support) -> float:
    """``t`` with ``int_t^inf density = s`` for a density supported on ``support``."""
    lo, hi = support
    total = integrate.quad(density, lo, hi, limit=200)[0]
    if s >= total:
        return float(lo)

    def excess(t):
        return integrate.quad(density, t, hi, limit=200)[0] - s

    return float(optimize.brentq(excess, lo, hi, xtol=1e-13))


def derivative_atomless(density, s: float, support, threshold: float | None = None) -> float:
    """Derivative of ``y(s) = int_{t(s)}^inf log(1 + eta (1-s)/s) density(eta) d eta``.

    ``density`` is the user density per antenna (it integrates to ``mbar``) and
    ``t(s)`` solves ``int_t^inf density = s``. Uses natural logs; the result is
    ``f(t, s) + int_t^inf df/ds density``.
    """
    t = threshold_for_density(density, s, support) if threshold is None else threshold
    val, err, *info = integrate.quad(lambda e: _df_ds(e, s) * density(e), t, support[1],
                                     limit=200, full_output=1)
    if len(info) > 1 and err > 1e-8 * max(1.0, abs(val)):
        raise QuadratureError(f"quadrature did not converge at s={s}: {info[1]}")
    return float(_f(t, s) + val)


def log_positivity_margin(x):
    """``2x/(1+x) + ln(1+x)^2 - 2 ln(1+x)``, positive for every ``x > 0``."""
    x = np.asarray(x, dtype=np.float64)
    l1 = np.log1p(x)
    return 2.0 * x / (1.0 + x) + l1 * l1 - 2.0 * l1


def load_eta_distribution(path, normalize: bool = False) -> EtaDistribution:
    """Read a file with a ``mbar <value>`` header line and ``eta weight`` lines.

    Blank lines and ``#`` comments are ignored.
    """
    mbar = None
    etas, weights = [], []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0].lower() == "mbar":
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'mbar <value>'")
            mbar = float(parts[1])
            continue
        if len(parts) != 2:
            raise ValueError(f"{path}:{lineno}: expected 'eta weight'")
        etas.append(float(parts[0]))
        weights.append(float(parts[1]))
    if mbar is None:
        raise ValueError(f"{path}: missing 'mbar' header")
    w = np.array(weights)
    if normalize and w.size:
        w = w / w.sum()
    return EtaDistribution(np.array(etas), w, mbar)


def save_eta_distribution(dist: EtaDistribution, path) -> None:
    lines = [f"mbar {dist.mbar!r}"]
    lines += [f"{e!r} {w!r}" for e, w in zip(dist.etas.tolist(), dist.weights.tolist())]
    Path(path).write_text("\n".join(lines) + "\n")
