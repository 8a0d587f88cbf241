"""On/off user selection for finite systems from main-order throughput.

Everything here depends only on system parameters (``L``, path losses, feedback
rates, SNR), never on a channel realization.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .codebook import distortion_estimate

__all__ = [
    "UserProfile",
    "SystemConfig",
    "SelectionResult",
    "db_to_linear",
    "eta",
    "expected_signal_power",
    "expected_interference_power",
    "i_main",
    "i_main_per_user",
    "estimated_distortions",
    "select",
    "fairness_schedule",
]

# relative tolerance under which two throughput values count as tied
TIE_RTOL = 1e-12


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=np.float64) / 10.0)


@dataclass(frozen=True)
class UserProfile:
    gamma: float
    rate_bits: int

    def __post_init__(self):
        if not (self.gamma >= 0 and math.isfinite(self.gamma)):
            raise ValueError(f"gamma must be finite and >= 0, got {self.gamma}")
        if int(self.rate_bits) != self.rate_bits or self.rate_bits < 1:
            raise ValueError(f"rate_bits must be a positive integer, got {self.rate_bits}")


@dataclass(frozen=True)
class SystemConfig:
    """``L`` antennas, one :class:`UserProfile` per user, total SNR ``rho`` (linear)."""

    L: int
    users: tuple
    rho: float

    def __post_init__(self):
        object.__setattr__(self, "users", tuple(self.users))
        if int(self.L) != self.L or self.L < 1:
            raise ValueError(f"L must be a positive integer, got {self.L}")
        if not self.users:
            raise ValueError("need at least one user")
        if not self.rho > 0:
            raise ValueError(f"rho must be positive, got {self.rho}")

    @property
    def m(self) -> int:
        return len(self.users)

    @property
    def effective_L(self) -> int:
        """Antennas beyond the user count behave like extra zero-gain users."""
        return min(self.L, self.m)

    @property
    def gammas(self) -> np.ndarray:
        return np.array([u.gamma for u in self.users], dtype=np.float64)

    @property
    def rates(self) -> np.ndarray:
        return np.array([u.rate_bits for u in self.users], dtype=np.int64)

    def with_rho(self, rho: float) -> "SystemConfig":
        return SystemConfig(self.L, self.users, rho)

    def subset(self, indices) -> "SystemConfig":
        return SystemConfig(self.L, tuple(self.users[i] for i in indices), self.rho)


@dataclass(frozen=True)
class SelectionResult:
    s_star: int
    on_users: tuple
    i_main_per_user: np.ndarray  # I_main,i at s_star for every user
    i_main_total: float
    i_main_by_s: dict = field(default_factory=dict)  # s -> (A_on(s), I_main(s))


def eta(rho, gamma, rbar):
    """Effective SNR coefficient ``rho*gamma*(1 - 2^-rbar) / (1 + rho*gamma*2^-rbar)``."""
    rho = np.asarray(rho, dtype=np.float64)
    gamma = np.asarray(gamma, dtype=np.float64)
    d = 2.0 ** (-np.asarray(rbar, dtype=np.float64))
    out = rho * gamma * (1.0 - d) / (1.0 + rho * gamma * d)
    return float(out) if out.ndim == 0 else out


def _check(L, s, D):
    if s < 1:
        raise ValueError(f"s must be >= 1, got {s}")
    D = np.asarray(D, dtype=np.float64)
    if np.any((D < 0) | (D > 1)):
        raise ValueError("distortion must lie in [0, 1]")
    return D


def expected_signal_power(L, s, D, gamma, rho):
    """Mean signal power of an on-user under random codebooks and a random on-set."""
    D = _check(L, s, D)
    if s > L:
        out = np.zeros(np.broadcast(D, np.asarray(gamma)).shape)
    else:
        cross = 0.0 if L == 1 else D * (s - 1) / (L * (L - 1))
        out = np.asarray(gamma) * rho * (L / s) * ((1.0 - D) * (1.0 - (s - 1) / L) + cross)
    return float(out) if np.ndim(out) == 0 else out


def expected_interference_power(L, s, D, gamma, rho):
    """Mean interference power of an on-user, ``gamma*rho*(L/s)*(s-1)/(L-1)*D``."""
    D = _check(L, s, D)
    if s == 1:
        out = np.zeros(np.broadcast(D, np.asarray(gamma)).shape)
    elif L == 1:
        raise ValueError("interference is undefined for L = 1 with s > 1")
    else:
        out = np.asarray(gamma) * rho * (L / s) * (s - 1) / (L - 1) * D
    return float(out) if np.ndim(out) == 0 else out


def i_main(L, s, D, gamma, rho):
    """Main-order throughput ``log2(1 + E[P_sig] / (1 + E[P_int]))`` in bits."""
    sig = expected_signal_power(L, s, D, gamma, rho)
    if s > L:
        return sig  # zero
    inter = expected_interference_power(L, s, D, gamma, rho)
    out = np.log2(1.0 + np.asarray(sig) / (1.0 + np.asarray(inter)))
    return float(out) if np.ndim(out) == 0 else out


def estimated_distortions(config: SystemConfig) -> np.ndarray:
    L = config.effective_L
    if L < 2:
        return np.ones(config.m)
    return np.array([distortion_estimate(L, r) for r in config.rates])


def i_main_per_user(config: SystemConfig, D_per_user, s: int) -> np.ndarray:
    L = config.effective_L
    D = np.asarray(D_per_user, dtype=np.float64)
    if L == 1:
        if s > 1:
            return np.zeros(config.m)
        # single antenna: the beam is the channel direction itself
        return np.log2(1.0 + config.gammas * config.rho)
    return np.asarray(i_main(L, s, D, config.gammas, config.rho), dtype=np.float64)


def _top_s(values, s, rng):
    """Indices of the ``s`` largest values, ties resolved uniformly at random."""
    values = np.asarray(values)
    key = rng.permutation(len(values))
    # round so values equal up to TIE_RTOL sort as equal; random key breaks ties
    scale = max(np.max(np.abs(values)), 1e-300)
    quant = np.round(values / (scale * TIE_RTOL)) if scale > 0 else values
    order = np.lexsort((key, -quant))
    return tuple(sorted(int(i) for i in order[:s]))


def select(config: SystemConfig, D_per_user=None, rng: np.random.Generator | None = None,
           seed: int = 0) -> SelectionResult:
    """Choose the number of on-users and the on-set maximizing summed ``I_main``.

    ``D_per_user`` defaults to :func:`estimated_distortions`. Ties among users
    and among values of ``s`` are broken by a seeded random choice.
    """
    if config.m < 1:
        raise ValueError("empty user list")
    rng = np.random.default_rng(seed) if rng is None else rng
    D = estimated_distortions(config) if D_per_user is None else np.asarray(D_per_user, dtype=np.float64)
    if D.shape != (config.m,):
        raise ValueError(f"need one distortion per user ({config.m}), got {D.shape}")
    by_s = {}
    per_user = {}
    for s in range(1, config.effective_L + 1):
        vals = i_main_per_user(config, D, s)
        on = _top_s(vals, s, rng)
        by_s[s] = (on, float(np.sum(vals[list(on)])))
        per_user[s] = vals
    totals = np.array([by_s[s][1] for s in by_s])
    best = np.flatnonzero(totals >= totals.max() * (1 - TIE_RTOL) - 1e-300)
    s_star = int(best[rng.integers(len(best))]) + 1 if len(best) > 1 else int(best[0]) + 1
    on, total = by_s[s_star]
    return SelectionResult(s_star, on, per_user[s_star], total, by_s)


def fairness_schedule(config: SystemConfig, D_per_user=None, rng: np.random.Generator | None = None,
                      seed: int = 0) -> list[SelectionResult]:
    """One scheduling cycle: repeatedly select among users not yet served.

    Returned results use indices of the full user list; their on-sets
    partition all users.
    """
    rng = np.random.default_rng(seed) if rng is None else rng
    D = estimated_distortions(config) if D_per_user is None else np.asarray(D_per_user, dtype=np.float64)
    remaining = list(range(config.m))
    rounds = []
    while remaining:
        sub = config.subset(remaining)
        res = select(sub, D[remaining], rng=rng)
        on = tuple(sorted(remaining[i] for i in res.on_users))
        per_user = np.full(config.m, np.nan)
        per_user[remaining] = res.i_main_per_user
        by_s = {s: (tuple(sorted(remaining[i] for i in a)), t) for s, (a, t) in res.i_main_by_s.items()}
        rounds.append(SelectionResult(res.s_star, on, per_user, res.i_main_total, by_s))
        remaining = [i for i in remaining if i not in on]
    return rounds
