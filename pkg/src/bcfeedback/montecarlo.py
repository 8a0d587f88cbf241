"""Monte Carlo engine: per-block pipeline, SNR/on-user sweeps and oracle checks.

Each block draws from its own generator derived from ``(seed, block index)``,
so results are identical for any number of workers. Per-block quantities are
gathered in block order and reduced once at the end.
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .beamform import (
    DegenerateBeamError,
    powers_from_gains,
    zero_forcing_batch,
)
from .channel import block_rng, sample_block
from .codebook import (
    MAX_RATE,
    CapacityError,
    generate_random_codebook,
    quantize,
    quantize_fresh,
    quantize_implicit,
)
from .scheme import (
    SystemConfig,
    db_to_linear,
    estimated_distortions,
    expected_interference_power,
    expected_signal_power,
    select,
)

__all__ = [
    "POLICIES",
    "SimulationConfig",
    "SimRecord",
    "BlockResult",
    "run_block",
    "sweep",
    "records_to_csv",
    "PowerCheck",
    "verify_expected_powers",
    "ConvergencePoint",
    "convergence_study",
]

POLICIES = ("resampled", "fixed", "implicit")
CSV_COLUMNS = ("rho_db", "s", "mean_total_throughput_bits", "stderr", "mean_P_sig", "mean_P_int",
               "i_main_total_predicted", "n_degenerate_blocks")


@dataclass(frozen=True)
class SimulationConfig:
    """Sweep over SNR (dB) and on-user counts.

    ``codebook_policy``: ``resampled`` draws fresh explicit codebooks every
    block, ``fixed`` draws one codebook per user for the whole run, and
    ``implicit`` samples fresh-codebook quantization outputs directly (same
    distribution as ``resampled``, no rate guard).
    """

    system: SystemConfig
    s_values: tuple
    rho_grid_db: tuple
    n_blocks: int
    seed: int
    codebook_policy: str = "resampled"
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "s_values", tuple(int(s) for s in self.s_values))
        object.__setattr__(self, "rho_grid_db", tuple(float(r) for r in self.rho_grid_db))
        if self.n_blocks < 1:
            raise ValueError("n_blocks must be >= 1")
        if not self.s_values:
            raise ValueError("s_values must be nonempty")
        if any(s < 1 or s > self.system.L or s > self.system.m for s in self.s_values):
            raise ValueError(f"s values must lie in [1, min(L, m)], got {self.s_values}")
        if not self.rho_grid_db:
            raise ValueError("rho grid must be nonempty")
        if self.codebook_policy not in POLICIES:
            raise ValueError(f"unknown codebook policy {self.codebook_policy!r}; expected one of {POLICIES}")
        if self.codebook_policy != "implicit" and int(self.system.rates.max()) > MAX_RATE:
            raise CapacityError(f"rates above {MAX_RATE} bits need the implicit codebook policy")


@dataclass(frozen=True)
class SimRecord:
    rho_db: float
    s: int
    mean_total_throughput_bits: float
    stderr: float
    mean_P_sig: float
    mean_P_int: float
    i_main_total_predicted: float
    n_degenerate_blocks: int


@dataclass
class BlockResult:
    """Outcome of one block for one on-set, in on-set order."""

    P_sig: np.ndarray
    P_int: np.ndarray
    throughput: np.ndarray
    distortion: np.ndarray = field(default=None)


def _quantize_users(H, rates, policy, books, rng):
    """Quantized directions (rows) and their distortions ``1 - |v^H p|^2``."""
    k, L = H.shape
    P = np.empty((k, L), dtype=np.complex128)
    for j in range(k):
        if policy == "implicit":
            p, _ = quantize_implicit(H[j], rates[j], rng)
        elif policy == "resampled":
            _, p = quantize_fresh(H[j], rates[j], rng)
        else:
            _, p = quantize(H[j], books[j])
        P[j] = p[0] if p.ndim == 2 else p
    V = H / np.linalg.norm(H, axis=1, keepdims=True)
    dist = 1.0 - np.abs(np.sum(V.conj() * P, axis=1)) ** 2
    return P, dist


def run_block(system: SystemConfig, s: int, on_users, codebooks, rng: np.random.Generator) -> BlockResult:
    """One fading block for a fixed on-set.

    ``codebooks`` is a sequence of :class:`Codebook` (one per on-user, kept
    fixed), or one of the strings ``"resampled"`` / ``"implicit"``. Raises
    :class:`DegenerateBeamError` when zero-forcing fails for this block.
    """
    on_users = tuple(on_users)
    if len(on_users) != s:
        raise ValueError(f"{len(on_users)} on-users given for s={s}")
    if isinstance(codebooks, str):
        policy, books = codebooks, None
        if policy not in ("resampled", "implicit"):
            raise ValueError(f"unknown codebook policy {policy!r}")
    else:
        policy, books = "fixed", list(codebooks)
        if len(books) != s:
            raise ValueError("need one codebook per on-user")
    block = sample_block(system.L, system.m, system.gammas, rng)
    idx = list(on_users)
    H = block.h[idx]
    P, dist = _quantize_users(H, system.rates[idx], policy, books, rng)
    Q, ok = zero_forcing_batch(P[None])
    if not ok[0]:
        raise DegenerateBeamError(on_users, 0.0)
    G = np.abs(H.conj() @ Q[0].T) ** 2
    P_sig, P_int = powers_from_gains(G, block.gamma[idx], system.rho)
    return BlockResult(P_sig, P_int, np.log2(1.0 + P_sig / (1.0 + P_int)), dist)


def _fixed_books(system, users, seed):
    rng = np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(2**32,)))
    return {u: generate_random_codebook(system.L, int(system.rates[u]), rng) for u in users}


def _gains_chunk(args):
    """Gain matrices ``|h_i^H q_j|^2`` for every on-set over a range of blocks."""
    system, on_sets, policy, books, seed, start, stop = args
    union = sorted(set().union(*on_sets))
    pos = {u: k for k, u in enumerate(union)}
    out = [np.full((stop - start, len(a), len(a)), np.nan) for a in on_sets]
    ok = np.zeros((stop - start, len(on_sets)), dtype=bool)
    for b in range(start, stop):
        rng = block_rng(seed, b)
        block = sample_block(system.L, system.m, system.gammas, rng)
        H = block.h[union]
        ubooks = None if books is None else [books[u] for u in union]
        P, _ = _quantize_users(H, system.rates[union], policy, ubooks, rng)
        for a, on in enumerate(on_sets):
            sel = [pos[u] for u in on]
            Q, good = zero_forcing_batch(P[sel][None])
            if good[0]:
                out[a][b - start] = np.abs(H[sel].conj() @ Q[0].T) ** 2
                ok[b - start, a] = True
    return out, ok


def _collect_gains(system, on_sets, policy, books, seed, n_blocks, workers):
    if workers <= 1 or n_blocks < 2 * workers:
        return _gains_chunk((system, on_sets, policy, books, seed, 0, n_blocks))
    bounds = np.linspace(0, n_blocks, workers + 1).astype(int)
    jobs = [(system, on_sets, policy, books, seed, int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:])]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        parts = list(ex.map(_gains_chunk, jobs))
    gains = [np.concatenate([p[0][a] for p in parts]) for a in range(len(on_sets))]
    ok = np.concatenate([p[1] for p in parts])
    return gains, ok


def _mean_se(x):
    n = len(x)
    if n == 0:
        return math.nan, 0.0
    if n == 1:
        return float(x[0]), 0.0
    return float(np.mean(x)), float(np.std(x, ddof=1) / math.sqrt(n))


def sweep(config: SimulationConfig) -> list[SimRecord]:
    """Average total throughput for every ``(rho, s)`` of the configuration.

    The on-set for each ``(rho, s)`` is chosen from system parameters alone,
    as the selection scheme prescribes; channel blocks are shared across all
    ``(rho, s)`` pairs.
    """
    system = config.system
    plan = []
    on_sets = []
    for rho_db in config.rho_grid_db:
        sys_rho = system.with_rho(float(db_to_linear(rho_db)))
        sel = select(sys_rho, estimated_distortions(sys_rho), seed=config.seed)
        for s in config.s_values:
            on, predicted = sel.i_main_by_s[s]
            if on not in on_sets:
                on_sets.append(on)
            plan.append((rho_db, s, sys_rho.rho, on_sets.index(on), predicted))
    books = None
    if config.codebook_policy == "fixed":
        books = _fixed_books(system, sorted(set().union(*on_sets)), config.seed)
    gains, ok = _collect_gains(system, on_sets, config.codebook_policy, books, config.seed,
                               config.n_blocks, config.workers)
    records = []
    for rho_db, s, rho, a, predicted in plan:
        good = ok[:, a]
        G = gains[a][good]
        on = list(on_sets[a])
        P_sig, P_int = powers_from_gains(G, system.gammas[on], rho)
        total = np.log2(1.0 + P_sig / (1.0 + P_int)).sum(axis=1)
        mean, se = _mean_se(total)
        records.append(SimRecord(
            rho_db=float(rho_db), s=int(s), mean_total_throughput_bits=mean, stderr=se,
            mean_P_sig=float(P_sig.mean()) if len(P_sig) else math.nan,
            mean_P_int=float(P_int.mean()) if len(P_int) else math.nan,
            i_main_total_predicted=float(predicted),
            n_degenerate_blocks=int(np.sum(~good)),
        ))
    return records


def _fmt(x, raw):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x)) if raw else f"{float(x):.6g}"


def records_to_csv(records, fh=None, raw: bool = False) -> str | None:
    """CSV with a header row and the fixed :data:`CSV_COLUMNS` order.

    Returns the text when ``fh`` is None.
    """
    buf = io.StringIO() if fh is None else fh
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        d = asdict(r)
        w.writerow([_fmt(d[c], raw) for c in CSV_COLUMNS])
    return buf.getvalue() if fh is None else None


def _seed_from(rng_or_seed):
    if isinstance(rng_or_seed, np.random.Generator):
        return int(rng_or_seed.integers(2**63))
    return int(rng_or_seed)


def _z(resid):
    mean, se = _mean_se(resid)
    if se == 0.0:
        return mean, se, 0.0 if mean == 0.0 else math.copysign(math.inf, mean)
    return mean, se, mean / se


@dataclass(frozen=True)
class PowerCheck:
    """Empirical mean powers against the expected-power formulas at measured distortion."""

    L: int
    s: int
    R: float
    n_blocks: int
    n_degenerate: int
    D_hat: float
    mean_P_sig: float
    predicted_P_sig: float
    se_P_sig: float
    z_sig: float
    mean_P_int: float
    predicted_P_int: float
    se_P_int: float
    z_int: float

    def passed(self, z_max: float = 3.0) -> bool:
        return abs(self.z_sig) <= z_max and abs(self.z_int) <= z_max


def _power_chunk(args):
    L, s, R, gamma, rho, policy, seed, start, stop = args
    sig = np.full(stop - start, np.nan)
    inter = np.full(stop - start, np.nan)
    dist = np.full(stop - start, np.nan)
    gam = np.full(s, float(gamma))
    for b in range(start, stop):
        rng = block_rng(seed, b)
        block = sample_block(L, s, gam, rng)
        P, d = _quantize_users(block.h, np.full(s, R), policy, None, rng)
        Q, ok = zero_forcing_batch(P[None])
        if not ok[0]:
            continue
        G = np.abs(block.h.conj() @ Q[0].T) ** 2
        ps, pi = powers_from_gains(G, gam, rho)
        sig[b - start], inter[b - start], dist[b - start] = ps.mean(), pi.mean(), d.mean()
    return sig, inter, dist


def verify_expected_powers(L: int, s: int, R, gamma: float, rho: float, n_blocks: int, rng,
                           policy: str = "resampled", workers: int = 1) -> PowerCheck:
    """Compare empirical mean powers with the exact expected-power identities.

    Uses ``s`` users, all on, with fresh random codebooks every block. The
    distortion is measured from the run's own quantizations; because both
    formulas are affine in the distortion, the z-scores are computed from the
    per-block residuals ``P - formula(d_block)``, which accounts for the
    sampling error of the measured distortion.
    """
    if not 1 <= s <= L:
        raise ValueError("need 1 <= s <= L")
    if policy not in ("resampled", "implicit"):
        raise ValueError("expected powers hold for freshly drawn random codebooks only")
    if policy == "resampled" and R > MAX_RATE:
        raise CapacityError(f"R={R} exceeds the {MAX_RATE}-bit guard; use policy='implicit'")
    seed = _seed_from(rng)
    args = (L, s, R, gamma, rho, policy, seed)
    if workers <= 1:
        sig, inter, dist = _power_chunk(args + (0, n_blocks))
    else:
        bounds = np.linspace(0, n_blocks, workers + 1).astype(int)
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_power_chunk, [args + (int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:])]))
        sig, inter, dist = (np.concatenate([p[k] for p in parts]) for k in range(3))
    good = np.isfinite(sig)
    sig, inter, dist = sig[good], inter[good], dist[good]
    D_hat = float(dist.mean())
    f_sig = expected_signal_power(L, s, dist, gamma, rho)
    f_int = expected_interference_power(L, s, dist, gamma, rho)
    _, se_s, z_s = _z(sig - f_sig)
    _, se_i, z_i = _z(inter - f_int)
    return PowerCheck(
        L=L, s=s, R=R, n_blocks=int(good.sum()), n_degenerate=int((~good).sum()), D_hat=D_hat,
        mean_P_sig=float(sig.mean()), predicted_P_sig=float(expected_signal_power(L, s, D_hat, gamma, rho)),
        se_P_sig=se_s, z_sig=float(z_s),
        mean_P_int=float(inter.mean()), predicted_P_int=float(expected_interference_power(L, s, D_hat, gamma, rho)),
        se_P_int=se_i, z_int=float(z_i),
    )


@dataclass(frozen=True)
class ConvergencePoint:
    """Normalized powers ``P/(rho*gamma)`` at one system size."""

    L: int
    s: int
    R: float
    D_hat: float
    P_sig: float
    P_int: float
    P_sig_se: float
    P_int_se: float
    sig_target: float  # (1/sbar)(1 - D_hat)(1 - sbar)
    int_target: float  # D_hat

    @property
    def sig_rel_error(self) -> float:
        return abs(self.P_sig - self.sig_target) / self.sig_target

    @property
    def int_rel_error(self) -> float:
        return abs(self.P_int - self.int_target) / self.int_target if self.int_target else abs(self.P_int)


def convergence_study(sbar: float, rbar: float, L_list, n_blocks: int, rng,
                      policy: str = "implicit", rates=None) -> list[ConvergencePoint]:
    """Normalized signal/interference powers as ``L`` grows with ``s/L`` and ``R/L`` fixed.

    ``R = round(rbar * L)`` unless ``rates`` gives one rate per entry of
    ``L_list``. Explicit codebook policies are limited by the rate guard.
    """
    if not 0 < sbar < 1:
        raise ValueError("sbar must lie in (0, 1)")
    L_list = [int(L) for L in L_list]
    if any(b <= a for a, b in zip(L_list, L_list[1:])):
        raise ValueError("L_list must be increasing")
    if policy not in ("resampled", "implicit"):
        raise ValueError("convergence study uses fresh random codebooks")
    seed = _seed_from(rng)
    points = []
    for k, L in enumerate(L_list):
        s = max(1, int(round(sbar * L)))
        R = rates[k] if rates is not None else max(1, int(round(rbar * L)))
        if policy == "resampled" and R > MAX_RATE:
            raise CapacityError(f"L={L} needs R={R} bits, above the {MAX_RATE}-bit guard")
        sig, inter, dist = _power_chunk((L, s, R, 1.0, 1.0, policy, seed + k, 0, n_blocks))
        good = np.isfinite(sig)
        sig, inter, dist = sig[good], inter[good], dist[good]
        D_hat = float(dist.mean())
        sb = s / L
        ms, ses = _mean_se(sig)
        mi, sei = _mean_se(inter)
        points.append(ConvergencePoint(L, s, R, D_hat, ms, mi, ses, sei,
                                       (1.0 / sb) * (1.0 - D_hat) * (1.0 - sb), D_hat))
    return points
