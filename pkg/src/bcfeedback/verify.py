"""Named oracle suites comparing simulations with closed-form results.

Each suite returns a list of :class:`Check`; the CLI prints them as a table.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import asymptotics as asy
from .beamform import zero_forcing_batch
from .channel import block_rng, complex_gaussian, max_beam_alignment, random_orthonormal_beams, sample_block
from .codebook import distortion_bounds, distortion_estimate, quantize_implicit, random_codebook_distortion
from .montecarlo import convergence_study, verify_expected_powers

__all__ = ["Check", "SUITES", "run_suite", "projection_alignment", "isotropy_matrix", "isotropy_zscores",
           "magnitude_trend", "implicit_distortion"]


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    bound: str
    passed: bool

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.value:.6g} ({self.bound})"


def _unit(X):
    return X / np.linalg.norm(X, axis=-1, keepdims=True)


def projection_alignment(L: int, s: int, n: int, rng) -> np.ndarray:
    """Samples of ``|p^H q|^2`` for one user among ``s`` isotropic directions."""
    P = _unit(complex_gaussian(rng, (n, s, L)))
    Q, _ = zero_forcing_batch(P)
    return np.abs(np.sum(P[:, 0].conj() * Q[:, 0], axis=1)) ** 2


def isotropy_matrix(L: int, s: int, n: int, rng):
    """Samples of ``q_{2:L}`` when ``p = e_1``: the beam seen in ``p``'s complement.

    Returns an ``(n, L-1)`` array whose outer-product mean should be
    ``(s-1)/(L(L-1)) I``.
    """
    P = _unit(complex_gaussian(rng, (n, s, L)))
    P[:, 0] = 0.0
    P[:, 0, 0] = 1.0
    Q, _ = zero_forcing_batch(P)
    return Q[:, 0, 1:]


def isotropy_zscores(q, diag_target: float) -> np.ndarray:
    """Entry-wise |z| of the sample ``E[q q^H]`` against ``diag_target * I``."""
    X = q[:, :, None] * q[:, None, :].conj()
    k = q.shape[1]
    target = diag_target * np.eye(k)
    se = np.sqrt(X.real.var(axis=0, ddof=1) + X.imag.var(axis=0, ddof=1)) / math.sqrt(len(q))
    return np.abs(X.mean(axis=0) - target) / se


def magnitude_trend(L: int, n_blocks: int, seed: int):
    """Per-block max/min normalized magnitude and max beam alignment at ``L = m``."""
    mx, mn, al = np.empty(n_blocks), np.empty(n_blocks), np.empty(n_blocks)
    for b in range(n_blocks):
        rng = block_rng(seed, b)
        block = sample_block(L, L, 1.0, rng)
        mag = block.normalized_magnitudes()
        mx[b], mn[b] = mag.max(), mag.min()
        al[b] = max_beam_alignment(block, random_orthonormal_beams(L, rng))
    return mx, mn, al


def implicit_distortion(L: int, R: float, n: int, rng):
    """Mean and standard error of ``1 - |v^H p|^2`` under fresh random codebooks."""
    H = complex_gaussian(rng, (n, L))
    _, d = quantize_implicit(H, R, rng)
    return float(d.mean()), float(d.std(ddof=1) / math.sqrt(n))


def _powers(n_blocks, seed):
    out = []
    for L, s, R in ((4, 4, 12), (4, 2, 6), (2, 2, 4)):
        r = verify_expected_powers(L, s, R, 1.0, 10.0, n_blocks, seed)
        out.append(Check(f"powers L={L} s={s} R={R} P_sig z", r.z_sig, "|z| <= 3", abs(r.z_sig) <= 3))
        out.append(Check(f"powers L={L} s={s} R={R} P_int z", r.z_int, "|z| <= 3", abs(r.z_int) <= 3))
    return out


def _log_margin(n_blocks, seed):
    g = asy.log_positivity_margin(np.logspace(-6, 4, 10_000))
    return [Check("log margin min g(x) on log grid", float(g.min()), "> 0", bool(g.min() > 0))]


def _projection(n_blocks, seed):
    rng = np.random.default_rng(seed)
    out = []
    for L, s in ((4, 1), (4, 2), (4, 4), (8, 5)):
        a = projection_alignment(L, s, n_blocks, rng)
        se = a.std(ddof=1) / math.sqrt(len(a))
        target = (L - s + 1) / L
        z = 0.0 if se == 0 else (a.mean() - target) / se
        out.append(Check(f"projection E|p^H q|^2 L={L} s={s} (target {target:.4g}) z", z, "|z| <= 3",
                         abs(z) <= 3 and (s != 1 or np.allclose(a, 1.0))))
    for L, s in ((4, 2), (6, 4)):
        z = isotropy_zscores(isotropy_matrix(L, s, n_blocks, rng), (s - 1) / (L * (L - 1)))
        out.append(Check(f"projection isotropy L={L} s={s} max entry |z|", float(z.max()), "<= 4", z.max() <= 4))
    return out


def _hardening(n_blocks, seed):
    n = min(n_blocks, 200)
    mx, mn, al = magnitude_trend(256, n, seed)
    mx16, mn16, al16 = magnitude_trend(16, n, seed + 1)
    return [
        Check("hardening Pr(max >= 1.2) at L=m=256", float(np.mean(mx >= 1.2)), "< 0.05", bool(np.mean(mx >= 1.2) < 0.05)),
        Check("hardening Pr(min <= 0.8) at L=m=256", float(np.mean(mn <= 0.8)), "< 0.05", bool(np.mean(mn <= 0.8) < 0.05)),
        Check("beam alignment Pr(alignment > 0.15) at L=m=256", float(np.mean(al > 0.15)), "< 0.05",
              bool(np.mean(al > 0.15) < 0.05)),
        Check("hardening median (max - 1), 256 minus 16", float(np.median(mx) - np.median(mx16)), "< 0",
              bool(np.median(mx) < np.median(mx16))),
        Check("hardening median (1 - min), 256 minus 16", float(np.median(mn16) - np.median(mn)), "< 0",
              bool(np.median(mn16) < np.median(mn))),
        Check("beam alignment median alignment 256 vs 16", float(np.median(al) - np.median(al16)), "< 0",
              bool(np.median(al) < np.median(al16))),
    ]


def _distortion(n_blocks, seed):
    rng = np.random.default_rng(seed)
    out = []
    for L in (16, 32):
        R = 2 * L
        d, se = implicit_distortion(L, R, n_blocks, rng)
        est = distortion_estimate(L, R)
        lower, _ = distortion_bounds(L, R)
        out.append(Check(f"distortion L={L} R={R} rel. gap to estimate", abs(d - est) / est, "<= 0.15",
                         abs(d - est) / est <= 0.15))
        out.append(Check(f"distortion L={L} R={R} minus (lower - 3se)", d - (lower - 3 * se), ">= 0",
                         d >= lower - 3 * se))
        exact = random_codebook_distortion(L, R)
        out.append(Check(f"distortion L={L} R={R} z vs exact random-codebook value", (d - exact) / se,
                         "|z| <= 3", abs(d - exact) <= 3 * se))
    return out


def _convergence(n_blocks, seed):
    (p,) = convergence_study(0.5, 24 / 128, [128], min(n_blocks, 200), seed, policy="implicit")
    return [
        Check("convergence L=128 R=24 signal rel. error", p.sig_rel_error, "<= 0.10", p.sig_rel_error <= 0.10),
        Check("convergence L=128 R=24 interference rel. error", p.int_rel_error, "<= 0.10", p.int_rel_error <= 0.10),
    ]


def _unimodal(n_blocks, seed):
    rng = np.random.default_rng(seed)
    worst = 1
    for _ in range(50):
        k = int(rng.integers(2, 11))
        w = rng.random(k) + 0.05
        dist = asy.EtaDistribution(rng.exponential(5.0, k), w / w.sum(), float(rng.uniform(0.5, 4.0)))
        vals = asy.efficiency_curve(dist, np.linspace(1e-6, 1 - 1e-6, asy.GRID_POINTS))
        worst = max(worst, asy.count_local_maxima(vals))
    return [Check("unimodal: max local maxima over 50 random atomic measures", worst, "== 1", worst == 1)]


SUITES = {
    "thm6": (_powers, 20_000),
    "lemma10": (_log_margin, 0),
    "projection": (_projection, 100_000),
    "hardening": (_hardening, 200),
    "distortion": (_distortion, 100_000),
    "convergence": (_convergence, 50),
    "unimodal": (_unimodal, 0),
}


def run_suite(name: str, n_blocks: int | None = None, seed: int = 0) -> list[Check]:
    if name not in SUITES:
        raise KeyError(name)
    fn, default_n = SUITES[name]
    return fn(default_n if n_blocks is None else n_blocks, seed)
