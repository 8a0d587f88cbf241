"""Random direction codebooks, the direction quantizer and distortion figures.

Distortion of a codebook ``B`` is ``1 - E[max_p |v^H p|^2]`` for an isotropic
unit vector ``v``. For an isotropic codeword ``p`` the squared alignment
``|v^H p|^2`` is Beta(1, L-1) distributed, which gives both a closed form for
the expected distortion of a random codebook and an exact way to sample the
winning codeword of a fresh random codebook without building it.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import gamma as gamma_fn, gammaln, poch

from . import _kernels
from .channel import complex_gaussian

__all__ = [
    "MAX_RATE",
    "CapacityError",
    "Codebook",
    "generate_random_codebook",
    "quantize",
    "quantize_fresh",
    "quantize_implicit",
    "empirical_distortion",
    "distortion_bounds",
    "distortion_estimate",
    "asymptotic_distortion",
    "random_codebook_distortion",
    "save_codebook",
    "load_codebook",
]

MAX_RATE = 24


class CapacityError(ValueError):
    """Requested codebook exceeds the explicit-storage guard."""


def _check_rate(R) -> int:
    if int(R) != R or R < 1:
        raise ValueError(f"feedback rate must be a positive integer, got {R}")
    if R > MAX_RATE:
        raise CapacityError(f"R={R} exceeds the {MAX_RATE}-bit guard for explicit codebooks")
    return int(R)


def _unit_rows(c: np.ndarray) -> np.ndarray:
    return c / np.sqrt(np.sum(c.real**2 + c.imag**2, axis=-1, keepdims=True))


@dataclass(frozen=True)
class Codebook:
    """``2**R`` unit-norm codewords of dimension ``L``, stored as rows."""

    L: int
    R: int
    entries: np.ndarray

    def __post_init__(self):
        e = np.array(self.entries, dtype=np.complex128)
        if e.shape != (2**self.R, self.L):
            raise ValueError(f"expected {2**self.R} x {self.L} entries, got {e.shape}")
        if not np.allclose(np.linalg.norm(e, axis=1), 1.0, rtol=0, atol=1e-12):
            raise ValueError("codewords must have unit norm")
        e.flags.writeable = False
        object.__setattr__(self, "entries", e)

    def __len__(self):
        return self.entries.shape[0]


def generate_random_codebook(L: int, R: int, rng: np.random.Generator) -> Codebook:
    """Codebook of ``2**R`` i.i.d. isotropic unit vectors.

    Draws ``rng.standard_normal((2**R, L, 2))``; ``quantize_fresh`` relies on
    this draw order.
    """
    if L < 2:
        raise ValueError("codebooks need L >= 2")
    R = _check_rate(R)
    g = rng.standard_normal((2**R, L, 2))
    return Codebook(L, R, _unit_rows(g[..., 0] + 1j * g[..., 1]))


def _direction(h) -> np.ndarray:
    h = np.asarray(h, dtype=np.complex128)
    nrm = np.linalg.norm(h)
    if nrm == 0.0 or not np.isfinite(nrm):
        raise ValueError("cannot quantize a zero or non-finite channel vector")
    return h / nrm


def quantize(h, book: Codebook) -> tuple[int, np.ndarray]:
    """Index and codeword maximizing ``|v^H p|``; ties go to the lowest index."""
    v = _direction(h)
    if v.shape != (book.L,):
        raise ValueError(f"vector of length {v.shape} does not match codebook dimension {book.L}")
    k, _ = _kernels.best_codeword(book.entries, v)
    return int(k), book.entries[k].copy()


def quantize_fresh(H, R: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Quantize each row of ``H`` with its own newly drawn random codebook.

    Same result as calling ``generate_random_codebook(L, R, rng)`` then
    ``quantize`` row by row, but the codebooks are streamed, never stored.
    Returns ``(indices, codewords)``.
    """
    H = np.atleast_2d(np.asarray(H, dtype=np.complex128))
    if H.shape[1] < 2:
        raise ValueError("codebooks need L >= 2")
    R = _check_rate(R)
    V = np.stack([_direction(h) for h in H])
    idx, raw = _kernels.fresh_best_codewords(rng.bit_generator, 2**R, np.ascontiguousarray(V))
    return idx, _unit_rows(raw[..., 0] + 1j * raw[..., 1])


def quantize_implicit(H, R: float, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Sample the winning codeword of a fresh random codebook of size ``2**R``.

    Exact in distribution: the best squared alignment is the maximum of
    ``2**R`` Beta(1, L-1) draws, and the winning codeword's component
    orthogonal to ``v`` (and its phase) is uniformly distributed. Works for any
    ``R > 0``, including rates far beyond the explicit guard.

    Returns ``(codewords, distortions)`` with ``distortions = 1 - |v^H p|^2``.
    """
    H = np.atleast_2d(np.asarray(H, dtype=np.complex128))
    k, L = H.shape
    if L < 2:
        raise ValueError("codebooks need L >= 2")
    if not R > 0:
        raise ValueError("rate must be positive")
    V = np.stack([_direction(h) for h in H])
    u = rng.random(k)
    # 1 - U**(1/N) for N = 2**R, then the Beta(1, L-1) quantile of the maximum
    tail = -np.expm1(np.log(u) * 2.0 ** (-float(R)))
    dist = tail ** (1.0 / (L - 1))
    w = complex_gaussian(rng, (k, L))
    w -= V * np.sum(V.conj() * w, axis=1, keepdims=True)
    w = _unit_rows(w)
    phase = np.exp(2j * np.pi * rng.random(k))[:, None]
    P = phase * (np.sqrt(1.0 - dist)[:, None] * V + np.sqrt(dist)[:, None] * w)
    return P, dist


def empirical_distortion(book: Codebook, n_samples: int, rng: np.random.Generator) -> float:
    """Monte Carlo estimate of ``D(B)`` over isotropic directions."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    V = _unit_rows(complex_gaussian(rng, (int(n_samples), book.L)))
    best = np.zeros(n_samples)
    # chunk over codewords so memory stays bounded for large books
    step = max(1, 2**20 // max(1, n_samples))
    for start in range(0, len(book), step):
        a = np.abs(V.conj() @ book.entries[start:start + step].T) ** 2
        np.maximum(best, a.max(axis=1), out=best)
    return float(np.clip(1.0 - best.mean(), 0.0, 1.0))


def _check_L(L):
    if int(L) != L or L < 2:
        raise ValueError(f"distortion exponents need L >= 2, got L={L}")


def distortion_bounds(L: int, R: float) -> tuple[float, float]:
    """Main-order lower and upper bounds on the minimum achievable distortion."""
    _check_L(L)
    scale = 2.0 ** (-R / (L - 1))
    lower = (L - 1) / L * scale
    upper = gamma_fn(1.0 / (L - 1)) / (L - 1) * scale
    return float(lower), float(upper)


def distortion_estimate(L: int, R: float) -> float:
    """Main-order distortion of a random codebook, clamped to [0, 1]."""
    return float(min(1.0, max(0.0, distortion_bounds(L, R)[1])))


def asymptotic_distortion(rbar: float) -> float:
    if not rbar > 0:
        raise ValueError("rbar must be positive")
    return float(2.0 ** (-rbar))


def random_codebook_distortion(L: int, R: float) -> float:
    """Exact ``E_B[D(B)]`` for a random codebook of ``2**R`` isotropic codewords.

    ``D = B(1/(L-1), N+1) / (L-1)`` with ``N = 2**R``; its large-``N`` form is
    :func:`distortion_estimate`.
    """
    _check_L(L)
    a = 1.0 / (L - 1)
    n = 2.0 ** R
    # poch keeps Gamma(n+1+a)/Gamma(n+1) accurate where a gammaln difference cancels
    return float(np.exp(gammaln(a) - np.log(poch(n + 1.0, a))) / (L - 1))


def save_codebook(book: Codebook, path) -> None:
    """Write ``book`` as text (``.txt``) or flat little-endian binary (anything else).

    Both layouts hold a header ``L R`` followed by ``2**R`` rows of ``2L``
    reals, real and imaginary parts interleaved.
    """
    path = Path(path)
    flat = np.empty((len(book), 2 * book.L))
    flat[:, 0::2] = book.entries.real
    flat[:, 1::2] = book.entries.imag
    if path.suffix == ".txt":
        np.savetxt(path, flat, fmt="%.17g", header=f"{book.L} {book.R}", comments="")
    else:
        with open(path, "wb") as fh:
            np.array([book.L, book.R], dtype="<i8").tofile(fh)
            flat.astype("<f8").tofile(fh)


def load_codebook(path) -> Codebook:
    path = Path(path)
    if path.suffix == ".txt":
        with open(path) as fh:
            L, R = (int(x) for x in fh.readline().split())
            flat = np.loadtxt(fh, ndmin=2)
    else:
        with open(path, "rb") as fh:
            L, R = (int(x) for x in np.fromfile(fh, dtype="<i8", count=2))
            flat = np.fromfile(fh, dtype="<f8")
        flat = flat.reshape(-1, 2 * L)
    return Codebook(L, R, flat[:, 0::2] + 1j * flat[:, 1::2])
