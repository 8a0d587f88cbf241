"""Rayleigh block-fading realizations and concentration diagnostics.

Channel entries are circularly symmetric complex Gaussians with total variance
one (real and imaginary parts each ``N(0, 1/2)``).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ChannelBlock",
    "complex_gaussian",
    "sample_block",
    "magnitude_extremes",
    "random_orthonormal_beams",
    "max_beam_alignment",
    "block_rng",
]


def block_rng(seed: int, index: int) -> np.random.Generator:
    """Child generator for work item ``index`` of a run seeded with ``seed``.

    Depends only on ``(seed, index)`` so results do not depend on how blocks
    are scheduled across workers.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(index),))
    return np.random.Generator(np.random.SFC64(ss))


def complex_gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    """i.i.d. CN(0, 1) samples."""
    g = rng.standard_normal(tuple(np.atleast_1d(shape)) + (2,))
    return (g[..., 0] + 1j * g[..., 1]) * np.sqrt(0.5)


@dataclass(frozen=True)
class ChannelBlock:
    """One fading realization: ``h[i]`` is user i's channel, ``gamma[i]`` its path loss."""

    h: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.h, dtype=np.complex128)
        gamma = np.asarray(self.gamma, dtype=np.float64)
        if h.ndim != 2 or h.shape[0] < 1 or h.shape[1] < 1:
            raise ValueError(f"h must be an (m, L) array with m, L >= 1, got shape {h.shape}")
        if gamma.shape != (h.shape[0],):
            raise ValueError(f"gamma must have {h.shape[0]} entries, got {gamma.shape}")
        if np.any(gamma < 0) or not np.all(np.isfinite(gamma)):
            raise ValueError("path loss coefficients must be finite and nonnegative")
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "gamma", gamma)

    @property
    def L(self) -> int:
        return self.h.shape[1]

    @property
    def m(self) -> int:
        return self.h.shape[0]

    def normalized_magnitudes(self) -> np.ndarray:
        """``(1/L) ||h_i||^2`` for every user."""
        return np.sum(np.abs(self.h) ** 2, axis=1) / self.L


def sample_block(L: int, m: int, gamma, rng: np.random.Generator) -> ChannelBlock:
    if int(L) != L or int(m) != m or L < 1 or m < 1:
        raise ValueError(f"L and m must be positive integers, got L={L}, m={m}")
    gamma = np.asarray(gamma, dtype=np.float64)
    if gamma.ndim == 0:
        gamma = np.full(int(m), float(gamma))
    if gamma.shape != (m,):
        raise ValueError(f"expected {m} path loss coefficients, got shape {gamma.shape}")
    return ChannelBlock(complex_gaussian(rng, (int(m), int(L))), gamma)


def magnitude_extremes(blocks) -> tuple[np.ndarray, np.ndarray]:
    """Per-block max and min over users of ``(1/L)||h_i||^2``.

    Returns two arrays of length ``len(blocks)``.
    """
    blocks = list(blocks)
    if not blocks:
        raise ValueError("need at least one block")
    mags = [b.normalized_magnitudes() for b in blocks]
    return np.array([x.max() for x in mags]), np.array([x.min() for x in mags])


def gram_schmidt(A: np.ndarray, reorth: bool = True) -> np.ndarray:
    """Orthonormalize the columns of ``A`` by modified Gram-Schmidt.

    A second pass is run when ``reorth`` is set, which keeps the Gram residual
    at machine precision. Columns must be linearly independent.
    """
    Q = np.array(A, dtype=np.complex128)
    n = Q.shape[1]
    scale = np.linalg.norm(Q, axis=0)
    for k in range(n):
        for _ in range(2 if reorth else 1):
            for j in range(k):
                Q[:, k] -= (Q[:, j].conj() @ Q[:, k]) * Q[:, j]
        nrm = np.linalg.norm(Q[:, k])
        if nrm <= 1e-12 * scale[k]:
            raise np.linalg.LinAlgError("columns are linearly dependent")
        Q[:, k] /= nrm
    return Q


def random_orthonormal_beams(L: int, rng: np.random.Generator) -> np.ndarray:
    """``L`` random orthonormal beams as the columns of an ``L x L`` unitary matrix."""
    if L < 1:
        raise ValueError("L must be >= 1")
    # QR with a unit-phase diagonal in R is Gram-Schmidt of the same columns
    Q, R = np.linalg.qr(complex_gaussian(rng, (L, L)))
    d = np.diagonal(R)
    return Q * (d / np.abs(d))


def max_beam_alignment(block: ChannelBlock, beams: np.ndarray) -> float:
    """``max_{i,k} (1/L)|h_i^H b_k|^2`` with beams given as columns."""
    beams = np.asarray(beams)
    if beams.ndim != 2 or beams.shape[0] != block.L:
        raise ValueError(f"beams must be an (L={block.L}, k) array, got shape {beams.shape}")
    return float(np.max(np.abs(block.h.conj() @ beams) ** 2) / block.L)
