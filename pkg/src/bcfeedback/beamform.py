"""Zero-forcing beams by unitary projection, and per-user powers and rates.

User i's beam is the normalized projection of its quantized direction ``p_i``
onto the orthogonal complement of the other on-users' directions. The
projection ``T_i T_i^H`` does not depend on which orthonormal basis ``T_i`` of
the complement is used, so the randomized basis only matters for the
expectation identities; the batched path uses the equivalent closed form
``Q = P^T (conj(P) P^T)^{-1}`` with normalized columns.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelBlock, complex_gaussian, gram_schmidt

__all__ = [
    "RANK_TOL",
    "DEGENERATE_TOL",
    "EmptyComplementError",
    "DegenerateBeamError",
    "BeamformingSolution",
    "orthonormal_complement_basis",
    "zero_forcing_beams",
    "zero_forcing_batch",
    "instantaneous_powers",
    "powers_from_gains",
    "per_user_throughput",
]

RANK_TOL = 1e-10
DEGENERATE_TOL = 1e-10


class EmptyComplementError(ValueError):
    """The input vectors span the whole space."""


class DegenerateBeamError(ArithmeticError):
    """A quantized direction lies in the span of the other on-users' directions."""

    def __init__(self, user, residual):
        super().__init__(f"user {user}: projection norm {residual:.3g} is numerically zero")
        self.user = user
        self.residual = residual


@dataclass(frozen=True)
class BeamformingSolution:
    on_users: tuple
    quantized_dirs: np.ndarray  # (s, L), rows p_i
    beams: np.ndarray  # (s, L), rows q_i
    complement_dims: tuple

    @property
    def s(self) -> int:
        return len(self.on_users)

    @property
    def L(self) -> int:
        return self.beams.shape[1]


def _span_basis(vectors, L):
    """Orthonormal basis (columns) of the span of ``vectors`` and its rank."""
    if len(vectors) == 0:
        return np.zeros((L, 0), dtype=np.complex128)
    A = np.asarray(vectors, dtype=np.complex128).reshape(-1, L).T
    U, sv, _ = np.linalg.svd(A, full_matrices=False)
    rank = int(np.sum(sv > RANK_TOL * sv[0])) if sv[0] > 0 else 0
    return U[:, :rank]


def orthonormal_complement_basis(vectors, L: int, rng: np.random.Generator) -> np.ndarray:
    """Random orthonormal basis ``T`` (``L x t``) of the complement of span(vectors).

    A Gaussian matrix is projected off the span and orthonormalized, so the
    basis is uniformly rotated within the complement.
    """
    vectors = [np.asarray(v, dtype=np.complex128) for v in vectors]
    for v in vectors:
        if v.shape != (L,):
            raise ValueError(f"vector of shape {v.shape} does not have length {L}")
    span = _span_basis(vectors, L)
    t = L - span.shape[1]
    if t == 0:
        raise EmptyComplementError(f"vectors span all of C^{L}")
    G = complex_gaussian(rng, (L, t))
    for _ in range(2):
        G -= span @ (span.conj().T @ G)
    return gram_schmidt(G)


def zero_forcing_beams(quantized_dirs, L: int, rng: np.random.Generator | None = None,
                       on_users=None) -> BeamformingSolution:
    """Unitary-projection ZF beams for ``s`` on-users.

    With ``rng`` the complement bases are drawn at random, as in the
    construction; without it the (identical) orthogonal projector is used.
    Raises :class:`DegenerateBeamError` when some ``p_i`` lies in the span of
    the others.
    """
    P = np.atleast_2d(np.asarray(quantized_dirs, dtype=np.complex128))
    s = P.shape[0]
    if s < 1 or P.shape[1] != L:
        raise ValueError(f"need s >= 1 directions of length {L}, got shape {P.shape}")
    users = tuple(range(s)) if on_users is None else tuple(on_users)
    if len(users) != s:
        raise ValueError("on_users does not match the number of directions")
    if s == 1:
        return BeamformingSolution(users, P.copy(), P.copy(), (L,))

    Q = np.empty_like(P)
    dims = []
    for i in range(s):
        others = [P[j] for j in range(s) if j != i]
        if rng is not None:
            T = orthonormal_complement_basis(others, L, rng)
            proj = T @ (T.conj().T @ P[i])
            dims.append(T.shape[1])
        else:
            span = _span_basis(others, L)
            proj = P[i] - span @ (span.conj().T @ P[i])
            dims.append(L - span.shape[1])
        nrm = np.linalg.norm(proj)
        if nrm <= DEGENERATE_TOL:
            raise DegenerateBeamError(users[i], nrm)
        Q[i] = proj / nrm
    return BeamformingSolution(users, P.copy(), Q, tuple(dims))


def zero_forcing_batch(P: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Batched ZF beams for stacks of quantized directions.

    ``P`` has shape ``(n, s, L)``. Returns ``(Q, ok)`` where ``Q[b, i]`` is user
    i's beam in batch entry b and ``ok[b]`` is False for entries with a
    degenerate direction (their beams are NaN).
    """
    P = np.asarray(P, dtype=np.complex128)
    n, s, L = P.shape
    if s == 1:
        return P.copy(), np.ones(n, dtype=bool)
    ok = np.ones(n, dtype=bool)
    if s > L:
        return np.full_like(P, np.nan), np.zeros(n, dtype=bool)
    A = P.conj() @ np.swapaxes(P, 1, 2)  # A[j, k] = p_j^H p_k
    try:
        Ainv = np.linalg.inv(A)
    except np.linalg.LinAlgError:
        Ainv = np.empty_like(A)
        for b in range(n):
            try:
                Ainv[b] = np.linalg.inv(A[b])
            except np.linalg.LinAlgError:
                Ainv[b] = np.nan
    # squared distance from p_i to the span of the others is 1 / (A^{-1})_ii
    diag = np.einsum("bii->bi", Ainv).real
    with np.errstate(divide="ignore", invalid="ignore"):
        resid = 1.0 / np.sqrt(diag)
    ok &= np.all(np.isfinite(resid) & (resid > DEGENERATE_TOL), axis=1)
    Q = np.swapaxes(np.swapaxes(P, 1, 2) @ Ainv, 1, 2)  # rows q_i
    with np.errstate(divide="ignore", invalid="ignore"):
        Q /= np.linalg.norm(Q, axis=2, keepdims=True)
    Q[~ok] = np.nan
    return Q, ok


def powers_from_gains(G: np.ndarray, gamma, rho: float):
    """Signal and interference powers from gains ``G[..., i, j] = |h_i^H q_j|^2``."""
    G = np.asarray(G, dtype=np.float64)
    s = G.shape[-1]
    scale = (rho / s) * np.asarray(gamma, dtype=np.float64)
    sig_gain = np.einsum("...ii->...i", G)
    int_gain = G.sum(axis=-1) - sig_gain
    if s == 1:
        int_gain = np.zeros_like(sig_gain)
    return scale * sig_gain, scale * int_gain


def instantaneous_powers(block: ChannelBlock, sol: BeamformingSolution, rho: float, s: int | None = None):
    """Per on-user ``(P_sig, P_int)`` in the order of ``sol.on_users``."""
    if s is not None and s != sol.s:
        raise ValueError(f"s={s} does not match the {sol.s} on-users")
    if not rho > 0:
        raise ValueError("rho must be positive")
    if block.L != sol.L:
        raise ValueError(f"channel dimension {block.L} does not match beams of dimension {sol.L}")
    idx = list(sol.on_users)
    H = block.h[idx]
    G = np.abs(H.conj() @ sol.beams.T) ** 2
    return powers_from_gains(G, block.gamma[idx], rho)


def per_user_throughput(P_sig, P_int):
    """``log2(1 + P_sig / (1 + P_int))`` in bits per channel use."""
    P_sig = np.asarray(P_sig, dtype=np.float64)
    P_int = np.asarray(P_int, dtype=np.float64)
    if np.any(P_sig < 0) or np.any(P_int < 0):
        raise ValueError("powers must be nonnegative")
    out = np.log2(1.0 + P_sig / (1.0 + P_int))
    return float(out) if out.ndim == 0 else out
