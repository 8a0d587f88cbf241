"""Pure numpy versions of the compiled kernels in ``_core.pyx``."""
import numpy as np


def _scores(book, v):
    # |c^H v|^2 / ||c||^2 so that unnormalized rows score like their unit versions
    num = np.abs(book.conj() @ v) ** 2
    den = np.einsum("kl,kl->k", book.real, book.real) + np.einsum("kl,kl->k", book.imag, book.imag)
    return num / den


def best_codeword(book, v):
    book = np.asarray(book, dtype=np.complex128)
    v = np.asarray(v, dtype=np.complex128)
    if book.shape[1] != v.shape[0]:
        raise ValueError("dimension mismatch between codebook and vector")
    scores = _scores(book, v)
    k = int(np.argmax(scores))  # first maximal index
    return k, float(scores[k])


def fresh_best_codewords(bit_generator, n_words, V):
    rng = np.random.Generator(bit_generator)
    V = np.asarray(V, dtype=np.complex128)
    k_users, L = V.shape
    idx = np.empty(k_users, dtype=np.intp)
    raw = np.empty((k_users, L, 2))
    for j in range(k_users):
        g = rng.standard_normal((n_words, L, 2))
        k, _ = best_codeword(g[..., 0] + 1j * g[..., 1], V[j])
        idx[j] = k
        raw[j] = g[k]
    return idx, raw
