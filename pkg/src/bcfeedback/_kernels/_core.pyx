# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled quantization kernels.

Both kernels reproduce the selection rule of the numpy fallback: the codeword
maximizing ``|c^H v|^2 / ||c||^2``, ties resolved towards the lowest index.
``fresh_best_codewords`` draws its Gaussian entries straight from the numpy bit
generator in the same order as ``rng.standard_normal((n_words, L, 2))``, so it
consumes the stream identically to the fallback and never materializes the
codebook.
"""
import numpy as np
cimport numpy as cnp
from cpython.pycapsule cimport PyCapsule_IsValid, PyCapsule_GetPointer
from numpy.random cimport bitgen_t
from numpy.random.c_distributions cimport random_standard_normal

cnp.import_array()


def best_codeword(const double complex[:, ::1] book, const double complex[::1] v):
    cdef Py_ssize_t n = book.shape[0], L = book.shape[1]
    cdef Py_ssize_t k, l, best = 0
    cdef double re, im, ar, ai, br, bi, num, den, score, best_score = -1.0
    if v.shape[0] != L:
        raise ValueError("dimension mismatch between codebook and vector")
    with nogil:
        for k in range(n):
            re = 0.0
            im = 0.0
            den = 0.0
            for l in range(L):
                ar = book[k, l].real
                ai = book[k, l].imag
                br = v[l].real
                bi = v[l].imag
                # conj(a) * b
                re = re + ar * br + ai * bi
                im = im + ar * bi - ai * br
                den = den + ar * ar + ai * ai
            num = re * re + im * im
            score = num / den
            if score > best_score:
                best_score = score
                best = k
    return best, best_score


def fresh_best_codewords(bit_generator, Py_ssize_t n_words, const double complex[:, ::1] V):
    """Quantize each row of ``V`` against its own freshly drawn codebook.

    Returns ``(indices, raw)`` where ``raw[j]`` holds the unnormalized Gaussian
    entries of the winning codeword for row ``j``.
    """
    cdef Py_ssize_t k_users = V.shape[0], L = V.shape[1]
    cdef Py_ssize_t j, k, l, best
    cdef double re, im, gr, gi, den, score, best_score
    cdef bitgen_t *rng
    cdef const char *name = "BitGenerator"
    cdef double[:, ::1] scratch = np.empty((L, 2), dtype=np.float64)
    cdef double[:, :, ::1] raw = np.empty((k_users, L, 2), dtype=np.float64)
    cdef cnp.intp_t[::1] idx = np.empty(k_users, dtype=np.intp)

    capsule = bit_generator.capsule
    if not PyCapsule_IsValid(capsule, name):
        raise ValueError("expected a numpy BitGenerator")
    rng = <bitgen_t *> PyCapsule_GetPointer(capsule, name)

    with bit_generator.lock, nogil:
        for j in range(k_users):
            best = 0
            best_score = -1.0
            for k in range(n_words):
                re = 0.0
                im = 0.0
                den = 0.0
                for l in range(L):
                    gr = random_standard_normal(rng)
                    gi = random_standard_normal(rng)
                    scratch[l, 0] = gr
                    scratch[l, 1] = gi
                    re = re + gr * V[j, l].real + gi * V[j, l].imag
                    im = im + gr * V[j, l].imag - gi * V[j, l].real
                    den = den + gr * gr + gi * gi
                score = (re * re + im * im) / den
                if score > best_score:
                    best_score = score
                    best = k
                    for l in range(L):
                        raw[j, l, 0] = scratch[l, 0]
                        raw[j, l, 1] = scratch[l, 1]
            idx[j] = best
    return np.asarray(idx), np.asarray(raw)
