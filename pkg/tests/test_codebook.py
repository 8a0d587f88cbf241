import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bcfeedback.channel import complex_gaussian
from bcfeedback.codebook import (
    MAX_RATE,
    CapacityError,
    Codebook,
    asymptotic_distortion,
    distortion_bounds,
    distortion_estimate,
    empirical_distortion,
    generate_random_codebook,
    load_codebook,
    quantize,
    quantize_implicit,
    random_codebook_distortion,
    save_codebook,
)


def test_codebook_rows_unit_norm(rng):
    book = generate_random_codebook(4, 5, rng)
    assert book.entries.shape == (32, 4)
    np.testing.assert_allclose(np.linalg.norm(book.entries, axis=1), 1.0, atol=1e-14)
    assert not book.entries.flags.writeable


def test_codebook_validation():
    with pytest.raises(ValueError):
        Codebook(2, 1, np.ones((2, 2), complex))  # not unit norm
    with pytest.raises(ValueError):
        Codebook(2, 2, np.eye(2, dtype=complex))  # wrong size


def test_rate_guard(rng):
    with pytest.raises(CapacityError):
        generate_random_codebook(2, MAX_RATE + 1, rng)


def test_quantize_picks_max_alignment(rng):
    book = generate_random_codebook(3, 6, rng)
    h = complex_gaussian(rng, (3,))
    i, p = quantize(h, book)
    scores = np.abs(book.entries.conj() @ h) ** 2
    assert i == int(np.argmax(scores))
    np.testing.assert_array_equal(p, book.entries[i])


def test_quantize_phase_invariant(rng):
    book = generate_random_codebook(4, 6, rng)
    h = complex_gaussian(rng, (4,))
    assert quantize(h, book)[0] == quantize(np.exp(1j * 0.7) * 3.0 * h, book)[0]


def test_quantize_rejects_zero(rng):
    with pytest.raises(ValueError):
        quantize(np.zeros(2, complex), generate_random_codebook(2, 2, rng))


def test_distortion_bounds_frozen():
    lo, hi = distortion_bounds(4, 12)
    assert lo == pytest.approx(0.046875, rel=1e-15)
    assert hi == pytest.approx(math.gamma(1 / 3) / 3 / 16, rel=1e-14)
    assert distortion_estimate(4, 12) == hi
    with pytest.raises(ValueError):
        distortion_bounds(1, 3)


def test_exact_random_codebook_distortion_small_cases():
    # L=2: distortion of the best of N uniform draws has mean 1/(N+1)
    assert random_codebook_distortion(2, 1) == pytest.approx(1 / 3, rel=1e-14)
    assert random_codebook_distortion(2, 3) == pytest.approx(1 / 9, rel=1e-14)
    # approaches the upper bound as N grows
    assert random_codebook_distortion(4, 24) == pytest.approx(distortion_estimate(4, 24), rel=1e-6)
    assert random_codebook_distortion(32, 64) == pytest.approx(distortion_estimate(32, 64), rel=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 64), st.floats(1.0, 128.0))
def test_estimate_between_bounds(L, R):
    lo, hi = distortion_bounds(L, R)
    assert lo <= random_codebook_distortion(L, R) * (1 + 1e-9)
    assert random_codebook_distortion(L, R) <= hi * (1 + 1e-9)
    assert 0.0 <= distortion_estimate(L, R) <= 1.0


def test_asymptotic_distortion():
    assert asymptotic_distortion(2.0) == 0.25
    with pytest.raises(ValueError):
        asymptotic_distortion(0.0)


def test_empirical_distortion_in_unit_interval(rng):
    for L, R in ((2, 1), (3, 4)):
        assert 0.0 <= empirical_distortion(generate_random_codebook(L, R, rng), 500, rng) <= 1.0


def test_empirical_distortion_of_random_books(rng):
    L, R, n_books = 4, 6, 60
    vals = [empirical_distortion(generate_random_codebook(L, R, rng), 2000, rng) for _ in range(n_books)]
    se = np.std(vals, ddof=1) / math.sqrt(n_books)
    assert abs(np.mean(vals) - random_codebook_distortion(L, R)) < 4 * se


def test_implicit_sampler_matches_exact_mean(rng):
    for L, R in ((4, 6), (16, 32), (128, 24)):
        H = complex_gaussian(rng, (40_000, L))
        P, d = quantize_implicit(H, R, rng)
        np.testing.assert_allclose(np.linalg.norm(P, axis=1), 1.0, atol=1e-12)
        V = H / np.linalg.norm(H, axis=1, keepdims=True)
        np.testing.assert_allclose(1 - np.abs(np.sum(V.conj() * P, axis=1)) ** 2, d, atol=1e-10)
        se = d.std(ddof=1) / math.sqrt(len(d))
        assert abs(d.mean() - random_codebook_distortion(L, R)) < 4 * se


@pytest.mark.parametrize("suffix", [".txt", ".bin"])
def test_codebook_roundtrip(tmp_path, rng, suffix):
    book = generate_random_codebook(3, 4, rng)
    path = tmp_path / f"book{suffix}"
    save_codebook(book, path)
    back = load_codebook(path)
    assert (back.L, back.R) == (3, 4)
    np.testing.assert_array_equal(back.entries, book.entries)
