import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bcfeedback import asymptotics as asy

TWO_ATOM = asy.EtaDistribution([1.0, 2.0], [0.5, 0.5], 2.0)


def single(eta0=1.0, mbar=1.0):
    return asy.EtaDistribution([eta0], [1.0], mbar)


def test_two_atom_frozen_value():
    assert asy.spatial_efficiency(TWO_ATOM, 0.5) == pytest.approx(0.5 * math.log2(3), abs=1e-12)


def test_single_atom_closed_form():
    for s in (0.05, 0.3, 0.5, 0.9):
        expect = s * math.log2(1 + 3.0 * (1 - s) / s)
        assert asy.spatial_efficiency(single(3.0), s) == pytest.approx(expect, rel=1e-13)


def test_single_atom_optimum_is_inverse_e():
    s, v = asy.optimal_sbar(single())
    assert s == pytest.approx(1 / math.e, abs=1e-4)
    assert v == pytest.approx(math.log2(math.e) / math.e, rel=1e-9)


def test_optimum_grows_with_snr():
    opts = [asy.optimal_sbar(single(e))[0] for e in (1.0, 10.0, 100.0)]
    assert opts == sorted(opts)


def test_endpoints_are_zero():
    for s in (0.0, 1.0, -0.5, 1.5):
        assert asy.spatial_efficiency(TWO_ATOM, s) == 0.0


def test_threshold_and_tails():
    assert asy.tail_mass(TWO_ATOM, 1.0, strict=False) == 2.0
    assert asy.tail_mass(TWO_ATOM, 1.0, strict=True) == 1.0
    assert asy.eta_threshold(TWO_ATOM, 0.5).value == 2.0
    assert asy.eta_threshold(TWO_ATOM, 0.99).value == 2.0
    # mbar below sbar: everyone admitted, padding at zero
    thr = asy.eta_threshold(single(2.0, 0.5), 0.7)
    assert thr.all_admitted and thr.value == 0.0
    with pytest.raises(ValueError):
        asy.eta_threshold(TWO_ATOM, 1.0)


def test_distribution_merges_and_validates():
    d = asy.EtaDistribution([2.0, 1.0, 2.0], [0.25, 0.5, 0.25], 1.0)
    np.testing.assert_array_equal(d.etas, [1.0, 2.0])
    np.testing.assert_array_equal(d.weights, [0.5, 0.5])
    with pytest.raises(ValueError):
        asy.EtaDistribution([1.0], [0.9], 1.0)
    with pytest.raises(ValueError):
        asy.EtaDistribution([-1.0], [1.0], 1.0)


def test_from_system():
    d = asy.EtaDistribution.from_system(4, [1.0] * 8, [8] * 8, 10.0)
    assert d.mbar == 2.0
    assert d.etas[0] == pytest.approx(10 * 0.75 / (1 + 2.5))


def test_count_local_maxima():
    assert asy.count_local_maxima([0, 1, 2, 1, 0]) == 1
    assert asy.count_local_maxima([0, 2, 2, 2, 1]) == 1
    assert asy.count_local_maxima([0, 2, 1, 2, 0]) == 2
    assert asy.count_local_maxima([1, 1, 1]) == 1


def test_golden_section():
    x, fx = asy.golden_section_max(lambda t: -(t - 0.3) ** 2, 0.0, 1.0, tol=1e-8)
    assert x == pytest.approx(0.3, abs=1e-7) and fx == pytest.approx(0.0, abs=1e-12)


def test_non_unimodal_raises(monkeypatch):
    monkeypatch.setattr(asy, "efficiency_curve", lambda d, g, log=None: np.sin(12 * np.asarray(g)))
    with pytest.raises(asy.NonUnimodalError) as ei:
        asy.optimal_sbar(TWO_ATOM)
    assert ei.value.n_maxima >= 2


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.floats(0.01, 200), st.floats(0.05, 1)), min_size=1, max_size=8),
       st.floats(0.3, 5.0))
def test_random_atomic_measures_unimodal(atoms, mbar):
    etas = np.array([a for a, _ in atoms])
    w = np.array([b for _, b in atoms])
    d = asy.EtaDistribution(etas, w / w.sum(), mbar)
    vals = asy.efficiency_curve(d, np.linspace(1e-6, 1 - 1e-6, 512))
    assert asy.count_local_maxima(vals) == 1


def test_optimum_matches_grid():
    d = asy.EtaDistribution([0.5, 3.0, 20.0], [0.3, 0.5, 0.2], 1.5)
    s, v = asy.optimal_sbar(d)
    grid = np.linspace(1e-6, 1 - 1e-6, 10_000)
    vals = asy.efficiency_curve(d, grid)
    assert s == pytest.approx(grid[np.argmax(vals)], abs=1e-3)
    assert v >= vals.max() - 1e-9


def test_derivative_atomless_matches_finite_difference():
    # uniform density on [0, 4] with total mass mbar = 2
    density = lambda e: 0.5 if 0.0 <= e <= 4.0 else 0.0

    def y(s):
        t = asy.threshold_for_density(density, s, (0.0, 4.0))
        from scipy import integrate

        return integrate.quad(lambda e: math.log1p(e * (1 - s) / s) * density(e), t, 4.0)[0]

    for s in (0.3, 0.6, 1.2):
        h = 1e-5
        fd = (y(s + h) - y(s - h)) / (2 * h)
        assert asy.derivative_atomless(density, s, (0.0, 4.0)) == pytest.approx(fd, rel=1e-5)


def test_threshold_for_density():
    density = lambda e: 0.5 if 0.0 <= e <= 4.0 else 0.0
    assert asy.threshold_for_density(density, 1.0, (0.0, 4.0)) == pytest.approx(2.0, abs=1e-9)
    assert asy.threshold_for_density(density, 5.0, (0.0, 4.0)) == 0.0


def test_log_positivity_margin():
    x = np.logspace(-6, 4, 10_000)
    assert np.all(asy.log_positivity_margin(x) > 0)
    # small-x behaviour ~ x^3 / 3
    assert asy.log_positivity_margin(1e-3) == pytest.approx(1e-9 / 3, rel=1e-2)


def test_distribution_file_roundtrip(tmp_path):
    p = tmp_path / "d.txt"
    asy.save_eta_distribution(TWO_ATOM, p)
    back = asy.load_eta_distribution(p)
    np.testing.assert_array_equal(back.etas, TWO_ATOM.etas)
    assert back.mbar == 2.0
    p.write_text("# comment\nmbar 1\n1 2\n3 2\n")
    with pytest.raises(ValueError):
        asy.load_eta_distribution(p)
    assert asy.load_eta_distribution(p, normalize=True).weights.tolist() == [0.5, 0.5]
    p.write_text("1 1\n")
    with pytest.raises(ValueError):
        asy.load_eta_distribution(p)


def test_optimum_independent_of_log_base():
    d = asy.EtaDistribution([0.5, 3.0, 20.0], [0.3, 0.5, 0.2], 1.5)
    s2, v2 = asy.optimal_sbar(d)
    se, ve = asy.optimal_sbar(d, log=np.log)
    assert s2 == pytest.approx(se, abs=1e-9)
    assert ve == pytest.approx(v2 * math.log(2), rel=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 100), st.floats(1.0, 4.0), st.floats(1e-4, 1 - 1e-4))
def test_single_atom_matches_per_user_limit(eta0, mbar, s):
    expect = s * math.log2(1 + eta0 * (1 - s) / s)
    assert asy.spatial_efficiency(single(eta0, mbar), s) == pytest.approx(expect, rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0, 50), min_size=1, max_size=6), st.floats(0.1, 3), st.floats(-0.5, 1.5))
def test_efficiency_nonnegative(etas, mbar, s):
    d = asy.EtaDistribution.from_population(etas, mbar)
    assert asy.spatial_efficiency(d, s) >= 0.0
