import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special, stats

from smmc.binning import (AlignmentError, BinGrid, DistributionEstimate, align_threshold,
                          bin_index, ccdf_from_probs, histogram, pdf_from_probs, quantile,
                          read_csv, write_csv)

G100 = BinGrid(0.0, 100.0, 100)


def chi2_masses(grid, d=10):
    return -np.diff(special.gammaincc(d / 2, grid.edges / 2))


def test_bin_index_examples():
    assert bin_index(G100, 74.5) == 75
    assert bin_index(G100, 0.0) == 1
    assert bin_index(G100, 100.0) == 100
    assert bin_index(G100, -0.001) is None
    assert bin_index(G100, 100.001) is None


def test_bins_tile_interval():
    ys = np.linspace(0, 100, 10_001)
    idx = G100.indices(ys)
    assert np.all((idx >= 1) & (idx <= 100))
    lefts = G100.lefts[idx - 1]
    rights = lefts + G100.delta
    inside = (ys >= lefts - 1e-12) & ((ys < rights) | ((idx == 100) & (ys == 100.0)))
    assert inside.all()


def test_grid_validation():
    with pytest.raises(ValueError):
        BinGrid(1.0, 1.0, 10)
    with pytest.raises(ValueError):
        BinGrid(0.0, 1.0, 1)


def test_align_threshold_examples():
    assert align_threshold(G100, 75.0) == 76
    assert align_threshold(BinGrid(0, 10, 10), 0.0) == 1
    with pytest.raises(AlignmentError, match="adjust"):
        align_threshold(G100, 75.3)
    with pytest.raises(AlignmentError):
        align_threshold(G100, 100.0)


@settings(max_examples=100, deadline=None)
@given(st.floats(-50, 50), st.floats(0.1, 100), st.integers(2, 500), st.data())
def test_align_threshold_round_trip(a, width, m, data):
    grid = BinGrid(a, a + width, m)
    k = data.draw(st.integers(0, m - 1))
    y = grid.left_edge(k + 1)
    ms = align_threshold(grid, y)
    assert ms == k + 1
    assert abs(grid.left_edge(ms) - y) <= 1e-12


def test_histogram_examples():
    counts, out = histogram(G100, G100.centers)
    assert np.all(counts == 1) and out == 0
    counts, out = histogram(G100, [])
    assert counts.sum() == 0 and out == 0


def test_histogram_chi2_band():
    ys = np.random.default_rng(2).chisquare(10, 100_000)
    counts, out = histogram(G100, ys)
    p = chi2_masses(G100)[9]
    sigma = np.sqrt(1e5 * p * (1 - p))
    assert abs(counts[9] - 1e5 * p) < 3 * sigma
    assert counts.sum() + out == len(ys)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-10, 110), min_size=0, max_size=200), st.randoms())
def test_histogram_total_and_permutation(ys, rnd):
    counts, out = histogram(G100, ys)
    assert counts.sum() + out == len(ys)
    shuffled = list(ys)
    rnd.shuffle(shuffled)
    c2, o2 = histogram(G100, shuffled)
    assert np.array_equal(counts, c2) and out == o2


def test_quantile_examples():
    assert quantile(np.arange(1, 101), 0.9) == 90
    assert quantile([5.0], 0.3) == 5.0
    assert quantile(np.arange(1, 11), 0.85) == 9
    with pytest.raises(ValueError):
        quantile([], 0.5)


def test_pdf_examples():
    g = BinGrid(0, 1, 10)
    est = DistributionEstimate.from_probs(g, np.full(10, 0.1))
    assert np.allclose([p for _, p in pdf_from_probs(est)], 1.0)
    est = DistributionEstimate.from_probs(BinGrid(0, 4, 4), [0.5, 0.5, 0, 0])
    assert [p for _, p in pdf_from_probs(est)] == [0.5, 0.5, 0.0, 0.0]


def test_pdf_matches_gaussian_density():
    g = BinGrid(-5, 5, 100)
    est = DistributionEstimate.from_probs(g, np.diff(special.ndtr(g.edges)))
    for c, p in pdf_from_probs(est):
        if abs(c) <= 3:
            assert p == pytest.approx(stats.norm.pdf(c), rel=0.01)


def test_ccdf_examples():
    est = DistributionEstimate.from_probs(BinGrid(0, 4, 4), np.full(4, 0.25))
    assert [v for _, v in ccdf_from_probs(est)] == [1.0, 0.75, 0.5, 0.25]
    est = DistributionEstimate.from_probs(BinGrid(0, 4, 4), [0, 0, 0, 0.3])
    assert np.allclose(est.ccdf(), 0.3)
    est = DistributionEstimate.from_probs(G100, chi2_masses(G100))
    assert est.ccdf()[75] == pytest.approx(4.76e-12, rel=1e-3)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=2, max_size=50))
def test_ccdf_monotone_and_starts_at_rho(probs):
    g = BinGrid(0, 1, len(probs))
    est = DistributionEstimate.from_probs(g, probs)
    c = est.ccdf()
    assert np.all(np.diff(c) <= 1e-15)
    assert c[0] == pytest.approx(est.rho, rel=1e-12, abs=1e-300)


def test_negative_probs_rejected():
    with pytest.raises(ValueError):
        DistributionEstimate.from_probs(BinGrid(0, 1, 2), [0.5, -0.1])


def test_csv_round_trip(tmp_path):
    g = BinGrid(-5, 5, 50)
    est = DistributionEstimate.from_probs(g, np.diff(special.ndtr(g.edges)))
    path = write_csv(est, tmp_path / "d.csv")
    assert path.read_text().splitlines()[0] == "bin_center,bin_left,prob,pdf,ccdf"
    back = read_csv(path)
    assert back.grid.m == g.m
    assert np.allclose(back.grid.edges, g.edges, rtol=0, atol=1e-12)
    assert np.allclose(back.probs, est.probs, rtol=1e-12, atol=0)
