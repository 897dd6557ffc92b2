import numpy as np
import pytest
from scipy import special

from smmc.benchmarks import gauss1d_perform, norm_squared_perform
from smmc.binning import BinGrid
from smmc.mmc import ThetaTable
from smmc.problem import EvalCounter, standard_normal_problem
from smmc.smmc import (ConvergenceError, SMMCConfig, mse_model, mse_optimal_phi, remap_theta,
                       run_smmc, select_next_cutoff, simulate_flat_estimator)

G100 = BinGrid(0.0, 100.0, 100)


def test_config_validation():
    with pytest.raises(ValueError):
        SMMCConfig(alpha=1.0)
    with pytest.raises(ValueError):
        SMMCConfig(alpha=0.2, n=40)
    with pytest.raises(ValueError):
        SMMCConfig(K=0)


def test_cutoff_uniform_sample():
    ys = np.arange(1.0, 101.0)
    assert select_next_cutoff(ys, 0.2, G100, 1, 100) == 81
    assert select_next_cutoff(ys, 0.2, G100, 1, 60) == 60


def test_cutoff_all_beyond_threshold():
    assert select_next_cutoff(np.full(50, 90.5), 0.2, G100, 40, 76) == 76


def test_cutoff_forced_progress():
    ys = np.concatenate([np.full(90, 30.2), np.full(10, 55.0)])
    assert select_next_cutoff(ys, 0.2, G100, 31, 76) == 32


def test_cutoff_empty():
    with pytest.raises(ValueError):
        select_next_cutoff([], 0.2, G100, 1, 76)


def test_remap_examples():
    t = ThetaTable(1, [0.4, 0.3, 0.2, 0.1])
    r = remap_theta(t, 3)
    assert r.lo == 3 and np.allclose(r.values, [2 / 3, 1 / 3])
    assert np.allclose(remap_theta(t, 1).values, t.values, rtol=1e-15, atol=0)
    assert np.array_equal(remap_theta(t, 4).values, [1.0])
    assert np.allclose(remap_theta(ThetaTable(1, np.array([0.4, 0.3, 0.2, 0.1]) * 7.5), 3).values,
                       r.values, rtol=1e-15)


def test_threshold_at_left_edge():
    p = standard_normal_problem(norm_squared_perform, 10, 0.0)
    res = run_smmc(p, G100, 1, SMMCConfig(n=1000, K=2), np.random.default_rng(0))
    assert res.p_f == 1.0 and res.n_subsets == 0


def test_trace_invariants_and_handoff():
    p = standard_normal_problem(norm_squared_perform, 10, 60.0)
    c = EvalCounter()
    res = run_smmc(p, G100, 61, SMMCConfig(n=2000, K=3), np.random.default_rng(1), c)
    tr = res.trace
    assert tr[0].m_j == 1 and tr[0].rho_j == 1.0
    assert len(tr) <= 60
    for a, b in zip(tr, tr[1:]):
        assert b.m_j > a.m_j and 0 < b.rho_j <= a.rho_j
        # the mass handed over equals the previous subset's tail sum exactly
        assert b.rho_j == float(a.probs[b.m_j - a.m_j:].sum())
        assert b.m_j <= 61
    assert res.p_f == float(tr[-1].probs[61 - tr[-1].m_j:].sum())
    assert sum(s.evals for s in tr) == c.count
    assert res.estimate.rho == pytest.approx(1.0, rel=1e-12)
    d = tr[0].to_dict()
    assert set(d) == {"j", "m_j", "rho_j", "theta", "bin_probs", "evals"}


def test_gaussian_tail_estimate():
    grid = BinGrid(-5.0, 5.0, 50)
    p = standard_normal_problem(gauss1d_perform, 1, 4.0)
    ests = [run_smmc(p, grid, 46, SMMCConfig(n=2000, K=4), np.random.default_rng(s)).p_f
            for s in range(5)]
    truth = special.ndtr(-4.0)
    assert truth / 2 < np.exp(np.mean(np.log(ests))) < truth * 2


def test_max_subsets_exceeded():
    p = standard_normal_problem(norm_squared_perform, 10, 75.0)
    with pytest.raises(ConvergenceError) as info:
        run_smmc(p, G100, 76, SMMCConfig(n=500, K=1, max_subsets=1), np.random.default_rng(0))
    assert len(info.value.trace) == 1


def test_mse_optimal_phi_examples():
    phi, fac = mse_optimal_phi(100, 11, 0)
    assert phi == pytest.approx(100 / 110) and fac == pytest.approx(10 / 110)
    assert mse_optimal_phi(100, 6, 5) == (1.0, 0.0)
    for gap in (2, 10, 100):
        assert abs(mse_optimal_phi(10**6, gap, 0)[0] - 1) < 1e-4
    assert mse_model(phi, 100, 11, 0) == pytest.approx(fac)


def test_flat_estimator_mse_model():
    rng = np.random.default_rng(0)
    for phi in (0.8, 100 / 110, 1.0):
        rel = simulate_flat_estimator(100, 11, phi, 20_000, rng)
        assert np.mean((rel - 1) ** 2) == pytest.approx(mse_model(phi, 100, 11, 0), rel=0.1)
