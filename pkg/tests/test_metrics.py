"""Ergodic metric, occupancy grids and study summaries."""

import math

import numpy as np
import pytest
from scipy import stats

from koopland.metrics import (SpatialDistribution, ergodicity, heatmap,
                              summarize, write_heatmap_csv, write_heatmap_pgm)
from koopland.trials import TrialRecord


@pytest.fixture(scope="module")
def dist():
    return SpatialDistribution()


# ------------------------------------------------------------ ergodic metric

def brute_force_metric(xy, dist, grid=400):
    """Independent evaluation: target coefficients by Riemann sum on a dense
    grid, trajectory coefficients by direct summation, explicit loops."""
    lx, ly = dist.bounds
    gx, gy = dist.goal
    xs = (np.arange(grid) + 0.5) * lx / grid
    ys = (np.arange(grid) + 0.5) * ly / grid
    gxv, gyv = np.meshgrid(xs, ys, indexing="ij")
    rho = np.exp(-0.5 * ((gxv - gx) ** 2 + (gyv - gy) ** 2) / dist.sigma ** 2)
    rho /= rho.sum()
    total = 0.0
    for k1 in range(dist.k_max + 1):
        for k2 in range(dist.k_max + 1):
            hx = lx if k1 == 0 else lx / 2
            hy = ly if k2 == 0 else ly / 2
            hk = math.sqrt(hx * hy)
            fk_grid = np.cos(k1 * np.pi * gxv / lx) * np.cos(k2 * np.pi * gyv / ly) / hk
            xi = float((fk_grid * rho).sum())
            ck = float(np.mean(np.cos(k1 * np.pi * xy[:, 0] / lx)
                               * np.cos(k2 * np.pi * xy[:, 1] / ly))) / hk
            lam = (1.0 + k1 ** 2 + k2 ** 2) ** -1.5
            total += lam * (ck - xi) ** 2
    return total


def test_weights_positive_and_decreasing(dist):
    assert np.all(dist.lam > 0)
    flat = [(k1 * k1 + k2 * k2, dist.lam[k1, k2])
            for k1 in range(dist.k_max + 1) for k2 in range(dist.k_max + 1)]
    for (n1, l1) in flat:
        for (n2, l2) in flat:
            if n1 < n2:
                assert l1 > l2


def test_metric_agrees_with_brute_force(dist):
    rng = np.random.default_rng(0)
    xy = np.column_stack([rng.uniform(2, 18, 200), rng.uniform(2, 14, 200)])
    assert ergodicity(xy, dist) == pytest.approx(brute_force_metric(xy, dist),
                                                 rel=1e-4)


def test_stationary_at_goal_beats_stationary_far(dist):
    at_goal = np.tile([10.0, 6.0], (50, 1))
    far = np.tile([18.0, 6.0], (50, 1))  # 8 m away
    m_goal = ergodicity(at_goal, dist)
    m_far = ergodicity(far, dist)
    assert m_goal < m_far
    # same ordering under the independent evaluation
    assert brute_force_metric(at_goal, dist) < brute_force_metric(far, dist)


def test_at_goal_point_beats_any_off_goal_point(dist):
    m_goal = ergodicity(np.array([[10.0, 6.0]]), dist)
    rng = np.random.default_rng(1)
    for _ in range(25):
        p = np.array([[rng.uniform(0, 20), rng.uniform(0, 16)]])
        if np.hypot(p[0, 0] - 10.0, p[0, 1] - 6.0) < 0.5:
            continue
        assert m_goal < ergodicity(p, dist)


def test_metric_monotone_along_distance_ray(dist):
    values = [ergodicity(np.tile([10.0 + d, 6.0], (10, 1)), dist)
              for d in np.linspace(0.0, 8.0, 9)]
    assert all(a < b for a, b in zip(values, values[1:]))


def test_metric_invariant_under_duplication_and_permutation(dist):
    rng = np.random.default_rng(2)
    xy = np.column_stack([rng.uniform(0, 20, 60), rng.uniform(0, 16, 60)])
    base = ergodicity(xy, dist)
    assert ergodicity(np.vstack([xy, xy]), dist) == pytest.approx(base, rel=1e-12)
    assert ergodicity(xy[rng.permutation(60)], dist) == pytest.approx(base, rel=1e-12)


def test_metric_clamps_outside_points(dist, caplog):
    xy = np.array([[25.0, 6.0], [10.0, 6.0]])
    with caplog.at_level("INFO"):
        value = ergodicity(xy, dist)
    assert "clamped" in caplog.text
    clamped = np.array([[20.0, 6.0], [10.0, 6.0]])
    assert value == ergodicity(clamped, dist)


def test_metric_empty_trajectory_faults(dist):
    with pytest.raises(ValueError):
        ergodicity(np.zeros((0, 2)), dist)


def test_target_density_normalized(dist):
    # xi[0,0] is the integral of rho / h_0, so rho integrates to 1
    h00 = math.sqrt(20.0 * 16.0)
    assert dist.xi[0, 0] * h00 == pytest.approx(1.0, rel=1e-9)


# ------------------------------------------------------------------ heatmaps

def test_heatmap_stationary_mass_in_one_cell():
    grid = heatmap([np.tile([10.0, 6.0], (37, 1))], grid_m=8)
    assert grid.total == 37
    assert grid.counts.max() == 37
    assert (grid.counts > 0).sum() == 1


def test_heatmap_disjoint_trajectories_add():
    a = np.tile([2.0, 2.0], (5, 1))
    b = np.tile([18.0, 14.0], (7, 1))
    g_both = heatmap([a, b], grid_m=8)
    g_a = heatmap([a], grid_m=8)
    g_b = heatmap([b], grid_m=8)
    np.testing.assert_array_equal(g_both.counts, g_a.counts + g_b.counts)


def test_heatmap_conserves_sample_count():
    rng = np.random.default_rng(3)
    trajs = [np.column_stack([rng.uniform(-2, 25, n), rng.uniform(-2, 18, n)])
             for n in (11, 23, 5)]
    grid = heatmap(trajs, grid_m=10)
    assert grid.total == 11 + 23 + 5


def test_heatmap_uniform_sweep_is_flat():
    rng = np.random.default_rng(4)
    xy = np.column_stack([rng.uniform(0, 20, 20000), rng.uniform(0, 16, 20000)])
    grid = heatmap([xy], grid_m=5)
    _, p = stats.chisquare(grid.counts.flatten())
    assert p > 0.01


def test_heatmap_requires_two_cells():
    with pytest.raises(ValueError):
        heatmap([], grid_m=1)


def test_heatmap_exports(tmp_path):
    grid = heatmap([np.tile([10.0, 6.0], (5, 1))], grid_m=4)
    pgm = tmp_path / "g.pgm"
    csv = tmp_path / "g.csv"
    write_heatmap_pgm(grid, pgm)
    write_heatmap_csv(grid, csv)
    text = pgm.read_text()
    assert text.startswith("P2\n4 4\n255\n")
    loaded = np.loadtxt(csv, delimiter=",", dtype=int)
    np.testing.assert_array_equal(loaded, grid.counts)


# ----------------------------------------------------------------- summarize

def _trial(condition, index, success, positions, u_h=None, u_a=None):
    n = positions.shape[0] - 1
    u_h = np.tile([0.5, 0.1], (n, 1)) if u_h is None else u_h
    u_a = np.tile([0.5, 0.1], (n, 1)) if u_a is None else u_a
    states = np.column_stack([positions, np.zeros((n + 1, 4))])
    return TrialRecord(condition=condition, trial_index=index, seed=index,
                       model_id=None, dt=0.1, states=states, u_h=u_h, u_a=u_a,
                       u_out=u_h.copy(), admitted=np.ones(n, dtype=bool),
                       outcome="Success" if success else "Crash",
                       duration=n * 0.1)


def _positions(rng, n=20):
    return np.column_stack([rng.uniform(5, 15, n + 1), rng.uniform(3, 12, n + 1)])


def test_summarize_counts_and_rates(dist):
    rng = np.random.default_rng(5)
    records = [_trial("UserOnly", i, i < 3, _positions(rng)) for i in range(10)]
    report = summarize({"UserOnly": records}, dist)
    cond = report["conditions"]["UserOnly"]
    assert cond["trials"] == 10
    assert cond["successes"] == 3
    assert cond["success_rate"] == pytest.approx(0.3)
    assert cond["outcomes"] == {"Crash": 7, "Success": 3}


def test_summarize_success_by_trial_matches_recount(dist):
    rng = np.random.default_rng(6)
    records = []
    for rep in range(4):
        for idx in range(5):
            records.append(_trial("X", idx, (idx + rep) % 2 == 0, _positions(rng)))
    report = summarize({"X": records}, dist)
    for row in report["conditions"]["X"]["success_by_trial"]:
        group = [r for r in records if r.trial_index == row["trial"]]
        assert row["rate"] == sum(r.success for r in group) / len(group)


def test_summarize_ergodicity_split_is_group_mean(dist):
    rng = np.random.default_rng(7)
    records = [_trial("X", i, i % 3 == 0, _positions(rng)) for i in range(9)]
    report = summarize({"X": records}, dist)
    erg = report["conditions"]["X"]["ergodicity"]
    per_trial = np.array(erg["per_trial"])
    succ_mask = np.array([r.success for r in records])
    assert erg["all"]["mean"] == pytest.approx(per_trial.mean(), abs=1e-12)
    assert erg["success"]["mean"] == pytest.approx(per_trial[succ_mask].mean(), abs=1e-12)
    assert erg["failure"]["mean"] == pytest.approx(per_trial[~succ_mask].mean(), abs=1e-12)


def test_summarize_self_agreeing_session(dist):
    rng = np.random.default_rng(8)
    u = np.tile([0.7, -0.2], (20, 1))
    records = [_trial("X", 0, True, _positions(rng), u_h=u.copy(), u_a=u.copy())]
    report = summarize({"X": records}, dist)
    agreement = report["conditions"]["X"]["agreement"]
    assert agreement == {"main": 1.0, "side": 1.0}
    assert records[0].admitted.all()


def test_summarize_requires_trials(dist):
    with pytest.raises(ValueError):
        summarize({}, dist)
    with pytest.raises(ValueError):
        summarize({"X": []}, dist)
