import csv
import itertools
import json
import math
import statistics
from fractions import Fraction

import numpy as np
import pytest

from medix.data import WildSet
from medix.errors import MedixError
from medix.filter import (
    FilterConfig,
    deviation_sweep,
    err_rates,
    medix_filter,
    write_result,
)
from medix.stats import element_wise_median, l2_distance
from medix.synth import simulate_gradient_world


def exact_sq_dist(rows, ref):
    """Squared distance from the column medians of ``rows`` to ``ref``, as a Fraction."""
    med = [statistics.median([Fraction(r[j]) for r in rows]) for j in range(len(ref))]
    return sum((a - Fraction(b)) ** 2 for a, b in zip(med, ref))


def exhaustive_greedy(G, ref, eps, T, rule="drop"):
    """Tabulate the distance after every ordered removal sequence, then walk it greedily.

    Single-row batches only.  Sequences are enumerated in full, so the walk is
    checked against every alternative at each depth, not just the chosen one.
    """
    m = len(G)
    table = {}
    for depth in range(0, m):
        for seq in itertools.permutations(range(m), depth):
            rows = [G[i] for i in range(m) if i not in seq]
            table[seq] = exact_sq_dist(rows, ref)
    seq = ()
    committed = ()
    for t in range(T):
        live = [i for i in range(m) if i not in seq]
        if len(live) <= 1:
            return committed
        # minimal leave-one-out distance == maximal delta; lowest id wins ties
        best = min(live, key=lambda i: (table[seq + (i,)], i))
        d_t = math.sqrt(table[seq])
        d_next = math.sqrt(table[seq + (best,)])
        if rule == "delta":
            if d_t - d_next <= eps:
                return committed
            seq = seq + (best,)
            committed = seq
        else:
            seq = seq + (best,)
            if d_t - d_next <= eps:
                return committed
            committed = seq
    return committed


def random_wild(rng, m, d, dup=False):
    if dup:
        G = rng.integers(-2, 3, size=(m, d)).astype(float)
    else:
        G = rng.normal(size=(m, d))
        G[rng.random(m) < 0.3] += 4.0
    return G


class TestMedixFilter:
    def test_clean_set_flags_nothing(self):
        ref = np.array([0.5, -1.0, 2.0])
        G = np.tile(ref, (30, 1))
        for rule in ("drop", "delta"):
            res = medix_filter(G, ref, FilterConfig(eps_stop=1e-6, k=3, stop_rule=rule))
            assert res.trace[0].d_t == 0.0
            assert res.trace[0].delta_max == 0.0
            assert len(res.outlier_ids) == 0
            assert res.stop_reason == "converged"

    @pytest.mark.parametrize("rule", ["drop", "delta"])
    def test_exhaustive_oracle_m6(self, rule):
        rng = np.random.default_rng(0)
        for trial in range(8):
            G = rng.integers(-3, 4, size=(6, 2)).astype(float)
            G[:2] += 6  # a small contaminating cluster
            ref = [0.0, 0.5]
            expect = exhaustive_greedy(G.tolist(), ref, eps=1e-3, T=5, rule=rule)
            res = medix_filter(G, ref, FilterConfig(eps_stop=1e-3, k=1, T=5, stop_rule=rule))
            removed = [i for r in res.trace for i in r.removed_ids]
            assert tuple(removed) == expect

    def test_fast_matches_naive(self):
        rng = np.random.default_rng(1)
        for trial in range(50):
            m = int(rng.integers(4, 61))
            d = int(rng.integers(1, 11))
            G = random_wild(rng, m, d, dup=bool(trial % 2))
            ref = np.zeros(d)
            k = int(rng.integers(1, max(2, m // 5)))
            for rule in ("drop", "delta"):
                kw = dict(eps_stop=1e-4, k=k, T=10, stop_rule=rule)
                fast = medix_filter(G, ref, FilterConfig(**kw))
                slow = medix_filter(G, ref, FilterConfig(naive=True, **kw))
                assert [r.removed_ids for r in fast.trace] == [r.removed_ids for r in slow.trace]
                assert [r.d_t for r in fast.trace] == [r.d_t for r in slow.trace]
                np.testing.assert_array_equal([r.delta_max for r in fast.trace], [r.delta_max for r in slow.trace])
                np.testing.assert_array_equal(fast.outlier_ids, slow.outlier_ids)

    def test_deterministic_and_worker_invariant(self):
        G, _ = simulate_gradient_world(np.zeros(8), 1.0, 3.0, 0.3, 300, 8, seed=3)
        cfg = FilterConfig(eps_stop=0.05, k=15)
        a = medix_filter(G, np.zeros(8), cfg)
        for w in (1, 2, 4):
            b = medix_filter(G, np.zeros(8), FilterConfig(eps_stop=0.05, k=15, workers=w))
            np.testing.assert_array_equal(a.outlier_ids, b.outlier_ids)
            assert [r.d_t for r in a.trace] == [r.d_t for r in b.trace]

    def test_trace_consistency_and_monotone_extraction(self):
        G, _ = simulate_gradient_world(np.zeros(6), 1.0, 4.0, 0.35, 200, 6, seed=4)
        ref = np.zeros(6)
        res = medix_filter(G, ref, FilterConfig(eps_stop=0.02, k=10))
        alive = np.ones(len(G), dtype=bool)
        for rec in res.trace:
            assert rec.d_t == l2_distance(element_wise_median(G[alive]), ref)
            assert len(rec.removed_ids) in (0, 10)
            alive[rec.removed_ids] = False
        assert all(len(r.removed_ids) == 10 for r in res.trace[:-1])
        np.testing.assert_array_equal(np.flatnonzero(~alive), res.outlier_ids)
        assert set(res.outlier_ids) | set(res.survivor_ids) == set(range(len(G)))
        assert not set(res.outlier_ids) & set(res.survivor_ids)

    def test_tie_break_lowest_id(self):
        G = np.array([[5.0], [5.0], [0.0], [0.0], [0.0]])
        # rows 2, 3 and 4 each move the median from 0 to 2.5, toward the reference
        res = medix_filter(G, [5.0], FilterConfig(eps_stop=1e-9, k=1, T=1, stop_rule="delta"))
        assert res.trace[0].delta_max == 2.5
        assert res.trace[0].removed_ids == [2]

    def test_max_iter_and_exhausted(self):
        G, _ = simulate_gradient_world(np.zeros(3), 1.0, 20.0, 0.45, 100, 3, seed=5)
        res = medix_filter(G, np.zeros(3), FilterConfig(eps_stop=1e-9, k=2, T=2))
        assert res.stop_reason in ("max_iter", "converged") and res.n_iter <= 2
        res = medix_filter(G[:6], np.zeros(3), FilterConfig(eps_stop=1e-12, k=2, T=40, stop_rule="delta"))
        assert len(res.survivor_ids) >= 2

    def test_errors(self):
        with pytest.raises(MedixError, match="does not match"):
            medix_filter(np.zeros((5, 2)), np.zeros(3), FilterConfig(k=1))
        with pytest.raises(MedixError, match="smaller than removal batch"):
            medix_filter(np.zeros((5, 2)), np.zeros(2), FilterConfig(k=5))
        with pytest.raises(MedixError):
            medix_filter(np.zeros((5, 2)), np.zeros(2), FilterConfig(k=1, eps_stop=0))
        with pytest.raises(MedixError):
            medix_filter(np.zeros((5, 2)), np.zeros(2), FilterConfig(k=1, stop_rule="sometimes"))

    def test_gm_aggregator_runs(self):
        G, origin = simulate_gradient_world(np.zeros(5), 1.0, 6.0, 0.3, 80, 5, seed=6)
        wild = WildSet(None, origin, gradients=G)
        res = medix_filter(wild, np.zeros(5), FilterConfig(eps_stop=0.02, k=4, aggregator="gm"))
        assert err_rates(res, wild)["err_out"] < 0.5

    def test_majority_regime_err_in(self):
        # pi < 1/2, OOD mean 10 sigma away: inlier error stays under the bound
        from medix.bounds import BoundInputs, default_epsilon, inlier_bound

        G, origin = simulate_gradient_world(np.zeros(20), 1.0, 10.0, 0.3, 400, 20, seed=7)
        wild = WildSet(None, origin, gradients=G)
        res = medix_filter(wild, np.zeros(20), FilterConfig(eps_stop=0.1, k=20))
        m_in = wild.m_in
        b = inlier_bound(BoundInputs(pi=0.3, m=400, d=20, eps_dev=default_epsilon(1.0, 20, m_in)))
        assert err_rates(res, wild)["err_in"] <= b.capped


class TestDeviationSweep:
    def test_symmetric_pool_zero(self):
        ind = np.array([[-1.0, 2.0], [1.0, -2.0], [0.0, 0.0]])
        series = deviation_sweep(ind, np.ones((3, 2)) * 9, [0.0, 0.0], [0])
        assert series == [(0, 0.0)]

    def test_majority_ood_direct(self):
        rng = np.random.default_rng(8)
        ind = rng.normal(size=(50, 4))
        shift = np.array([6.0, -6.0, 6.0, 0.0])
        ood = rng.normal(size=(80, 4)) + shift
        ref = np.zeros(4)
        series = deviation_sweep(ind, ood, ref, [0, 20, 60, 80])
        for n, dev in series:
            assert dev == l2_distance(ref, element_wise_median(np.vstack([ind, ood[:n]])))
        # with an OOD majority the median has crossed at least half the gap on each shifted coordinate
        assert series[-1][1] >= 0.5 * np.linalg.norm(shift)

    def test_step_too_large(self):
        with pytest.raises(MedixError):
            deviation_sweep(np.zeros((3, 1)), np.zeros((2, 1)), [0.0], [0, 3])

    def test_steps_non_decreasing(self):
        with pytest.raises(MedixError):
            deviation_sweep(np.zeros((3, 1)), np.zeros((4, 1)), [0.0], [2, 1])


class TestErrRates:
    def wild(self):
        return WildSet(None, np.array([0, 0, 0, 1, 1]), gradients=np.zeros((5, 1)))

    def result(self, out):
        from medix.filter import FilterResult

        out = np.array(out, dtype=np.int64)
        surv = np.setdiff1d(np.arange(5), out)
        return FilterResult(out, surv, [], "converged")

    def test_perfect(self):
        assert err_rates(self.result([3, 4]), self.wild()) == {"err_in": 0.0, "err_out": 0.0}

    def test_empty_outliers(self):
        assert err_rates(self.result([]), self.wild()) == {"err_in": 0.0, "err_out": 1.0}

    def test_mixed(self):
        r = err_rates(self.result([0, 3]), self.wild())
        assert r["err_in"] == pytest.approx(1 / 3) and r["err_out"] == 0.5

    def test_undefined(self):
        wild = WildSet(None, np.zeros(3, dtype=int), gradients=np.zeros((3, 1)))
        from medix.filter import FilterResult

        r = err_rates(FilterResult(np.array([], dtype=np.int64), np.arange(3), [], "converged"), wild)
        assert r["err_out"] is None and r["err_in"] == 0.0


def test_result_files(tmp_path):
    G, _ = simulate_gradient_world(np.zeros(3), 1.0, 8.0, 0.3, 60, 3, seed=9)
    cfg = FilterConfig(eps_stop=0.05, k=3)
    res = medix_filter(G, np.zeros(3), cfg)
    write_result(tmp_path / "r.json", tmp_path / "t.csv", res, cfg)
    doc = json.loads((tmp_path / "r.json").read_text())
    assert doc["outlier_ids"] == res.outlier_ids.tolist()
    assert doc["stop_reason"] == res.stop_reason
    rows = list(csv.reader(open(tmp_path / "t.csv")))
    assert rows[0] == ["iter", "d_t", "delta_max", "removed_ids"]
    assert len(rows) == 1 + len(res.trace)
    assert float(rows[1][1]) == res.trace[0].d_t
