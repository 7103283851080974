import csv

import numpy as np
import pytest

from fkjump import zoo
from fkjump.acceptance import censored_ks
from fkjump.csvio import write_events_csv
from fkjump.ctsim import (
    JumpSchedulingMode,
    geometric_vs_exponential_gap,
    interaction_rates,
    rate_bound,
    scheduling_equivalence_check,
    simulate_ct,
)
from fkjump.errors import ModelMismatch, UnboundedRate
from fkjump.models import CTMCModel, killing_form
from fkjump.oracle import ct_exact_flow
from fkjump.selection import SelectionCase, jump_generator

MODES = [m.value for m in JumpSchedulingMode]
FREE = CTMCModel([1, 0, 0], zoo.CT1_GENERATOR, np.zeros(3), 1, name="free")


def ct1_killing():
    return killing_form(zoo.ct1())


class TestFreeMotion:
    @pytest.mark.parametrize("mode", MODES)
    def test_no_jumps_and_chain_law(self, mode):
        n = 20_000
        res = simulate_ct(FREE, "case1", n, mode=mode, seed=1, record_at=[0.5, 1])
        assert res.n_jumps == 0
        for t, emp in zip(res.record_at, res.empirical):
            law = FREE.initial_law @ FREE.transition(0, t)
            assert np.all(np.abs(emp - law) < 4 * np.sqrt(law * (1 - law) / n) + 1e-12)


class TestEventLog:
    @pytest.mark.parametrize("case", ["case1", "case2", "case3", "plusminus"])
    @pytest.mark.parametrize("mode", MODES)
    def test_ordered_and_consistent(self, case, mode):
        model = ct1_killing() if case == "case1" else zoo.ct1()
        res = simulate_ct(model, case, 200, mode=mode, seed=4, log_events=True)
        times = np.array([e[0] for e in res.events])
        assert np.all(np.diff(times) > 0)
        assert times.max() < 2.0
        states = np.zeros(200, dtype=int)
        for _, i, kind, x, y in res.events:
            assert states[i] == x
            states[i] = y
        np.testing.assert_allclose(np.bincount(states, minlength=3) / 200, res.empirical[-1])
        assert res.n_jumps + res.n_mutations == len(res.events)

    def test_case3_never_jumps_from_argmax(self):
        res = simulate_ct(zoo.ct1(), "case3", 300, mode="individual", seed=2, log_events=True)
        jumps = [e for e in res.events if e[2] == "jump"]
        assert jumps and all(x != 2 for _, _, _, x, _ in jumps)
        assert all(zoo.CT1_POTENTIAL[y] > zoo.CT1_POTENTIAL[x] for _, _, _, x, y in jumps)

    def test_csv_export(self, tmp_path):
        res = simulate_ct(ct1_killing(), "case1", 20, seed=0, log_events=True)
        path = tmp_path / "events.csv"
        write_events_csv(res.events, path)
        with path.open() as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["time", "particle", "kind", "from", "to"]
        assert len(rows) == len(res.events) + 1
        assert float(rows[1][0]) == res.events[0][0]


class TestRates:
    @pytest.mark.parametrize("case", ["case1", "case2", "case3", "plusminus"])
    def test_rates_match_generator_rows(self, case):
        rng = np.random.default_rng(0)
        v = -rng.uniform(0, 1, 4) if case == "case1" else rng.uniform(0 if case == "case2" else -1, 1, 4)
        counts = rng.integers(1, 20, 4).astype(float)
        rates = interaction_rates(SelectionCase.parse(case), v, counts)
        gen = jump_generator(case, v, counts / counts.sum())
        off = (gen - np.diag(np.diag(gen))).sum(axis=1)
        # a clock ring may relocate a particle onto its own state; only the rest moves mass
        mu = counts / counts.sum()
        self_rate = {"case1": -v * mu, "case2": v * mu, "case3": np.zeros(4)}
        if case == "plusminus":
            assert np.all(rates >= off - 1e-12)
        else:
            np.testing.assert_allclose(rates, off + self_rate[case], atol=1e-12)
        assert np.all(rates <= rate_bound(SelectionCase.parse(case), v) + 1e-12)

    def test_unbounded(self):
        with pytest.raises(UnboundedRate):
            rate_bound(SelectionCase.CASE1, np.array([0.0, -np.inf]))

    def test_bound_too_small(self):
        with pytest.raises(UnboundedRate):
            simulate_ct(ct1_killing(), "case1", 10, mode="thinned", rate_bound=0.1)


class TestClocks:
    def test_first_jump_time_exponential(self):
        u, n, horizon = 1.3, 20_000, 3.0
        model = CTMCModel([1.0, 0.0], np.zeros((2, 2)), np.full(2, -u), horizon)
        res = simulate_ct(model, "case1", n, mode="individual", seed=8, log_events=True)
        assert censored_ks(res.first_jump_times(n), u, horizon) < 1.63 / np.sqrt(n)

    def test_censored_ks_detects_wrong_rate(self):
        rng = np.random.default_rng(0)
        t = rng.exponential(1.0, 20_000)
        assert censored_ks(t, 1.0, 3.0) < 1.63 / np.sqrt(t.size)
        assert censored_ks(t, 1.2, 3.0) > 1.63 / np.sqrt(t.size)

    def test_thinned_proposal_count(self):
        n, horizon = 2000, 2.0
        model = ct1_killing()
        res = simulate_ct(model, "case1", n, mode="thinned", seed=5)
        lam = n * rate_bound(SelectionCase.CASE1, model.potentials[0]) * horizon
        assert abs(res.n_proposals - lam) < 3 * np.sqrt(lam)
        assert res.n_jumps <= res.n_proposals


class TestPiecewise:
    @pytest.mark.parametrize("mode", MODES)
    def test_two_pieces(self, mode):
        v2 = np.array([-0.6, 0.0, -0.3])
        model = CTMCModel([1, 0, 0], [zoo.CT1_GENERATOR] * 2, [zoo.CT1_POTENTIAL - 0.6, v2], 2,
                          breakpoints=(0, 1))
        exact = ct_exact_flow(model, 2)[1]
        xs = np.array([simulate_ct(model, "case1", 3000, mode=mode, seed=6, key=(r,)).empirical[-1]
                       for r in range(8)])
        se = xs.std(axis=0, ddof=1) / np.sqrt(len(xs))
        assert np.all(np.abs(xs.mean(axis=0) - exact) < 4 * se + 2e-3)


class TestMeanField:
    @pytest.mark.parametrize("case", ["case1", "case2", "case3", "plusminus"])
    def test_mse_decreases_with_n(self, case):
        model = ct1_killing() if case == "case1" else zoo.ct1()
        exact = ct_exact_flow(model, 1)[1]
        mse = []
        for n in (100, 1000, 10_000):
            xs = np.array([simulate_ct(model, case, n, 1, mode="population", seed=9, key=(n, r)).empirical[-1]
                           for r in range(8)])
            mse.append(((xs - exact) ** 2).sum(axis=1).mean())
        assert mse[0] > mse[1] > mse[2]


class TestEquivalence:
    def test_free_motion(self):
        rep = scheduling_equivalence_check(FREE, 2000, seeds=range(20))
        assert rep.max_z() < 3.0
        assert set(rep.means) == set(MODES)

    def test_ct1(self):
        rep = scheduling_equivalence_check(ct1_killing(), 2000, horizon=1, seeds=range(10))
        assert rep.max_z() < 3.0


class TestGap:
    def test_free_motion_gap_is_noise(self):
        rows = geometric_vs_exponential_gap(FREE, "case1", 1000, [2, 8], seeds=range(6))
        assert all(abs(r.gap) < 3 * r.se + 1e-12 for r in rows)

    def test_large_m(self):
        rows = geometric_vs_exponential_gap(ct1_killing(), "case1", 1000, [512], horizon=1, seeds=range(8))
        assert all(abs(r.gap) < 3 * r.se for r in rows)


class TestErrors:
    def test_model_mismatch(self):
        with pytest.raises(ModelMismatch):
            simulate_ct(zoo.ts1(), "case1", 10)

    def test_uniform_is_discrete_only(self):
        with pytest.raises(ValueError):
            simulate_ct(ct1_killing(), "uniform", 10)

    def test_record_range(self):
        with pytest.raises(ValueError):
            simulate_ct(ct1_killing(), "case1", 10, record_at=[3])

    def test_deterministic(self):
        a = simulate_ct(zoo.ct1(), "case3", 300, seed=12, log_events=True)
        b = simulate_ct(zoo.ct1(), "case3", 300, seed=12, log_events=True)
        assert a.events == b.events
