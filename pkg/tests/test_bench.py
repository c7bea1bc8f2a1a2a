"""Workload generator determinism and the measurement harness."""

import json

import pytest

from mergetab.bench import (
    WorkloadConfig,
    generate,
    run_resolution_sim,
    run_suite,
    suite_csv_rows,
)
from mergetab.mods import mod_to_record

SMALL = dict(rows=1500, width=8, history_len=8)


class TestConfig:
    def test_json_roundtrip(self):
        cfg = WorkloadConfig(rows=10, skew="beta7", kind_ratio=(90, 5, 5), seed=4)
        assert WorkloadConfig.from_json(json.loads(json.dumps(cfg.to_json()))) == cfg

    def test_invalid_ratios_rejected(self):
        with pytest.raises(ValueError):
            WorkloadConfig(kind_ratio=(50, 50, 50))
        with pytest.raises(ValueError):
            WorkloadConfig(skew="zipf")


class TestGenerate:
    def test_reproducible_bit_for_bit(self):
        cfg = WorkloadConfig(seed=11, **SMALL)
        a = generate(cfg)
        b = generate(cfg)
        assert [mod_to_record(m) for m in list(a[1]) + list(a[2])] == [
            mod_to_record(m) for m in list(b[1]) + list(b[2])
        ]
        for ca, cb in zip(a[0]._cols, b[0]._cols):
            assert ca.vals == cb.vals

    def test_distinct_seeds_differ(self):
        a = generate(WorkloadConfig(seed=1, **SMALL))
        b = generate(WorkloadConfig(seed=2, **SMALL))
        assert [mod_to_record(m) for m in a[1]] != [mod_to_record(m) for m in b[1]]

    def test_width_and_length_respected(self):
        cfg = WorkloadConfig(seed=0, rows=500, width=15, history_len=5)
        d0, h1, h2 = generate(cfg)
        assert len(d0.schema) == 15
        assert len(h1) == len(h2) == 5

    def test_affected_fraction_cap(self):
        # replay each branch and measure every modification's reach
        from mergetab.mods import affected_set, apply_modification

        cfg = WorkloadConfig(seed=5, **SMALL)
        d0, h1, h2 = generate(cfg)
        cap = int(cfg.max_affected_frac * cfg.rows)
        for h in (h1, h2):
            v = d0
            for m in h:
                if m.kind != "insert":
                    assert len(affected_set(v, m)) <= cap
                v = apply_modification(v, m)

    def test_kind_composition(self):
        cfg = WorkloadConfig(seed=9, kind_ratio=(75, 20, 5), **SMALL)
        _, h1, _ = generate(cfg)
        kinds = [m.kind for m in h1]
        assert kinds.count("insert") == max(1, round(8 * 0.20))
        assert kinds.count("delete") == max(1, round(8 * 0.05))

    def test_skew_and_selectivity_configs_parse(self):
        for skew in ("uniform", "beta4", "beta7", "beta10"):
            for sel in ("uniform", "high", "low"):
                generate(WorkloadConfig(seed=1, rows=200, width=5, history_len=3, skew=skew, selectivity=sel))


class TestSuite:
    def test_metrics_consistency(self):
        res = run_suite(WorkloadConfig(seed=2, **SMALL), state_threshold=10**8)
        assert res.oracle_ok
        truth = res.methods["oracle"].flagged
        for name, m in res.methods.items():
            assert m.tp + m.fn == truth, name
            assert m.tp + m.fp == m.flagged, name
        assert res.methods["detect"].fn == 0
        assert res.methods["lock-cell"].fn == 0
        assert res.methods["lock-record"].fn == 0

    def test_false_positive_ordering(self):
        for seed in (1, 2, 4, 6):
            res = run_suite(WorkloadConfig(seed=seed, **SMALL), state_threshold=10**8)
            if not res.oracle_ok:
                continue
            m = res.methods
            assert m["detect"].fp <= m["lock-cell"].fp <= m["lock-record"].fp, seed

    def test_accuracy_fields_reproducible(self):
        a = run_suite(WorkloadConfig(seed=3, **SMALL), state_threshold=10**8)
        b = run_suite(WorkloadConfig(seed=3, **SMALL), state_threshold=10**8)
        for name in a.methods:
            ma, mb = a.methods[name], b.methods[name]
            assert (ma.flagged, ma.tp, ma.fp, ma.fn) == (mb.flagged, mb.tp, mb.fp, mb.fn)

    def test_csv_rows(self):
        res = run_suite(WorkloadConfig(seed=2, **SMALL), state_threshold=10**8)
        lines = suite_csv_rows([res])
        assert lines[0].startswith("seed,method")
        assert len(lines) == 1 + len(res.methods)


class TestResolutionSim:
    def test_no_conflicts_no_questions(self):
        out = run_resolution_sim([20], [0.0], trials=50, seed=0)
        assert out[(20, 0.0)] == 0.0

    def test_all_conflicts_within_bound(self):
        out = run_resolution_sim([6], [1.0], trials=100, seed=1)
        assert out[(6, 1.0)] <= 12

    def test_reproducible(self):
        a = run_resolution_sim([30], [0.05], trials=100, seed=7)
        b = run_resolution_sim([30], [0.05], trials=100, seed=7)
        assert a == b

    def test_monotone_in_probability(self):
        out = run_resolution_sim([40], [0.001, 0.05], trials=300, seed=3)
        assert out[(40, 0.001)] < out[(40, 0.05)]
