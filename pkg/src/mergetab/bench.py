"""Synthetic workloads and desk-scale accuracy/runtime measurements.

The generator is fully seeded: a (config, seed) pair always produces the
same base table and branch histories, byte for byte. All generated data is
integer-valued; columns draw from per-column domains whose distinct-value
counts are log-uniform over the configured range, optionally skewed by a
beta distribution mapped onto value ranks. Every modification is kept
under the configured affected fraction by redrawing its predicate against
the branch's evolving state.
"""

from __future__ import annotations

import json
import math
import random
import time
from bisect import bisect_left
from dataclasses import asdict, dataclass

import numpy as np

from .detect import detect
from .exprs import And, Attr, Bin, Cmp, In, Lit
from .mods import (
    Assignment,
    Delete,
    History,
    ModId,
    Update,
    apply_history,
    apply_modification,
    make_insert,
    mod_to_record,
)
from .oracles import (
    StateExplosion,
    locking_conflicts,
    oracle_conflicts,
    three_way_diff_conflicts,
)
from .resolve import MergeSession
from .schema import RowId, Schema
from .table import Column, TableSnapshot

SKEWS = ("uniform", "beta4", "beta7", "beta10")
SELECTIVITIES = ("uniform", "high", "low")


@dataclass(frozen=True)
class WorkloadConfig:
    rows: int = 100_000
    width: int = 30
    distinct_min: int = 100
    distinct_max: int = 1_000_000
    skew: str = "uniform"
    history_len: int = 25
    selectivity: str = "uniform"
    kind_ratio: tuple = (75, 20, 5)  # update : insert : delete
    pred_ratio: tuple = (80, 20)  # simple : complex
    max_affected_frac: float = 0.15
    seed: int = 0

    def __post_init__(self):
        if self.skew not in SKEWS:
            raise ValueError(f"skew must be one of {SKEWS}")
        if self.selectivity not in SELECTIVITIES:
            raise ValueError(f"selectivity must be one of {SELECTIVITIES}")
        if sum(self.kind_ratio) != 100 or len(self.kind_ratio) != 3:
            raise ValueError("kind_ratio must be three percentages summing to 100")
        if sum(self.pred_ratio) != 100 or len(self.pred_ratio) != 2:
            raise ValueError("pred_ratio must be two percentages summing to 100")

    def to_json(self) -> dict:
        d = asdict(self)
        d["kind_ratio"] = list(self.kind_ratio)
        d["pred_ratio"] = list(self.pred_ratio)
        return d

    @classmethod
    def from_json(cls, data: dict) -> "WorkloadConfig":
        data = dict(data)
        if "kind_ratio" in data:
            data["kind_ratio"] = tuple(data["kind_ratio"])
        if "pred_ratio" in data:
            data["pred_ratio"] = tuple(data["pred_ratio"])
        return cls(**data)


class _Gen:
    def __init__(self, config: WorkloadConfig):
        self.cfg = config
        self.rng = random.Random(config.seed)
        self.nprng = np.random.default_rng(config.seed)
        self.attrs = [f"c{k:02d}" for k in range(config.width)]
        self.schema = Schema([(a, "int") for a in self.attrs])
        lo, hi = math.log(config.distinct_min), math.log(config.distinct_max)
        self.distinct = [
            max(2, int(math.exp(self.rng.uniform(lo, hi)))) for _ in self.attrs
        ]
        if config.selectivity == "uniform":
            w = [1.0] * config.width
        elif config.selectivity == "high":
            w = [1.0 / d for d in self.distinct]
        else:
            w = [float(d) for d in self.distinct]
        total = sum(w)
        self.attr_weights = [x / total for x in w]
        # both branches keep returning to the same handful of dirty columns,
        # the way collaborating cleaners actually behave
        self.workset = self.rng.sample(range(config.width), k=min(6, config.width))

    def _column_values(self, k: int) -> np.ndarray:
        d = self.distinct[k]
        n = self.cfg.rows
        if self.cfg.skew == "uniform":
            return self.nprng.integers(0, d, n, dtype=np.int64)
        b = {"beta4": 4.0, "beta7": 7.0, "beta10": 10.0}[self.cfg.skew]
        ranks = np.minimum((self.nprng.beta(1.0, b, n) * d).astype(np.int64), d - 1)
        return ranks

    def base(self) -> TableSnapshot:
        cols = tuple(
            Column(tuple(self._column_values(k).tolist()))
            for k in range(self.cfg.width)
        )
        rids = tuple(RowId("base", i) for i in range(self.cfg.rows))
        return TableSnapshot(self.schema, rids, cols, Column((False,) * self.cfg.rows))

    def _pick_attr(self) -> int:
        if self.rng.random() < 0.45:
            return self.rng.choice(self.workset)
        return self.rng.choices(range(self.cfg.width), weights=self.attr_weights)[0]

    def _value_for(self, k: int) -> int:
        # rank-skewed draws mirror the column's own distribution
        d = self.distinct[k]
        if self.cfg.skew == "uniform":
            return self.rng.randrange(d)
        b = {"beta4": 4.0, "beta7": 7.0, "beta10": 10.0}[self.cfg.skew]
        return min(int(self.rng.betavariate(1.0, b) * d), d - 1)

    def _write_value(self, k: int) -> int:
        # cleaning-style writes concentrate on a small hot set per column
        # (fill-in defaults, normalized codes), so cross-branch writes and
        # predicates genuinely collide like they do in shared datasets
        p = 0.65 if k in self.workset else 0.4
        if self.rng.random() < p:
            return self.rng.randrange(min(10, self.distinct[k]))
        return self._value_for(k)

    def _simple_pred(self):
        k = self._pick_attr()
        p = 0.25 if k in self.workset else 0.12
        if self.rng.random() < p:
            return Cmp("=", Attr(self.attrs[k]), Lit(self.rng.randrange(min(10, self.distinct[k]))))
        return Cmp("=", Attr(self.attrs[k]), Lit(self._value_for(k)))

    def _complex_pred(self):
        roll = self.rng.random()
        k = self._pick_attr()
        a = Attr(self.attrs[k])
        if roll < 0.25:  # one-sided low cutoff (outlier trimming)
            cut = max(1, self.distinct[k] // self.rng.choice((50, 100, 200)))
            return Cmp("<", a, Lit(cut))
        if roll < 0.45:  # narrow two-sided range
            lo = self._value_for(k)
            span = max(1, self.distinct[k] // 2000)
            return And((Cmp(">=", a, Lit(lo)), Cmp("<", a, Lit(lo + span))))
        if roll < 0.65:  # membership over literals
            vals = {self._write_value(k) for _ in range(self.rng.randint(2, 4))}
            return In(a, sorted(vals))
        if roll < 0.85:  # conjunction across two attributes
            return And((self._simple_pred(), self._simple_pred()))
        # functional expression over two attributes
        k2 = self._pick_attr()
        lo = self._value_for(k) + self._value_for(k2)
        span = max(2, (self.distinct[k] + self.distinct[k2]) // 2000)
        return And(
            (
                Cmp(">=", Bin("+", a, Attr(self.attrs[k2])), Lit(lo)),
                Cmp("<", Bin("+", a, Attr(self.attrs[k2])), Lit(lo + span)),
            )
        )

    def _pred(self):
        simple = self.rng.randrange(100) < self.cfg.pred_ratio[0]
        return self._simple_pred() if simple else self._complex_pred()

    def _delete_pred(self):
        # deletes in cleaning flows are mostly outlier trims on a threshold
        roll = self.rng.random()
        if roll < 0.5:
            k = self._pick_attr()
            cut = max(1, self.distinct[k] // self.rng.choice((200, 400, 800)))
            return Cmp("<", Attr(self.attrs[k]), Lit(cut))
        if roll < 0.8:
            return self._simple_pred()
        return self._complex_pred()

    def _assignment(self) -> Assignment:
        # predicate complexity is the configured axis; written values stay
        # literal constants, matching the workload model being reproduced
        k = self._pick_attr()
        return Assignment(self.attrs[k], Lit(self._write_value(k)))

    def history(self, branch: str, state: TableSnapshot):
        cfg = self.cfg
        cap = max(1, int(cfg.max_affected_frac * cfg.rows))
        mods = []
        recent_rows: list[int] = []
        # exact kind counts per history, shuffled: the configured ratio is a
        # composition of the batch, not a sampling distribution
        n_ins = round(cfg.history_len * cfg.kind_ratio[1] / 100)
        n_del = round(cfg.history_len * cfg.kind_ratio[2] / 100)
        if cfg.kind_ratio[2] > 0:
            n_del = max(1, n_del)
        if cfg.kind_ratio[1] > 0:
            n_ins = max(1, n_ins)
        n_upd = cfg.history_len - n_ins - n_del
        kinds = ["update"] * n_upd + ["insert"] * n_ins + ["delete"] * n_del
        self.rng.shuffle(kinds)
        for seq in range(1, cfg.history_len + 1):
            kind = kinds[seq - 1]
            mid = ModId(branch, seq)
            if kind == "insert":
                if self.rng.random() < 0.8 and len(state.rids):
                    # re-adding a record: clone a row from the region being
                    # worked on (both branches visit the same hot regions),
                    # tweaking one cell outside the shared working set
                    if recent_rows and self.rng.random() < 0.85:
                        i = self.rng.choice(recent_rows)
                    else:
                        i = self.rng.randrange(len(state.rids))
                    vals = {
                        a: state._cols[k].vals[i]
                        for k, a in enumerate(self.attrs)
                        if state._cols[k].vals[i] is not None
                    }
                    outside = [k for k in range(cfg.width) if k not in self.workset]
                    kt = self.rng.choice(outside or list(range(cfg.width)))
                    vals[self.attrs[kt]] = self._write_value(kt)
                else:
                    vals = {a: self._value_for(k) for k, a in enumerate(self.attrs)}
                mod = make_insert(mid, vals)
            else:
                mask = None
                for _ in range(40):
                    pred = self._delete_pred() if kind == "delete" else self._pred()
                    mask = state.select_mask(pred)
                    affected = int(mask.sum())
                    if affected <= cap:
                        break
                else:
                    pred = self._simple_pred()
                    mask = state.select_mask(pred)
                hit = np.nonzero(mask)[0]
                if len(hit):
                    recent_rows = hit[: 200].tolist()
                if kind == "delete":
                    mod = Delete(mid, pred)
                else:
                    mod = Update(mid, pred, self._assignment())
            state = apply_modification(state, mod)
            mods.append(mod)
        return History(branch, mods), state


def generate(config: WorkloadConfig):
    """(base snapshot, history A, history B), reproducible from the seed."""
    g = _Gen(config)
    d0 = g.base()
    h1, _ = g.history("a", d0)
    h2, _ = g.history("b", d0)
    return d0, h1, h2


# --------------------------------------------------------------------------
# Accuracy / runtime suite


@dataclass
class MethodMetrics:
    method: str
    flagged: int
    flagged_pct: float
    tp: int | None
    fp: int | None
    fn: int | None
    detect_time_s: float
    commit_time_s: float


@dataclass
class SuiteResult:
    config: WorkloadConfig
    seed: int
    oracle_ok: bool
    rows: int
    methods: dict

    def to_json(self) -> dict:
        return {
            "config": self.config.to_json(),
            "seed": self.seed,
            "oracle_ok": self.oracle_ok,
            "rows": self.rows,
            "methods": {k: asdict(v) for k, v in self.methods.items()},
        }


ALL_METHODS = ("detect", "lock-record", "lock-cell", "diff3", "oracle")


def run_suite(config: WorkloadConfig, methods=ALL_METHODS, state_threshold=10**6) -> SuiteResult:
    """One seeded instance, every method, TP/FP/FN against the oracle."""
    d0, h1, h2 = generate(config)
    t0 = time.perf_counter()
    blob = "\n".join(json.dumps(mod_to_record(m)) for m in list(h1) + list(h2))
    commit_time = time.perf_counter() - t0
    assert blob is not None

    total = len(d0.rids) + sum(1 for m in list(h1) + list(h2) if m.kind == "insert")
    flagged: dict[str, set] = {}
    times: dict[str, float] = {}

    oracle_ok = False
    truth: set = set()
    if "oracle" in methods:
        t0 = time.perf_counter()
        try:
            truth = oracle_conflicts(d0, h1, h2, threshold=state_threshold)
            oracle_ok = True
        except StateExplosion:
            truth = set()
        times["oracle"] = time.perf_counter() - t0
        if oracle_ok:
            flagged["oracle"] = truth

    if "detect" in methods:
        t0 = time.perf_counter()
        flagged["detect"] = set(detect(d0, h1, h2).conflict_set)
        times["detect"] = time.perf_counter() - t0
    if "lock-record" in methods:
        t0 = time.perf_counter()
        flagged["lock-record"] = locking_conflicts(d0, h1, h2, "record")
        times["lock-record"] = time.perf_counter() - t0
    if "lock-cell" in methods:
        t0 = time.perf_counter()
        flagged["lock-cell"] = locking_conflicts(d0, h1, h2, "cell")
        times["lock-cell"] = time.perf_counter() - t0
    if "diff3" in methods:
        t0 = time.perf_counter()
        f1 = apply_history(d0, h1)
        f2 = apply_history(d0, h2)
        flagged["diff3"] = three_way_diff_conflicts(d0, f1, f2)
        times["diff3"] = time.perf_counter() - t0

    out = {}
    for name, rows in flagged.items():
        tp = fp = fn = None
        if oracle_ok:
            tp = len(rows & truth)
            fp = len(rows - truth)
            fn = len(truth - rows)
        out[name] = MethodMetrics(
            method=name,
            flagged=len(rows),
            flagged_pct=100.0 * len(rows) / total if total else 0.0,
            tp=tp,
            fp=fp,
            fn=fn,
            detect_time_s=times[name],
            commit_time_s=commit_time,
        )
    return SuiteResult(config, config.seed, oracle_ok, total, out)


def suite_csv_rows(results) -> list[str]:
    header = "seed,method,flagged,flagged_pct,tp,fp,fn,detect_time_s,commit_time_s"
    lines = [header]
    for r in results:
        for name in sorted(r.methods):
            m = r.methods[name]
            lines.append(
                f"{r.seed},{name},{m.flagged},{m.flagged_pct:.6f},"
                f"{'' if m.tp is None else m.tp},{'' if m.fp is None else m.fp},"
                f"{'' if m.fn is None else m.fn},{m.detect_time_s:.6f},{m.commit_time_s:.6f}"
            )
    return lines


# --------------------------------------------------------------------------
# Resolution interaction simulation


def _random_interleaving(rng: random.Random, items1, items2) -> list:
    """Uniform random valid interleaving of two sequences."""
    out = []
    i = j = 0
    m, n = len(items1), len(items2)
    while i < m or j < n:
        left = m - i
        right = n - j
        if rng.randrange(left + right) < left:
            out.append(items1[i])
            i += 1
        else:
            out.append(items2[j])
            j += 1
    return out


def simulate_session(
    rng: random.Random,
    size1: int,
    size2: int,
    conflict_prob: float,
    care_prob: float | None = None,
):
    """One synthetic reconciliation over a random pair-conflict matrix.

    The simulated analyst holds a *partial* desired order: an explicit
    preference exists for a sparse random subset of cross-branch pairs
    (drawn from one hidden valid interleaving, so preferences can never
    contradict each other). Prompts on pairs without an explicit
    preference are answered right_first - let the other branch's pending
    work land before my undecided head - which stays consistent with some
    completion of the partial order. care_prob defaults to the conflict
    probability: opinions are about as sparse as the collisions
    themselves.
    """
    if care_prob is None:
        care_prob = conflict_prob
    np_rng = np.random.default_rng(rng.randrange(2**63))
    conflicts = np_rng.random((size1, size2)) < conflict_prob
    cared = np_rng.random((size1, size2)) < care_prob
    conflict_js = [np.nonzero(conflicts[i])[0].tolist() for i in range(size1)]

    items1 = [("a", i) for i in range(size1)]
    items2 = [("b", j) for j in range(size2)]
    hidden = _random_interleaving(rng, items1, items2)
    rank = {item: k for k, item in enumerate(hidden)}

    def conflict_test(order, phi, psi):
        return bool(conflicts[phi[1], psi[1]])

    def first_conflict(order, phi, rem2):
        if not rem2:
            return None
        start = rem2[0][1]
        js = conflict_js[phi[1]]
        k = bisect_left(js, start)
        if k == len(js):
            return None
        return js[k] - start

    session = MergeSession(items1, items2, conflict_test, first_conflict=first_conflict)
    while not session.done:
        phi, psi = session.prompt
        if cared[phi[1], psi[1]]:
            session.answer("left_first" if rank[phi] < rank[psi] else "right_first")
        else:
            session.answer("right_first")
    order = session.result()
    # output validity: both local orders preserved
    assert [x for x in order if x[0] == "a"] == items1
    assert [x for x in order if x[0] == "b"] == items2
    assert session.questions <= size1 + size2
    return session.questions


def run_resolution_sim(sizes, conflict_probs, trials: int, seed: int = 0) -> dict:
    """Mean question counts per (history size, pairwise conflict probability)."""
    out = {}
    for size in sizes:
        for p in conflict_probs:
            rng = random.Random(f"{seed}:{size}:{p}")
            total = 0
            for _ in range(trials):
                total += simulate_session(rng, size, size, p)
            out[(size, p)] = total / trials
    return out
