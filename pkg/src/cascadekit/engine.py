"""Batch catalog evaluation over packed outcome bitsets.

Per-cascade accuracy and expected time reduce to popcounts of ANDed
bit rows: a level's uncertain set intersected with the next level's
decided-correct set, and so on.  Evaluating the catalog walks the same
enumeration order as enumerate_cascades but amortizes work across whole
blocks of cascades sharing their leading levels, so million-scale
catalogs evaluate in seconds.  Chunks stream to an optional callback in
deterministic order; summary arrays are kept for frontier building.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import _kernels
from ._hashing import fnv1a64, splitmix64, splitmix64_array
from .calibration import CalibratedModel
from .cascade import OutcomeTable, level_key
from .costs import CostProfile, DeploymentScenario
from .errors import ValidationError
from .models import ModelSpec
from .pareto import EvalPoint, ParetoFrontier, pareto_frontier
from .transforms import representation_key

THREADS_ENV_VAR = "CASCADEKIT_THREADS"


def thread_count(threads: Optional[int] = None) -> int:
    """Resolve the worker count: explicit argument, else env var, else 1."""
    if threads is not None:
        return max(1, threads)
    raw = os.environ.get(THREADS_ENV_VAR, "")
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValidationError(f"{THREADS_ENV_VAR} must be an integer, got {raw!r}") from None


@dataclass
class CatalogChunk:
    """A block of evaluated cascades sharing their fixed levels.

    Exactly one of the level/terminal roles is vectorized: depth-1 and
    depth-2 chunks vary the terminal, anchor-terminal depth-3 chunks vary
    the second level, full depth-3 chunks fix both levels and vary the
    terminal.
    """

    depth: int
    ids: np.ndarray
    accuracy: np.ndarray
    times: dict[DeploymentScenario, np.ndarray]
    level1_entry: Optional[int] = None
    level2_entry: Optional[int] = None
    level2_entries: Optional[np.ndarray] = None
    terminal_model: Optional[int] = None
    terminal_models: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.ids)


@dataclass
class CatalogResult:
    """Flat arrays over the whole evaluated catalog."""

    scenarios: tuple[DeploymentScenario, ...]
    ids: np.ndarray
    depth: np.ndarray
    accuracy: np.ndarray
    times: dict[DeploymentScenario, np.ndarray]
    count: int
    elapsed_s: float

    def throughput(self, scenario: DeploymentScenario) -> np.ndarray:
        return 1.0 / self.times[scenario]

    def frontier(self, scenario: DeploymentScenario) -> ParetoFrontier:
        return frontier_from_arrays(self.ids, self.accuracy, self.throughput(scenario))

    def points(self, scenario: DeploymentScenario) -> list[EvalPoint]:
        thr = self.throughput(scenario)
        return [
            EvalPoint("%016x" % self.ids[i], float(self.accuracy[i]), float(thr[i]))
            for i in range(self.count)
        ]


def frontier_from_arrays(ids: np.ndarray, accuracy: np.ndarray,
                         throughput: np.ndarray) -> ParetoFrontier:
    """Array-scale frontier: same sort-and-sweep as pareto_frontier.

    uint64 ids sort identically to their fixed-width hex encodings, so
    the duplicate tie-break matches the point-level implementation; the
    surviving points are rebuilt through pareto_frontier as a check.
    """
    if ids.size == 0:
        raise ValidationError("cannot build a frontier from no points")
    if not np.isfinite(throughput).all() or throughput.min() <= 0.0:
        raise ValidationError("throughputs must be finite and positive")
    order = np.lexsort((ids, -accuracy, -throughput))
    acc_sorted = accuracy[order]
    running = np.maximum.accumulate(acc_sorted)
    keep = np.empty(len(order), dtype=bool)
    keep[0] = True
    keep[1:] = acc_sorted[1:] > running[:-1]
    survivors = order[keep]
    points = [
        EvalPoint("%016x" % ids[i], float(accuracy[i]), float(throughput[i]))
        for i in survivors
    ]
    return pareto_frontier(points)


@dataclass
class _Prepared:
    """Everything the per-depth passes need, precomputed once."""

    n: int
    model_ids: list[str]
    mask_u: np.ndarray
    mask_cd: np.ndarray
    mask_tc: np.ndarray
    corr_entry: np.ndarray
    upop_entry: np.ndarray
    tcorr_model: np.ndarray
    fnv_entry: np.ndarray
    fnv_term: np.ndarray
    entry_model: np.ndarray
    infer_model: np.ndarray
    repr_id_model: np.ndarray
    charge_model: dict[DeploymentScenario, np.ndarray]
    base: dict[DeploymentScenario, float]
    anchor_model_idx: Optional[int]
    models_not: dict[int, np.ndarray] = field(default_factory=dict)
    entries_not: dict[int, np.ndarray] = field(default_factory=dict)
    anchor_entries_not: dict[int, np.ndarray] = field(default_factory=dict)

    def models_excluding(self, m: int) -> np.ndarray:
        out = self.models_not.get(m)
        if out is None:
            idx = np.arange(len(self.model_ids), dtype=np.int64)
            out = idx[idx != m]
            self.models_not[m] = out
        return out

    def entries_excluding(self, m: int, non_anchor: bool) -> np.ndarray:
        cache = self.anchor_entries_not if non_anchor else self.entries_not
        out = cache.get(m)
        if out is None:
            keep = self.entry_model != m
            if non_anchor and self.anchor_model_idx is not None:
                keep &= self.entry_model != self.anchor_model_idx
            out = np.flatnonzero(keep).astype(np.int64)
            cache[m] = out
        return out


def _prepare(table: OutcomeTable, labels, models: Sequence[ModelSpec],
             profile: CostProfile,
             scenarios: Sequence[DeploymentScenario]) -> _Prepared:
    n = table.image_count
    if n == 0:
        raise ValidationError("cannot evaluate a catalog over an empty eval set")
    y = np.asarray(labels)
    if y.shape != (n,):
        raise ValidationError(f"labels must have shape ({n},)")
    if not np.isin(y, (0, 1)).all():
        raise ValidationError("labels must be 0 or 1")
    truth = y == 1

    model_ids = [m.model_id for m in models]
    if len(set(model_ids)) != len(model_ids):
        raise ValidationError("duplicate model ids in the model pool")
    table_row = []
    for m in models:
        idx = table.model_index.get(m.model_id)
        if idx is None:
            raise ValidationError(f"model {m.model_id} has no terminal predictions in the table")
        table_row.append(idx)
    tc_bool = table.terminal_pred[table_row] == truth[None, :]

    u_bool = table.outcomes == 0
    cd_bool = ((table.outcomes == 1) & truth[None, :]) | (
        (table.outcomes == -1) & ~truth[None, :]
    )
    mask_u = _kernels.pack_bool_rows(u_bool)
    mask_cd = _kernels.pack_bool_rows(cd_bool)
    mask_tc = _kernels.pack_bool_rows(tc_bool)

    model_pos = {m: i for i, m in enumerate(model_ids)}
    entry_model = np.empty(len(table.entries), dtype=np.int64)
    fnv_entry = np.empty(len(table.entries), dtype=np.uint64)
    for i, e in enumerate(table.entries):
        pos = model_pos.get(e.model_id)
        if pos is None:
            raise ValidationError(f"calibrated entry {e.model_id} is not in the model pool")
        entry_model[i] = pos
        fnv_entry[i] = fnv1a64(level_key(e.model_id, e.threshold.target_precision))
    fnv_term = np.array(
        [fnv1a64("terminal:" + m) for m in model_ids], dtype=np.uint64
    )

    infer_model = np.empty(len(models), dtype=np.float64)
    repr_keys = []
    for i, m in enumerate(models):
        if m.model_id not in profile.infer_s:
            raise ValidationError(f"profile has no infer_s entry for {m.model_id}")
        infer_model[i] = profile.infer_s[m.model_id]
        repr_keys.append(representation_key(m.transform))
    distinct = {k: i for i, k in enumerate(dict.fromkeys(repr_keys))}
    repr_id_model = np.array([distinct[k] for k in repr_keys], dtype=np.int64)

    charge_model = {}
    base = {}
    for scenario in scenarios:
        if scenario is DeploymentScenario.INFER_ONLY:
            charges = np.zeros(len(models))
        else:
            source = (
                profile.load_repr_s
                if scenario is DeploymentScenario.ONGOING
                else profile.transform_s
            )
            kind = "load_repr_s" if scenario is DeploymentScenario.ONGOING else "transform_s"
            missing = [k for k in repr_keys if k not in source]
            if missing:
                raise ValidationError(f"profile has no {kind} entry for {missing[0]}")
            charges = np.array([source[k] for k in repr_keys], dtype=np.float64)
        charge_model[scenario] = charges
        base[scenario] = (
            profile.load_full_s if scenario is DeploymentScenario.ARCHIVE else 0.0
        )

    anchors = [i for i, m in enumerate(models) if m.is_anchor]
    if len(anchors) > 1:
        raise ValidationError("model pool must contain at most one anchor")

    return _Prepared(
        n=n,
        model_ids=model_ids,
        mask_u=mask_u,
        mask_cd=mask_cd,
        mask_tc=mask_tc,
        corr_entry=_kernels.popcount_rows(mask_cd),
        upop_entry=_kernels.popcount_rows(mask_u),
        tcorr_model=_kernels.popcount_rows(mask_tc),
        fnv_entry=fnv_entry,
        fnv_term=fnv_term,
        entry_model=entry_model,
        infer_model=infer_model,
        repr_id_model=repr_id_model,
        charge_model=charge_model,
        base=base,
        anchor_model_idx=anchors[0] if anchors else None,
    )


def _depth1_chunk(p: _Prepared, scenarios) -> CatalogChunk:
    acc = p.tcorr_model / p.n
    times = {}
    for s in scenarios:
        times[s] = p.base[s] + p.charge_model[s] + p.infer_model
    ids = splitmix64_array(p.fnv_term.copy())
    terminals = np.arange(len(p.model_ids), dtype=np.int64)
    return CatalogChunk(1, ids, acc, times, terminal_models=terminals)


def _depth2_chunk(p: _Prepared, e1: int, terminals: np.ndarray, scenarios) -> CatalogChunk:
    u1 = p.mask_u[e1]
    acc_all = _kernels.and_popcount(u1, p.mask_tc)
    acc = (p.corr_entry[e1] + acc_all[terminals]) / p.n
    m1 = int(p.entry_model[e1])
    rid1 = p.repr_id_model[m1]
    frac2 = p.upop_entry[e1] / p.n
    new_repr = p.repr_id_model[terminals] != rid1
    times = {}
    for s in scenarios:
        charge = p.charge_model[s]
        level1 = p.base[s] + charge[m1] + p.infer_model[m1]
        times[s] = level1 + frac2 * (
            p.infer_model[terminals] + charge[terminals] * new_repr
        )
    h1 = splitmix64(int(p.fnv_entry[e1]))
    ids = splitmix64_array(np.uint64(h1) ^ p.fnv_term[terminals])
    return CatalogChunk(2, ids, acc, times, level1_entry=e1, terminal_models=terminals)


def _depth3_anchor_chunk(p: _Prepared, e1: int, rows: np.ndarray,
                         scenarios) -> CatalogChunk:
    anchor = p.anchor_model_idx
    u1 = p.mask_u[e1]
    n3_all, corr3_all = _kernels.pair_stats(u1, p.mask_u, p.mask_tc[anchor])
    corr2_all = _kernels.and_popcount(u1, p.mask_cd)
    acc = (p.corr_entry[e1] + corr2_all[rows] + corr3_all[rows]) / p.n

    m1 = int(p.entry_model[e1])
    m2 = p.entry_model[rows]
    rid1 = p.repr_id_model[m1]
    rid2 = p.repr_id_model[m2]
    rid_a = p.repr_id_model[anchor]
    frac2 = p.upop_entry[e1] / p.n
    frac3 = n3_all[rows] / p.n
    new2 = rid2 != rid1
    new3 = (rid_a != rid1) & (rid_a != rid2)
    times = {}
    for s in scenarios:
        charge = p.charge_model[s]
        level1 = p.base[s] + charge[m1] + p.infer_model[m1]
        times[s] = (
            level1
            + frac2 * (p.infer_model[m2] + charge[m2] * new2)
            + frac3 * (p.infer_model[anchor] + charge[anchor] * new3)
        )
    h1 = np.uint64(splitmix64(int(p.fnv_entry[e1])))
    h2 = splitmix64_array(h1 ^ p.fnv_entry[rows])
    ids = splitmix64_array(h2 ^ p.fnv_term[anchor])
    return CatalogChunk(3, ids, acc, times, level1_entry=e1,
                        level2_entries=rows, terminal_model=anchor)


def _depth3_full_chunks(p: _Prepared, e1: int, scenarios) -> list[CatalogChunk]:
    chunks = []
    u1 = p.mask_u[e1]
    m1 = int(p.entry_model[e1])
    rid1 = p.repr_id_model[m1]
    frac2 = p.upop_entry[e1] / p.n
    for e2 in p.entries_excluding(m1, non_anchor=False):
        m2 = int(p.entry_model[e2])
        u12 = u1 & p.mask_u[e2]
        corr12 = p.corr_entry[e1] + _kernels.popcount_words(u1 & p.mask_cd[e2])
        keep = p.models_excluding(m1)
        keep = keep[keep != m2]
        acc_all = _kernels.and_popcount(u12, p.mask_tc)
        acc = (corr12 + acc_all[keep]) / p.n
        rid2 = p.repr_id_model[m2]
        frac3 = _kernels.popcount_words(u12) / p.n
        new2 = rid2 != rid1
        rid_t = p.repr_id_model[keep]
        new3 = (rid_t != rid1) & (rid_t != rid2)
        times = {}
        for s in scenarios:
            charge = p.charge_model[s]
            level12 = (
                p.base[s] + charge[m1] + p.infer_model[m1]
                + frac2 * (p.infer_model[m2] + charge[m2] * new2)
            )
            times[s] = level12 + frac3 * (p.infer_model[keep] + charge[keep] * new3)
        h2 = np.uint64(splitmix64(int(splitmix64(int(p.fnv_entry[e1])) ^ int(p.fnv_entry[e2]))))
        ids = splitmix64_array(h2 ^ p.fnv_term[keep])
        chunks.append(
            CatalogChunk(3, ids, acc, times, level1_entry=e1, level2_entry=int(e2),
                         terminal_models=keep)
        )
    return chunks


def evaluate_catalog(table: OutcomeTable, labels, models: Sequence[ModelSpec],
                     profile: CostProfile,
                     scenarios: Sequence[DeploymentScenario], max_depth: int,
                     anchor_terminal_only_at_depth: int = 3,
                     threads: Optional[int] = None,
                     on_chunk: Optional[Callable[[CatalogChunk], None]] = None,
                     keep_arrays: bool = True) -> CatalogResult:
    """Evaluate the whole cascade catalog in enumeration order.

    labels align with the table's eval images.  Chunks arrive on on_chunk
    in a deterministic order regardless of the worker count.
    """
    if max_depth not in (1, 2, 3):
        raise ValidationError("max_depth must be 1, 2, or 3")
    scenarios = tuple(scenarios)
    if not scenarios:
        raise ValidationError("need at least one scenario")
    start = time.perf_counter()
    p = _prepare(table, labels, models, profile, scenarios)
    workers = thread_count(threads)

    anchor_restricted_2 = 2 >= anchor_terminal_only_at_depth
    anchor_restricted_3 = 3 >= anchor_terminal_only_at_depth
    if (max_depth >= 2 and anchor_restricted_2) or (max_depth >= 3 and anchor_restricted_3):
        if p.anchor_model_idx is None:
            raise ValidationError(
                "enumeration requires an anchor model at depths >= "
                f"{anchor_terminal_only_at_depth}"
            )

    collected: list[CatalogChunk] = []
    count = 0

    def process(chunk: CatalogChunk):
        nonlocal count
        count += len(chunk)
        if on_chunk is not None:
            on_chunk(chunk)
        if keep_arrays:
            collected.append(chunk)

    def map_ordered(fn, args):
        if workers <= 1:
            for a in args:
                yield fn(a)
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                yield from pool.map(fn, args)

    process(_depth1_chunk(p, scenarios))

    n_entries = len(p.fnv_entry)
    if max_depth >= 2:
        def depth2_for(e1: int) -> CatalogChunk:
            m1 = int(p.entry_model[e1])
            if anchor_restricted_2:
                terminals = np.array(
                    [p.anchor_model_idx] if p.anchor_model_idx != m1 else [],
                    dtype=np.int64,
                )
            else:
                terminals = p.models_excluding(m1)
            return _depth2_chunk(p, e1, terminals, scenarios)

        for chunk in map_ordered(depth2_for, range(n_entries)):
            if len(chunk):
                process(chunk)

    if max_depth >= 3:
        if anchor_restricted_3:
            def depth3_for(e1: int) -> Optional[CatalogChunk]:
                m1 = int(p.entry_model[e1])
                if m1 == p.anchor_model_idx:
                    return None
                rows = p.entries_excluding(m1, non_anchor=True)
                if not len(rows):
                    return None
                return _depth3_anchor_chunk(p, e1, rows, scenarios)

            for chunk in map_ordered(depth3_for, range(n_entries)):
                if chunk is not None and len(chunk):
                    process(chunk)
        else:
            for chunks in map_ordered(
                lambda e1: _depth3_full_chunks(p, e1, scenarios), range(n_entries)
            ):
                for chunk in chunks:
                    if len(chunk):
                        process(chunk)

    elapsed = time.perf_counter() - start
    if keep_arrays and collected:
        ids = np.concatenate([c.ids for c in collected])
        depth = np.concatenate(
            [np.full(len(c), c.depth, dtype=np.int8) for c in collected]
        )
        accuracy = np.concatenate([c.accuracy for c in collected])
        times = {
            s: np.concatenate([c.times[s] for c in collected]) for s in scenarios
        }
        for s in scenarios:
            if times[s].min() <= 0.0:
                raise ValidationError(
                    f"non-positive expected time under {s.value}; "
                    "check the cost profile"
                )
    else:
        ids = np.empty(0, dtype=np.uint64)
        depth = np.empty(0, dtype=np.int8)
        accuracy = np.empty(0, dtype=np.float64)
        times = {s: np.empty(0, dtype=np.float64) for s in scenarios}
    return CatalogResult(scenarios, ids, depth, accuracy, times, count, elapsed)
