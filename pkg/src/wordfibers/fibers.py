"""Word map and automorphic word map evaluation, fiber counting, maximization.

Argument tuples (g_1, ..., g_d) are flattened to a single index with g_1 most
significant: index = sum_k g_k * n^(d-k).  Automorphism tuples drawn from an
enumerated AutSet of size m are likewise numbered in mixed radix with the
first letter most significant, which fixes the deterministic search order and
tie-breaking.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .errors import BudgetExceeded, EmptyWordError
from .groups import (
    Automorphism,
    AutSet,
    FiniteGroup,
    SubgroupHandle,
    identity_automorphism,
    subgroup_group,
)
from .words import ReducedWord

DEFAULT_BUDGET = 10**8
_ARG_CHUNK = 1 << 22
_BATCH_ELEMENTS = 1 << 22


@dataclass(frozen=True)
class AutTuple:
    """An ordered tuple of automorphisms of one group, one per word letter."""

    entries: tuple[Automorphism, ...]

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, i: int) -> Automorphism:
        return self.entries[i]


@dataclass
class FiberDistribution:
    """Exact fiber sizes of one automorphic word map, indexed by target element."""

    counts: np.ndarray
    order: int
    arity: int

    @property
    def total(self) -> int:
        return self.order**self.arity

    def proportion(self, target: int) -> Fraction:
        return Fraction(int(self.counts[target]), self.total)

    def max_fiber(self) -> tuple[int, int]:
        """(size, least target attaining it)."""
        target = int(np.argmax(self.counts))
        return int(self.counts[target]), target


@dataclass
class MaxFiberResult:
    value: int
    proportion: Fraction
    witness_tuple: AutTuple
    witness_target: int
    status: str  # "exact" or "lower_bound"
    tuples_examined: int
    evaluations: int
    witness_tuple_indices: Optional[tuple[int, ...]] = None
    seed: Optional[int] = None


@dataclass
class PerTargetMax:
    """P^(A)(G, g) for every g, with the first tuple index attaining each."""

    values: np.ndarray
    witness_tuple_indices: np.ndarray
    tuples_examined: int
    evaluations: int


def _var_positions(w: ReducedWord) -> dict[int, int]:
    return {v: i for i, v in enumerate(w.variables)}


def eval_word(g: FiniteGroup, w: ReducedWord, args: Sequence[int]) -> int:
    """Substitute args into the word; args follow the ascending variable order."""
    if len(args) != w.num_variables:
        raise ValueError(f"expected {w.num_variables} arguments, got {len(args)}")
    pos = _var_positions(w)
    acc = 0
    for let in w.letters:
        x = int(args[pos[let.var]])
        if let.sign < 0:
            x = g.inv(x)
        acc = g.mul(acc, x)
    return acc


def eval_automorphic(
    g: FiniteGroup,
    w: ReducedWord,
    auts: Sequence[Automorphism] | AutTuple,
    args: Sequence[int],
) -> int:
    """Like eval_word, but the i-th letter is first passed through auts[i]."""
    entries = tuple(auts)
    if len(entries) != w.length:
        raise ValueError(f"expected {w.length} automorphisms, got {len(entries)}")
    if len(args) != w.num_variables:
        raise ValueError(f"expected {w.num_variables} arguments, got {len(args)}")
    pos = _var_positions(w)
    acc = 0
    for let, alpha in zip(w.letters, entries):
        x = alpha(int(args[pos[let.var]]))
        if let.sign < 0:
            x = g.inv(x)
        acc = g.mul(acc, x)
    return acc


def _require_word(w: ReducedWord) -> None:
    if w.length < 1:
        raise EmptyWordError("fiber computations require a nonempty word")


def _arg_slice(n: int, d: int, var_rank: int, start: int, stop: int) -> np.ndarray:
    idx = np.arange(start, stop, dtype=np.int64)
    return ((idx // n ** (d - 1 - var_rank)) % n).astype(np.int32)


def _letters_plan(w: ReducedWord) -> list[tuple[int, int]]:
    pos = _var_positions(w)
    return [(pos[let.var], let.sign) for let in w.letters]


def _counts_single_tuple(
    g: FiniteGroup, w: ReducedWord, aut_perms: Sequence[np.ndarray]
) -> np.ndarray:
    """Fiber counts of one automorphic word map by chunked full enumeration."""
    n, d = g.order, w.num_variables
    table, inv_t = g.table, g.inv_table
    plan = _letters_plan(w)
    total = n**d
    counts = np.zeros(n, dtype=np.int64)
    for start in range(0, total, _ARG_CHUNK):
        stop = min(start + _ARG_CHUNK, total)
        res = None
        for (rank, sign), perm in zip(plan, aut_perms):
            v = _arg_slice(n, d, rank, start, stop)
            if sign < 0:
                v = inv_t[v]
            v = perm[v]
            res = v if res is None else table[res, v]
        counts += np.bincount(res, minlength=n)
    return counts


def fiber_distribution(
    g: FiniteGroup,
    w: ReducedWord,
    auts: Sequence[Automorphism] | AutTuple,
    budget: int = DEFAULT_BUDGET,
) -> FiberDistribution:
    """Exact fiber sizes by full enumeration of the argument space."""
    _require_word(w)
    entries = tuple(auts)
    if len(entries) != w.length:
        raise ValueError(f"expected {w.length} automorphisms, got {len(entries)}")
    d = w.num_variables
    if g.order**d > budget:
        raise BudgetExceeded(f"{g.order}^{d} evaluations exceed budget {budget}")
    counts = _counts_single_tuple(g, w, [a.perm for a in entries])
    return FiberDistribution(counts=counts, order=g.order, arity=d)


def identity_tuple(g: FiniteGroup, w: ReducedWord) -> AutTuple:
    ident = identity_automorphism(g)
    return AutTuple(tuple(ident for _ in range(w.length)))


def pi_w(g: FiniteGroup, w: ReducedWord, budget: int = DEFAULT_BUDGET) -> tuple[int, Fraction]:
    """Maximum fiber size of the plain word map, and its proportion of |G|^d."""
    _require_word(w)
    dist = fiber_distribution(g, w, identity_tuple(g, w), budget=budget)
    value, _ = dist.max_fiber()
    return value, Fraction(value, dist.total)


# -- exhaustive / sampled search over automorphism tuples ----------------------


def _tuple_digits(indices: np.ndarray, m: int, l: int) -> list[np.ndarray]:
    """Mixed-radix digits of tuple indices; letter 0 is the most significant."""
    return [((indices // m ** (l - 1 - i)) % m).astype(np.int64) for i in range(l)]


class _BatchEvaluator:
    """Evaluates fiber counts for batches of automorphism tuples at once.

    When the argument space alone exceeds the chunking threshold, tuples are
    processed one at a time with chunked argument sweeps instead of batching,
    keeping peak memory bounded."""

    def __init__(self, g: FiniteGroup, w: ReducedWord, aut_tables: np.ndarray):
        self.g = g
        self.w = w
        self.at = aut_tables
        self.n = g.order
        self.d = w.num_variables
        self.total_args = self.n**self.d
        self.plan = _letters_plan(w)
        self.table = g.table
        self.inv_t = g.inv_table
        self.chunked = self.total_args > _ARG_CHUNK
        if not self.chunked:
            self.grids = [
                _arg_slice(self.n, self.d, rank, 0, self.total_args)
                for rank in range(self.d)
            ]

    def batch_size(self) -> int:
        if self.chunked:
            return 1
        return max(1, min(_BATCH_ELEMENTS // max(self.total_args, 1), 1 << 16))

    def counts(self, digit_arrays: list[np.ndarray]) -> np.ndarray:
        """(B, n) fiber counts for the tuples described by per-letter indices."""
        b = digit_arrays[0].shape[0]
        if self.chunked:
            rows = []
            for r in range(b):
                perms = [self.at[int(dig[r])] for dig in digit_arrays]
                rows.append(_counts_single_tuple(self.g, self.w, perms))
            return np.stack(rows)
        res = None
        for (rank, sign), dig in zip(self.plan, digit_arrays):
            v = self.grids[rank]
            if sign < 0:
                v = self.inv_t[v]
            img = self.at[dig[:, None], v[None, :]]
            res = img if res is None else self.table[res, img]
        offs = np.arange(b, dtype=np.int64)[:, None] * self.n
        flat = (res.astype(np.int64) + offs).ravel()
        return np.bincount(flat, minlength=b * self.n).reshape(b, self.n)


@dataclass
class _BestCell:
    value: int = -1
    tuple_idx: int = -1
    target: int = -1

    def offer(self, value: int, tuple_idx: int, target: int) -> None:
        if value > self.value:
            self.value, self.tuple_idx, self.target = value, tuple_idx, target


def _scan_range(
    ev: _BatchEvaluator,
    start: int,
    stop: int,
    m: int,
    target: Optional[int],
) -> tuple[_BestCell, np.ndarray, np.ndarray, int]:
    """Scan tuple indices [start, stop); returns the best cell, the per-target
    maxima with first-attaining tuple indices, and the evaluation count."""
    l = ev.w.length
    best = _BestCell()
    per_vals = np.zeros(ev.n, dtype=np.int64)
    per_idx = np.full(ev.n, -1, dtype=np.int64)
    evals = 0
    bsize = ev.batch_size()
    for lo in range(start, stop, bsize):
        hi = min(lo + bsize, stop)
        indices = np.arange(lo, hi, dtype=np.int64)
        counts = ev.counts(_tuple_digits(indices, m, l))
        evals += (hi - lo) * ev.total_args
        batch_max = counts.max(axis=0)
        batch_arg = counts.argmax(axis=0)
        improved = batch_max > per_vals
        per_idx[improved] = lo + batch_arg[improved]
        np.maximum(per_vals, batch_max, out=per_vals)
        if target is None:
            row_vals = counts.max(axis=1)
            row_targets = counts.argmax(axis=1)
        else:
            row_vals = counts[:, target]
            row_targets = np.full(hi - lo, target, dtype=np.int64)
        r = int(np.argmax(row_vals))
        best.offer(int(row_vals[r]), lo + r, int(row_targets[r]))
    return best, per_vals, per_idx, evals


def _merge_ranges(parts):
    best = _BestCell()
    per_vals = None
    per_idx = None
    evals = 0
    for part_best, vals, idx, ev in parts:
        best.offer(part_best.value, part_best.tuple_idx, part_best.target)
        if per_vals is None:
            per_vals, per_idx = vals.copy(), idx.copy()
        else:
            take = vals > per_vals
            per_idx[take] = idx[take]
            np.maximum(per_vals, vals, out=per_vals)
        evals += ev
    return best, per_vals, per_idx, evals


def _search_all_tuples(
    g: FiniteGroup,
    w: ReducedWord,
    a: AutSet,
    target: Optional[int],
    budget: int,
    threads: int,
):
    _require_word(w)
    m = len(a)
    total_tuples = m**w.length
    needed = total_tuples * g.order**w.num_variables
    if needed > budget:
        raise BudgetExceeded(
            f"exact search needs {needed} evaluations, budget is {budget}"
        )
    ev = _BatchEvaluator(g, w, a.tables)
    threads = max(1, int(threads))
    if threads == 1 or total_tuples < 4 * threads:
        parts = [_scan_range(ev, 0, total_tuples, m, target)]
    else:
        bounds = np.linspace(0, total_tuples, threads + 1, dtype=np.int64)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [
                pool.submit(_scan_range, ev, int(lo), int(hi), m, target)
                for lo, hi in zip(bounds, bounds[1:])
                if hi > lo
            ]
            parts = [f.result() for f in futures]
    best, per_vals, per_idx, evals = _merge_ranges(parts)
    return best, per_vals, per_idx, evals, total_tuples


def _tuple_from_index(a: AutSet, l: int, tuple_idx: int) -> tuple[tuple[int, ...], AutTuple]:
    m = len(a)
    digits = tuple(int(tuple_idx // m ** (l - 1 - i)) % m for i in range(l))
    return digits, AutTuple(tuple(a[i] for i in digits))


def max_fiber(
    g: FiniteGroup,
    w: ReducedWord,
    a: AutSet,
    target: Optional[int] = None,
    mode: str = "exact",
    budget: int = DEFAULT_BUDGET,
    seed: int = 0,
    threads: int = 1,
) -> MaxFiberResult:
    """Maximum fiber size over automorphism tuples drawn from A.

    target None means maximize over all targets.  Exact mode enumerates all
    |A|^l tuples; sample mode draws `budget` seeded uniform tuples plus the
    identity tuple and reports a lower bound.  Ties are broken by the least
    (tuple index, target index).
    """
    _require_word(w)
    if len(a) == 0:
        raise ValueError("empty automorphism set")
    if target is not None and not 0 <= target < g.order:
        raise ValueError(f"target {target} out of range for order {g.order}")
    d = w.num_variables
    if g.order == 1:
        ident = identity_tuple(g, w)
        return MaxFiberResult(
            value=1,
            proportion=Fraction(1),
            witness_tuple=ident,
            witness_target=0,
            status="exact",
            tuples_examined=1,
            evaluations=1,
            witness_tuple_indices=tuple(0 for _ in range(w.length)),
        )
    if mode == "exact":
        best, _, _, evals, total = _search_all_tuples(g, w, a, target, budget, threads)
        digits, tup = _tuple_from_index(a, w.length, best.tuple_idx)
        return MaxFiberResult(
            value=best.value,
            proportion=Fraction(best.value, g.order**d),
            witness_tuple=tup,
            witness_target=best.target,
            status="exact",
            tuples_examined=total,
            evaluations=evals,
            witness_tuple_indices=digits,
        )
    if mode != "sample":
        raise ValueError(f"unknown mode {mode!r}")
    rng = np.random.default_rng(seed)
    m = len(a)
    l = w.length
    draws = np.vstack(
        [np.zeros((1, l), dtype=np.int64), rng.integers(0, m, size=(budget, l))]
    )
    ev = _BatchEvaluator(g, w, a.tables)
    best = _BestCell()
    evals = 0
    bsize = ev.batch_size()
    for lo in range(0, draws.shape[0], bsize):
        hi = min(lo + bsize, draws.shape[0])
        digit_arrays = [draws[lo:hi, i] for i in range(l)]
        counts = ev.counts(digit_arrays)
        evals += (hi - lo) * ev.total_args
        if target is None:
            row_vals = counts.max(axis=1)
            row_targets = counts.argmax(axis=1)
        else:
            row_vals = counts[:, target]
            row_targets = np.full(hi - lo, target, dtype=np.int64)
        r = int(np.argmax(row_vals))
        best.offer(int(row_vals[r]), lo + r, int(row_targets[r]))
    digits = tuple(int(x) for x in draws[best.tuple_idx])
    tup = AutTuple(tuple(a[i] for i in digits))
    return MaxFiberResult(
        value=best.value,
        proportion=Fraction(best.value, g.order**d),
        witness_tuple=tup,
        witness_target=best.target,
        status="lower_bound",
        tuples_examined=draws.shape[0],
        evaluations=evals,
        witness_tuple_indices=digits,
        seed=seed,
    )


def max_fiber_per_target(
    g: FiniteGroup,
    w: ReducedWord,
    a: AutSet,
    budget: int = DEFAULT_BUDGET,
    threads: int = 1,
) -> PerTargetMax:
    """Exact P^(A)(G, g) for every target g at once."""
    _require_word(w)
    if g.order == 1:
        return PerTargetMax(
            values=np.array([1], dtype=np.int64),
            witness_tuple_indices=np.array([0], dtype=np.int64),
            tuples_examined=1,
            evaluations=1,
        )
    _, per_vals, per_idx, evals, total = _search_all_tuples(
        g, w, a, None, budget, threads
    )
    return PerTargetMax(
        values=per_vals,
        witness_tuple_indices=per_idx,
        tuples_examined=total,
        evaluations=evals,
    )


# -- coset equation rewriting ---------------------------------------------------


@dataclass
class RewriteResult:
    """A tuple of automorphisms of N expressing the coset equation over N^d."""

    n_group: FiniteGroup
    n_elements: tuple[int, ...]
    beta: AutTuple
    target: int
    conjugators: tuple[int, ...]


def rewrite_coset_equation(
    g: FiniteGroup,
    n: SubgroupHandle,
    w: ReducedWord,
    auts: Sequence[Automorphism] | AutTuple,
    base: Sequence[int],
    target: Optional[int] = None,
) -> RewriteResult:
    """Rewrite `word(auts, (n_1 g_1, ..., n_d g_d)) = target` over N^d as
    `word(beta, (n_1, ..., n_d)) = 1` over N.

    beta_i is the restriction to N of conj(c_i) composed after auts[i], where
    c_i is the product of the first i-1 letter factors for positive letters
    and of the first i factors for negative ones.
    """
    _require_word(w)
    entries = tuple(auts)
    if len(entries) != w.length:
        raise ValueError(f"expected {w.length} automorphisms, got {len(entries)}")
    if len(base) != w.num_variables:
        raise ValueError(f"expected {w.num_variables} base entries, got {len(base)}")
    from .groups import _require_characteristic

    _require_characteristic(g, n)
    pos = _var_positions(w)
    factors = []
    for let, alpha in zip(w.letters, entries):
        x = alpha(int(base[pos[let.var]]))
        factors.append(g.inv(x) if let.sign < 0 else x)
    value = 0
    for f in factors:
        value = g.mul(value, f)
    if target is None:
        target = value
    elif value != target:
        raise ValueError("base tuple does not satisfy the equation")

    conjugators = []
    prefix = 0
    for let, f in zip(w.letters, factors):
        if let.sign > 0:
            conjugators.append(prefix)
            prefix = g.mul(prefix, f)
        else:
            prefix = g.mul(prefix, f)
            conjugators.append(prefix)

    ngrp = subgroup_group(g, n)
    arr = np.asarray(n.elements, dtype=np.int64)
    npos = np.full(g.order, -1, dtype=np.int32)
    npos[arr] = np.arange(len(arr), dtype=np.int32)
    table, inv_t = g.table, g.inv_table
    betas = []
    for alpha, c in zip(entries, conjugators):
        composed = table[table[c, alpha.perm], inv_t[c]]
        restricted = npos[composed[arr]]
        assert (restricted >= 0).all(), "conjugated automorphism must stabilize N"
        betas.append(Automorphism(ngrp, restricted))
    return RewriteResult(
        n_group=ngrp,
        n_elements=tuple(n.elements),
        beta=AutTuple(tuple(betas)),
        target=target,
        conjugators=tuple(conjugators),
    )
