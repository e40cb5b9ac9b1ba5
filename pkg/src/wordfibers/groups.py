"""Concrete finite groups on indexed elements, their automorphisms and structure.

Every group lives on element indices 0..order-1 with the identity at index 0.
Small groups carry a dense multiplication table; symmetric and alternating
groups are backed by permutation words and materialize tables lazily.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np

from .errors import CapExceeded

DEFAULT_ORDER_CAP = 4096
AUT_ORDER_CAP = 512
SUBGROUP_ORDER_CAP = 200
RADICAL_ORDER_CAP = 360
ISO_ORDER_CAP = 512
AUTSET_SIZE_CAP = 500_000
_DENSE_TABLE_ORDER_CAP = 8192
_ASSOC_FULL_CHECK_CAP = 64
_ASSOC_RANDOM_TRIPLES = 100_000


def _dtype_for(order: int):
    return np.int16 if order <= 2**15 - 1 else np.int32


class FiniteGroup:
    """A finite group by indexed elements with total multiplication structure."""

    def __init__(
        self,
        order: int,
        *,
        table: Optional[np.ndarray] = None,
        perms: Optional[Sequence[tuple[int, ...]]] = None,
        spec: str = "",
    ):
        if (table is None) == (perms is None):
            raise ValueError("provide exactly one of table or perms")
        self.order = order
        self.spec = spec
        self._table = None
        self._perms = None
        if table is not None:
            tbl = np.asarray(table)
            if tbl.shape != (order, order):
                raise ValueError("table shape does not match order")
            self._table = np.ascontiguousarray(tbl.astype(np.int32))
        else:
            if len(perms) != order:
                raise ValueError("permutation list does not match order")
            self._perms = tuple(tuple(p) for p in perms)
            self._perm_index = {p: i for i, p in enumerate(self._perms)}
            if self._perms[0] != tuple(range(len(self._perms[0]))):
                raise ValueError("identity permutation must sit at index 0")

    # -- core operations ----------------------------------------------------

    def mul(self, a: int, b: int) -> int:
        if self._table is not None:
            return int(self._table[a, b])
        pa, pb = self._perms[a], self._perms[b]
        return self._perm_index[tuple(pa[x] for x in pb)]

    def inv(self, a: int) -> int:
        return int(self.inv_table[a])

    @property
    def identity(self) -> int:
        return 0

    @property
    def table(self) -> np.ndarray:
        """Dense multiplication table, built on first use for perm-backed groups."""
        if self._table is None:
            if self.order > _DENSE_TABLE_ORDER_CAP:
                raise CapExceeded(
                    f"dense table for order {self.order} exceeds cap "
                    f"{_DENSE_TABLE_ORDER_CAP}"
                )
            arr = np.array(self._perms, dtype=np.int32)
            out = np.empty((self.order, self.order), dtype=np.int32)
            for a in range(self.order):
                composed = arr[a][arr]  # row b holds perm a applied after perm b
                for b in range(self.order):
                    out[a, b] = self._perm_index[tuple(int(x) for x in composed[b])]
            self._table = out
        return self._table

    @cached_property
    def inv_table(self) -> np.ndarray:
        if self._perms is not None and self._table is None:
            inv = np.empty(self.order, dtype=np.int32)
            for i, p in enumerate(self._perms):
                q = [0] * len(p)
                for pos, img in enumerate(p):
                    q[img] = pos
                inv[i] = self._perm_index[tuple(q)]
            return inv
        rows, cols = np.nonzero(self.table == 0)
        inv = np.empty(self.order, dtype=np.int32)
        inv[rows] = cols
        return inv

    # -- derived structure ---------------------------------------------------

    @cached_property
    def element_orders(self) -> np.ndarray:
        n = self.order
        table = self.table
        orders = np.zeros(n, dtype=np.int64)
        power = np.arange(n, dtype=np.int32)
        k = 1
        while (orders == 0).any():
            hit = (power == 0) & (orders == 0)
            orders[hit] = k
            power = table[power, np.arange(n)]
            k += 1
        return orders

    @cached_property
    def is_abelian(self) -> bool:
        t = self.table
        return bool((t == t.T).all())

    @cached_property
    def center(self) -> tuple[int, ...]:
        t = self.table
        return tuple(int(g) for g in range(self.order) if (t[g] == t[:, g]).all())

    @cached_property
    def conjugacy_classes(self) -> tuple[tuple[int, ...], ...]:
        n = self.order
        t, inv = self.table, self.inv_table
        hh = np.arange(n)
        seen = np.zeros(n, dtype=bool)
        classes = []
        for g in range(n):
            if seen[g]:
                continue
            orbit = np.unique(t[t[hh, g], inv[hh]])
            seen[orbit] = True
            classes.append(tuple(int(x) for x in orbit))
        return tuple(classes)

    @cached_property
    def class_size_of(self) -> np.ndarray:
        sizes = np.zeros(self.order, dtype=np.int64)
        for cls in self.conjugacy_classes:
            for g in cls:
                sizes[g] = len(cls)
        return sizes

    def validate(self, seed: int = 0) -> None:
        """Check group axioms; exhaustive for small orders, sampled above."""
        n = self.order
        t = self.table
        if t.min() < 0 or t.max() >= n:
            raise ValueError("table entries out of range")
        if (t[0] != np.arange(n)).any() or (t[:, 0] != np.arange(n)).any():
            raise ValueError("index 0 is not the identity")
        if sorted(int(x) for x in self.inv_table) != list(range(n)) or (
            t[np.arange(n), self.inv_table] != 0
        ).any():
            raise ValueError("missing inverses")
        if n <= _ASSOC_FULL_CHECK_CAP:
            a = np.arange(n)
            lhs = t[t[a[:, None, None], a[None, :, None]], a[None, None, :]]
            rhs = t[a[:, None, None], t[a[None, :, None], a[None, None, :]]]
            if (lhs != rhs).any():
                raise ValueError("multiplication is not associative")
        else:
            rng = np.random.default_rng(seed)
            a, b, c = rng.integers(0, n, size=(3, _ASSOC_RANDOM_TRIPLES))
            if (t[t[a, b], c] != t[a, t[b, c]]).any():
                raise ValueError("multiplication is not associative (sampled)")

    def __repr__(self) -> str:
        return f"FiniteGroup(order={self.order}, spec={self.spec!r})"


# -- constructions -----------------------------------------------------------


def _cyclic_table(n: int) -> np.ndarray:
    a = np.arange(n, dtype=np.int64)
    return ((a[:, None] + a[None, :]) % n).astype(np.int32)


def _dihedral_table(o: int) -> np.ndarray:
    # element f*o + k stands for s^f r^k; (f1,k1)(f2,k2) = (f1^f2, k2 + (-1)^f2 k1)
    n = 2 * o
    idx = np.arange(n)
    f, k = idx // o, idx % o
    f1, f2 = f[:, None], f[None, :]
    k1, k2 = k[:, None], k[None, :]
    sign = 1 - 2 * f2
    return ((f1 ^ f2) * o + (k2 + sign * k1) % o).astype(np.int32)


def _quaternion_table() -> np.ndarray:
    # indices: 0:1 1:-1 2:i 3:-i 4:j 5:-j 6:k 7:-k
    axis_mul = {
        ("e", "e"): (1, "e"), ("e", "i"): (1, "i"), ("e", "j"): (1, "j"), ("e", "k"): (1, "k"),
        ("i", "e"): (1, "i"), ("j", "e"): (1, "j"), ("k", "e"): (1, "k"),
        ("i", "i"): (-1, "e"), ("j", "j"): (-1, "e"), ("k", "k"): (-1, "e"),
        ("i", "j"): (1, "k"), ("j", "k"): (1, "i"), ("k", "i"): (1, "j"),
        ("j", "i"): (-1, "k"), ("k", "j"): (-1, "i"), ("i", "k"): (-1, "j"),
    }
    axes = ["e", "i", "j", "k"]
    enc = lambda sign, axis: axes.index(axis) * 2 + (0 if sign == 1 else 1)
    table = np.zeros((8, 8), dtype=np.int32)
    for a in range(8):
        for b in range(8):
            sa, xa = (1 if a % 2 == 0 else -1), axes[a // 2]
            sb, xb = (1 if b % 2 == 0 else -1), axes[b // 2]
            s, x = axis_mul[(xa, xb)]
            table[a, b] = enc(sa * sb * s, x)
    return table


def direct_product(g1: FiniteGroup, g2: FiniteGroup, spec: str = "") -> FiniteGroup:
    """Direct product with index a*|G2| + b."""
    n1, n2 = g1.order, g2.order
    t1 = g1.table.astype(np.int64)
    t2 = g2.table.astype(np.int64)
    table = (t1[:, None, :, None] * n2 + t2[None, :, None, :]).reshape(n1 * n2, n1 * n2)
    return FiniteGroup(
        n1 * n2,
        table=table.astype(np.int32),
        spec=spec or f"prod:({g1.spec})x({g2.spec})",
    )


def power_group(s: FiniteGroup, n: int, max_order: int = DEFAULT_ORDER_CAP) -> FiniteGroup:
    """Direct power S^n; coordinate 0 is the most significant index digit."""
    if n < 1:
        raise ValueError("power must be >= 1")
    if s.order**n > max_order:
        raise CapExceeded(f"order {s.order**n} exceeds cap {max_order}")
    g = s
    for _ in range(n - 1):
        g = direct_product(g, s)
    g.spec = f"pow:({s.spec})^{n}"
    return g


def _perm_group(n: int, even_only: bool) -> FiniteGroup:
    perms = []
    for p in itertools.permutations(range(n)):
        if even_only and _perm_parity(p) != 0:
            continue
        perms.append(p)
    name = f"alt:{n}" if even_only else f"sym:{n}"
    return FiniteGroup(len(perms), perms=perms, spec=name)


def _perm_parity(p: Sequence[int]) -> int:
    seen = [False] * len(p)
    parity = 0
    for i in range(len(p)):
        if seen[i]:
            continue
        j, length = i, 0
        while not seen[j]:
            seen[j] = True
            j = p[j]
            length += 1
        parity ^= (length - 1) & 1
    return parity


def _split_outer(spec: str, prefix: str) -> tuple[str, str]:
    """Split 'prefix:(A)<sep>(B)' style specs on the balanced outer parens."""
    body = spec[len(prefix) :]
    if not body.startswith("("):
        raise ValueError(f"malformed spec {spec!r}")
    depth = 0
    for i, ch in enumerate(body):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth == 0:
                return body[1:i], body[i + 1 :]
    raise ValueError(f"unbalanced parentheses in spec {spec!r}")


def make_group(spec: str, max_order: int = DEFAULT_ORDER_CAP) -> FiniteGroup:
    """Build a group from a construction string.

    Grammar: cyc:n | sym:n | alt:n | dih:o | q8 | prod:(s1)x(s2) | pow:(s)^n
    | table:<path>.
    """
    spec = spec.strip()

    def cap(order: int) -> int:
        if order > max_order:
            raise CapExceeded(f"order {order} exceeds cap {max_order}")
        if order < 1:
            raise ValueError(f"order must be positive in spec {spec!r}")
        return order

    if spec.startswith("cyc:"):
        n = cap(int(spec[4:]))
        return FiniteGroup(n, table=_cyclic_table(n), spec=spec)
    if spec.startswith("sym:") or spec.startswith("alt:"):
        n = int(spec[4:])
        if n < 1:
            raise ValueError(f"degree must be positive in spec {spec!r}")
        even = spec.startswith("alt:")
        import math

        cap(max(1, math.factorial(n) // (2 if even else 1)))
        return _perm_group(n, even)
    if spec.startswith("dih:"):
        o = int(spec[4:])
        if o < 1:
            raise ValueError(f"dihedral parameter must be positive, got {o}")
        cap(2 * o)
        return FiniteGroup(2 * o, table=_dihedral_table(o), spec=spec)
    if spec == "q8":
        return FiniteGroup(8, table=_quaternion_table(), spec=spec)
    if spec.startswith("prod:"):
        left, rest = _split_outer(spec, "prod:")
        if not rest.startswith("x("):
            raise ValueError(f"malformed spec {spec!r}")
        right, tail = _split_outer("x:" + rest[1:], "x:")
        if tail:
            raise ValueError(f"trailing characters in spec {spec!r}")
        g1 = make_group(left, max_order)
        g2 = make_group(right, max_order)
        cap(g1.order * g2.order)
        return direct_product(g1, g2, spec=spec)
    if spec.startswith("pow:"):
        inner, rest = _split_outer(spec, "pow:")
        if not rest.startswith("^"):
            raise ValueError(f"malformed spec {spec!r}")
        n = int(rest[1:])
        s = make_group(inner, max_order)
        g = power_group(s, n, max_order)
        g.spec = spec
        return g
    if spec.startswith("table:"):
        table = read_cayley_table(spec[6:])
        cap(table.shape[0])
        g = FiniteGroup(table.shape[0], table=table, spec=spec)
        g.validate()
        return g
    raise ValueError(f"unknown group spec {spec!r}")


# -- Cayley table files -------------------------------------------------------


def read_cayley_table(path: str | Path) -> np.ndarray:
    """Read the table file format: order line, then one row of indices per line."""
    lines = Path(path).read_text().split("\n")
    rows = [line for line in lines if line.strip()]
    if not rows:
        raise ValueError("empty table file")
    try:
        n = int(rows[0])
    except ValueError:
        raise ValueError(f"bad order line {rows[0]!r}") from None
    if n < 1 or len(rows) != n + 1:
        raise ValueError(f"expected {n} table rows, found {len(rows) - 1}")
    table = np.empty((n, n), dtype=np.int32)
    for i, line in enumerate(rows[1:]):
        parts = line.split()
        if len(parts) != n:
            raise ValueError(f"row {i} has {len(parts)} entries, expected {n}")
        try:
            table[i] = [int(x) for x in parts]
        except ValueError:
            raise ValueError(f"row {i} contains a non-integer entry") from None
    if table.min() < 0 or table.max() >= n:
        raise ValueError("table entries out of range")
    if (table[0] != np.arange(n)).any() or (table[:, 0] != np.arange(n)).any():
        raise ValueError("row/column 0 must be the identity permutation")
    return table


def write_cayley_table(path: str | Path, g: FiniteGroup) -> None:
    rows = [str(g.order)]
    table = g.table
    for i in range(g.order):
        rows.append(" ".join(str(int(x)) for x in table[i]))
    Path(path).write_text("\n".join(rows) + "\n")


# -- automorphisms ------------------------------------------------------------


class Automorphism:
    """A structure-preserving bijection on element indices."""

    __slots__ = ("group", "perm", "_key")

    def __init__(self, group: FiniteGroup, perm: np.ndarray):
        self.group = group
        self.perm = np.ascontiguousarray(np.asarray(perm, dtype=np.int32))
        self.perm.setflags(write=False)
        self._key = self.perm.tobytes()

    def __call__(self, g: int) -> int:
        return int(self.perm[g])

    def __eq__(self, other) -> bool:
        return isinstance(other, Automorphism) and self._key == other._key

    def __hash__(self) -> int:
        return hash(self._key)

    def compose(self, other: "Automorphism") -> "Automorphism":
        """self after other."""
        return Automorphism(self.group, self.perm[other.perm])

    def inverse(self) -> "Automorphism":
        inv = np.empty_like(self.perm)
        inv[self.perm] = np.arange(len(self.perm), dtype=np.int32)
        return Automorphism(self.group, inv)

    def is_valid(self) -> bool:
        """Full homomorphism-law check over all pairs."""
        t = self.group.table
        p = self.perm
        return bool(
            (p[0] == 0) and (sorted(p) == list(range(self.group.order)))
            and (p[t] == t[p[:, None], p[None, :]]).all()
        )

    def __repr__(self) -> str:
        return f"Automorphism({list(int(x) for x in self.perm)})"


def identity_automorphism(g: FiniteGroup) -> Automorphism:
    return Automorphism(g, np.arange(g.order, dtype=np.int32))


class AutSet:
    """An enumerated subgroup of Aut(G), canonically ordered.

    Elements are sorted by their permutation tables, which puts the identity
    automorphism first.  ``contains_inner`` is computed, never trusted.
    """

    def __init__(self, group: FiniteGroup, auts: Sequence[Automorphism], kind: str):
        unique = {a._key: a for a in auts}
        self.group = group
        self.auts = tuple(sorted(unique.values(), key=lambda a: tuple(a.perm)))
        self.kind = kind
        if not self.auts or (self.auts[0].perm != np.arange(group.order)).any():
            raise ValueError("an AutSet must contain the identity automorphism")
        self._index = {a._key: i for i, a in enumerate(self.auts)}

    def __len__(self) -> int:
        return len(self.auts)

    def __iter__(self) -> Iterator[Automorphism]:
        return iter(self.auts)

    def __getitem__(self, i: int) -> Automorphism:
        return self.auts[i]

    def __contains__(self, a: Automorphism) -> bool:
        return a._key in self._index

    def index_of(self, a: Automorphism) -> int:
        return self._index[a._key]

    @cached_property
    def tables(self) -> np.ndarray:
        return np.stack([a.perm for a in self.auts])

    @cached_property
    def contains_inner(self) -> bool:
        g = self.group
        t, inv = g.table, g.inv_table
        for x in range(g.order):
            if t[t[x], inv[x]].tobytes() not in self._index:
                return False
        return True

    def is_closed(self) -> bool:
        """Full closure check under composition and inverse."""
        for a in self.auts:
            if a.inverse() not in self:
                return False
            for b in self.auts:
                if a.compose(b) not in self:
                    return False
        return True

    def __repr__(self) -> str:
        return f"AutSet(kind={self.kind!r}, size={len(self)}, |G|={self.group.order})"


def identity_autset(g: FiniteGroup) -> AutSet:
    return AutSet(g, [identity_automorphism(g)], kind="identity-only")


def inner_automorphisms(g: FiniteGroup) -> AutSet:
    t, inv = g.table, g.inv_table
    auts = [
        Automorphism(g, t[t[x], inv[x]]) for x in range(g.order)
    ]  # conj(x): y -> x y x^-1
    return AutSet(g, auts, kind="inner")


def _closure(table: np.ndarray, seeds: Iterable[int]) -> tuple[int, ...]:
    """Subgroup generated by the seed elements (always contains 0)."""
    members = {0}
    frontier = sorted(set(int(s) for s in seeds) - members)
    members.update(frontier)
    while frontier:
        mem = np.fromiter(members, dtype=np.int64)
        fro = np.asarray(frontier, dtype=np.int64)
        prods = np.unique(
            np.concatenate([table[np.ix_(mem, fro)].ravel(), table[np.ix_(fro, mem)].ravel()])
        )
        frontier = [int(x) for x in prods if int(x) not in members]
        members.update(frontier)
    return tuple(sorted(members))


def greedy_generators(g: FiniteGroup) -> list[int]:
    """Generating set grown by always adding the element that enlarges the
    generated subgroup most (ties to the smallest index)."""
    table = g.table
    gens: list[int] = []
    current: set[int] = {0}
    while len(current) < g.order:
        best_gain, best_g, best_closure = -1, None, None
        for cand in range(g.order):
            if cand in current:
                continue
            closed = _closure(table, list(current) + [cand, *gens])
            if len(closed) > best_gain:
                best_gain, best_g, best_closure = len(closed), cand, closed
        gens.append(best_g)
        current = set(best_closure)
    return gens


def _hom_sweep(
    table_src: np.ndarray,
    table_dst: np.ndarray,
    phi: np.ndarray,
    dom: list[int],
    gens: list[int],
) -> bool:
    """Close phi over the subgroup generated by gens; False on conflict or
    non-injectivity.  phi maps src indices to dst indices, -1 for undefined."""
    i = 0
    while i < len(dom):
        x = dom[i]
        for s in gens:
            y = int(table_src[x, s])
            im = int(table_dst[phi[x], phi[s]])
            if phi[y] < 0:
                phi[y] = im
                dom.append(y)
            elif phi[y] != im:
                return False
        i += 1
    images = phi[dom]
    return len(set(int(v) for v in images)) == len(dom)


def _candidate_buckets(src: FiniteGroup, dst: FiniteGroup, gens: list[int]) -> list[list[int]]:
    src_orders, dst_orders = src.element_orders, dst.element_orders
    src_cls, dst_cls = src.class_size_of, dst.class_size_of
    buckets = []
    for gen in gens:
        key = (src_orders[gen], src_cls[gen])
        buckets.append(
            [
                h
                for h in range(dst.order)
                if (dst_orders[h], dst_cls[h]) == key
            ]
        )
    return buckets


def _search_homs(
    src: FiniteGroup,
    dst: FiniteGroup,
    *,
    find_all: bool,
    max_results: int,
) -> list[np.ndarray]:
    """Backtracking search for isomorphisms src -> dst via generator images."""
    if src.order == 1:
        return [np.zeros(1, dtype=np.int32)]
    gens = greedy_generators(src)
    buckets = _candidate_buckets(src, dst, gens)
    table_src, table_dst = src.table, dst.table
    results: list[np.ndarray] = []

    phi0 = np.full(src.order, -1, dtype=np.int32)
    phi0[0] = 0

    def dfs(level: int, phi: np.ndarray, dom: list[int]) -> bool:
        if level == len(gens):
            if len(dom) == src.order:
                results.append(phi.copy())
                if len(results) > max_results:
                    raise CapExceeded(
                        f"automorphism enumeration exceeds cap {max_results}"
                    )
                return not find_all
            return False
        gen = gens[level]
        for img in buckets[level]:
            nxt = phi.copy()
            if nxt[gen] >= 0:
                continue  # pragma: no cover - generators sit outside prior subgroup
            nxt[gen] = img
            nxt_dom = dom + [gen]
            if _hom_sweep(table_src, table_dst, nxt, nxt_dom, gens[: level + 1]):
                if dfs(level + 1, nxt, nxt_dom):
                    return True
        return False

    dfs(0, phi0, [0])
    return results


def automorphism_group(
    g: FiniteGroup,
    max_order: int = AUT_ORDER_CAP,
    max_size: int = AUTSET_SIZE_CAP,
) -> AutSet:
    """The full automorphism group, enumerated by generator-image backtracking."""
    if g.order > max_order:
        raise CapExceeded(f"automorphism search capped at order {max_order}")
    perms = _search_homs(g, g, find_all=True, max_results=max_size)
    return AutSet(g, [Automorphism(g, p) for p in perms], kind="full")


def is_isomorphic(
    g: FiniteGroup, h: FiniteGroup, max_order: int = ISO_ORDER_CAP
) -> tuple[bool, Optional[np.ndarray]]:
    """Isomorphism test with a witness map on success."""
    if g.order != h.order:
        return False, None
    if g.order > max_order:
        raise CapExceeded(f"isomorphism search capped at order {max_order}")
    profile = lambda k: sorted(zip(k.element_orders.tolist(), k.class_size_of.tolist()))
    if profile(g) != profile(h):
        return False, None
    found = _search_homs(g, h, find_all=False, max_results=2)
    if found:
        return True, found[0]
    return False, None


# -- subgroups and quotients ---------------------------------------------------


@dataclass
class SubgroupHandle:
    """A subgroup given by its sorted element indices plus structure flags."""

    group: FiniteGroup
    elements: tuple[int, ...]
    normal: Optional[bool] = None
    characteristic: Optional[bool] = None

    @property
    def order(self) -> int:
        return len(self.elements)

    @property
    def element_set(self) -> frozenset[int]:
        return frozenset(self.elements)

    def __contains__(self, g: int) -> bool:
        return g in self.element_set


def subgroup_handle(
    g: FiniteGroup,
    elements: Iterable[int],
    aut: Optional[AutSet] = None,
) -> SubgroupHandle:
    """Validate a set of indices as a subgroup; flags computed when possible."""
    elems = tuple(sorted(set(int(x) for x in elements)))
    if _closure(g.table, elems) != elems:
        raise ValueError("element set is not closed under the group operation")
    handle = SubgroupHandle(g, elems)
    handle.normal = _is_normal(g, elems)
    if aut is not None:
        handle.characteristic = _is_characteristic(elems, aut)
    return handle


def _is_normal(g: FiniteGroup, elems: tuple[int, ...]) -> bool:
    t, inv = g.table, g.inv_table
    members = np.zeros(g.order, dtype=bool)
    members[list(elems)] = True
    arr = np.asarray(elems, dtype=np.int64)
    for x in range(g.order):
        if not members[t[t[x, arr], inv[x]]].all():
            return False
    return True


def _is_characteristic(elems: tuple[int, ...], aut: AutSet) -> bool:
    members = np.zeros(aut.group.order, dtype=bool)
    members[list(elems)] = True
    arr = np.asarray(elems, dtype=np.int64)
    for a in aut:
        if not members[a.perm[arr]].all():
            return False
    return True


def subgroups(
    g: FiniteGroup,
    aut: Optional[AutSet] = None,
    max_order: int = SUBGROUP_ORDER_CAP,
) -> list[SubgroupHandle]:
    """All subgroups, each flagged normal and characteristic."""
    if g.order > max_order:
        raise CapExceeded(f"subgroup enumeration capped at order {max_order}")
    table = g.table
    found: dict[tuple[int, ...], None] = {(0,): None}
    worklist = [(0,)]
    for x in range(1, g.order):
        cyc = _closure(table, [x])
        if cyc not in found:
            found[cyc] = None
            worklist.append(cyc)
    while worklist:
        base = worklist.pop()
        base_set = set(base)
        for x in range(1, g.order):
            if x in base_set:
                continue
            bigger = _closure(table, base + (x,))
            if bigger not in found:
                found[bigger] = None
                worklist.append(bigger)
    if aut is None:
        aut = automorphism_group(g, max_order=max(AUT_ORDER_CAP, g.order))
    handles = []
    for elems in sorted(found, key=lambda e: (len(e), e)):
        handles.append(
            SubgroupHandle(
                g,
                elems,
                normal=_is_normal(g, elems),
                characteristic=_is_characteristic(elems, aut),
            )
        )
    return handles


@dataclass
class QuotientHandle:
    quotient: FiniteGroup
    projection: np.ndarray  # G index -> quotient index
    coset_reps: tuple[int, ...]


def quotient(g: FiniteGroup, n: SubgroupHandle) -> QuotientHandle:
    """Quotient group on minimal coset representatives."""
    if n.normal is None:
        n.normal = _is_normal(g, n.elements)
    if not n.normal:
        raise ValueError("subgroup is not normal; quotient undefined")
    t = g.table
    arr = np.asarray(n.elements, dtype=np.int64)
    proj = np.full(g.order, -1, dtype=np.int32)
    reps: list[int] = []
    for x in range(g.order):
        if proj[x] >= 0:
            continue
        idx = len(reps)
        proj[t[arr, x]] = idx  # coset N*x; x is its least member
        reps.append(x)
    qn = len(reps)
    reps_arr = np.asarray(reps, dtype=np.int64)
    qtable = proj[t[np.ix_(reps_arr, reps_arr)]]
    q = FiniteGroup(qn, table=qtable, spec=f"({g.spec})/<order {n.order}>")
    return QuotientHandle(quotient=q, projection=proj, coset_reps=tuple(reps))


def subgroup_group(g: FiniteGroup, n: SubgroupHandle) -> FiniteGroup:
    """The subgroup as a group in its own right, indexed by sorted elements."""
    arr = np.asarray(n.elements, dtype=np.int64)
    pos = np.full(g.order, -1, dtype=np.int32)
    pos[arr] = np.arange(len(arr), dtype=np.int32)
    table = pos[g.table[np.ix_(arr, arr)]]
    if (table < 0).any():
        raise ValueError("element set is not closed under the group operation")
    return FiniteGroup(len(arr), table=table, spec=f"<order {n.order} in {g.spec}>")


def _require_characteristic(g: FiniteGroup, n: SubgroupHandle) -> None:
    if n.characteristic is None:
        aut = automorphism_group(g, max_order=max(AUT_ORDER_CAP, g.order))
        n.characteristic = _is_characteristic(n.elements, aut)
    if not n.characteristic:
        raise ValueError("subgroup is not characteristic")


def induced_autset(g: FiniteGroup, n: SubgroupHandle, a: AutSet) -> AutSet:
    """Automorphisms of G/N induced by members of A."""
    _require_characteristic(g, n)
    qh = quotient(g, n)
    reps = np.asarray(qh.coset_reps, dtype=np.int64)
    perms = []
    for alpha in a:
        induced = qh.projection[alpha.perm[reps]]
        perms.append(induced)
    return AutSet(qh.quotient, [Automorphism(qh.quotient, p) for p in perms], kind="custom")


def restricted_autset(g: FiniteGroup, n: SubgroupHandle, a: AutSet) -> AutSet:
    """Restrictions of members of A to N, re-indexed to N's own numbering."""
    _require_characteristic(g, n)
    ngrp = subgroup_group(g, n)
    arr = np.asarray(n.elements, dtype=np.int64)
    pos = np.full(g.order, -1, dtype=np.int32)
    pos[arr] = np.arange(len(arr), dtype=np.int32)
    perms = []
    for alpha in a:
        restricted = pos[alpha.perm[arr]]
        if (restricted < 0).any():
            raise ValueError("an automorphism does not stabilize the subgroup")
        perms.append(restricted)
    return AutSet(ngrp, [Automorphism(ngrp, p) for p in perms], kind="custom")


# -- characteristic series and simple decomposition ----------------------------


@dataclass
class FactorDecomposition:
    factor: FiniteGroup
    simple: FiniteGroup
    copies: int


@dataclass
class CharSeries:
    group: FiniteGroup
    chain: list[SubgroupHandle]
    factors: list[FactorDecomposition]


def characteristic_series(
    g: FiniteGroup,
    aut: Optional[AutSet] = None,
    max_order: int = SUBGROUP_ORDER_CAP,
) -> CharSeries:
    """A maximal chain of characteristic subgroups with decomposed factors.

    The chain is made deterministic by always taking the lexicographically
    smallest eligible next subgroup; only the factor multiset is meaningful.
    """
    if aut is None:
        aut = automorphism_group(g, max_order=max(AUT_ORDER_CAP, g.order))
    subs = subgroups(g, aut=aut, max_order=max_order)
    char_subs = [s for s in subs if s.characteristic]
    chain = [next(s for s in char_subs if s.order == 1)]
    while chain[-1].order < g.order:
        cur = chain[-1].element_set
        above = [s for s in char_subs if cur < s.element_set]
        minimal = [
            s
            for s in above
            if not any(
                cur < t.element_set < s.element_set for t in above if t is not s
            )
        ]
        chain.append(min(minimal, key=lambda s: s.elements))
    factors = []
    for lower, upper in zip(chain, chain[1:]):
        hgrp = subgroup_group(g, upper)
        pos = {gidx: i for i, gidx in enumerate(upper.elements)}
        inner = subgroup_handle(hgrp, [pos[x] for x in lower.elements])
        f = quotient(hgrp, inner).quotient
        simple, copies = decompose_char_simple(f)
        factors.append(FactorDecomposition(factor=f, simple=simple, copies=copies))
    return CharSeries(group=g, chain=chain, factors=factors)


def _normal_closure(g: FiniteGroup, seed_class: tuple[int, ...]) -> tuple[int, ...]:
    """Smallest normal subgroup containing a conjugacy class: closure suffices
    because the generating set is conjugation-stable."""
    return _closure(g.table, seed_class)


def minimal_normal_subgroups(g: FiniteGroup) -> list[tuple[int, ...]]:
    closures = {
        _normal_closure(g, cls)
        for cls in g.conjugacy_classes
        if cls != (0,)
    }
    return sorted(
        (c for c in closures if not any(set(o) < set(c) for o in closures)),
        key=lambda c: (len(c), c),
    )


def is_simple(g: FiniteGroup) -> bool:
    if g.order == 1:
        return False
    return all(
        _normal_closure(g, cls) == tuple(range(g.order))
        for cls in g.conjugacy_classes
        if cls != (0,)
    )


def decompose_char_simple(f: FiniteGroup) -> tuple[FiniteGroup, int]:
    """Write a characteristically simple group as (simple S, n) with F = S^n."""
    if f.order == 1:
        raise ValueError("the trivial group has no simple decomposition")
    minimal = minimal_normal_subgroups(f)[0]
    s = subgroup_group(f, SubgroupHandle(f, minimal))
    if not is_simple(s):
        raise ValueError(f"{f.spec or 'group'} is not characteristically simple")
    n = 0
    rest = f.order
    while rest % s.order == 0 and rest > 1:
        rest //= s.order
        n += 1
    if rest != 1:
        raise ValueError(f"{f.spec or 'group'} is not characteristically simple")
    ok, _ = is_isomorphic(f, power_group(s, n))
    if not ok:
        raise ValueError(f"{f.spec or 'group'} is not characteristically simple")
    return s, n


# -- wreath-type automorphisms of direct powers --------------------------------


def _power_decode(order_s: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Coordinate matrix (|S|^n, n) and radix weights for the power encoding."""
    total = order_s**n
    weights = np.array([order_s ** (n - 1 - i) for i in range(n)], dtype=np.int64)
    idx = np.arange(total, dtype=np.int64)
    coords = (idx[:, None] // weights[None, :]) % order_s
    return coords, weights


def wreath_element_perm(
    s_order: int,
    n: int,
    aut_tables: Sequence[np.ndarray],
    sigma: Sequence[int],
    coords: Optional[np.ndarray] = None,
    weights: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Permutation of S^n indices for (a_1 x ... x a_n) after the coordinate
    permutation sigma (output coordinate i reads input coordinate sigma^-1(i))."""
    if coords is None or weights is None:
        coords, weights = _power_decode(s_order, n)
    sigma = list(sigma)
    sigma_inv = [0] * n
    for i, v in enumerate(sigma):
        sigma_inv[v] = i
    out = np.zeros(coords.shape[0], dtype=np.int64)
    for i in range(n):
        out += np.asarray(aut_tables[i], dtype=np.int64)[coords[:, sigma_inv[i]]] * weights[i]
    return out.astype(np.int32)


def wreath_autset(
    s: FiniteGroup,
    n: int,
    base: AutSet,
    *,
    power: Optional[FiniteGroup] = None,
    max_size: int = AUTSET_SIZE_CAP,
) -> AutSet:
    """All automorphisms (a_1 x ... x a_n) o sigma of S^n with a_i from base."""
    import math

    size = len(base) ** n * math.factorial(n)
    if size > max_size:
        raise CapExceeded(
            f"wreath enumeration of size {size} exceeds cap {max_size}; "
            "use WreathSampler for sampling access"
        )
    t = power if power is not None else power_group(s, n)
    coords, weights = _power_decode(s.order, n)
    auts = []
    for sigma in itertools.permutations(range(n)):
        for combo in itertools.product(range(len(base)), repeat=n):
            perm = wreath_element_perm(
                s.order,
                n,
                [base[i].perm for i in combo],
                sigma,
                coords,
                weights,
            )
            auts.append(Automorphism(t, perm))
    return AutSet(t, auts, kind="custom")


class WreathSampler:
    """Sampling access to Aut(S) wr Sym_n acting on S^n, without enumeration."""

    def __init__(self, s: FiniteGroup, n: int, base: AutSet, power: Optional[FiniteGroup] = None):
        import math

        self.s = s
        self.n = n
        self.base = base
        self.power = power if power is not None else power_group(s, n)
        self.size = len(base) ** n * math.factorial(n)
        self._coords, self._weights = _power_decode(s.order, n)

    def identity(self) -> Automorphism:
        return identity_automorphism(self.power)

    def from_parts(self, base_indices: Sequence[int], sigma: Sequence[int]) -> Automorphism:
        perm = wreath_element_perm(
            self.s.order,
            self.n,
            [self.base[int(i)].perm for i in base_indices],
            sigma,
            self._coords,
            self._weights,
        )
        return Automorphism(self.power, perm)

    def sample(self, rng: np.random.Generator) -> Automorphism:
        base_indices = rng.integers(0, len(self.base), size=self.n)
        sigma = rng.permutation(self.n)
        return self.from_parts(base_indices, sigma)


# -- solvable radical -----------------------------------------------------------


def derived_subgroup(g: FiniteGroup, elems: tuple[int, ...]) -> tuple[int, ...]:
    t, inv = g.table, g.inv_table
    arr = np.asarray(elems, dtype=np.int64)
    a = arr[:, None]
    b = arr[None, :]
    comm = t[t[t[a, b], inv[a]], inv[b]]  # a b a^-1 b^-1
    return _closure(t, np.unique(comm))


def is_solvable_subset(g: FiniteGroup, elems: tuple[int, ...]) -> bool:
    cur = elems
    while True:
        nxt = derived_subgroup(g, cur)
        if nxt == cur:
            return cur == (0,)
        cur = nxt


def solvable_radical(g: FiniteGroup, max_order: int = RADICAL_ORDER_CAP) -> SubgroupHandle:
    """Largest solvable normal subgroup, as the join of solvable class closures."""
    if g.order > max_order:
        raise CapExceeded(f"solvable radical capped at order {max_order}")
    seeds: set[int] = {0}
    for cls in g.conjugacy_classes:
        if cls == (0,):
            continue
        closure = _normal_closure(g, cls)
        if is_solvable_subset(g, closure):
            seeds.update(closure)
    elems = _closure(g.table, seeds)
    return SubgroupHandle(g, elems, normal=True, characteristic=True)
