"""Finite automata and transducers over an interned location alphabet.

This module is the kernel the rest of the checker is built on.  Path sets
(languages of location sequences) are represented as finite-state acceptors
(`Fsa`), path relations as two-tape finite-state transducers (`Fst`).  Both
are immutable once constructed; every operation returns a fresh machine.

Symbols are interned through a `SymbolTable`.  Three kinds exist:

* ``location`` -- a network location at the active granularity,
* ``drop``     -- the single reserved symbol marking dropped traffic,
* ``marker``   -- fresh symbols introduced by the spec compiler; they may
  appear on transducer output tapes but never count as part of the
  location universe (complements are always taken relative to
  locations + drop).

Epsilon is not a `Symbol`; transition labels use ``None`` for it.
"""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

EPSILON = None  # transition-label value for the empty move

LOCATION = "location"
DROP = "drop"
MARKER = "marker"


class AlphabetError(ValueError):
    """Raised when a symbol is used outside its declared universe."""


class Symbol:
    """An interned alphabet symbol.  Identity is the integer id."""

    __slots__ = ("id", "name", "kind")

    def __init__(self, sid: int, name: str, kind: str):
        self.id = sid
        self.name = name
        self.kind = kind

    def __repr__(self) -> str:
        return f"Symbol({self.id}, {self.name!r}, {self.kind!r})"

    def __str__(self) -> str:
        return self.name

    def __hash__(self) -> int:
        return self.id

    def __eq__(self, other: object) -> bool:
        return (isinstance(other, Symbol) and other.id == self.id
                and other.name == self.name)

    def __lt__(self, other: "Symbol") -> bool:
        return self.id < other.id

    def __reduce__(self):
        return (Symbol, (self.id, self.name, self.kind))


class SymbolTable:
    """Interns symbols for one run.

    The drop symbol is pre-interned with id 0.  Location ids follow in
    interning order, so callers that want stable ids across runs should
    intern locations in sorted order.  Markers are allocated last, during
    spec compilation.
    """

    def __init__(self):
        self._by_name: dict[str, Symbol] = {}
        self._symbols: list[Symbol] = []
        self.drop = self._intern("drop", DROP)
        self._marker_count = 0

    def _intern(self, name: str, kind: str) -> Symbol:
        sym = Symbol(len(self._symbols), name, kind)
        self._by_name[name] = sym
        self._symbols.append(sym)
        return sym

    def location(self, name: str) -> Symbol:
        """Intern (or fetch) the location symbol called `name`."""
        sym = self._by_name.get(name)
        if sym is not None:
            if sym.kind not in (LOCATION, DROP):
                raise AlphabetError(f"name {name!r} is not a location")
            return sym
        return self._intern(name, LOCATION)

    def fresh_marker(self) -> Symbol:
        self._marker_count += 1
        return self._intern(f"#{self._marker_count}", MARKER)

    def get(self, name: str) -> Optional[Symbol]:
        return self._by_name.get(name)

    def by_id(self, sid: int) -> Symbol:
        return self._symbols[sid]

    def universe(self) -> frozenset[Symbol]:
        """All location symbols plus drop; markers excluded."""
        return frozenset(s for s in self._symbols if s.kind in (LOCATION, DROP))

    def __len__(self) -> int:
        return len(self._symbols)

    def __iter__(self) -> Iterator[Symbol]:
        return iter(self._symbols)


Label = Optional[Symbol]  # None is epsilon
PairLabel = tuple[Label, Label]


@dataclass(frozen=True)
class PathList:
    """A finite, canonically ordered listing drawn from a path language.

    Paths are ordered shortest first, ties broken by symbol ids.  If
    `truncated` is true the source language contains strings beyond those
    listed.
    """

    paths: tuple[tuple[Symbol, ...], ...]
    truncated: bool = False

    def render(self) -> list[str]:
        return [" ".join(s.name for s in p) for p in self.paths]

    def __iter__(self):
        return iter(self.paths)

    def __len__(self):
        return len(self.paths)


class Fsa:
    """A finite-state acceptor.  Treat instances as immutable.

    `arcs[q]` is a tuple of ``(label, target)`` pairs where label is a
    `Symbol` or ``None`` for epsilon.  `deterministic` promises there are
    no epsilon arcs and at most one arc per (state, symbol).

    The two trailing slots memoize derived views (the determinized twin
    and per-state transition maps); they are dropped on pickling and do
    not affect the accepted language.
    """

    __slots__ = ("alphabet", "num_states", "initial", "accepting", "arcs",
                 "deterministic", "_dfa", "_maps")

    def __init__(self, alphabet: frozenset[Symbol], num_states: int,
                 initial: int, accepting: frozenset[int],
                 arcs: tuple[tuple[tuple[Label, int], ...], ...],
                 deterministic: bool = False):
        if not (0 <= initial < num_states):
            raise ValueError("initial state out of range")
        if len(arcs) != num_states:
            raise ValueError("arc table does not match state count")
        self.alphabet = alphabet
        self.num_states = num_states
        self.initial = initial
        self.accepting = accepting
        self.arcs = arcs
        self.deterministic = deterministic
        self._dfa = None
        self._maps = None

    def __getstate__(self):
        return (self.alphabet, self.num_states, self.initial,
                self.accepting, self.arcs, self.deterministic)

    def __setstate__(self, state):
        self.__init__(*state)

    def __repr__(self) -> str:
        return (f"<Fsa {self.num_states} states, "
                f"{sum(len(a) for a in self.arcs)} arcs, "
                f"{'det' if self.deterministic else 'nondet'}>")


class Fst:
    """A two-tape finite-state transducer.  Treat instances as immutable.

    `arcs[q]` holds ``((in_label, out_label), target)`` entries; either
    tape label may be ``None`` for epsilon.
    """

    __slots__ = ("in_alphabet", "out_alphabet", "num_states", "initial",
                 "accepting", "arcs")

    def __init__(self, in_alphabet: frozenset[Symbol],
                 out_alphabet: frozenset[Symbol], num_states: int,
                 initial: int, accepting: frozenset[int],
                 arcs: tuple[tuple[tuple[PairLabel, int], ...], ...]):
        if not (0 <= initial < num_states):
            raise ValueError("initial state out of range")
        if len(arcs) != num_states:
            raise ValueError("arc table does not match state count")
        self.in_alphabet = in_alphabet
        self.out_alphabet = out_alphabet
        self.num_states = num_states
        self.initial = initial
        self.accepting = accepting
        self.arcs = arcs

    def __repr__(self) -> str:
        return (f"<Fst {self.num_states} states, "
                f"{sum(len(a) for a in self.arcs)} arcs>")


class _Builder:
    """Mutable accumulator used internally to assemble machines."""

    def __init__(self):
        self.arcs: list[list] = []

    def state(self) -> int:
        self.arcs.append([])
        return len(self.arcs) - 1

    def arc(self, src: int, label, dst: int) -> None:
        self.arcs[src].append((label, dst))

    def frozen_arcs(self) -> tuple:
        return tuple(tuple(a) for a in self.arcs)


# ---------------------------------------------------------------------------
# Acceptor constructors


def fsa_empty(universe: frozenset[Symbol]) -> Fsa:
    """The empty language over `universe`."""
    return Fsa(universe, 1, 0, frozenset(), ((),), deterministic=True)


def fsa_unit(universe: frozenset[Symbol]) -> Fsa:
    """The language containing only the empty path."""
    return Fsa(universe, 1, 0, frozenset([0]), ((),), deterministic=True)


def fsa_symbol(sym: Symbol, universe: frozenset[Symbol]) -> Fsa:
    """The single-string language {sym}."""
    if sym not in universe and sym.kind != MARKER:
        raise AlphabetError(f"symbol {sym.name!r} is outside the universe")
    alphabet = universe if sym in universe else universe | {sym}
    return Fsa(alphabet, 2, 0, frozenset([1]), (((sym, 1),), ()),
               deterministic=True)


def fsa_symbol_class(symbols, universe: frozenset[Symbol]) -> Fsa:
    """The length-one strings over a set of symbols, as one flat machine.

    Equivalent to a union of `fsa_symbol` machines but deterministic and
    two states regardless of the class width.
    """
    ordered = sorted(symbols, key=lambda s: s.id)
    alphabet = universe
    for sym in ordered:
        if sym not in universe:
            if sym.kind != MARKER:
                raise AlphabetError(
                    f"symbol {sym.name!r} is outside the universe")
            alphabet = alphabet | {sym}
    return Fsa(alphabet, 2, 0, frozenset([1]),
               (tuple((sym, 1) for sym in ordered), ()),
               deterministic=True)


def fsa_union(x: Fsa, y: Fsa) -> Fsa:
    b = _Builder()
    start = b.state()
    off_x = _copy_into(b, x)
    off_y = _copy_into(b, y)
    b.arc(start, EPSILON, x.initial + off_x)
    b.arc(start, EPSILON, y.initial + off_y)
    accepting = frozenset(q + off_x for q in x.accepting) | \
        frozenset(q + off_y for q in y.accepting)
    return Fsa(x.alphabet | y.alphabet, len(b.arcs), start, accepting,
               b.frozen_arcs())


def fsa_concat(x: Fsa, y: Fsa) -> Fsa:
    b = _Builder()
    off_x = _copy_into(b, x)
    off_y = _copy_into(b, y)
    for q in sorted(x.accepting):
        b.arc(q + off_x, EPSILON, y.initial + off_y)
    accepting = frozenset(q + off_y for q in y.accepting)
    return Fsa(x.alphabet | y.alphabet, len(b.arcs), x.initial + off_x,
               accepting, b.frozen_arcs())


def fsa_star(x: Fsa) -> Fsa:
    b = _Builder()
    start = b.state()
    off = _copy_into(b, x)
    b.arc(start, EPSILON, x.initial + off)
    for q in sorted(x.accepting):
        b.arc(q + off, EPSILON, start)
    return Fsa(x.alphabet, len(b.arcs), start, frozenset([start]),
               b.frozen_arcs())


def _copy_into(b: _Builder, m) -> int:
    """Copy a machine's states and arcs into builder `b`; return the offset."""
    offset = len(b.arcs)
    for _ in range(m.num_states):
        b.state()
    for q in range(m.num_states):
        for label, dst in m.arcs[q]:
            b.arc(q + offset, label, dst + offset)
    return offset


# ---------------------------------------------------------------------------
# Core transformations


def _epsilon_closures(fsa: Fsa) -> list[tuple[int, ...]]:
    """Per-state epsilon closure as a sorted tuple of state ids."""
    closures: list[tuple[int, ...]] = []
    for q in range(fsa.num_states):
        seen = {q}
        stack = [q]
        while stack:
            s = stack.pop()
            for label, dst in fsa.arcs[s]:
                if label is EPSILON and dst not in seen:
                    seen.add(dst)
                    stack.append(dst)
        closures.append(tuple(sorted(seen)))
    return closures


def determinize(fsa: Fsa) -> Fsa:
    """Subset construction; the result has a partial transition function.

    The result is memoized on the input machine, so repeated product
    constructions against a shared operand pay for one determinization.
    """
    if fsa.deterministic:
        return fsa
    if fsa._dfa is not None:
        return fsa._dfa
    closures = _epsilon_closures(fsa)
    start = closures[fsa.initial]
    index: dict[tuple[int, ...], int] = {start: 0}
    order: list[tuple[int, ...]] = [start]
    b = _Builder()
    b.state()
    accepting = set()
    work = deque([start])
    acc = fsa.accepting
    while work:
        subset = work.popleft()
        sid = index[subset]
        if any(q in acc for q in subset):
            accepting.add(sid)
        # Group member arcs by symbol; dict preserves first-seen order, so
        # re-sort by symbol id to keep state numbering input-independent.
        by_sym: dict[Symbol, set[int]] = {}
        for q in subset:
            for label, dst in fsa.arcs[q]:
                if label is not EPSILON:
                    by_sym.setdefault(label, set()).update(closures[dst])
        for sym in sorted(by_sym, key=lambda s: s.id):
            target = tuple(sorted(by_sym[sym]))
            tid = index.get(target)
            if tid is None:
                tid = len(order)
                index[target] = tid
                order.append(target)
                b.state()
                work.append(target)
            b.arc(sid, sym, tid)
    d = Fsa(fsa.alphabet, len(b.arcs), 0, frozenset(accepting),
            b.frozen_arcs(), deterministic=True)
    fsa._dfa = d
    return d


def _state_maps(dfa: Fsa) -> list[dict]:
    """Per-state symbol-to-target maps of a deterministic machine, memoized."""
    maps = dfa._maps
    if maps is None:
        maps = [dict(state_arcs) for state_arcs in dfa.arcs]
        dfa._maps = maps
    return maps


def trim(fsa: Fsa) -> Fsa:
    """Drop states that are unreachable or cannot reach acceptance."""
    forward = {fsa.initial}
    stack = [fsa.initial]
    while stack:
        q = stack.pop()
        for _, dst in fsa.arcs[q]:
            if dst not in forward:
                forward.add(dst)
                stack.append(dst)
    rev: list[list[int]] = [[] for _ in range(fsa.num_states)]
    for q in range(fsa.num_states):
        for _, dst in fsa.arcs[q]:
            rev[dst].append(q)
    backward = set(fsa.accepting)
    stack = [q for q in fsa.accepting]
    while stack:
        q = stack.pop()
        for src in rev[q]:
            if src not in backward:
                backward.add(src)
                stack.append(src)
    live = forward & backward
    if fsa.initial not in live:
        return fsa_empty(fsa.alphabet)
    remap = {}
    for q in range(fsa.num_states):
        if q in live:
            remap[q] = len(remap)
    b = _Builder()
    for _ in remap:
        b.state()
    for q, nq in remap.items():
        for label, dst in fsa.arcs[q]:
            if dst in live:
                b.arc(nq, label, remap[dst])
    accepting = frozenset(remap[q] for q in fsa.accepting if q in live)
    return Fsa(fsa.alphabet, len(b.arcs), remap[fsa.initial], accepting,
               b.frozen_arcs(), deterministic=fsa.deterministic)


def minimize(fsa: Fsa) -> Fsa:
    """Language-preserving state minimization (partition refinement).

    Determinizes and trims first; on the trimmed partial DFA a missing
    arc genuinely means "no acceptance this way", so refining on arc
    signatures alone is sound.
    """
    d = trim(determinize(fsa))
    if not d.accepting:
        return d
    cls = [1 if q in d.accepting else 0 for q in range(d.num_states)]
    ncls = len(set(cls))
    while True:
        sigs: dict[tuple, int] = {}
        new_cls = [0] * d.num_states
        for q in range(d.num_states):
            sig = (cls[q],
                   tuple(sorted((label.id, cls[dst])
                                for label, dst in d.arcs[q])))
            nid = sigs.setdefault(sig, len(sigs))
            new_cls[q] = nid
        stable = len(sigs) == ncls
        cls, ncls = new_cls, len(sigs)
        if stable:
            break
    b = _Builder()
    for _ in range(ncls):
        b.state()
    seen = set()
    for q in range(d.num_states):
        c = cls[q]
        if c in seen:
            continue
        seen.add(c)
        for label, dst in d.arcs[q]:
            b.arc(c, label, cls[dst])
    accepting = frozenset(cls[q] for q in d.accepting)
    return Fsa(d.alphabet, ncls, cls[d.initial], accepting, b.frozen_arcs(),
               deterministic=True)


def complement(fsa: Fsa, universe: frozenset[Symbol]) -> Fsa:
    """The language universe* minus L(fsa).

    Strings containing symbols outside `universe` (markers, say) are not
    members of universe*, so they never appear in the complement; arcs
    carrying such symbols are discarded before completing the machine.
    """
    d = minimize(fsa)
    syms = sorted(universe, key=lambda s: s.id)
    b = _Builder()
    for _ in range(d.num_states):
        b.state()
    sink = b.state()
    for q in range(d.num_states):
        have = set()
        for label, dst in d.arcs[q]:
            if label in universe:
                b.arc(q, label, dst)
                have.add(label)
        for sym in syms:
            if sym not in have:
                b.arc(q, sym, sink)
    for sym in syms:
        b.arc(sink, sym, sink)
    accepting = frozenset(q for q in range(d.num_states + 1)
                          if q not in d.accepting)
    return Fsa(universe | d.alphabet, d.num_states + 1, d.initial, accepting,
               b.frozen_arcs(), deterministic=True)


def fsa_intersect(x: Fsa, y: Fsa) -> Fsa:
    """Product construction on the determinized operands.

    Each product state scans whichever operand has the smaller fan-out
    and looks the labels up in the other side's transition map, so
    intersecting against a complete machine over a wide alphabet stays
    proportional to the smaller machine.
    """
    dx, dy = determinize(x), determinize(y)
    xmaps, ymaps = _state_maps(dx), _state_maps(dy)
    index = {(dx.initial, dy.initial): 0}
    b = _Builder()
    b.state()
    work = deque([(dx.initial, dy.initial)])
    accepting = set()
    while work:
        qx, qy = pair = work.popleft()
        sid = index[pair]
        if qx in dx.accepting and qy in dy.accepting:
            accepting.add(sid)
        xarcs, yarcs = dx.arcs[qx], dy.arcs[qy]
        if len(xarcs) <= len(yarcs):
            ymap = ymaps[qy]
            matched = ((label, dst_x, ymap.get(label))
                       for label, dst_x in xarcs)
        else:
            xmap = xmaps[qx]
            matched = ((label, xmap.get(label), dst_y)
                       for label, dst_y in yarcs)
        for label, dst_x, dst_y in matched:
            if dst_x is None or dst_y is None:
                continue
            target = (dst_x, dst_y)
            tid = index.get(target)
            if tid is None:
                tid = len(index)
                index[target] = tid
                b.state()
                work.append(target)
            b.arc(sid, label, tid)
    return Fsa(x.alphabet | y.alphabet, len(b.arcs), 0, frozenset(accepting),
               b.frozen_arcs(), deterministic=True)


_DEAD = -1


def fsa_difference(x: Fsa, y: Fsa) -> Fsa:
    """L(x) minus L(y): the product of x with the complement of y.

    The complement is kept implicit: a missing y-transition is treated as
    the (rejecting) dead state, so the machine never materializes a full
    transition table over the alphabet.
    """
    dx, dy = determinize(x), determinize(y)
    ymaps = _state_maps(dy)
    index = {(dx.initial, dy.initial): 0}
    b = _Builder()
    b.state()
    work = deque([(dx.initial, dy.initial)])
    accepting = set()
    while work:
        qx, qy = pair = work.popleft()
        sid = index[pair]
        if qx in dx.accepting and (qy == _DEAD or qy not in dy.accepting):
            accepting.add(sid)
        ymap = {} if qy == _DEAD else ymaps[qy]
        for label, dst_x in dx.arcs[qx]:
            target = (dst_x, ymap.get(label, _DEAD))
            tid = index.get(target)
            if tid is None:
                tid = len(index)
                index[target] = tid
                b.state()
                work.append(target)
            b.arc(sid, label, tid)
    return Fsa(x.alphabet | y.alphabet, len(b.arcs), 0, frozenset(accepting),
               b.frozen_arcs(), deterministic=True)


def is_empty(fsa: Fsa) -> bool:
    """True when the language is empty (no accepting state reachable)."""
    seen = {fsa.initial}
    stack = [fsa.initial]
    while stack:
        q = stack.pop()
        if q in fsa.accepting:
            return False
        for _, dst in fsa.arcs[q]:
            if dst not in seen:
                seen.add(dst)
                stack.append(dst)
    return True


def fsa_equivalent(x: Fsa, y: Fsa) -> bool:
    """Language equality, decided by emptiness of both directed differences.

    Runs as one synchronized product walk over the determinized machines
    (missing transitions stand for the dead state); any state where the
    acceptance bits disagree witnesses one of the two differences.
    """
    dx, dy = determinize(x), determinize(y)
    xmaps, ymaps = _state_maps(dx), _state_maps(dy)
    start = (dx.initial, dy.initial)
    seen = {start}
    work = deque([start])
    while work:
        qx, qy = work.popleft()
        ax = qx != _DEAD and qx in dx.accepting
        ay = qy != _DEAD and qy in dy.accepting
        if ax != ay:
            return False
        xmap = {} if qx == _DEAD else xmaps[qx]
        ymap = {} if qy == _DEAD else ymaps[qy]
        for label in sorted(set(xmap) | set(ymap), key=lambda s: s.id):
            target = (xmap.get(label, _DEAD), ymap.get(label, _DEAD))
            if target not in seen:
                seen.add(target)
                work.append(target)
    return True


def accepts(fsa: Fsa, path: Sequence[Symbol]) -> bool:
    """Membership test by direct NFA simulation."""
    closures = _epsilon_closures(fsa)
    current = set(closures[fsa.initial])
    for sym in path:
        nxt: set[int] = set()
        for q in current:
            for label, dst in fsa.arcs[q]:
                if label is not EPSILON and label == sym:
                    nxt.update(closures[dst])
        if not nxt:
            return False
        current = nxt
    return any(q in fsa.accepting for q in current)


def enumerate_shortest(fsa: Fsa, limit: int) -> PathList:
    """List up to `limit` members, shortest first, ties by symbol id.

    The machine is determinized and trimmed first, so every queued prefix
    extends to at least one member; after `limit` members are collected a
    non-empty queue therefore proves the language holds more.
    """
    d = trim(determinize(fsa))
    if not d.accepting:
        return PathList((), False)
    out: list[tuple[Symbol, ...]] = []
    # Heap entries carry the id tuple for ordering and the symbol tuple
    # for output; in a DFA every entry is a distinct string.
    heap: list[tuple[int, tuple[int, ...], tuple[Symbol, ...], int]] = \
        [(0, (), (), d.initial)]
    while heap and len(out) < limit:
        length, ids, path, q = heapq.heappop(heap)
        if q in d.accepting:
            out.append(path)
        for label, dst in d.arcs[q]:
            heapq.heappush(
                heap, (length + 1, ids + (label.id,), path + (label,), dst))
    return PathList(tuple(out), bool(heap) and len(out) >= limit)


def build_fsa(expr, universe: frozenset[Symbol]) -> Fsa:
    """Build an acceptor from a regular constructor tree.

    Trees are nested tuples: ``("sym", a)``, ``("empty",)``, ``("unit",)``,
    ``("union", x, y)``, ``("concat", x, y)``, ``("star", x)``,
    ``("intersect", x, y)``, ``("complement", x)``.
    """
    op = expr[0]
    if op == "sym":
        return fsa_symbol(expr[1], universe)
    if op == "empty":
        return fsa_empty(universe)
    if op == "unit":
        return fsa_unit(universe)
    if op == "union":
        return fsa_union(build_fsa(expr[1], universe), build_fsa(expr[2], universe))
    if op == "concat":
        return fsa_concat(build_fsa(expr[1], universe), build_fsa(expr[2], universe))
    if op == "star":
        return fsa_star(build_fsa(expr[1], universe))
    if op == "intersect":
        return fsa_intersect(build_fsa(expr[1], universe), build_fsa(expr[2], universe))
    if op == "complement":
        return complement(build_fsa(expr[1], universe), universe)
    raise ValueError(f"unknown constructor {op!r}")


def substitute(fsa: Fsa, mapping: dict) -> Fsa:
    """Replace each arc reading a mapped symbol with that symbol's language.

    `mapping` sends a Symbol to an Fsa; an arc labeled with a mapped
    symbol is rewired through a private copy of that machine.  Arcs on
    unmapped symbols are kept as they are.
    """
    if not mapping:
        return fsa
    b = _Builder()
    for _ in range(fsa.num_states):
        b.state()
    for q in range(fsa.num_states):
        for label, dst in fsa.arcs[q]:
            if label is not None and label in mapping:
                inner = mapping[label]
                off = _copy_into(b, inner)
                b.arc(q, EPSILON, inner.initial + off)
                for acc in sorted(inner.accepting):
                    b.arc(acc + off, EPSILON, dst)
            else:
                b.arc(q, label, dst)
    alphabet = fsa.alphabet - frozenset(mapping)
    for inner in mapping.values():
        alphabet = alphabet | inner.alphabet
    return Fsa(alphabet, len(b.arcs), fsa.initial,
               frozenset(fsa.accepting), b.frozen_arcs())


# ---------------------------------------------------------------------------
# Transducers


def fst_empty() -> Fst:
    """The empty relation."""
    return Fst(frozenset(), frozenset(), 1, 0, frozenset(), ((),))


def fst_unit() -> Fst:
    """The relation containing only the pair of empty paths."""
    return Fst(frozenset(), frozenset(), 1, 0, frozenset([0]), ((),))


def fst_identity(p: Fsa) -> Fst:
    """The identity relation restricted to L(p)."""
    arcs = tuple(
        tuple(((label, label), dst) for label, dst in state_arcs)
        for state_arcs in p.arcs)
    return Fst(p.alphabet, p.alphabet, p.num_states, p.initial, p.accepting,
               arcs)


def fst_cross(p1: Fsa, p2: Fsa) -> Fst:
    """The full relation L(p1) x L(p2), linear in the operand sizes.

    Reads any member of p1 while writing nothing, then writes any member
    of p2 while reading nothing.
    """
    b = _Builder()
    off1 = _copy_into_fst(b, p1, "in")
    off2 = _copy_into_fst(b, p2, "out")
    for q in sorted(p1.accepting):
        b.arc(q + off1, (EPSILON, EPSILON), p2.initial + off2)
    accepting = frozenset(q + off2 for q in p2.accepting)
    return Fst(p1.alphabet, p2.alphabet, len(b.arcs), p1.initial + off1,
               accepting, b.frozen_arcs())


def _copy_into_fst(b: _Builder, p: Fsa, tape: str) -> int:
    offset = len(b.arcs)
    for _ in range(p.num_states):
        b.state()
    for q in range(p.num_states):
        for label, dst in p.arcs[q]:
            pair = (label, EPSILON) if tape == "in" else (EPSILON, label)
            b.arc(q + offset, pair, dst + offset)
    return offset


def _copy_fst_into(b: _Builder, t: Fst) -> int:
    offset = len(b.arcs)
    for _ in range(t.num_states):
        b.state()
    for q in range(t.num_states):
        for pair, dst in t.arcs[q]:
            b.arc(q + offset, pair, dst + offset)
    return offset


def fst_union(x: Fst, y: Fst) -> Fst:
    b = _Builder()
    start = b.state()
    off_x = _copy_fst_into(b, x)
    off_y = _copy_fst_into(b, y)
    b.arc(start, (EPSILON, EPSILON), x.initial + off_x)
    b.arc(start, (EPSILON, EPSILON), y.initial + off_y)
    accepting = frozenset(q + off_x for q in x.accepting) | \
        frozenset(q + off_y for q in y.accepting)
    return Fst(x.in_alphabet | y.in_alphabet,
               x.out_alphabet | y.out_alphabet,
               len(b.arcs), start, accepting, b.frozen_arcs())


def fst_concat(x: Fst, y: Fst) -> Fst:
    b = _Builder()
    off_x = _copy_fst_into(b, x)
    off_y = _copy_fst_into(b, y)
    for q in sorted(x.accepting):
        b.arc(q + off_x, (EPSILON, EPSILON), y.initial + off_y)
    accepting = frozenset(q + off_y for q in y.accepting)
    return Fst(x.in_alphabet | y.in_alphabet,
               x.out_alphabet | y.out_alphabet,
               len(b.arcs), x.initial + off_x, accepting, b.frozen_arcs())


def fst_star(x: Fst) -> Fst:
    b = _Builder()
    start = b.state()
    off = _copy_fst_into(b, x)
    b.arc(start, (EPSILON, EPSILON), x.initial + off)
    for q in sorted(x.accepting):
        b.arc(q + off, (EPSILON, EPSILON), start)
    return Fst(x.in_alphabet, x.out_alphabet, len(b.arcs), start,
               frozenset([start]), b.frozen_arcs())


def fst_compose(x: Fst, y: Fst) -> Fst:
    """Relation composition with the standard three-mode epsilon filter.

    The filter admits exactly one interleaving of the moves where x emits
    epsilon (x advances alone) and the moves where y reads epsilon
    (y advances alone); pairs of such moves may also be taken jointly
    from mode 0.  Language-level correctness is the contract here; path
    multiplicity is not preserved.
    """
    # Index y's arcs by input label once per state.
    y_by_in: list[dict] = []
    for q in range(y.num_states):
        m: dict = {}
        for (yin, yout), dst in y.arcs[q]:
            m.setdefault(yin, []).append((yout, dst))
        y_by_in.append(m)

    start = (x.initial, y.initial, 0)
    index = {start: 0}
    b = _Builder()
    b.state()
    work = deque([start])
    accepting = set()

    def push(sid, pair, target):
        tid = index.get(target)
        if tid is None:
            tid = len(index)
            index[target] = tid
            b.state()
            work.append(target)
        b.arc(sid, pair, tid)

    while work:
        qx, qy, mode = state = work.popleft()
        sid = index[state]
        if qx in x.accepting and qy in y.accepting:
            accepting.add(sid)
        ymap = y_by_in[qy]
        for (xin, xout), dx in x.arcs[qx]:
            if xout is EPSILON:
                if mode != 2:
                    push(sid, (xin, EPSILON), (dx, qy, 1))
                if mode == 0:
                    for yout, dy in ymap.get(EPSILON, ()):
                        push(sid, (xin, yout), (dx, dy, 0))
            else:
                for yout, dy in ymap.get(xout, ()):
                    push(sid, (xin, yout), (dx, dy, 0))
        if mode != 1:
            for yout, dy in ymap.get(EPSILON, ()):
                push(sid, (EPSILON, yout), (qx, dy, 2))
    return Fst(x.in_alphabet, y.out_alphabet, len(b.arcs), 0,
               frozenset(accepting), b.frozen_arcs())


def project_input(t: Fst) -> Fsa:
    arcs = tuple(tuple((pair[0], dst) for pair, dst in state_arcs)
                 for state_arcs in t.arcs)
    return Fsa(t.in_alphabet, t.num_states, t.initial, t.accepting, arcs)


def project_output(t: Fst) -> Fsa:
    arcs = tuple(tuple((pair[1], dst) for pair, dst in state_arcs)
                 for state_arcs in t.arcs)
    return Fsa(t.out_alphabet, t.num_states, t.initial, t.accepting, arcs)


def apply_image(p: Fsa, r: Fst) -> Fsa:
    """The image of L(p) under relation r: range(identity(p) . r)."""
    return project_output(fst_compose(fst_identity(p), r))


def build_fst(expr) -> Fst:
    """Build a transducer from a relation constructor tree.

    Trees are nested tuples with `Fsa` leaves: ``("cross", p1, p2)``,
    ``("identity", p)``, ``("empty",)``, ``("unit",)``, ``("union", x, y)``,
    ``("concat", x, y)``, ``("star", x)``, ``("compose", x, y)``.
    """
    op = expr[0]
    if op == "cross":
        return fst_cross(expr[1], expr[2])
    if op == "identity":
        return fst_identity(expr[1])
    if op == "empty":
        return fst_empty()
    if op == "unit":
        return fst_unit()
    if op == "union":
        return fst_union(build_fst(expr[1]), build_fst(expr[2]))
    if op == "concat":
        return fst_concat(build_fst(expr[1]), build_fst(expr[2]))
    if op == "star":
        return fst_star(build_fst(expr[1]))
    if op == "compose":
        return fst_compose(build_fst(expr[1]), build_fst(expr[2]))
    raise ValueError(f"unknown constructor {op!r}")
