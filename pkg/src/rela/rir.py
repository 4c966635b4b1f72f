"""Intermediate representation for relational change specifications.

Three expression sublanguages, each a small tree of frozen dataclasses:

* path sets   -- regular expressions over locations, extended with the two
  snapshot references `PreState` / `PostState` and the image operator
  `Image(P, R)`;
* relations   -- regular expressions over *pairs* of paths, built from
  `Cross`, `Identity` and the usual closure operators plus `Compose`;
* specs       -- boolean combinations of `Equal` / `Subset` comparisons.

`eval_pathset` / `eval_rel` lower expressions to automata from
:mod:`rela.automata`; `check_spec` decides a spec against a snapshot pair
and keeps the directed difference automata of failed comparisons as
witnesses.  `oracle_eval_pathset` is an independent, deliberately naive
evaluator over explicit bounded path sets, used by the test suite to keep
the automata path honest.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, fields
from typing import Optional

from .automata import (
    Fsa, Fst, MARKER, Symbol, accepts, apply_image, complement, fsa_concat,
    fsa_difference, fsa_empty, fsa_equivalent, fsa_intersect, fsa_star,
    fsa_symbol, fsa_symbol_class, fsa_union, fsa_unit, fst_compose,
    fst_concat, fst_cross, fst_empty, fst_identity, fst_star, fst_union,
    fst_unit, is_empty,
)


class _Node:
    """Base for all expression nodes; tracks snapshot dependence."""

    __hash__ = None  # subclasses are frozen dataclasses and regenerate this

    def _children(self):
        return [getattr(self, f.name) for f in fields(self)
                if isinstance(getattr(self, f.name), _Node)]

    @property
    def ground(self) -> bool:
        """True when evaluation does not consult the snapshot pair."""
        return self._ground  # set in __post_init__

    def _set_ground(self):
        object.__setattr__(
            self, "_ground", all(c._ground for c in self._children()))


def _node(cls):
    """Decorator: freeze the dataclass and compute snapshot dependence."""
    # Must be attached before dataclass() generates __init__, or the
    # hook is never invoked.
    cls.__post_init__ = cls._set_ground
    return dataclass(frozen=True)(cls)


class PathSetExpr(_Node):
    pass


class RelExpr(_Node):
    pass


class SpecExpr(_Node):
    pass


# --- path sets --------------------------------------------------------------


@_node
class Sym(PathSetExpr):
    symbol: Symbol


@_node
class SymSet(PathSetExpr):
    """The length-one paths over a set of locations, as a single leaf.

    Semantically a union of `Sym` leaves; keeping wide location classes
    as one node keeps the lowered machines flat.
    """

    symbols: frozenset[Symbol]


@_node
class Zero(PathSetExpr):
    """The empty path set."""


@_node
class One(PathSetExpr):
    """The set holding only the empty path."""


class PreState(PathSetExpr):
    """The pre-change snapshot's path set."""

    def _set_ground(self):
        object.__setattr__(self, "_ground", False)


class PostState(PathSetExpr):
    """The post-change snapshot's path set."""

    def _set_ground(self):
        object.__setattr__(self, "_ground", False)


PreState = _node(PreState)
PostState = _node(PostState)


@_node
class Union(PathSetExpr):
    left: PathSetExpr
    right: PathSetExpr


@_node
class Concat(PathSetExpr):
    left: PathSetExpr
    right: PathSetExpr


@_node
class Star(PathSetExpr):
    inner: PathSetExpr


@_node
class Intersect(PathSetExpr):
    left: PathSetExpr
    right: PathSetExpr


@_node
class Complement(PathSetExpr):
    """Complement relative to the location universe (markers excluded)."""

    inner: PathSetExpr


@_node
class Image(PathSetExpr):
    """All paths some member of `source` maps to under `rel`."""

    source: PathSetExpr
    rel: "RelExpr"


# --- relations ---------------------------------------------------------------


@_node
class Cross(RelExpr):
    """The full relation left x right."""

    left: PathSetExpr
    right: PathSetExpr


@_node
class Identity(RelExpr):
    source: PathSetExpr


@_node
class RelZero(RelExpr):
    """The empty relation."""


@_node
class RelOne(RelExpr):
    """The relation relating the empty path to itself."""


@_node
class RelUnion(RelExpr):
    left: RelExpr
    right: RelExpr


@_node
class RelConcat(RelExpr):
    """Pairwise concatenation: relates p1 p2 to q1 q2 component-wise."""

    left: RelExpr
    right: RelExpr


@_node
class RelStar(RelExpr):
    inner: RelExpr


@_node
class Compose(RelExpr):
    left: RelExpr
    right: RelExpr


# --- specs -------------------------------------------------------------------


@_node
class Equal(SpecExpr):
    left: PathSetExpr
    right: PathSetExpr


@_node
class Subset(SpecExpr):
    left: PathSetExpr
    right: PathSetExpr


@_node
class And(SpecExpr):
    left: SpecExpr
    right: SpecExpr


@_node
class Or(SpecExpr):
    left: SpecExpr
    right: SpecExpr


@_node
class Not(SpecExpr):
    inner: SpecExpr


# ---------------------------------------------------------------------------
# Evaluation


class SnapshotPair:
    """The two forwarding path sets a spec is judged against.

    Both acceptors must share one universe alphabet and must not mention
    marker symbols; markers belong to compiled relations only.
    """

    __slots__ = ("pre", "post")

    def __init__(self, pre: Fsa, post: Fsa):
        if pre.alphabet != post.alphabet:
            raise ValueError("snapshot acceptors must share a universe")
        for m in (pre, post):
            for state_arcs in m.arcs:
                for label, _ in state_arcs:
                    if label is not None and label.kind == MARKER:
                        raise ValueError("snapshots must not carry markers")
        self.pre = pre
        self.post = post

    @property
    def universe(self) -> frozenset[Symbol]:
        return self.pre.alphabet


class Evaluator:
    """Lowers expressions to automata with two layers of memoization.

    Structurally identical subexpressions evaluate once per environment.
    Ground subexpressions (no PreState/PostState) may additionally share a
    cache across environments of the same run -- pass the same mapping as
    `ground_cache` for every snapshot pair evaluated under one universe.
    """

    def __init__(self, env: SnapshotPair,
                 ground_cache: Optional[dict] = None):
        self.env = env
        self.universe = env.universe
        self._ground = ground_cache if ground_cache is not None else {}
        self._local: dict = {}

    def pathset(self, p: PathSetExpr) -> Fsa:
        cache = self._ground if p.ground else self._local
        got = cache.get(p)
        if got is None:
            got = self._pathset(p)
            cache[p] = got
        return got

    def _pathset(self, p: PathSetExpr) -> Fsa:
        u = self.universe
        if isinstance(p, Sym):
            return fsa_symbol(p.symbol, u)
        if isinstance(p, SymSet):
            return fsa_symbol_class(p.symbols, u)
        if isinstance(p, Zero):
            return fsa_empty(u)
        if isinstance(p, One):
            return fsa_unit(u)
        if isinstance(p, PreState):
            return self.env.pre
        if isinstance(p, PostState):
            return self.env.post
        if isinstance(p, Union):
            return fsa_union(self.pathset(p.left), self.pathset(p.right))
        if isinstance(p, Concat):
            return fsa_concat(self.pathset(p.left), self.pathset(p.right))
        if isinstance(p, Star):
            return fsa_star(self.pathset(p.inner))
        if isinstance(p, Intersect):
            return fsa_intersect(self.pathset(p.left), self.pathset(p.right))
        if isinstance(p, Complement):
            return complement(self.pathset(p.inner), u)
        if isinstance(p, Image):
            return self._image(self.pathset(p.source), p.rel)
        raise TypeError(f"not a path-set expression: {p!r}")

    def _image(self, source: Fsa, r: RelExpr) -> Fsa:
        """Image of a concrete path set under a relation expression.

        Images distribute over the relation operators, so wherever the
        structure allows it the relation is applied as plain acceptor
        algebra instead of a transducer product:

            img(P, I(A))    = P n A
            img(P, A x B)   = B when P n A is nonempty, else empty
            img(P, R | S)   = img(P, R) | img(P, S)
            img(P, R . S)   = img(img(P, R), S)       (Compose)

        Concatenation and star would need P split at unknown points, so
        they (and only they) fall back to transducer application.
        """
        if isinstance(r, Identity):
            return fsa_intersect(source, self.pathset(r.source))
        if isinstance(r, Cross):
            if is_empty(fsa_intersect(source, self.pathset(r.left))):
                return fsa_empty(self.universe)
            return self.pathset(r.right)
        if isinstance(r, RelZero):
            return fsa_empty(self.universe)
        if isinstance(r, RelOne):
            if accepts(source, ()):
                return fsa_unit(self.universe)
            return fsa_empty(self.universe)
        if isinstance(r, RelUnion):
            return fsa_union(self._image(source, r.left),
                             self._image(source, r.right))
        if isinstance(r, Compose):
            return self._image(self._image(source, r.left), r.right)
        return apply_image(source, self.rel(r))

    def rel(self, r: RelExpr) -> Fst:
        cache = self._ground if r.ground else self._local
        got = cache.get(r)
        if got is None:
            got = self._rel(r)
            cache[r] = got
        return got

    def _rel(self, r: RelExpr) -> Fst:
        if isinstance(r, Cross):
            return fst_cross(self.pathset(r.left), self.pathset(r.right))
        if isinstance(r, Identity):
            return fst_identity(self.pathset(r.source))
        if isinstance(r, RelZero):
            return fst_empty()
        if isinstance(r, RelOne):
            return fst_unit()
        if isinstance(r, RelUnion):
            return fst_union(self.rel(r.left), self.rel(r.right))
        if isinstance(r, RelConcat):
            return fst_concat(self.rel(r.left), self.rel(r.right))
        if isinstance(r, RelStar):
            return fst_star(self.rel(r.inner))
        if isinstance(r, Compose):
            return fst_compose(self.rel(r.left), self.rel(r.right))
        raise TypeError(f"not a relation expression: {r!r}")


def eval_pathset(p: PathSetExpr, env: SnapshotPair,
                 ground_cache: Optional[dict] = None) -> Fsa:
    return Evaluator(env, ground_cache).pathset(p)


def eval_rel(r: RelExpr, env: SnapshotPair,
             ground_cache: Optional[dict] = None) -> Fst:
    return Evaluator(env, ground_cache).rel(r)


@dataclass(frozen=True)
class Witness:
    """Difference automata for one failed comparison leaf.

    `missing` accepts paths in the left operand only; `unexpected` those
    in the right operand only (absent for Subset, which is one-sided).
    """

    leaf: SpecExpr
    missing: Fsa
    unexpected: Optional[Fsa]


@dataclass(frozen=True)
class SpecVerdict:
    holds: bool
    witnesses: tuple[Witness, ...] = ()


def check_spec(s: SpecExpr, env: SnapshotPair,
               ground_cache: Optional[dict] = None) -> SpecVerdict:
    """Decide a spec; on failure, keep witnesses for the leaves to blame.

    A leaf is blamed when it sits under an even number of negations and
    its comparison came out false; failed leaves under odd negation depth
    produce no witnesses (there is no difference automaton for "these
    languages are equal but should not be").
    """
    ev = Evaluator(env, ground_cache)
    truth: dict[int, bool] = {}

    def holds(node: SpecExpr) -> bool:
        got = truth.get(id(node))
        if got is None:
            got = _holds(node)
            truth[id(node)] = got
        return got

    def _holds(node: SpecExpr) -> bool:
        if isinstance(node, Equal):
            return fsa_equivalent(ev.pathset(node.left),
                                  ev.pathset(node.right))
        if isinstance(node, Subset):
            return is_empty(fsa_difference(ev.pathset(node.left),
                                           ev.pathset(node.right)))
        if isinstance(node, And):
            return holds(node.left) and holds(node.right)
        if isinstance(node, Or):
            return holds(node.left) or holds(node.right)
        if isinstance(node, Not):
            return not holds(node.inner)
        raise TypeError(f"not a spec expression: {node!r}")

    out: list[Witness] = []

    def blame(node: SpecExpr, positive: bool) -> None:
        # Visit only nodes whose truth value contributes to the failure.
        if isinstance(node, (Equal, Subset)):
            if not positive:
                return
            x = ev.pathset(node.left)
            y = ev.pathset(node.right)
            missing = fsa_difference(x, y)
            unexpected = fsa_difference(y, x) if isinstance(node, Equal) \
                else None
            out.append(Witness(node, missing, unexpected))
            return
        if isinstance(node, Not):
            blame(node.inner, not positive)
            return
        if isinstance(node, (And, Or)):
            # A child contributes to the failure when its truth value
            # disagrees with the polarity this subtree was supposed to have.
            for child in (node.left, node.right):
                if holds(child) != positive:
                    blame(child, positive)
            return
        raise TypeError(f"not a spec expression: {node!r}")

    ok = holds(s)
    if not ok:
        blame(s, True)
    return SpecVerdict(ok, tuple(out))


# ---------------------------------------------------------------------------
# Brute-force oracle


@dataclass(frozen=True)
class OracleEnv:
    """Explicit finite path sets standing in for the two snapshots."""

    pre: frozenset
    post: frozenset
    universe: tuple[Symbol, ...]


_MAX_ORACLE_LEN = 8


def oracle_eval_pathset(p: PathSetExpr, env: OracleEnv,
                        maxlen: int) -> frozenset:
    """Evaluate a path-set expression over explicit sets, length-bounded.

    Returns the denoted set restricted to paths of length <= maxlen,
    computed without automata: unions and intersections are set ops,
    closures iterate to a fixed point under the length bound, complements
    materialize the bounded universe.  Relations inside Image nodes are
    evaluated as explicit pair sets with both components bounded.
    """
    if maxlen > _MAX_ORACLE_LEN:
        raise ValueError(f"oracle maxlen capped at {_MAX_ORACLE_LEN}")
    return frozenset(_o_pathset(p, env, maxlen))


def _bounded_universe(universe, maxlen):
    out = {()}
    for n in range(1, maxlen + 1):
        out.update(itertools.product(universe, repeat=n))
    return out


def _o_pathset(p, env, maxlen):
    if isinstance(p, Sym):
        return {(p.symbol,)} if maxlen >= 1 else set()
    if isinstance(p, SymSet):
        return {(s,) for s in p.symbols} if maxlen >= 1 else set()
    if isinstance(p, Zero):
        return set()
    if isinstance(p, One):
        return {()}
    if isinstance(p, PreState):
        return {q for q in env.pre if len(q) <= maxlen}
    if isinstance(p, PostState):
        return {q for q in env.post if len(q) <= maxlen}
    if isinstance(p, Union):
        return _o_pathset(p.left, env, maxlen) | _o_pathset(p.right, env, maxlen)
    if isinstance(p, Concat):
        xs = _o_pathset(p.left, env, maxlen)
        ys = _o_pathset(p.right, env, maxlen)
        return {x + y for x in xs for y in ys if len(x) + len(y) <= maxlen}
    if isinstance(p, Star):
        base = _o_pathset(p.inner, env, maxlen)
        acc = {()}
        while True:
            nxt = acc | {x + y for x in acc for y in base
                         if len(x) + len(y) <= maxlen}
            if nxt == acc:
                return acc
            acc = nxt
    if isinstance(p, Intersect):
        return _o_pathset(p.left, env, maxlen) & _o_pathset(p.right, env, maxlen)
    if isinstance(p, Complement):
        return _bounded_universe(env.universe, maxlen) - \
            _o_pathset(p.inner, env, maxlen)
    if isinstance(p, Image):
        src = _o_pathset(p.source, env, maxlen)
        rel = _o_rel(p.rel, env, maxlen)
        return {q for (x, q) in rel if x in src}
    raise TypeError(f"not a path-set expression: {p!r}")


def _o_rel(r, env, maxlen):
    if isinstance(r, Cross):
        xs = _o_pathset(r.left, env, maxlen)
        ys = _o_pathset(r.right, env, maxlen)
        return {(x, y) for x in xs for y in ys}
    if isinstance(r, Identity):
        return {(x, x) for x in _o_pathset(r.source, env, maxlen)}
    if isinstance(r, RelZero):
        return set()
    if isinstance(r, RelOne):
        return {((), ())}
    if isinstance(r, RelUnion):
        return _o_rel(r.left, env, maxlen) | _o_rel(r.right, env, maxlen)
    if isinstance(r, RelConcat):
        xs = _o_rel(r.left, env, maxlen)
        ys = _o_rel(r.right, env, maxlen)
        return {(a + c, b + d) for (a, b) in xs for (c, d) in ys
                if len(a) + len(c) <= maxlen and len(b) + len(d) <= maxlen}
    if isinstance(r, RelStar):
        base = _o_rel(r.inner, env, maxlen)
        acc = {((), ())}
        while True:
            nxt = acc | {(a + c, b + d) for (a, b) in acc for (c, d) in base
                         if len(a) + len(c) <= maxlen
                         and len(b) + len(d) <= maxlen}
            if nxt == acc:
                return acc
            acc = nxt
    if isinstance(r, Compose):
        xs = _o_rel(r.left, env, maxlen)
        ys = _o_rel(r.right, env, maxlen)
        by_mid: dict = {}
        for (m, q) in ys:
            by_mid.setdefault(m, []).append(q)
        return {(x, q) for (x, m) in xs for q in by_mid.get(m, ())}
    raise TypeError(f"not a relation expression: {r!r}")


# ---------------------------------------------------------------------------
# Debug rendering


_ATOMS = (Sym, SymSet, Zero, One, PreState, PostState)


def _p_atom(p) -> str:
    if isinstance(p, Sym):
        return p.symbol.name
    if isinstance(p, SymSet):
        names = sorted(s.name for s in p.symbols)
        if len(names) > 8:
            return f"[{len(names)} locations]"
        return "(" + " | ".join(names) + ")"
    if isinstance(p, Zero):
        return "0"
    if isinstance(p, One):
        return "1"
    if isinstance(p, PreState):
        return "PreState"
    if isinstance(p, PostState):
        return "PostState"
    return "(" + pretty(p) + ")"


def _flat(node, cls):
    if isinstance(node, cls):
        yield from _flat(node.left, cls)
        yield from _flat(node.right, cls)
    else:
        yield node


def pretty(expr) -> str:
    """Render an expression tree in compact relational notation."""
    # path sets
    if isinstance(expr, _ATOMS):
        return _p_atom(expr)
    if isinstance(expr, Union):
        return "(" + " | ".join(pretty(t) for t in _flat(expr, Union)) + ")"
    if isinstance(expr, Concat):
        return " ".join(_p_atom(t) if not isinstance(t, (Star, Concat))
                        else pretty(t) for t in _flat(expr, Concat))
    if isinstance(expr, Star):
        return _p_atom(expr.inner) + "*"
    if isinstance(expr, Intersect):
        return ("(" + " ∩ ".join(pretty(t) for t in _flat(expr, Intersect))
                + ")")
    if isinstance(expr, Complement):
        return "~" + _p_atom(expr.inner)
    if isinstance(expr, Image):
        return "(" + pretty(expr.source) + " ▷ " + pretty(expr.rel) + ")"
    # relations
    if isinstance(expr, Cross):
        return "(" + pretty(expr.left) + " × " + pretty(expr.right) + ")"
    if isinstance(expr, Identity):
        return "I(" + pretty(expr.source) + ")"
    if isinstance(expr, RelZero):
        return "0"
    if isinstance(expr, RelOne):
        return "1"
    if isinstance(expr, RelUnion):
        return ("(" + " | ".join(pretty(t) for t in _flat(expr, RelUnion))
                + ")")
    if isinstance(expr, RelConcat):
        return " ".join(pretty(t) for t in _flat(expr, RelConcat))
    if isinstance(expr, RelStar):
        inner = pretty(expr.inner)
        if not isinstance(expr.inner, (RelZero, RelOne, Identity, Cross)):
            inner = "(" + inner + ")"
        return inner + "*"
    if isinstance(expr, Compose):
        return "(" + " ∘ ".join(pretty(t) for t in _flat(expr, Compose)) + ")"
    # specs
    if isinstance(expr, Equal):
        return pretty(expr.left) + " = " + pretty(expr.right)
    if isinstance(expr, Subset):
        return pretty(expr.left) + " ⊆ " + pretty(expr.right)
    if isinstance(expr, And):
        return "(" + " ∧ ".join(pretty(t) for t in _flat(expr, And)) + ")"
    if isinstance(expr, Or):
        return "(" + " ∨ ".join(pretty(t) for t in _flat(expr, Or)) + ")"
    if isinstance(expr, Not):
        return "¬(" + pretty(expr.inner) + ")"
    raise TypeError(f"not an expression: {expr!r}")
