"""Lowering parsed change specs to relational path-set expressions.

Each spec statement becomes a pair of relations: one applied to the
pre-change paths and one to the post-change paths.  The check itself is
a single equation, image(pre, rpre) == image(post, rpost).  Modifier
arguments are folded into the relations so that both images describe
the same intended outcome; a `#n` marker symbol stands for "some
member of a path family" where the spec allows freedom (`any`).

Statement concatenation becomes pairwise relation concatenation, and
`else` chains become unions of arm relations guarded by the complement
of every earlier arm's claim zone.  The compiled form keeps the arm
list so a failed check can be blamed on the first arm whose images
disagree.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from . import rir
from .automata import LOCATION, Symbol
from .frontend import (
    Add, AnyOf, AtomicSpec, ConcatSpec, Dot, DropTraffic, ElseSpec, Loc,
    LocationIndex, Modifier, Preserve, PrefixPredicate, Program, RegexAst,
    Remove, Replace, RxConcat, RxStar, RxUnion, SpecAst, regex_to_text,
)


@dataclass(frozen=True)
class MarkerBinding:
    """One `any()` occurrence: its marker and the family it ranges over."""

    symbol: Symbol
    source_text: str
    pathset: rir.PathSetExpr


@dataclass(frozen=True)
class SubSpec:
    """One arm of the top-level else chain, with earlier arms masked out."""

    label: str
    zone: rir.PathSetExpr
    rpre: rir.RelExpr
    rpost: rir.RelExpr


@dataclass(frozen=True)
class CompiledSpec:
    top: rir.SpecExpr
    rpre: rir.RelExpr
    rpost: rir.RelExpr
    zone: rir.PathSetExpr
    subspecs: tuple
    markers: tuple
    name: str = "spec"


@dataclass(frozen=True)
class CompiledGuard:
    name: str
    predicate: PrefixPredicate
    spec: CompiledSpec


@dataclass(frozen=True)
class CompiledProgram:
    guards: tuple
    default: Optional[CompiledSpec]


def _fold(parts, join):
    """Balanced fold, deterministic and shallow for wide unions."""
    while len(parts) > 1:
        parts = [join(parts[i], parts[i + 1]) if i + 1 < len(parts)
                 else parts[i] for i in range(0, len(parts), 2)]
    return parts[0]


def _symbol_class(symbols) -> rir.PathSetExpr:
    syms = frozenset(symbols)
    if len(syms) == 1:
        return rir.Sym(next(iter(syms)))
    return rir.SymSet(syms)


def lower_regex(r: RegexAst, index: LocationIndex) -> rir.PathSetExpr:
    if isinstance(r, Loc):
        return _symbol_class(r.symbols)
    if isinstance(r, Dot):
        return _symbol_class(
            s for s in index.universe if s.kind == LOCATION)
    if isinstance(r, RxUnion):
        return rir.Union(lower_regex(r.left, index),
                         lower_regex(r.right, index))
    if isinstance(r, RxConcat):
        return rir.Concat(lower_regex(r.left, index),
                          lower_regex(r.right, index))
    if isinstance(r, RxStar):
        return rir.Star(lower_regex(r.inner, index))
    raise TypeError(f"not a regex: {r!r}")


def _minus(x: rir.PathSetExpr, y: rir.PathSetExpr) -> rir.PathSetExpr:
    return rir.Intersect(x, rir.Complement(y))


def _class_of(p) -> Optional[frozenset]:
    if isinstance(p, rir.Sym):
        return frozenset([p.symbol])
    if isinstance(p, rir.SymSet):
        return p.symbols
    return None


def simplify_path(p: rir.PathSetExpr) -> rir.PathSetExpr:
    """Bottom-up algebraic cleanup of a path-set expression.

    Only language-preserving rewrites: unit and zero elimination, merging
    unions of location classes into one class, and collapsing nested or
    trivial stars.
    """
    if isinstance(p, rir.SymSet) and not p.symbols:
        return rir.Zero()
    if isinstance(p, rir.Union):
        left, right = simplify_path(p.left), simplify_path(p.right)
        if isinstance(left, rir.Zero):
            return right
        if isinstance(right, rir.Zero):
            return left
        lc, rc = _class_of(left), _class_of(right)
        if lc is not None and rc is not None:
            return _symbol_class(lc | rc)
        return rir.Union(left, right)
    if isinstance(p, rir.Concat):
        left, right = simplify_path(p.left), simplify_path(p.right)
        if isinstance(left, rir.Zero) or isinstance(right, rir.Zero):
            return rir.Zero()
        if isinstance(left, rir.One):
            return right
        if isinstance(right, rir.One):
            return left
        return rir.Concat(left, right)
    if isinstance(p, rir.Star):
        inner = simplify_path(p.inner)
        if isinstance(inner, (rir.Zero, rir.One)):
            return rir.One()
        if isinstance(inner, rir.Star):
            return inner
        return rir.Star(inner)
    if isinstance(p, rir.Intersect):
        return rir.Intersect(simplify_path(p.left), simplify_path(p.right))
    if isinstance(p, rir.Complement):
        return rir.Complement(simplify_path(p.inner))
    return p


def simplify_rel(r: rir.RelExpr) -> rir.RelExpr:
    """Bottom-up algebraic cleanup of a relation expression.

    Pushes relation structure down to plain path sets wherever the
    relational operators act pointwise: identities absorb composition,
    union, concatenation and star of identities, and a composition
    against a cross constrains the cross's input side.  The payoff is
    that checks against identity-only specs evaluate as single acceptor
    intersections instead of per-arm products.
    """
    if isinstance(r, rir.Identity):
        source = simplify_path(r.source)
        if isinstance(source, rir.Zero):
            return rir.RelZero()
        if isinstance(source, rir.One):
            return rir.RelOne()
        return rir.Identity(source)
    if isinstance(r, rir.Cross):
        left, right = simplify_path(r.left), simplify_path(r.right)
        if isinstance(left, rir.Zero) or isinstance(right, rir.Zero):
            return rir.RelZero()
        return rir.Cross(left, right)
    if isinstance(r, rir.RelUnion):
        left, right = simplify_rel(r.left), simplify_rel(r.right)
        if isinstance(left, rir.RelZero):
            return right
        if isinstance(right, rir.RelZero):
            return left
        if isinstance(left, rir.Identity) and isinstance(right, rir.Identity):
            return rir.Identity(
                simplify_path(rir.Union(left.source, right.source)))
        return rir.RelUnion(left, right)
    if isinstance(r, rir.RelConcat):
        left, right = simplify_rel(r.left), simplify_rel(r.right)
        if isinstance(left, rir.RelZero) or isinstance(right, rir.RelZero):
            return rir.RelZero()
        if isinstance(left, rir.RelOne):
            return right
        if isinstance(right, rir.RelOne):
            return left
        if isinstance(left, rir.Identity) and isinstance(right, rir.Identity):
            return rir.Identity(
                simplify_path(rir.Concat(left.source, right.source)))
        return rir.RelConcat(left, right)
    if isinstance(r, rir.RelStar):
        inner = simplify_rel(r.inner)
        if isinstance(inner, (rir.RelZero, rir.RelOne)):
            return rir.RelOne()
        if isinstance(inner, rir.Identity):
            return rir.Identity(simplify_path(rir.Star(inner.source)))
        return rir.RelStar(inner)
    if isinstance(r, rir.Compose):
        return _simplify_compose(simplify_rel(r.left), simplify_rel(r.right))
    return r


def _simplify_compose(left: rir.RelExpr, right: rir.RelExpr) -> rir.RelExpr:
    """Simplify a composition of two already-simplified relations."""
    if isinstance(left, rir.RelZero) or isinstance(right, rir.RelZero):
        return rir.RelZero()
    if isinstance(left, rir.Identity) and isinstance(right, rir.Identity):
        return rir.Identity(
            simplify_path(rir.Intersect(left.source, right.source)))
    if isinstance(left, rir.Identity) and isinstance(right, rir.Cross):
        return simplify_rel(rir.Cross(
            rir.Intersect(left.source, right.left), right.right))
    if isinstance(left, rir.Cross) and isinstance(right, rir.Identity):
        return simplify_rel(rir.Cross(
            left.left, rir.Intersect(left.right, right.source)))
    # Composition distributes over union on either side; distributing
    # lets the identity and cross rules above fire per branch.
    if isinstance(right, rir.RelUnion):
        return simplify_rel(rir.RelUnion(rir.Compose(left, right.left),
                                         rir.Compose(left, right.right)))
    if isinstance(left, rir.RelUnion):
        return simplify_rel(rir.RelUnion(rir.Compose(left.left, right),
                                         rir.Compose(left.right, right)))
    return rir.Compose(left, right)


class _Lowerer:
    def __init__(self, index: LocationIndex):
        self.index = index
        self.markers: list[MarkerBinding] = []

    def spec(self, s: SpecAst):
        """Returns (rpre, rpost, zone) for one spec subtree."""
        if isinstance(s, AtomicSpec):
            return self.atomic(s)
        if isinstance(s, ConcatSpec):
            lpre, lpost, lzone = self.spec(s.left)
            rpre, rpost, rzone = self.spec(s.right)
            return (rir.RelConcat(lpre, rpre), rir.RelConcat(lpost, rpost),
                    rir.Concat(lzone, rzone))
        if isinstance(s, ElseSpec):
            fpre, fpost, fzone = self.spec(s.first)
            spre, spost, szone = self.spec(s.second)
            mask = rir.Identity(rir.Complement(fzone))
            return (rir.RelUnion(fpre, rir.Compose(mask, spre)),
                    rir.RelUnion(fpost, rir.Compose(mask, spost)),
                    rir.Union(fzone, szone))
        raise TypeError(f"not a spec: {s!r}")

    def atomic(self, s: AtomicSpec):
        d = lower_regex(s.zone, self.index)
        m = s.modifier
        if isinstance(m, Preserve):
            ident = rir.Identity(d)
            return ident, ident, d
        if isinstance(m, Add):
            p = lower_regex(m.paths, self.index)
            zone = rir.Union(d, p)
            return (rir.RelUnion(rir.Identity(zone), rir.Cross(d, p)),
                    rir.Identity(zone), zone)
        if isinstance(m, Remove):
            p = lower_regex(m.paths, self.index)
            return rir.Identity(_minus(d, p)), rir.Identity(d), d
        if isinstance(m, Replace):
            old = lower_regex(m.old, self.index)
            new = lower_regex(m.new, self.index)
            zone = rir.Union(d, new)
            return (rir.RelUnion(rir.Identity(_minus(zone, old)),
                                 rir.Cross(rir.Intersect(d, old), new)),
                    rir.Identity(zone), zone)
        if isinstance(m, DropTraffic):
            dropped = rir.Sym(self.index.table.drop)
            zone = rir.Union(d, dropped)
            return rir.Cross(zone, dropped), rir.Identity(zone), zone
        if isinstance(m, AnyOf):
            p = lower_regex(m.paths, self.index)
            marker = self.index.table.fresh_marker()
            self.markers.append(MarkerBinding(
                marker, regex_to_text(m.paths), p))
            mk = rir.Sym(marker)
            zone = rir.Union(d, p)
            return (rir.Cross(zone, mk),
                    rir.RelUnion(rir.Cross(p, mk),
                                 rir.Identity(_minus(d, p))),
                    zone)
        raise TypeError(f"not a modifier: {m!r}")


def _arm_label(arm: SpecAst, position: int) -> str:
    name = getattr(arm, "name", None)
    return name if name else f"#{position}"


def compile_spec(spec: SpecAst, index: LocationIndex) -> CompiledSpec:
    """Compile one spec tree into its check equation and arm list."""
    lower = _Lowerer(index)

    arms = []
    node = spec
    while isinstance(node, ElseSpec):
        arms.append(node.first)
        node = node.second
    arms.append(node)

    subspecs = []
    prior_zone = None
    for i, arm in enumerate(arms):
        rpre, rpost, zone = lower.spec(arm)
        zone = simplify_path(zone)
        if prior_zone is None:
            sub_zone, sub_rpre, sub_rpost = zone, rpre, rpost
            prior_zone = zone
        else:
            mask = rir.Identity(rir.Complement(prior_zone))
            sub_zone = rir.Intersect(zone, rir.Complement(prior_zone))
            sub_rpre = rir.Compose(mask, rpre)
            sub_rpost = rir.Compose(mask, rpost)
            prior_zone = simplify_path(rir.Union(prior_zone, zone))
        subspecs.append(SubSpec(_arm_label(arm, i + 1),
                                simplify_path(sub_zone),
                                simplify_rel(sub_rpre),
                                simplify_rel(sub_rpost)))

    rpre = simplify_rel(_fold([s.rpre for s in subspecs], rir.RelUnion))
    rpost = simplify_rel(_fold([s.rpost for s in subspecs], rir.RelUnion))
    top = rir.Equal(rir.Image(rir.PreState(), rpre),
                    rir.Image(rir.PostState(), rpost))
    return CompiledSpec(top, rpre, rpost, prior_zone,
                        tuple(subspecs), tuple(lower.markers),
                        getattr(spec, "name", None) or "spec")


def compile_program(program: Program,
                    index: LocationIndex) -> CompiledProgram:
    guards = tuple(
        CompiledGuard(g.name, g.predicate, compile_spec(g.spec, index))
        for g in program.guarded)
    default = None
    if program.default is not None:
        default = compile_spec(program.default, index)
    return CompiledProgram(guards, default)