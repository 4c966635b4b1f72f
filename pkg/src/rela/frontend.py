"""Surface language for change specifications, plus the location database.

A spec file is a sequence of definitions::

    regex a1   := where(group=="A1")
    spec  path := { a1 .* d1 : any(a1 a2 a3 d1); }
    spec  main := path else { .* : preserve; }
    pspec p0   := (dstPrefix == 10.0.0.0/8) -> main

Zone regexes match whole paths over locations at the active granularity;
`.` stands for any single location (never drop), the keyword `drop` for
the reserved drop symbol, and `where(attr=="value")` for the set of
locations whose database record satisfies the filter.  A spec statement
is `zone : modifier`; statements concatenate, and `else` composes
alternatives with falling priority.  `pspec` definitions attach traffic
guards; guards are tried in file order and the first match wins.

Named definitions are resolved eagerly by inlining, so forward
references and cycles are impossible by construction.
"""

from __future__ import annotations

import ipaddress
import json
import re
from dataclasses import dataclass, field, replace as _dc_replace
from enum import Enum
from typing import Optional

from .automata import Symbol, SymbolTable


class SpecError(Exception):
    """Base for everything the frontend can reject."""

    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.message = message
        self.line = line
        self.col = col
        where = f" at line {line}, column {col}" if line else ""
        super().__init__(message + where)


class SpecSyntaxError(SpecError):
    pass


class SpecResolveError(SpecError):
    """A name, attribute or filter that does not resolve to anything."""


class LocationDbError(ValueError):
    pass


class Granularity(str, Enum):
    INTERFACE = "interface"
    DEVICE = "device"
    GROUP = "group"


@dataclass(frozen=True)
class LocationRecord:
    """One interface-level row of the location database."""

    name: str
    device: str
    group: str
    attrs: dict = field(default_factory=dict, compare=False)

    def coarse(self, granularity: Granularity) -> str:
        if granularity is Granularity.INTERFACE:
            return self.name
        if granularity is Granularity.DEVICE:
            return self.device
        return self.group

    def get(self, attr: str):
        if attr == "name":
            return self.name
        if attr == "device":
            return self.device
        if attr == "group":
            return self.group
        return self.attrs.get(attr)


class LocationDb:
    """The run's location inventory, loaded from a JSON array."""

    def __init__(self, records: list[LocationRecord]):
        names = set()
        for r in records:
            if r.name in names:
                raise LocationDbError(f"duplicate location name {r.name!r}")
            names.add(r.name)
        self.records = tuple(records)
        self.attributes = {"name", "device", "group"}
        for r in records:
            self.attributes.update(r.attrs)

    @classmethod
    def from_json(cls, text: str) -> "LocationDb":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as e:
            raise LocationDbError(f"location database is not valid JSON: {e}")
        if not isinstance(raw, list):
            raise LocationDbError("location database must be a JSON array")
        records = []
        for i, item in enumerate(raw):
            if not isinstance(item, dict):
                raise LocationDbError(f"record {i} is not an object")
            for key in ("name", "device", "group"):
                if not isinstance(item.get(key), str) or not item[key]:
                    raise LocationDbError(
                        f"record {i} needs a non-empty string {key!r}")
            extras = {k: v for k, v in item.items()
                      if k not in ("name", "device", "group")}
            records.append(LocationRecord(item["name"], item["device"],
                                          item["group"], extras))
        return cls(records)

    @classmethod
    def load(cls, path: str) -> "LocationDb":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(fh.read())

    def build_index(self, granularity: Granularity) -> "LocationIndex":
        coarse_of = {}
        coarse_names = set()
        for r in self.records:
            cname = r.coarse(granularity)
            if cname == "drop":
                raise LocationDbError(
                    "location name 'drop' is reserved for dropped traffic")
            coarse_of[r.name] = cname
            coarse_names.add(cname)
        table = SymbolTable()
        symbol_of = {"drop": table.drop}
        for cname in sorted(coarse_names):
            symbol_of[cname] = table.location(cname)
        return LocationIndex(self, granularity, table, table.universe(),
                             coarse_of, symbol_of)


@dataclass
class LocationIndex:
    """Symbols for one granularity: the run's working alphabet."""

    db: LocationDb
    granularity: Granularity
    table: SymbolTable
    universe: frozenset[Symbol]
    coarse_of: dict  # interface name -> coarse name
    symbol_of: dict  # coarse name -> Symbol (plus "drop")

    def lookup(self, name: str) -> Optional[Symbol]:
        """Resolve a location token: coarse name, or interface name."""
        sym = self.symbol_of.get(name)
        if sym is None:
            cname = self.coarse_of.get(name)
            if cname is not None:
                sym = self.symbol_of[cname]
        return sym


# ---------------------------------------------------------------------------
# Abstract syntax


@dataclass(frozen=True)
class RegexAst:
    pass


@dataclass(frozen=True)
class Loc(RegexAst):
    """A set of location symbols; matches any one of them."""

    symbols: frozenset

    def __post_init__(self):
        if not self.symbols:
            raise ValueError("Loc with an empty symbol set")


@dataclass(frozen=True)
class Dot(RegexAst):
    """Any single location; never matches drop."""


@dataclass(frozen=True)
class RxUnion(RegexAst):
    left: RegexAst
    right: RegexAst


@dataclass(frozen=True)
class RxConcat(RegexAst):
    left: RegexAst
    right: RegexAst


@dataclass(frozen=True)
class RxStar(RegexAst):
    inner: RegexAst


@dataclass(frozen=True)
class Modifier:
    pass


@dataclass(frozen=True)
class Preserve(Modifier):
    pass


@dataclass(frozen=True)
class Add(Modifier):
    paths: RegexAst


@dataclass(frozen=True)
class Remove(Modifier):
    paths: RegexAst


@dataclass(frozen=True)
class Replace(Modifier):
    old: RegexAst
    new: RegexAst


@dataclass(frozen=True)
class DropTraffic(Modifier):
    pass


@dataclass(frozen=True)
class AnyOf(Modifier):
    """Accept any post-change path set within `paths` (loose preserve)."""

    paths: RegexAst


@dataclass(frozen=True)
class SpecAst:
    pass


@dataclass(frozen=True)
class AtomicSpec(SpecAst):
    zone: RegexAst
    modifier: Modifier
    name: Optional[str] = field(default=None, compare=False)


@dataclass(frozen=True)
class ConcatSpec(SpecAst):
    left: SpecAst
    right: SpecAst
    name: Optional[str] = field(default=None, compare=False)


@dataclass(frozen=True)
class ElseSpec(SpecAst):
    """Apply `left` in its zone; traffic outside it falls to `right`."""

    first: SpecAst
    second: SpecAst
    name: Optional[str] = field(default=None, compare=False)


def _named(spec: SpecAst, name: str) -> SpecAst:
    return _dc_replace(spec, name=name)


# --- traffic predicates ------------------------------------------------------


@dataclass(frozen=True)
class PrefixPredicate:
    pass


@dataclass(frozen=True)
class PredTrue(PrefixPredicate):
    pass


@dataclass(frozen=True)
class PredAtom(PrefixPredicate):
    """Containment test of the flow's prefix within fixed CIDR blocks.

    `op` is "==" (contained in the single block), "!=" (not contained) or
    "in" (contained in at least one of several blocks).
    """

    fieldname: str  # "dstPrefix" | "srcPrefix"
    op: str
    cidrs: tuple

    def __post_init__(self):
        object.__setattr__(self, "cidrs", tuple(self.cidrs))


@dataclass(frozen=True)
class PredAnd(PrefixPredicate):
    left: PrefixPredicate
    right: PrefixPredicate


@dataclass(frozen=True)
class PredOr(PrefixPredicate):
    left: PrefixPredicate
    right: PrefixPredicate


@dataclass(frozen=True)
class PredNot(PrefixPredicate):
    inner: PrefixPredicate


def _contained(value, block) -> bool:
    if value is None:
        return False
    try:
        return value.subnet_of(block)
    except TypeError:  # mixed address families never match
        return False


def match_predicate(pred: PrefixPredicate, traffic) -> bool:
    """Evaluate a guard against a traffic class.

    `traffic` must expose `dst` and `src` as ip_network values (src may
    be None, in which case srcPrefix atoms are not contained anywhere).
    """
    if isinstance(pred, PredTrue):
        return True
    if isinstance(pred, PredAtom):
        value = traffic.dst if pred.fieldname == "dstPrefix" else traffic.src
        inside = any(_contained(value, c) for c in pred.cidrs)
        return not inside if pred.op == "!=" else inside
    if isinstance(pred, PredAnd):
        return match_predicate(pred.left, traffic) and \
            match_predicate(pred.right, traffic)
    if isinstance(pred, PredOr):
        return match_predicate(pred.left, traffic) or \
            match_predicate(pred.right, traffic)
    if isinstance(pred, PredNot):
        return not match_predicate(pred.inner, traffic)
    raise TypeError(f"not a predicate: {pred!r}")


@dataclass(frozen=True)
class GuardedSpec:
    name: str
    predicate: PrefixPredicate
    spec: SpecAst


@dataclass(frozen=True)
class Program:
    """A parsed spec file: guards in file order plus an optional default.

    The default is the one spec definition no other definition or guard
    references; flows matching no guard are checked against it, or
    reported unmatched when there is none.
    """

    guarded: tuple
    default: Optional[SpecAst]


# ---------------------------------------------------------------------------
# Tokenizer

_KEYWORDS = {"regex", "spec", "pspec", "else", "where", "drop", "preserve",
             "add", "remove", "replace", "any", "true", "and", "or", "not",
             "in"}

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>//[^\n]*)
  | (?P<cidr>\d{1,3}(?:\.\d{1,3}){3}(?:/\d{1,2})?
      |(?:[0-9A-Fa-f]{1,4})?(?::[0-9A-Fa-f]{0,4}){2,7}(?:/\d{1,3})?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_\-]*)
  | (?P<string>"[^"\n]*")
  | (?P<define>:=)
  | (?P<eq>==)
  | (?P<neq>!=)
  | (?P<arrow>->)
  | (?P<punct>[{}()|*.,;:])
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str  # NAME KEYWORD STRING CIDR punctuation-char EOF
    value: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    line, col = 1, 1
    pos = 0
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise SpecSyntaxError(f"unexpected character {text[pos]!r}",
                                  line, col)
        group = m.lastgroup
        value = m.group()
        if group not in ("ws", "comment"):
            if group == "name":
                kind = "KEYWORD" if value in _KEYWORDS else "NAME"
            elif group == "string":
                kind = "STRING"
                value = value[1:-1]
            elif group == "cidr":
                kind = "CIDR"
            elif group == "punct":
                kind = value
            else:
                kind = {"define": ":=", "eq": "==", "neq": "!=",
                        "arrow": "->"}[group]
            tokens.append(Token(kind, value, line, col))
        newlines = m.group().count("\n")
        if newlines:
            line += newlines
            col = len(m.group()) - m.group().rfind("\n")
        else:
            col += len(m.group())
        pos = m.end()
    tokens.append(Token("EOF", "", line, col))
    return tokens


# ---------------------------------------------------------------------------
# where() filters


@dataclass(frozen=True)
class AttrFilter:
    pass


@dataclass(frozen=True)
class AttrTest(AttrFilter):
    attr: str
    op: str  # "==" | "!="
    value: str


@dataclass(frozen=True)
class AttrAnd(AttrFilter):
    left: AttrFilter
    right: AttrFilter


@dataclass(frozen=True)
class AttrOr(AttrFilter):
    left: AttrFilter
    right: AttrFilter


def resolve_where(filt: AttrFilter, index: LocationIndex) -> frozenset:
    """The set of symbols whose records satisfy the filter."""

    def attrs_of(node):
        if isinstance(node, AttrTest):
            yield node.attr
        else:
            yield from attrs_of(node.left)
            yield from attrs_of(node.right)

    for attr in attrs_of(filt):
        if attr not in index.db.attributes:
            raise SpecResolveError(f"unknown attribute {attr!r} in where()")

    def matches(node, record):
        if isinstance(node, AttrTest):
            value = record.get(node.attr)
            if node.op == "==":
                return value == node.value
            return value is not None and value != node.value
        if isinstance(node, AttrAnd):
            return matches(node.left, record) and matches(node.right, record)
        if isinstance(node, AttrOr):
            return matches(node.left, record) or matches(node.right, record)
        raise TypeError(node)

    out = set()
    for record in index.db.records:
        if matches(filt, record):
            out.add(index.symbol_of[record.coarse(index.granularity)])
    return frozenset(out)


# ---------------------------------------------------------------------------
# Parser


class _Parser:
    def __init__(self, tokens: list[Token], index: LocationIndex):
        self.tokens = tokens
        self.pos = 0
        self.index = index
        self.regex_defs: dict[str, RegexAst] = {}
        self.spec_defs: dict[str, SpecAst] = {}
        self.def_names: set[str] = set()
        self.referenced: set[str] = set()

    # -- token plumbing

    def peek(self, ahead: int = 0) -> Token:
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def next(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "EOF":
            self.pos += 1
        return tok

    def expect(self, kind: str, what: str = "") -> Token:
        tok = self.next()
        if tok.kind != kind:
            wanted = what or kind
            raise SpecSyntaxError(
                f"expected {wanted}, found {tok.value or 'end of input'!r}",
                tok.line, tok.col)
        return tok

    def at_keyword(self, word: str) -> bool:
        t = self.peek()
        return t.kind == "KEYWORD" and t.value == word

    def eat_keyword(self, word: str) -> Token:
        t = self.next()
        if t.kind != "KEYWORD" or t.value != word:
            raise SpecSyntaxError(f"expected {word!r}", t.line, t.col)
        return t

    # -- program structure

    def program(self) -> Program:
        guarded = []
        order: list[str] = []
        while not self.peek().kind == "EOF":
            t = self.peek()
            if self.at_keyword("regex"):
                self.next()
                name = self.def_name()
                self.expect(":=")
                self.regex_defs[name] = self.regex()
            elif self.at_keyword("spec"):
                self.next()
                name = self.def_name()
                self.expect(":=")
                self.spec_defs[name] = _named(self.spec_expr(), name)
                order.append(name)
            elif self.at_keyword("pspec"):
                self.next()
                name = self.def_name()
                self.expect(":=")
                pred = self.pred_or()
                self.expect("->")
                guarded.append(GuardedSpec(name, pred, self.spec_expr()))
            else:
                raise SpecSyntaxError(
                    "expected a regex, spec or pspec definition",
                    t.line, t.col)
        unreferenced = [n for n in order if n not in self.referenced]
        if len(unreferenced) > 1:
            raise SpecSyntaxError(
                "ambiguous entry point: specs "
                + ", ".join(repr(n) for n in unreferenced)
                + " are all unreferenced; compose them or guard them")
        default = self.spec_defs[unreferenced[0]] if unreferenced else None
        if default is None and not guarded:
            raise SpecSyntaxError("the file defines no checkable spec")
        return Program(tuple(guarded), default)

    def def_name(self) -> str:
        tok = self.expect("NAME", "a definition name")
        if tok.value in self.def_names:
            raise SpecSyntaxError(f"duplicate definition of {tok.value!r}",
                                  tok.line, tok.col)
        self.def_names.add(tok.value)
        return tok.value

    # -- specs

    def spec_expr(self) -> SpecAst:
        left = self.spec_seq()
        if self.at_keyword("else"):
            self.next()
            return ElseSpec(left, self.spec_expr())
        return left

    _SPEC_UNIT_START = {"NAME", "STRING", "(", ".", "{"}

    def spec_seq(self) -> SpecAst:
        units = [self.spec_unit()]
        while True:
            t = self.peek()
            if t.kind in self._SPEC_UNIT_START or \
                    (t.kind == "KEYWORD" and t.value in ("where", "drop")):
                units.append(self.spec_unit())
            else:
                break
        out = units[0]
        for unit in units[1:]:
            out = ConcatSpec(out, unit)
        return out

    def spec_unit(self) -> SpecAst:
        t = self.peek()
        if t.kind == "{":
            return self.spec_block()
        if t.kind == "NAME" and t.value in self.spec_defs \
                and self.peek(1).kind != ":":
            self.next()
            self.referenced.add(t.value)
            return self.spec_defs[t.value]
        zone = self.regex()
        self.expect(":", "':' and a modifier after the zone regex")
        return AtomicSpec(zone, self.modifier())

    def spec_block(self) -> SpecAst:
        self.expect("{")
        stmts = []
        while self.peek().kind != "}":
            stmts.append(self.spec_expr())
            if self.peek().kind == ";":
                self.next()
            elif self.peek().kind != "}":
                t = self.peek()
                raise SpecSyntaxError("expected ';' or '}'", t.line, t.col)
        self.expect("}")
        if not stmts:
            t = self.peek()
            raise SpecSyntaxError("empty spec block", t.line, t.col)
        out = stmts[0]
        for s in stmts[1:]:
            out = ConcatSpec(out, s)
        return out

    def modifier(self) -> Modifier:
        t = self.next()
        if t.kind != "KEYWORD":
            raise SpecSyntaxError("expected a modifier", t.line, t.col)
        if t.value == "preserve":
            return Preserve()
        if t.value == "drop":
            return DropTraffic()
        if t.value in ("add", "remove", "any"):
            self.expect("(")
            arg = self.regex()
            self.expect(")")
            return {"add": Add, "remove": Remove, "any": AnyOf}[t.value](arg)
        if t.value == "replace":
            self.expect("(")
            old = self.regex()
            self.expect(",")
            new = self.regex()
            self.expect(")")
            return Replace(old, new)
        raise SpecSyntaxError(f"unknown modifier {t.value!r}", t.line, t.col)

    # -- regexes

    _ATOM_START = {"NAME", "STRING", "(", "."}

    def regex(self) -> RegexAst:
        return self.rx_alt()

    def rx_alt(self) -> RegexAst:
        left = self.rx_cat()
        while self.peek().kind == "|":
            self.next()
            right = self.rx_cat()
            # unions of plain location sets collapse into one set, so
            # where() filters and explicit alternations parse alike
            if isinstance(left, Loc) and isinstance(right, Loc):
                left = Loc(left.symbols | right.symbols)
            else:
                left = RxUnion(left, right)
        return left

    def rx_cat(self) -> RegexAst:
        parts = [self.rx_rep()]
        while True:
            t = self.peek()
            if t.kind in self._ATOM_START or \
                    (t.kind == "KEYWORD" and t.value in ("where", "drop")):
                parts.append(self.rx_rep())
            else:
                break
        out = parts[0]
        for p in parts[1:]:
            out = RxConcat(out, p)
        return out

    def rx_rep(self) -> RegexAst:
        atom = self.rx_atom()
        while self.peek().kind == "*":
            self.next()
            atom = RxStar(atom)
        return atom

    def rx_atom(self) -> RegexAst:
        t = self.next()
        if t.kind == "(":
            inner = self.rx_alt()
            self.expect(")")
            return inner
        if t.kind == ".":
            return Dot()
        if t.kind == "KEYWORD" and t.value == "drop":
            return Loc(frozenset([self.index.table.drop]))
        if t.kind == "KEYWORD" and t.value == "where":
            self.expect("(")
            filt = self.where_or()
            close = self.expect(")")
            symbols = resolve_where(filt, self.index)
            if not symbols:
                raise SpecResolveError("where() matches no locations",
                                       t.line, t.col)
            return Loc(symbols)
        if t.kind in ("NAME", "STRING"):
            if t.kind == "NAME" and t.value in self.regex_defs:
                return self.regex_defs[t.value]
            if t.kind == "NAME" and t.value in self.spec_defs:
                raise SpecSyntaxError(
                    f"{t.value!r} names a spec, not a regex", t.line, t.col)
            sym = self.index.lookup(t.value)
            if sym is None:
                raise SpecResolveError(
                    f"undefined name {t.value!r}: not a regex definition "
                    f"or a known location", t.line, t.col)
            return Loc(frozenset([sym]))
        raise SpecSyntaxError(f"unexpected {t.value or 'end of input'!r} "
                              "in a regex", t.line, t.col)

    # -- where() filters

    def where_or(self) -> AttrFilter:
        left = self.where_and()
        while self.at_keyword("or"):
            self.next()
            left = AttrOr(left, self.where_and())
        return left

    def where_and(self) -> AttrFilter:
        left = self.where_atom()
        while self.at_keyword("and"):
            self.next()
            left = AttrAnd(left, self.where_atom())
        return left

    def where_atom(self) -> AttrFilter:
        t = self.peek()
        if t.kind == "(":
            self.next()
            inner = self.where_or()
            self.expect(")")
            return inner
        attr = self.next()
        if attr.kind not in ("NAME", "STRING"):
            raise SpecSyntaxError("expected an attribute name",
                                  attr.line, attr.col)
        op = self.next()
        if op.kind not in ("==", "!="):
            raise SpecSyntaxError("expected '==' or '!='", op.line, op.col)
        value = self.next()
        if value.kind not in ("STRING", "NAME", "CIDR"):
            raise SpecSyntaxError("expected a quoted value",
                                  value.line, value.col)
        return AttrTest(attr.value, op.kind, value.value)

    # -- traffic predicates

    def pred_or(self) -> PrefixPredicate:
        left = self.pred_and()
        while self.at_keyword("or"):
            self.next()
            left = PredOr(left, self.pred_and())
        return left

    def pred_and(self) -> PrefixPredicate:
        left = self.pred_not()
        while self.at_keyword("and"):
            self.next()
            left = PredAnd(left, self.pred_not())
        return left

    def pred_not(self) -> PrefixPredicate:
        if self.at_keyword("not"):
            self.next()
            return PredNot(self.pred_not())
        t = self.peek()
        if t.kind == "(":
            self.next()
            inner = self.pred_or()
            self.expect(")")
            return inner
        if self.at_keyword("true"):
            self.next()
            return PredTrue()
        return self.pred_atom()

    def pred_atom(self) -> PrefixPredicate:
        name = self.expect("NAME", "'dstPrefix' or 'srcPrefix'")
        if name.value not in ("dstPrefix", "srcPrefix"):
            raise SpecSyntaxError(
                f"unknown traffic field {name.value!r}", name.line, name.col)
        op = self.next()
        if op.kind in ("==", "!="):
            cidr = self.cidr()
            return PredAtom(name.value, op.kind, (cidr,))
        if op.kind == "KEYWORD" and op.value == "in":
            self.expect("{")
            blocks = [self.cidr()]
            while self.peek().kind == ",":
                self.next()
                blocks.append(self.cidr())
            self.expect("}")
            return PredAtom(name.value, "in", tuple(blocks))
        raise SpecSyntaxError("expected '==', '!=' or 'in'", op.line, op.col)

    def cidr(self):
        t = self.expect("CIDR", "an address block")
        try:
            return ipaddress.ip_network(t.value, strict=False)
        except ValueError as e:
            raise SpecSyntaxError(f"bad address block {t.value!r}: {e}",
                                  t.line, t.col)


def parse_program(text: str, index: LocationIndex) -> Program:
    """Parse a spec file against a location index."""
    return _Parser(tokenize(text), index).program()


def parse_regex(text: str, index: LocationIndex) -> RegexAst:
    """Parse a standalone zone regex (handy for tools and tests)."""
    p = _Parser(tokenize(text), index)
    out = p.regex()
    tok = p.peek()
    if tok.kind != "EOF":
        raise SpecSyntaxError(f"trailing input {tok.value!r}",
                              tok.line, tok.col)
    return out


# ---------------------------------------------------------------------------
# Rendering (inverse of the parser, up to definition inlining)

_BARE_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_\-]*$")


def _loc_name(sym: Symbol) -> str:
    if sym.kind == "drop":
        return "drop"
    if _BARE_NAME.match(sym.name) and sym.name not in _KEYWORDS:
        return sym.name
    return f'"{sym.name}"'


def regex_to_text(r: RegexAst, prec: int = 0) -> str:
    """Render a regex; parse_regex(regex_to_text(r)) == r."""
    if isinstance(r, Loc):
        if len(r.symbols) == 1:
            (sym,) = r.symbols
            return _loc_name(sym)
        inner = " | ".join(_loc_name(s) for s in sorted(r.symbols))
        return f"({inner})" if prec > 0 else inner
    if isinstance(r, Dot):
        return "."
    if isinstance(r, RxUnion):
        text = f"{regex_to_text(r.left, 0)} | {regex_to_text(r.right, 0)}"
        return f"({text})" if prec > 0 else text
    if isinstance(r, RxConcat):
        text = f"{regex_to_text(r.left, 1)} {regex_to_text(r.right, 1)}"
        return f"({text})" if prec > 1 else text
    if isinstance(r, RxStar):
        return f"{regex_to_text(r.inner, 2)}*"
    raise TypeError(f"not a regex: {r!r}")


def modifier_to_text(m: Modifier) -> str:
    if isinstance(m, Preserve):
        return "preserve"
    if isinstance(m, DropTraffic):
        return "drop"
    if isinstance(m, Add):
        return f"add({regex_to_text(m.paths)})"
    if isinstance(m, Remove):
        return f"remove({regex_to_text(m.paths)})"
    if isinstance(m, AnyOf):
        return f"any({regex_to_text(m.paths)})"
    if isinstance(m, Replace):
        return f"replace({regex_to_text(m.old)}, {regex_to_text(m.new)})"
    raise TypeError(f"not a modifier: {m!r}")


def spec_to_text(s: SpecAst) -> str:
    if isinstance(s, AtomicSpec):
        return f"{regex_to_text(s.zone, 1)} : {modifier_to_text(s.modifier)}"
    if isinstance(s, ConcatSpec):
        def flat(node):
            if isinstance(node, ConcatSpec):
                yield from flat(node.left)
                yield from flat(node.right)
            else:
                yield node
        return "{ " + " ".join(spec_to_text(p) + ";" for p in flat(s)) + " }"
    if isinstance(s, ElseSpec):
        return "{ " + spec_to_text(s.first) + "; } else { " \
            + spec_to_text(s.second) + "; }"
    raise TypeError(f"not a spec: {s!r}")


def predicate_to_text(p: PrefixPredicate) -> str:
    if isinstance(p, PredTrue):
        return "true"
    if isinstance(p, PredAtom):
        if p.op == "in":
            return f"{p.fieldname} in {{{', '.join(str(c) for c in p.cidrs)}}}"
        return f"{p.fieldname} {p.op} {p.cidrs[0]}"
    if isinstance(p, PredAnd):
        return f"({predicate_to_text(p.left)} and {predicate_to_text(p.right)})"
    if isinstance(p, PredOr):
        return f"({predicate_to_text(p.left)} or {predicate_to_text(p.right)})"
    if isinstance(p, PredNot):
        return f"not {predicate_to_text(p.inner)}"
    raise TypeError(f"not a predicate: {p!r}")


def program_to_text(program: Program) -> str:
    """Render a program in inlined form; reparsing restores the program."""
    lines = []
    for i, g in enumerate(program.guarded):
        lines.append(f"pspec {g.name} := {predicate_to_text(g.predicate)} "
                     f"-> {spec_to_text(g.spec)}")
    if program.default is not None:
        lines.append(f"spec main := {spec_to_text(program.default)}")
    return "\n".join(lines) + "\n"