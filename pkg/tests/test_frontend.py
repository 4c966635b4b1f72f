"""Location database, tokenizer, parser and predicate tests."""

import ipaddress
import json
from dataclasses import dataclass
from typing import Optional

import pytest

from rela.frontend import (
    Add, AnyOf, AtomicSpec, AttrTest, ConcatSpec, Dot, DropTraffic, ElseSpec,
    Granularity, GuardedSpec, Loc, LocationDb, LocationDbError, Preserve,
    PredAtom, PredTrue, Program, RxConcat, RxStar, RxUnion, Remove, Replace,
    SpecResolveError, SpecSyntaxError, match_predicate, parse_program,
    parse_regex, program_to_text, regex_to_text, resolve_where, spec_to_text,
    tokenize,
)


def make_db():
    rows = []
    plan = [
        ("x1", "X"), ("a1", "A"), ("a2", "A"), ("a3", "A"),
        ("b1", "B"), ("b2", "B"), ("b3", "B"),
        ("d1", "D"), ("y1", "D"),
    ]
    for device, region in plan:
        for port in ("eth0", "eth1"):
            rows.append({
                "name": f"{device}:{port}",
                "device": device,
                "group": region,
                "vendor": "acme" if region in ("A", "B") else "blue",
            })
    return LocationDb.from_json(json.dumps(rows))


@pytest.fixture
def db():
    return make_db()


@pytest.fixture
def index(db):
    return db.build_index(Granularity.DEVICE)


def sym(index, name):
    s = index.symbol_of[name]
    assert s is not None
    return s


# ---------------------------------------------------------------------------
# location database


class TestLocationDb:
    def test_loads_records_with_extra_attributes(self, db):
        assert len(db.records) == 18
        assert db.records[0].name == "x1:eth0"
        assert db.records[0].get("vendor") == "blue"
        assert db.records[2].get("vendor") == "acme"
        assert "vendor" in db.attributes

    def test_duplicate_names_rejected(self):
        rows = [{"name": "p", "device": "d", "group": "g"}] * 2
        with pytest.raises(LocationDbError, match="duplicate"):
            LocationDb.from_json(json.dumps(rows))

    def test_missing_field_rejected(self):
        with pytest.raises(LocationDbError, match="group"):
            LocationDb.from_json('[{"name": "p", "device": "d"}]')

    def test_non_array_rejected(self):
        with pytest.raises(LocationDbError, match="array"):
            LocationDb.from_json('{"name": "p"}')

    def test_invalid_json_rejected(self):
        with pytest.raises(LocationDbError, match="JSON"):
            LocationDb.from_json("[")

    def test_drop_is_a_reserved_name(self):
        rows = [{"name": "drop", "device": "drop", "group": "g"}]
        with pytest.raises(LocationDbError, match="reserved"):
            LocationDb.from_json(json.dumps(rows)).build_index(
                Granularity.DEVICE)


class TestLocationIndex:
    def test_device_granularity_merges_interfaces(self, index):
        assert index.coarse_of["x1:eth0"] == "x1"
        assert index.coarse_of["x1:eth1"] == "x1"
        # 9 devices plus drop
        assert len(index.universe) == 10

    def test_symbol_ids_follow_sorted_names(self, index):
        names = sorted(n for n in index.symbol_of if n != "drop")
        ids = [index.symbol_of[n].id for n in names]
        assert ids == sorted(ids)
        assert index.symbol_of["drop"].id == 0

    def test_same_db_same_ids_across_builds(self, db):
        a = db.build_index(Granularity.GROUP)
        b = db.build_index(Granularity.GROUP)
        assert {n: s.id for n, s in a.symbol_of.items()} == \
            {n: s.id for n, s in b.symbol_of.items()}

    def test_lookup_accepts_interface_names_at_device_granularity(self, index):
        assert index.lookup("a1:eth0") is index.symbol_of["a1"]
        assert index.lookup("a1") is index.symbol_of["a1"]
        assert index.lookup("nope") is None

    def test_group_granularity(self, db):
        gi = db.build_index(Granularity.GROUP)
        # X, A, B, D plus drop
        assert len(gi.universe) == 5
        assert gi.lookup("b2:eth1") is gi.symbol_of["B"]


# ---------------------------------------------------------------------------
# tokenizer


class TestTokenizer:
    def kinds(self, text):
        return [t.kind for t in tokenize(text)]

    def test_definition_line(self):
        toks = tokenize('regex a := where(group=="A")')
        assert [(t.kind, t.value) for t in toks] == [
            ("KEYWORD", "regex"), ("NAME", "a"), (":=", ":="),
            ("KEYWORD", "where"), ("(", "("), ("NAME", "group"),
            ("==", "=="), ("STRING", "A"), (")", ")"), ("EOF", "")]

    def test_colon_vs_define(self):
        assert self.kinds("a := b : c")[:5] == \
            ["NAME", ":=", "NAME", ":", "NAME"]

    def test_comments_and_positions(self):
        toks = tokenize("a // rest is ignored\n  b")
        assert [(t.value, t.line, t.col) for t in toks] == [
            ("a", 1, 1), ("b", 2, 3), ("", 2, 4)]

    def test_star_dot_pipe(self):
        assert self.kinds(". * | ( )")[:5] == [".", "*", "|", "(", ")"]

    def test_cidr_v4(self):
        toks = tokenize("dstPrefix == 10.0.0.0/8")
        assert [(t.kind, t.value) for t in toks[:3]] == [
            ("NAME", "dstPrefix"), ("==", "=="), ("CIDR", "10.0.0.0/8")]

    def test_cidr_v6(self):
        toks = tokenize("2001:db8::/32 ::1 ::/0")
        assert [t.kind for t in toks[:3]] == ["CIDR"] * 3

    def test_plain_address_is_cidr_token(self):
        assert tokenize("10.1.2.3")[0].kind == "CIDR"

    def test_hexlike_names_stay_names(self):
        toks = tokenize("d1 : add(a)")
        assert [t.kind for t in toks[:3]] == ["NAME", ":", "KEYWORD"]

    def test_unexpected_character(self):
        with pytest.raises(SpecSyntaxError) as err:
            tokenize("a $ b")
        assert err.value.line == 1 and err.value.col == 3

    def test_arrow_and_braces(self):
        assert self.kinds("-> { } ; ,")[:5] == ["->", "{", "}", ";", ","]


# ---------------------------------------------------------------------------
# regex parsing and where()


class TestRegexParsing:
    def test_single_location(self, index):
        assert parse_regex("a1", index) == Loc(frozenset([sym(index, "a1")]))

    def test_quoted_interface_resolves_to_device(self, index):
        assert parse_regex('"a1:eth0"', index) == \
            Loc(frozenset([sym(index, "a1")]))

    def test_dot_and_star(self, index):
        assert parse_regex(".*", index) == RxStar(Dot())

    def test_drop_keyword(self, index):
        assert parse_regex("drop", index) == \
            Loc(frozenset([index.table.drop]))

    def test_precedence_union_lowest(self, index):
        a, b, d = (Loc(frozenset([sym(index, n)])) for n in ("a1", "b1", "d1"))
        assert parse_regex("a1 b1 | d1", index) == RxUnion(RxConcat(a, b), d)
        assert parse_regex("a1 (b1 | d1)", index) == \
            RxConcat(a, Loc(frozenset([sym(index, "b1"), sym(index, "d1")])))
        assert parse_regex("a1 b1*", index) == RxConcat(a, RxStar(b))

    def test_location_unions_collapse(self, index):
        assert parse_regex("a1 | a2 | a3", index) == \
            parse_regex('where(group=="A")', index)

    def test_double_star(self, index):
        a = Loc(frozenset([sym(index, "a1")]))
        assert parse_regex("a1**", index) == RxStar(RxStar(a))

    def test_where_by_group(self, index):
        r = parse_regex('where(group == "A")', index)
        assert r == Loc(frozenset(sym(index, n) for n in ("a1", "a2", "a3")))

    def test_where_and_or(self, index):
        r = parse_regex('where(group=="A" or group=="D")', index)
        assert len(r.symbols) == 5
        r2 = parse_regex('where(group=="A" and device=="a2")', index)
        assert r2 == Loc(frozenset([sym(index, "a2")]))

    def test_where_extra_attribute(self, index):
        r = parse_regex('where(vendor=="blue")', index)
        assert r == Loc(frozenset(sym(index, n)
                                  for n in ("x1", "d1", "y1")))

    def test_where_negation(self, index):
        r = parse_regex('where(vendor!="blue")', index)
        assert len(r.symbols) == 6

    def test_where_unknown_attribute(self, index):
        with pytest.raises(SpecResolveError, match="unknown attribute"):
            parse_regex('where(color=="red")', index)

    def test_where_empty_result(self, index):
        with pytest.raises(SpecResolveError, match="matches no locations"):
            parse_regex('where(group=="Z")', index)

    def test_undefined_name(self, index):
        with pytest.raises(SpecResolveError, match="undefined name 'q9'"):
            parse_regex("q9", index)

    def test_trailing_input(self, index):
        with pytest.raises(SpecSyntaxError, match="trailing"):
            parse_regex("a1 )", index)


class TestResolveWhere:
    def test_missing_attr_on_some_records(self, index):
        # != only matches records that carry the attribute
        filt = AttrTest("vendor", "!=", "acme")
        out = resolve_where(filt, index)
        assert out == frozenset(sym(index, n) for n in ("x1", "d1", "y1"))


# ---------------------------------------------------------------------------
# spec parsing


class TestSpecParsing:
    def test_atomic(self, index):
        p = parse_program("spec s := a1 : preserve", index)
        assert p.default == AtomicSpec(
            Loc(frozenset([sym(index, "a1")])), Preserve())
        assert p.default.name == "s"
        assert p.guarded == ()

    def test_modifiers(self, index):
        text = """
        spec s := {
            a1 : add(a2);
            a2 : remove(a3);
            a3 : replace(a1, a2 a3);
            b1 : drop;
            b2 : any(b3*);
        }
        """
        p = parse_program(text, index)
        mods = []
        node = p.default
        while isinstance(node, ConcatSpec):
            mods.append(node.right.modifier)
            node = node.left
        mods.append(node.modifier)
        mods.reverse()
        assert isinstance(mods[0], Add)
        assert isinstance(mods[1], Remove)
        assert isinstance(mods[2], Replace)
        assert isinstance(mods[3], DropTraffic)
        assert isinstance(mods[4], AnyOf)

    def test_block_trailing_semicolon_optional(self, index):
        a = parse_program("spec s := { a1 : preserve; a2 : drop }", index)
        b = parse_program("spec s := { a1 : preserve; a2 : drop; }", index)
        assert a.default == b.default

    def test_else_is_right_associative(self, index):
        p = parse_program(
            "spec s := a1 : preserve else a2 : preserve else a3 : preserve",
            index)
        assert isinstance(p.default, ElseSpec)
        assert isinstance(p.default.second, ElseSpec)
        assert isinstance(p.default.first, AtomicSpec)

    def test_inlining_attaches_names(self, index):
        text = """
        spec inner := a1 : preserve
        spec outer := inner else a2 : drop
        """
        p = parse_program(text, index)
        assert p.default.name == "outer"
        assert p.default.first.name == "inner"
        # names are presentation only
        assert p.default.first == AtomicSpec(
            Loc(frozenset([sym(index, "a1")])), Preserve())

    def test_regex_definitions_inline(self, index):
        text = """
        regex a := where(group == "A")
        spec s := a a* : preserve
        """
        p = parse_program(text, index)
        zone = p.default.zone
        a = Loc(frozenset(sym(index, n) for n in ("a1", "a2", "a3")))
        assert zone == RxConcat(a, RxStar(a))

    def test_forward_reference_rejected(self, index):
        text = """
        spec outer := inner else a2 : drop
        spec inner := a1 : preserve
        """
        with pytest.raises((SpecSyntaxError, SpecResolveError)):
            parse_program(text, index)

    def test_duplicate_definition_rejected(self, index):
        text = "regex a := a1\nspec a := a1 : preserve"
        with pytest.raises(SpecSyntaxError, match="duplicate"):
            parse_program(text, index)

    def test_spec_name_inside_regex_rejected(self, index):
        text = """
        spec inner := a1 : preserve
        spec outer := a1 inner : preserve
        """
        with pytest.raises(SpecSyntaxError, match="names a spec"):
            parse_program(text, index)

    def test_ambiguous_entry_point(self, index):
        text = "spec s1 := a1 : preserve\nspec s2 := a2 : preserve"
        with pytest.raises(SpecSyntaxError, match="ambiguous entry point"):
            parse_program(text, index)

    def test_no_spec_at_all(self, index):
        with pytest.raises(SpecSyntaxError, match="no checkable spec"):
            parse_program("regex a := a1", index)

    def test_comments_anywhere(self, index):
        text = """
        // change plan 7
        spec s := { // zone one
            a1 : preserve; // keep
        }
        """
        assert parse_program(text, index).default is not None

    def test_worked_change_program(self, index):
        text = """
        regex a1r := where(device == "a1")
        regex ar  := where(group == "A")
        regex dr  := where(group == "D")
        spec pathShift := { a1r .* d1 : any(a1r a2 a3 d1); }
        spec e2e := { ar* : preserve; pathShift; dr* : preserve; }
        spec nochange := { .* : preserve; }
        spec change := e2e else nochange
        """
        p = parse_program(text, index)
        assert isinstance(p.default, ElseSpec)
        assert p.default.name == "change"
        assert p.default.first.name == "e2e"
        assert p.default.second.name == "nochange"
        shift = p.default.first.left.right
        assert shift.name == "pathShift"
        assert isinstance(shift.modifier, AnyOf)


class TestGuards:
    def test_guard_order_and_default(self, index):
        text = """
        spec lo := a1 : preserve
        spec hi := a2 : preserve
        spec rest := .* : preserve
        pspec g1 := (dstPrefix == 10.0.0.0/8) -> lo
        pspec g2 := (dstPrefix == 10.1.0.0/16) -> hi
        """
        p = parse_program(text, index)
        assert [g.name for g in p.guarded] == ["g1", "g2"]
        assert p.guarded[0].spec.name == "lo"
        assert p.default.name == "rest"

    def test_guard_only_program_has_no_default(self, index):
        text = """
        spec dealloc := .* : drop
        pspec g := (dstPrefix == 10.0.0.0/24) -> dealloc
        """
        p = parse_program(text, index)
        assert p.default is None
        assert len(p.guarded) == 1

    def test_inline_guard_spec(self, index):
        text = "pspec g := (true) -> { .* : preserve; }"
        p = parse_program(text, index)
        assert isinstance(p.guarded[0].predicate, PredTrue)

    def test_predicate_forms(self, index):
        text = ("pspec g := (dstPrefix in {10.0.0.0/8, 192.168.0.0/16} "
                "and not srcPrefix == 172.16.0.0/12) -> { .* : preserve; }")
        p = parse_program(text, index)
        pred = p.guarded[0].predicate
        assert match_predicate(pred, Traffic("10.2.3.4", "8.8.8.8"))
        assert not match_predicate(pred, Traffic("11.0.0.1", "8.8.8.8"))
        assert not match_predicate(pred, Traffic("10.2.3.4", "172.16.9.9"))

    def test_duplicate_pspec_name_rejected(self, index):
        text = """
        pspec g := (true) -> { .* : preserve; }
        pspec g := (true) -> { .* : drop; }
        """
        with pytest.raises(SpecSyntaxError, match="duplicate"):
            parse_program(text, index)


@dataclass
class Traffic:
    dst_raw: str
    src_raw: Optional[str] = None

    @property
    def dst(self):
        return ipaddress.ip_network(self.dst_raw, strict=False)

    @property
    def src(self):
        if self.src_raw is None:
            return None
        return ipaddress.ip_network(self.src_raw, strict=False)


class TestPredicates:
    def test_eq_is_containment(self):
        pred = PredAtom("dstPrefix", "==",
                        (ipaddress.ip_network("10.0.0.0/8"),))
        assert match_predicate(pred, Traffic("10.1.0.0/16"))
        assert match_predicate(pred, Traffic("10.1.2.3"))
        assert not match_predicate(pred, Traffic("11.0.0.0/8"))
        # a supernet is not contained
        assert not match_predicate(pred, Traffic("0.0.0.0/0"))

    def test_neq(self):
        pred = PredAtom("dstPrefix", "!=",
                        (ipaddress.ip_network("10.0.0.0/8"),))
        assert not match_predicate(pred, Traffic("10.1.0.0/16"))
        assert match_predicate(pred, Traffic("11.0.0.0/8"))

    def test_in_set(self):
        pred = PredAtom("dstPrefix", "in",
                        (ipaddress.ip_network("10.0.0.0/8"),
                         ipaddress.ip_network("192.168.0.0/16")))
        assert match_predicate(pred, Traffic("192.168.4.0/24"))
        assert not match_predicate(pred, Traffic("172.16.0.0/12"))

    def test_mixed_families_never_match(self):
        pred = PredAtom("dstPrefix", "==",
                        (ipaddress.ip_network("10.0.0.0/8"),))
        assert not match_predicate(pred, Traffic("2001:db8::/32"))

    def test_missing_src(self):
        eq = PredAtom("srcPrefix", "==",
                      (ipaddress.ip_network("10.0.0.0/8"),))
        neq = PredAtom("srcPrefix", "!=",
                       (ipaddress.ip_network("10.0.0.0/8"),))
        assert not match_predicate(eq, Traffic("10.0.0.1", None))
        assert match_predicate(neq, Traffic("10.0.0.1", None))


# ---------------------------------------------------------------------------
# rendering round-trips


ROUND_TRIP_PROGRAMS = [
    "spec s := a1 : preserve",
    "spec s := { a1 : preserve; a2 a3 : drop; }",
    "spec s := { a1* : add(a2 | a3); b1 : replace(b2, b3 d1); }",
    "spec s := a1 : preserve else { .* : any(b1*); }",
    'spec s := where(group=="A") . d1 : remove(a2)',
    "spec s := { a1 : preserve; } else { a2 : drop; } else { .* : preserve; }",
    "pspec g := (dstPrefix == 10.0.0.0/8) -> { .* : preserve; }",
    ("spec rest := drop* : preserve\n"
     "pspec g := (dstPrefix in {10.0.0.0/8, 2001:db8::/32} or "
     "not srcPrefix != 172.16.0.0/12) -> { a1 : drop; }"),
]


class TestRendering:
    @pytest.mark.parametrize("text", ROUND_TRIP_PROGRAMS)
    def test_program_round_trip(self, index, text):
        program = parse_program(text, index)
        rendered = program_to_text(program)
        assert parse_program(rendered, index) == program

    def test_regex_round_trip(self, index):
        for text in ["a1", "a1 b1 | d1*", "(a1 | b1) d1", ". .*",
                     'where(group=="A")', "drop", "a1**"]:
            r = parse_regex(text, index)
            assert parse_regex(regex_to_text(r), index) == r

    def test_multi_symbol_loc_renders_sorted(self, index):
        r = parse_regex('where(group=="A")', index)
        assert regex_to_text(r) == "a1 | a2 | a3"

    def test_spec_text_shape(self, index):
        p = parse_program("spec s := { a1 : preserve; a2 : drop; }", index)
        assert spec_to_text(p.default) == "{ a1 : preserve; a2 : drop; }"
