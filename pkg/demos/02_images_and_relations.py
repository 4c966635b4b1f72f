"""
Relations between old and new paths
===================================

A change intent is a relation: which new path(s) may stand where each
old path stood.  This demo builds small relations, takes images of path
sets under them, and shows how "unchanged", "rerouted", and checked
equations all become the same kind of object.
"""

from rela import rir
from rela.automata import Fsa, SymbolTable, enumerate_shortest
from rela.rir import (
    Compose, Concat, Cross, Identity, Image, PostState, PreState, RelUnion,
    SnapshotPair, Star, Sym, SymSet, Union, check_spec,
)

table = SymbolTable()
a, b, c, d = (table.location(n) for n in "abcd")
universe = table.universe()


def paths_fsa(paths):
    """A trie acceptor for an explicit set of paths."""
    arcs = [[]]
    accepting = set()
    for path in paths:
        state = 0
        for sym in path:
            arcs.append([])
            arcs[state].append((sym, len(arcs) - 1))
            state = len(arcs) - 1
        accepting.add(state)
    return Fsa(universe, len(arcs), 0, frozenset(accepting),
               tuple(tuple(x) for x in arcs))


# Two snapshots of one traffic class: before, traffic crossed b; after,
# it crosses c.
env = SnapshotPair(paths_fsa([(a, b, d)]), paths_fsa([(a, c, d)]))
ev = rir.Evaluator(env)


def show(label, expr):
    machine = ev.pathset(expr)
    print(label.ljust(42), enumerate_shortest(machine, 8).render())


# The identity relation on a zone keeps matching paths as they are; its
# image is just the intersection with the zone.
no_c = Star(SymSet(frozenset({a, b, d})))
show("image of pre under I(paths avoiding c):", Image(PreState(), Identity(no_c)))
show("image of post under the same identity:", Image(PostState(), Identity(no_c)))

# A cross relation maps every old path in its domain to every path in
# its range: "whatever matched before is now this family".
reroute = Cross(no_c, Union(Sym(c), Sym(d)))
show("image of pre under the reroute cross:", Image(PreState(), reroute))

# Relations compose; composing with an identity restricts the domain.
masked = Compose(Identity(Star(SymSet(frozenset({a, b, c, d})))), reroute)
show("the same cross behind a full mask:", Image(PreState(), masked))

# Union covers alternatives: paths may stay put or take the reroute.
either = RelUnion(Identity(no_c), reroute)
show("union relation (keep or reroute):", Image(PreState(), either))

# The check itself is one equation between two images.  This spec says
# "the b hop becomes c": the pre snapshot is mapped through the intended
# rewrite, the post snapshot only has to match it.
intended = Cross(no_c, Concat(Sym(a), Concat(Sym(c), Sym(d))))
after = Star(SymSet(frozenset({a, c, d})))
equation = rir.Equal(Image(PreState(), intended),
                     Image(PostState(), Identity(after)))
print("reroute equation holds:", check_spec(equation, env).holds)

# When an equation fails, the directed differences are kept as automata
# so violations can be listed exactly.
naive = rir.Equal(Image(PreState(), Identity(no_c)),
                  Image(PostState(), Identity(no_c)))
verdict = check_spec(naive, env)
print("naive 'nothing changed' equation holds:", verdict.holds)
for witness in verdict.witnesses:
    print("  only on the left: ",
          enumerate_shortest(witness.missing, 5).render())
    print("  only on the right:",
          enumerate_shortest(witness.unexpected, 5).render())
