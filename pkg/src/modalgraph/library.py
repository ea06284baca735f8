"""Named modal formulas over graphs, each with a documented adequacy bound.

The adequacy bound of a formula is the smallest ceiling at which the
truncated-frame verdict provably matches the formula's intended meaning
over all finite graphs; the companion ``*_ceiling`` helpers compute it for
a concrete world.  The bounds follow the witness constructions: a
refutation of connectivity needs one added vertex, a coloring witness needs
the color classes, a degree comparison needs one connector per neighbor
plus a hub, and so on.  The test suite verifies them empirically instead of
trusting the arithmetic.
"""

from __future__ import annotations

from typing import Callable, Dict, List, Optional

from .formula import (
    And,
    Bot,
    Box,
    Diamond,
    Edge,
    Eq,
    Exists,
    Forall,
    Formula,
    Implies,
    Not,
    Or,
    Top,
    actual,
    conj,
    disj,
    exists_many,
    forall_many,
    neq,
)
from .graphs import Graph


class LibraryError(Exception):
    pass


def exact_neighbors(var: str, targets: List[str], guard_var: str) -> Formula:
    """``var`` is adjacent to the targets and nothing else."""
    clauses: List[Formula] = [Edge(var, t) for t in targets]
    bound = disj([Eq(guard_var, t) for t in targets]) if targets else Bot()
    clauses.append(Forall(guard_var, Implies(Edge(guard_var, var), bound)))
    return conj(clauses)


def neighborhood_bound(var: str, targets: List[str], guard_var: str) -> Formula:
    """``var`` has neighbors only among the targets (no edges required)."""
    bound = disj([Eq(guard_var, t) for t in targets]) if targets else Bot()
    return Forall(guard_var, Implies(Edge(guard_var, var), bound))


def exists_scoped(bindings, tail: Formula) -> Formula:
    """``bindings`` is a list of (var, [immediate conjuncts]); conjuncts sit
    right under their binder so backtracking search prunes early."""
    out = tail
    for var, clauses in reversed(list(bindings)):
        body = conj(list(clauses) + [out]) if clauses else out
        out = Exists(var, body)
    return out


# ---------------------------------------------------------------------------
# k-colorability


def rho(k: int) -> Formula:
    """Possibly there are k pairwise-adjacent class vertices such that every
    other vertex attaches to exactly one of them and adjacent vertices
    attach to different ones.

    True at G (with enough headroom) iff G is k-colorable: color each
    non-class vertex by the class it attaches to, and a class vertex lying
    inside G by any other index, which is safe because its neighbors all
    attach to it.  Adequacy bound |G| + k.
    """
    if k < 2:
        raise LibraryError("rho needs k >= 2")
    cs = [f"c{i}" for i in range(1, k + 1)]
    pairwise = [Edge(cs[i], cs[j]) for i in range(k) for j in range(i + 1, k)]

    def not_class(v: str) -> List[Formula]:
        return [neq(v, c) for c in cs]

    exactly_one = Forall(
        "v",
        Implies(
            conj(not_class("v")),
            disj(
                [
                    conj([Edge("v", cs[i])] + [Not(Edge("v", cs[j])) for j in range(k) if j != i])
                    for i in range(k)
                ]
            ),
        ),
    )
    proper = forall_many(
        ["v", "w"],
        Implies(
            conj([Edge("v", "w")] + not_class("v") + not_class("w")),
            conj([Not(And(Edge("v", c), Edge("w", c))) for c in cs]),
        ),
    )
    return Diamond(exists_many(cs, conj(pairwise + [exactly_one, proper])))


def rho_ceiling(g: Graph, k: int) -> int:
    return g.n + k


# ---------------------------------------------------------------------------
# Connectivity


def chi() -> Formula:
    """Necessarily, any vertex adjacent to x whose neighbors are closed
    under adjacency is adjacent to y.  Free variables x, y; adequacy bound
    |G| + 1 (one added vertex refutes a disconnected pair)."""
    closure = forall_many(
        ["u", "v"],
        Implies(conj([Edge("c", "u"), Edge("u", "v"), neq("v", "c")]), Edge("c", "v")),
    )
    return Box(Forall("c", Implies(And(Edge("c", "x"), closure), Edge("c", "y"))))


def chi_ceiling(g: Graph) -> int:
    return g.n + 1


def connected_within(x: str, y: str, member: Callable[[str], Formula], tags: str = "") -> Formula:
    """Connectivity of x and y inside a definable vertex set: the closure
    condition is restricted to members."""
    c, u, v = f"c{tags}", f"u{tags}", f"v{tags}"
    closure = forall_many(
        [u, v],
        Implies(
            conj([Edge(c, u), member(u), Edge(u, v), member(v), neq(v, c)]),
            Edge(c, v),
        ),
    )
    return Box(Forall(c, Implies(And(Edge(c, x), closure), Edge(c, y))))


# ---------------------------------------------------------------------------
# Finiteness (meaningful over the truncated frame as a witness-shape check)


def _chain_conditions(n: str, s: str, e: str, tag: str) -> List[Formula]:
    """Neighbors of ``n`` form a path from s to e: degree two inside the
    neighbor set except the two endpoints of degree one (or a single
    neighbor when s = e)."""
    u, a, b, w = f"cu{tag}", f"ca{tag}", f"cb{tag}", f"cw{tag}"

    def in_set(z: str) -> Formula:
        return Edge(z, n)

    def set_degree_0(z: str) -> Formula:
        return Forall(w, Not(And(Edge(w, n), Edge(w, z))))

    def set_degree_1(z: str) -> Formula:
        return Exists(
            a,
            conj(
                [
                    Edge(a, n),
                    Edge(a, z),
                    Forall(w, Implies(And(Edge(w, n), Edge(w, z)), Eq(w, a))),
                ]
            ),
        )

    def set_degree_2(z: str) -> Formula:
        return exists_many(
            [a, b],
            conj(
                [
                    neq(a, b),
                    Edge(a, n),
                    Edge(b, n),
                    Edge(a, z),
                    Edge(b, z),
                    Forall(w, Implies(And(Edge(w, n), Edge(w, z)), Or(Eq(w, a), Eq(w, b)))),
                ]
            ),
        )

    endpoints = Or(
        And(Eq(s, e), set_degree_0(s)),
        conj([neq(s, e), set_degree_1(s), set_degree_1(e)]),
    )
    middles = Forall(
        u,
        Implies(conj([Edge(u, n), neq(u, s), neq(u, e)]), set_degree_2(u)),
    )
    connect = forall_many(
        [a, b],
        Implies(
            And(Edge(a, n), Edge(b, n)),
            connected_within(a, b, in_set, tags=tag + "x"),
        ),
    )
    return [in_set(s), in_set(e), endpoints, middles, connect]


def finiteness_witness() -> Formula:
    """Possibly there is a vertex whose neighbors form a finite chain and
    every other vertex pairs injectively with a distinct chain vertex.

    In the truncated frame this holds at every world once the ceiling
    admits the chain; it is the finite-scale shape of the finiteness
    sentence.  Single-neighbor chains (start = end) are allowed.
    """
    n, s, e, x, c, d = "n", "s", "e", "x", "c", "d"
    other = lambda z: conj([neq(z, n), Not(Edge(z, n))])
    paired = Forall(
        x,
        Implies(
            other(x),
            Exists(
                c,
                conj(
                    [
                        Edge(c, n),
                        Edge(c, x),
                        Forall(d, Implies(And(Edge(d, n), Edge(d, x)), Eq(d, c))),
                    ]
                ),
            ),
        ),
    )
    injective = forall_many(
        [c, x, d],
        Implies(
            conj([Edge(c, n), other(x), other(d), Edge(c, x), Edge(c, d)]),
            Eq(x, d),
        ),
    )
    body = conj(_chain_conditions(n, s, e, "f") + [paired, injective])
    return Diamond(exists_many([n, s, e], body))


def finiteness_ceiling(g: Graph) -> int:
    return 2 * g.n + 3


def finite_degree() -> Formula:
    """Every neighbor of x pairs injectively with a distinct neighbor of a
    fresh chain vertex; free variable x.  Adequacy 2 deg(x) + |G| + 3."""
    n, s, e, c, d, y = "n", "s", "e", "c", "d", "y"
    paired = Forall(
        y,
        Implies(
            Edge(y, "x"),
            Exists(
                c,
                conj(
                    [
                        Edge(c, n),
                        Edge(c, y),
                        Forall(d, Implies(And(Edge(d, n), Edge(d, y)), Eq(d, c))),
                    ]
                ),
            ),
        ),
    )
    injective = forall_many(
        [c, y, d],
        Implies(
            conj([Edge(c, n), Edge(y, "x"), Edge(d, "x"), Edge(c, y), Edge(c, d)]),
            Eq(y, d),
        ),
    )
    body = conj(_chain_conditions(n, s, e, "g") + [paired, injective])
    return Diamond(exists_many([n, s, e], body))


def finite_degree_ceiling(g: Graph, x: int) -> int:
    return 2 * g.degree(x) + g.n + 3


# ---------------------------------------------------------------------------
# Finite pattern property instances


def fpp_instance(a_count: int, b_count: int) -> Formula:
    """Some vertex is adjacent to all of a1..am, none of b1..bn, and differs
    from all of them; free variables a1..am, b1..bn.  Modality-free."""
    avars = [f"a{i}" for i in range(1, a_count + 1)]
    bvars = [f"b{i}" for i in range(1, b_count + 1)]
    clauses = (
        [Edge("x", a) for a in avars]
        + [Not(Edge("x", b)) for b in bvars]
        + [neq("x", a) for a in avars]
        + [neq("x", b) for b in bvars]
    )
    return Exists("x", conj(clauses))


# ---------------------------------------------------------------------------
# Buttons and dials


def button_cycle(k: int) -> Formula:
    """There is a cycle of length k (as a subgraph); closed, modality-free,
    and persistent upward."""
    if k < 3:
        raise LibraryError("cycles need k >= 3")
    xs = [f"x{i}" for i in range(1, k + 1)]
    distinct = [neq(xs[i], xs[j]) for i in range(k) for j in range(i + 1, k)]
    edges = [Edge(xs[i], xs[(i + 1) % k]) for i in range(k)]
    return exists_many(xs, conj(distinct + edges))


def isolated(v: str, u: str) -> Formula:
    return Forall(u, Not(Edge(u, v)))


def dial_isolated(n: int, cap: int) -> Formula:
    """Exactly ``n`` isolated vertices for n < cap; at least ``cap`` for
    n = cap.  The family 0..cap forms a dial."""
    if not (0 <= n <= cap):
        raise LibraryError("need 0 <= n <= cap")
    if n == cap:
        xs = [f"x{i}" for i in range(1, cap + 1)]
        distinct = [neq(xs[i], xs[j]) for i in range(cap) for j in range(i + 1, cap)]
        return exists_many(xs, conj(distinct + [isolated(x, f"u{i}") for i, x in enumerate(xs)]))
    if n == 0:
        return Forall("y", Not(isolated("y", "u")))
    xs = [f"x{i}" for i in range(1, n + 1)]
    distinct = [neq(xs[i], xs[j]) for i in range(n) for j in range(i + 1, n)]
    witness = [isolated(x, f"u{i}") for i, x in enumerate(xs)]
    bound = Forall("y", Implies(isolated("y", "u"), disj([Eq("y", x) for x in xs])))
    return exists_many(xs, conj(distinct + witness + [bound]))


def dial_family(cap: int) -> List[Formula]:
    """The dial: exactly 0, 1, .., cap-1 isolated vertices, or at least cap."""
    return [dial_isolated(n, cap) for n in range(cap + 1)]


# ---------------------------------------------------------------------------
# Cardinality comparison via actuality (finite scale: degree comparison)


DEFAULT_DEGREE_CAP = 8


def card_leq(cap: int = DEFAULT_DEGREE_CAP) -> Formula:
    """The actual neighbors of v inject into the actual neighbors of w:
    possibly there is a hub whose neighbors are connector vertices, each
    linking one actual neighbor of v to a distinct actual neighbor of w,
    covering all actual neighbors of v.  Free variables v, w.

    Adequacy bound |G| + deg(v) + 1 (deg(v) connectors plus the hub); the
    disjunction caps deg(v) at ``cap``.
    """
    disjuncts = []
    for j in range(cap + 1):
        hs = "h"
        cs = [f"c{i}" for i in range(1, j + 1)]
        avs = [f"a{i}" for i in range(1, j + 1)]
        bvs = [f"b{i}" for i in range(1, j + 1)]
        bindings = []
        for i in range(j):
            bindings.append((avs[i], [actual(avs[i]), Edge(avs[i], "v")] + [neq(avs[i], avs[t]) for t in range(i)]))
        for i in range(j):
            bindings.append((bvs[i], [actual(bvs[i]), Edge(bvs[i], "w")] + [neq(bvs[i], bvs[t]) for t in range(i)]))
        bindings.append((hs, []))
        for i in range(j):
            bindings.append((cs[i], [exact_neighbors(cs[i], [hs, avs[i], bvs[i]], f"gw{i}")]))
        coverage = Forall(
            "y",
            Implies(
                And(actual("y"), Edge("y", "v")),
                disj([Eq("y", a) for a in avs]) if avs else Bot(),
            ),
        )
        hub = exact_neighbors(hs, cs, "gh")
        disjuncts.append(exists_scoped(bindings, And(hub, coverage)))
    return Diamond(disj(disjuncts))


def card_leq_ceiling(g: Graph, v: int) -> int:
    return g.n + g.degree(v) + 1


# ---------------------------------------------------------------------------
# The no-S5 theory


def all_adjacent_theory() -> Formula:
    """There is a vertex adjacent to all other vertices (closed, first
    order)."""
    return Exists("x", Forall("y", Implies(neq("y", "x"), Edge("x", "y"))))


# ---------------------------------------------------------------------------
# Registry for the CLI


def lookup(name: str) -> Formula:
    """Stable CLI names: rho2, rho3, chi, finwit, findeg, fpp, cyc_k,
    dial_n, cardleq, alladj."""
    if name == "chi":
        return chi()
    if name == "finwit":
        return finiteness_witness()
    if name == "findeg":
        return finite_degree()
    if name == "fpp":
        return fpp_instance(1, 1)
    if name == "cardleq":
        return card_leq()
    if name == "alladj":
        return all_adjacent_theory()
    if name.startswith("rho"):
        return rho(int(name[3:]))
    if name.startswith("cyc_"):
        return button_cycle(int(name[4:]))
    if name.startswith("dial_"):
        n = int(name[5:])
        return dial_isolated(n, n + 1)
    raise LibraryError(f"unknown formula name {name!r}")
