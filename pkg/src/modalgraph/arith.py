"""The arithmetic interpretation in finite modal graph theory.

A natural number n is coded by a vertex whose neighbors form a cycle of
length n+3; the +3 offset makes decoding absolute under extensions.  The
relation formulas assert, inside a possibility operator, that connector
vertices hang off a hub and wire the usable cycle vertices of the operands
together: an injection for order, a correspondence for addition, one
connector per pair of usable vertices for multiplication, always setting
three cycle vertices of each operand aside.

Arithmetic sentences translate recursively: atoms map to the relation
formulas, connectives map through, and an existential quantifier becomes
"possibly there is a fresh code such that ...", guarding every free
variable so codes survive into the extension.  Negated atoms are first
rewritten to positive form (``x /= y`` becomes ``x < y or y < x`` and so
on), which keeps every possibility operator in the translation positive.

The gadget renderings are cycle-length-indexed: each relation formula is a
disjunction over concrete operand cycle lengths up to a documented cap,
with every witness vertex carrying an exact-neighborhood bound.  This is
equivalent to the prose construction for values within the cap and makes
the bounded witness search complete and fast.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import count
from typing import Dict, Iterator, List, Optional, Sequence, Tuple
import re

from .formula import (
    FALSE,
    TRUE,
    And,
    Bot,
    Diamond,
    Edge,
    Eq,
    Exists,
    Forall,
    Formula,
    Implies,
    Not,
    Or,
    conj,
    disj,
    exists_many,
    neq,
    rename_var,
)
from .graphs import Graph, connected as graph_connected
from .library import connected_within, exact_neighbors, exists_scoped


class ArithError(Exception):
    pass


DEFAULT_VALUE_CAP = 4  # largest coded value the relation gadgets cover


# ---------------------------------------------------------------------------
# Arithmetic terms and formulas


@dataclass(frozen=True)
class Term:
    pass


@dataclass(frozen=True)
class AVar(Term):
    name: str


@dataclass(frozen=True)
class AConst(Term):
    value: int

    def __post_init__(self):
        if self.value not in (0, 1):
            raise ArithError("only the constants 0 and 1 exist in the language")


@dataclass(frozen=True)
class AAdd(Term):
    left: Term
    right: Term


@dataclass(frozen=True)
class AMul(Term):
    left: Term
    right: Term


@dataclass(frozen=True)
class AFormula:
    pass


@dataclass(frozen=True)
class AEq(AFormula):
    left: Term
    right: Term


@dataclass(frozen=True)
class ALt(AFormula):
    left: Term
    right: Term


@dataclass(frozen=True)
class ANot(AFormula):
    body: AFormula


@dataclass(frozen=True)
class AAnd(AFormula):
    left: AFormula
    right: AFormula


@dataclass(frozen=True)
class AOr(AFormula):
    left: AFormula
    right: AFormula


@dataclass(frozen=True)
class AImplies(AFormula):
    left: AFormula
    right: AFormula


@dataclass(frozen=True)
class AForall(AFormula):
    var: str
    body: AFormula


@dataclass(frozen=True)
class AExists(AFormula):
    var: str
    body: AFormula


def a_children(f: AFormula) -> Tuple[AFormula, ...]:
    if isinstance(f, ANot):
        return (f.body,)
    if isinstance(f, (AAnd, AOr, AImplies)):
        return (f.left, f.right)
    if isinstance(f, (AForall, AExists)):
        return (f.body,)
    return ()


def term_vars(t: Term) -> frozenset:
    if isinstance(t, AVar):
        return frozenset((t.name,))
    if isinstance(t, (AAdd, AMul)):
        return term_vars(t.left) | term_vars(t.right)
    return frozenset()


def a_free_vars(f: AFormula) -> frozenset:
    if isinstance(f, (AEq, ALt)):
        return term_vars(f.left) | term_vars(f.right)
    if isinstance(f, (AForall, AExists)):
        return a_free_vars(f.body) - {f.var}
    out = frozenset()
    for c in a_children(f):
        out |= a_free_vars(c)
    return out


# ---------------------------------------------------------------------------
# Parser for the arithmetic grammar: + * = < 0 1 & | ! -> A E

_ATOKEN = re.compile(
    r"\s*(?:(?P<arrow>->)|(?P<num>[01])|(?P<ident>[a-z][a-zA-Z0-9_]*)"
    r"|(?P<kw>[AE])(?![a-zA-Z0-9_])|(?P<sym>[+*=<&|!().]))"
)


class _AParser:
    def __init__(self, text: str):
        self.toks: List[Tuple[str, str]] = []
        pos = 0
        while pos < len(text):
            m = _ATOKEN.match(text, pos)
            if not m:
                if text[pos:].strip():
                    raise ArithError(f"unexpected character {text[pos:].strip()[0]!r} at offset {pos}")
                break
            kind = m.lastgroup
            self.toks.append((kind, m.group(kind)))
            pos = m.end()
        self.toks.append(("eof", ""))
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def next(self):
        t = self.toks[self.i]
        if t[0] != "eof":
            self.i += 1
        return t

    def expect_sym(self, s: str):
        k, v = self.peek()
        if k != "sym" or v != s:
            raise ArithError(f"expected {s!r}, found {v or 'end of input'!r}")
        return self.next()

    def parse(self) -> AFormula:
        f = self.parse_implies()
        if self.peek()[0] != "eof":
            raise ArithError(f"unexpected trailing input {self.peek()[1]!r}")
        return f

    def parse_implies(self) -> AFormula:
        f = self.parse_or()
        if self.peek()[0] == "arrow":
            self.next()
            return AImplies(f, self.parse_implies())
        return f

    def parse_or(self) -> AFormula:
        f = self.parse_and()
        while self.peek() == ("sym", "|"):
            self.next()
            f = AOr(f, self.parse_and())
        return f

    def parse_and(self) -> AFormula:
        f = self.parse_unary()
        while self.peek() == ("sym", "&"):
            self.next()
            f = AAnd(f, self.parse_unary())
        return f

    def parse_unary(self) -> AFormula:
        k, v = self.peek()
        if (k, v) == ("sym", "!"):
            self.next()
            return ANot(self.parse_unary())
        if k == "kw":
            self.next()
            ik, iv = self.next()
            if ik != "ident":
                raise ArithError("expected a variable after quantifier")
            self.expect_sym(".")
            body = self.parse_implies()
            return (AForall if v == "A" else AExists)(iv, body)
        if (k, v) == ("sym", "("):
            save = self.i
            self.next()
            try:
                f = self.parse_implies()
                self.expect_sym(")")
                if self.peek()[1] in ("=", "<", "+", "*"):
                    raise ArithError("parenthesized term")
                return f
            except ArithError:
                self.i = save
        return self.parse_atom()

    def parse_atom(self) -> AFormula:
        left = self.parse_term()
        k, v = self.peek()
        if (k, v) == ("sym", "="):
            self.next()
            return AEq(left, self.parse_term())
        if (k, v) == ("sym", "<"):
            self.next()
            return ALt(left, self.parse_term())
        raise ArithError(f"expected '=' or '<', found {v or 'end of input'!r}")

    def parse_term(self) -> Term:
        t = self.parse_factor()
        while self.peek() == ("sym", "+"):
            self.next()
            t = AAdd(t, self.parse_factor())
        return t

    def parse_factor(self) -> Term:
        t = self.parse_primary()
        while self.peek() == ("sym", "*"):
            self.next()
            t = AMul(t, self.parse_primary())
        return t

    def parse_primary(self) -> Term:
        k, v = self.next()
        if k == "num":
            return AConst(int(v))
        if k == "ident":
            return AVar(v)
        if (k, v) == ("sym", "("):
            t = self.parse_term()
            self.expect_sym(")")
            return t
        raise ArithError(f"expected a term, found {v or 'end of input'!r}")


def parse_arith(text: str) -> AFormula:
    return _AParser(text).parse()


def render_arith(f: AFormula) -> str:
    def term(t: Term, prec: int) -> str:
        if isinstance(t, AVar):
            return t.name
        if isinstance(t, AConst):
            return str(t.value)
        if isinstance(t, AAdd):
            s = f"{term(t.left, 1)} + {term(t.right, 2)}"
            return f"({s})" if prec > 1 else s
        s = f"{term(t.left, 2)} * {term(t.right, 3)}"
        return f"({s})" if prec > 2 else s

    def go(g: AFormula, prec: int) -> str:
        if isinstance(g, AEq):
            return f"{term(g.left, 1)} = {term(g.right, 1)}"
        if isinstance(g, ALt):
            return f"{term(g.left, 1)} < {term(g.right, 1)}"
        if isinstance(g, ANot):
            s = f"! {go(g.body, 4)}"
            return f"({s})" if prec > 4 else s
        if isinstance(g, AAnd):
            s = f"{go(g.left, 3)} & {go(g.right, 4)}"
            return f"({s})" if prec > 3 else s
        if isinstance(g, AOr):
            s = f"{go(g.left, 2)} | {go(g.right, 3)}"
            return f"({s})" if prec > 2 else s
        if isinstance(g, AImplies):
            s = f"{go(g.left, 2)} -> {go(g.right, 1)}"
            return f"({s})" if prec > 1 else s
        q = "A" if isinstance(g, AForall) else "E"
        s = f"{q} {g.var} . {go(g.body, 0)}"
        return f"({s})" if prec > 0 else s

    return go(f, 0)


# ---------------------------------------------------------------------------
# Number codes


def encode_number(n: int) -> Tuple[Graph, int]:
    """The code of n: a center vertex whose neighbors form an (n+3)-cycle.
    Returns (graph, center); the graph has n+4 vertices."""
    if n < 0:
        raise ArithError("only natural numbers are coded")
    size = n + 3
    edges = [(0, i) for i in range(1, size + 1)]
    edges += [(i, i % size + 1) for i in range(1, size + 1)]
    return Graph.make(size + 1, edges), 0


def decode_number(g: Graph, v: int) -> Optional[int]:
    """The number coded by ``v``, or None: the neighbor set must be
    nonempty, connected inside itself, with every member of degree two
    inside the set (a single cycle)."""
    if not (0 <= v < g.n):
        raise ArithError(f"vertex {v} not in the graph")
    nbrs = g.neighbors(v)
    if len(nbrs) < 3:
        return None
    sub = g.induced(nbrs)
    if any(sub.degree(i) != 2 for i in range(sub.n)):
        return None
    if not all(graph_connected(sub, 0, i) for i in range(sub.n)):
        return None
    return len(nbrs) - 3


def represents_number() -> Formula:
    """Free variable v: the neighbors of v form a nonempty connected set
    with every member of degree two inside the set.  Connectivity uses the
    closure construction relativized to the neighbor set, so the formula is
    modal; adequacy bound |G| + 1."""
    member = lambda z: Edge(z, "v")
    deg2 = Forall(
        "m",
        Implies(
            Edge("m", "v"),
            exists_many(
                ["p", "q"],
                conj(
                    [
                        neq("p", "q"),
                        Edge("p", "v"),
                        Edge("q", "v"),
                        Edge("p", "m"),
                        Edge("q", "m"),
                        Forall(
                            "r",
                            Implies(
                                And(Edge("r", "v"), Edge("r", "m")),
                                Or(Eq("r", "p"), Eq("r", "q")),
                            ),
                        ),
                    ]
                ),
            ),
        ),
    )
    connected = Forall(
        "s",
        Implies(
            Edge("s", "v"),
            Forall(
                "t",
                Implies(Edge("t", "v"), connected_within("s", "t", member, tags="rn")),
            ),
        ),
    )
    return conj([Exists("m0", Edge("m0", "v")), deg2, connected])


def represents_number_ceiling(g: Graph) -> int:
    return g.n + 1


# ---------------------------------------------------------------------------
# Cycle naming blocks for the relation gadgets

_tag_counter = count()


def _cycle_names(prefix: str, length: int) -> List[str]:
    return [f"{prefix}{i}" for i in range(1, length + 1)]


def _cycle_bindings(op: str, names: List[str]) -> List[Tuple[str, List[Formula]]]:
    """Existential bindings naming the neighbor cycle of ``op``; immediate
    conjuncts carry the adjacency and distinctness so backtracking prunes."""
    bindings = []
    L = len(names)
    for i, a in enumerate(names):
        clauses: List[Formula] = [Edge(a, op)]
        clauses += [neq(a, names[j]) for j in range(i)]
        if i > 0:
            clauses.append(Edge(a, names[i - 1]))
        if i == L - 1:
            clauses.append(Edge(a, names[0]))
        bindings.append((a, clauses))
    return bindings


def _cycle_coverage(op: str, names: List[str], guard: str) -> Formula:
    return Forall(guard, Implies(Edge(guard, op), disj([Eq(guard, a) for a in names])))


def _cycle_exactness(op: str, names: List[str], allow: List[str], guard_prefix: str) -> List[Formula]:
    out = []
    L = len(names)
    for i, a in enumerate(names):
        targets = [op, names[(i - 1) % L], names[(i + 1) % L]]
        targets = list(dict.fromkeys(targets)) + allow
        out.append(
            Forall(
                f"{guard_prefix}{i}",
                Implies(
                    Edge(f"{guard_prefix}{i}", a),
                    disj([Eq(f"{guard_prefix}{i}", t) for t in targets]),
                ),
            )
        )
    return out


@dataclass
class _GadgetCycles:
    """One operand cycle inside a gadget disjunct."""

    op: str
    names: List[str]

    @property
    def usable(self) -> List[str]:
        return self.names[3:]


def _gadget(ops_lengths: List[Tuple[str, int]], wiring) -> Formula:
    """One disjunct: name each operand's cycle at a concrete length, then
    add hub and connectors per the wiring function, which receives the
    cycles and returns (connector target lists, extra tail conjuncts).

    Internal variable names all live in the ``gv.../q...`` reserved
    namespace so they never capture user variables.
    """
    tag = next(_tag_counter)
    cycles = []
    for idx, (op, L) in enumerate(ops_lengths):
        cycles.append(_GadgetCycles(op, _cycle_names(f"gvk{tag}_{idx}_", L)))
    connector_targets, extra = wiring(cycles)
    hub = f"gvh{tag}"
    connectors = [f"gvc{tag}_{i}" for i in range(len(connector_targets))]

    bindings: List[Tuple[str, List[Formula]]] = []
    for idx, cyc in enumerate(cycles):
        cb = _cycle_bindings(cyc.op, cyc.names)
        cb[-1] = (cb[-1][0], cb[-1][1] + [_cycle_coverage(cyc.op, cyc.names, f"gvg{tag}_{idx}")])
        bindings.extend(cb)
    bindings.append((hub, []))
    for i, (c, targets) in enumerate(zip(connectors, connector_targets)):
        # positive edges immediately under the binder: existing candidates
        # for a connector die instantly unless actually wired
        bindings.append((c, [Edge(c, t) for t in targets]))

    tail: List[Formula] = []
    for idx, cyc in enumerate(cycles):
        tail.extend(_cycle_exactness(cyc.op, cyc.names, connectors, f"gve{tag}_{idx}_"))
    for i, (c, targets) in enumerate(zip(connectors, connector_targets)):
        tail.append(exact_neighbors(c, [hub] + targets, f"gvx{tag}_{i}"))
    tail.append(exact_neighbors(hub, connectors, f"gvxh{tag}"))
    tail.extend(extra)
    return exists_scoped(bindings, conj(tail))


def _leq_disjunct(lu: int, lv: int) -> Formula:
    def wiring(cycles):
        u, v = cycles
        return [[ua, va] for ua, va in zip(u.usable, v.usable)], []

    return _gadget([("u", lu), ("v", lv)], wiring)


def leq_formula(cap: int = DEFAULT_VALUE_CAP) -> Formula:
    """value(u) <= value(v) for codes up to the cap: possibly, connectors
    off a hub injectively wire all but three neighbors of u to distinct
    all-but-three neighbors of v.  Free variables u, v; adequacy bound
    |G| + value(u) + 1."""
    return Diamond(
        disj(
            [
                _leq_disjunct(lu, lv)
                for lu in range(3, cap + 4)
                for lv in range(lu, cap + 4)
            ]
        )
    )


def lt_formula(cap: int = DEFAULT_VALUE_CAP) -> Formula:
    """Strictly fewer usable neighbors: the same injection with the target
    cycle strictly longer."""
    return Diamond(
        disj(
            [
                _leq_disjunct(lu, lv)
                for lu in range(3, cap + 4)
                for lv in range(lu + 1, cap + 4)
            ]
        )
    )


def eq_formula(cap: int = DEFAULT_VALUE_CAP) -> Formula:
    """Same coded value: the same vertex, or a full correspondence using
    all but three neighbors of each."""
    return Diamond(
        Or(
            Eq("u", "v"),
            disj([_leq_disjunct(l, l) for l in range(3, cap + 4)]),
        )
    )


def plus_formula(cap: int = DEFAULT_VALUE_CAP) -> Formula:
    """value(u) + value(v) = value(w): a correspondence between the usable
    neighbors of u and v together and the usable neighbors of w.  Free
    variables u, v, w."""
    disjuncts = []
    for lu in range(3, cap + 4):
        for lv in range(3, cap + 4):
            lw = (lu - 3) + (lv - 3) + 3

            def wiring(cycles):
                u, v, w = cycles
                sources = u.usable + v.usable
                return [[s, t] for s, t in zip(sources, w.usable)], []

            disjuncts.append(_gadget([("u", lu), ("v", lv), ("w", lw)], wiring))
    return Diamond(disj(disjuncts))


def times_formula(cap: int = DEFAULT_VALUE_CAP) -> Formula:
    """value(u) * value(v) = value(w): every pair of usable neighbors of u
    and v arises exactly once in association with a distinct usable
    neighbor of w.  Free variables u, v, w."""
    disjuncts = []
    for lu in range(3, cap + 4):
        for lv in range(3, cap + 4):
            lw = (lu - 3) * (lv - 3) + 3

            def wiring(cycles):
                u, v, w = cycles
                pairs = [[a, b] for a in u.usable for b in v.usable]
                return [p + [t] for p, t in zip(pairs, w.usable)], []

            disjuncts.append(_gadget([("u", lu), ("v", lv), ("w", lw)], wiring))
    return Diamond(disj(disjuncts))


def zero_formula() -> Formula:
    """Free variable u: the neighbors of u are exactly a triangle."""
    tag = next(_tag_counter)
    names = _cycle_names(f"gvz{tag}_", 3)
    bindings = _cycle_bindings("u", names)
    tail = [_cycle_coverage("u", names, f"gvzg{tag}")]
    tail += _cycle_exactness("u", names, [], f"gvze{tag}_")
    return exists_scoped(bindings, conj(tail))


def one_formula() -> Formula:
    """Free variable u: the neighbors of u are exactly a 4-cycle."""
    tag = next(_tag_counter)
    names = _cycle_names(f"gvo{tag}_", 4)
    bindings = _cycle_bindings("u", names)
    tail = [_cycle_coverage("u", names, f"gvog{tag}")]
    tail += _cycle_exactness("u", names, [], f"gvoe{tag}_")
    return exists_scoped(bindings, conj(tail))


def repr_guard(var: str, cap: int) -> Formula:
    """Clean-code guard used inside translation possibility operators: the
    neighbors of ``var`` are exactly a cycle of some length up to cap+3."""
    options = []
    for L in range(3, cap + 4):
        tag = next(_tag_counter)
        names = _cycle_names(f"gvr{tag}_", L)
        bindings = _cycle_bindings(var, names)
        tail = [_cycle_coverage(var, names, f"gvrg{tag}")]
        tail += _cycle_exactness(var, names, [], f"gvre{tag}_")
        options.append(exists_scoped(bindings, conj(tail)))
    return disj(options)


# ---------------------------------------------------------------------------
# Flattening


_FRESH = count()


def _fresh_avar() -> str:
    return f"q{next(_FRESH)}"


def _is_simple(t: Term) -> bool:
    return isinstance(t, (AVar, AConst))


def _is_flat_atom(f: AFormula) -> bool:
    if isinstance(f, (AEq, ALt)):
        l, r = f.left, f.right
        if _is_simple(l) and _is_simple(r):
            return True
        if (
            isinstance(f, AEq)
            and isinstance(l, (AAdd, AMul))
            and _is_simple(l.left)
            and _is_simple(l.right)
            and _is_simple(r)
        ):
            return True
    return False


def is_flat(f: AFormula) -> bool:
    if isinstance(f, (AEq, ALt)):
        return _is_flat_atom(f)
    return all(is_flat(c) for c in a_children(f))


def _extract(t: Term, defs: List[AFormula]) -> Term:
    """Rewrite a term to a simple one, accumulating defining equations."""
    if _is_simple(t):
        return t
    left = _extract(t.left, defs)
    right = _extract(t.right, defs)
    v = AVar(_fresh_avar())
    defs.append(AEq(type(t)(left, right), v))
    return v


def flatten(f: AFormula) -> AFormula:
    """Equivalent formula with no compound terms: fresh existential
    variables name the subterms, so every atom is a single sum or product
    equation, a comparison, or an equality over simple terms."""
    if isinstance(f, (AEq, ALt)):
        if _is_flat_atom(f):
            return f
        defs: List[AFormula] = []
        l, r = f.left, f.right
        if isinstance(f, AEq):
            if isinstance(r, (AAdd, AMul)) and not isinstance(l, (AAdd, AMul)):
                l, r = r, l
            if isinstance(l, (AAdd, AMul)):
                atom: AFormula = AEq(
                    type(l)(_extract(l.left, defs), _extract(l.right, defs)),
                    _extract(r, defs),
                )
            else:
                atom = AEq(_extract(l, defs), _extract(r, defs))
        else:
            atom = ALt(_extract(l, defs), _extract(r, defs))
        out = atom
        for d in reversed(defs):
            assert isinstance(d.right, AVar)
            out = AExists(d.right.name, AAnd(d, out))
        return out
    if isinstance(f, ANot):
        return ANot(flatten(f.body))
    if isinstance(f, (AAnd, AOr, AImplies)):
        return type(f)(flatten(f.left), flatten(f.right))
    if isinstance(f, (AForall, AExists)):
        return type(f)(f.var, flatten(f.body))
    raise ArithError(f"cannot flatten {f!r}")


# ---------------------------------------------------------------------------
# Positive normal form (negations pushed into atoms and resolved)


def _neg_atom(f: AFormula) -> AFormula:
    """Positive equivalent of a negated flat atom over the naturals."""
    if isinstance(f, ALt):
        return AOr(ALt(f.right, f.left), AEq(f.left, f.right))
    assert isinstance(f, AEq)
    l, r = f.left, f.right
    if isinstance(l, (AAdd, AMul)):
        w = AVar(_fresh_avar())
        return AExists(w.name, AAnd(AEq(l, w), _neg_atom(AEq(w, r))))
    if isinstance(r, AConst):
        if r.value == 0:
            # x /= 0 iff some zero is below x
            w = _fresh_avar()
            return AExists(w, AAnd(AEq(AVar(w), AConst(0)), ALt(AVar(w), l)))
        # x /= 1 iff x = 0 or some one is below x
        w = _fresh_avar()
        return AOr(
            AEq(l, AConst(0)),
            AExists(w, AAnd(AEq(AVar(w), AConst(1)), ALt(AVar(w), l))),
        )
    if isinstance(l, AConst):
        return _neg_atom(AEq(r, l))
    return AOr(ALt(l, r), ALt(r, l))


def positive_form(f: AFormula, neg: bool = False) -> AFormula:
    if isinstance(f, (AEq, ALt)):
        return _neg_atom(f) if neg else f
    if isinstance(f, ANot):
        return positive_form(f.body, not neg)
    if isinstance(f, AAnd):
        l, r = positive_form(f.left, neg), positive_form(f.right, neg)
        return AOr(l, r) if neg else AAnd(l, r)
    if isinstance(f, AOr):
        l, r = positive_form(f.left, neg), positive_form(f.right, neg)
        return AAnd(l, r) if neg else AOr(l, r)
    if isinstance(f, AImplies):
        if neg:
            return AAnd(positive_form(f.left, False), positive_form(f.right, True))
        return AOr(positive_form(f.left, True), positive_form(f.right, False))
    if isinstance(f, AForall):
        body = positive_form(f.body, neg)
        return AExists(f.var, body) if neg else AForall(f.var, body)
    if isinstance(f, AExists):
        body = positive_form(f.body, neg)
        return AForall(f.var, body) if neg else AExists(f.var, body)
    raise ArithError(f"cannot normalize {f!r}")


def _bind_consts(f: AFormula) -> AFormula:
    """Replace constant arguments of sums, products and comparisons by
    guarded fresh variables, leaving only variable arguments plus the
    atomic forms x = 0 and x = 1."""

    def fix_atom(f: AFormula) -> AFormula:
        defs: List[AFormula] = []

        def simple(t: Term) -> Term:
            if isinstance(t, AConst):
                name = _fresh_avar()
                defs.append(AEq(AVar(name), t))
                return AVar(name)
            return t

        if isinstance(f, AEq):
            l, r = f.left, f.right
            if isinstance(l, (AAdd, AMul)):
                atom: AFormula = AEq(type(l)(simple(l.left), simple(l.right)), simple(r))
            elif isinstance(r, AConst) and isinstance(l, AVar):
                return f  # x = 0 / x = 1 stays atomic
            elif isinstance(l, AConst) and isinstance(r, AVar):
                return AEq(r, l)
            elif isinstance(l, AConst) and isinstance(r, AConst):
                return f  # decided in translation
            else:
                atom = f
        else:
            atom = ALt(simple(f.left), simple(f.right))
        out: AFormula = atom
        for d in reversed(defs):
            out = AExists(d.left.name, AAnd(d, out))
        return out

    if isinstance(f, (AEq, ALt)):
        return fix_atom(f)
    if isinstance(f, ANot):
        return ANot(_bind_consts(f.body))
    if isinstance(f, (AAnd, AOr, AImplies)):
        return type(f)(_bind_consts(f.left), _bind_consts(f.right))
    if isinstance(f, (AForall, AExists)):
        return type(f)(f.var, _bind_consts(f.body))
    raise ArithError(f"cannot normalize {f!r}")


# ---------------------------------------------------------------------------
# Translation


class Translator:
    def __init__(self, cap: int = DEFAULT_VALUE_CAP):
        self.cap = cap
        self._leq = leq_formula(cap)
        self._lt = lt_formula(cap)
        self._eq = eq_formula(cap)
        self._plus = plus_formula(cap)
        self._times = times_formula(cap)
        self._zero = zero_formula()
        self._one = one_formula()

    def _subst2(self, template: Formula, u: str, v: str) -> Formula:
        out = rename_var(rename_var(template, "u", "#u"), "v", "#v")
        return rename_var(rename_var(out, "#u", u), "#v", v)

    def _subst3(self, template: Formula, u: str, v: str, w: str) -> Formula:
        out = rename_var(rename_var(rename_var(template, "u", "#u"), "v", "#v"), "w", "#w")
        return rename_var(rename_var(rename_var(out, "#u", u), "#v", v), "#w", w)

    def _atom(self, f: AFormula) -> Formula:
        if isinstance(f, AEq):
            l, r = f.left, f.right
            if isinstance(l, AConst) and isinstance(r, AConst):
                return TRUE if l.value == r.value else FALSE
            if isinstance(l, AVar) and isinstance(r, AConst):
                base = self._zero if r.value == 0 else self._one
                return self._subst2(base, l.name, l.name)
            if isinstance(l, AVar) and isinstance(r, AVar):
                return self._subst2(self._eq, l.name, r.name)
            if isinstance(l, AAdd):
                return self._subst3(self._plus, l.left.name, l.right.name, r.name)
            if isinstance(l, AMul):
                return self._subst3(self._times, l.left.name, l.right.name, r.name)
        if isinstance(f, ALt):
            return self._subst2(self._lt, f.left.name, f.right.name)
        raise ArithError(f"not a translatable flat atom: {render_arith(f)}")

    def translate(self, f: AFormula) -> Formula:
        """The recursive translation of a flat arithmetic formula into the
        modal language of graphs."""
        if not is_flat(f):
            raise ArithError("translation requires a flat formula (use flatten)")
        reserved = re.compile(r"^(gv|#)")
        allv = set(a_free_vars(f))
        stack = [f]
        while stack:
            g = stack.pop()
            if isinstance(g, (AForall, AExists)):
                allv.add(g.var)
            stack.extend(a_children(g))
        for v in sorted(allv):
            if reserved.match(v):
                raise ArithError(f"variable name {v!r} is reserved; rename it")
        f = _bind_consts(f)
        f = positive_form(f)
        return self._go(f)

    def _go(self, f: AFormula) -> Formula:
        if isinstance(f, (AEq, ALt)):
            return self._atom(f)
        if isinstance(f, AAnd):
            return And(self._go(f.left), self._go(f.right))
        if isinstance(f, AOr):
            return Or(self._go(f.left), self._go(f.right))
        if isinstance(f, AExists):
            guards = [repr_guard(v, self.cap) for v in sorted(a_free_vars(f.body))]
            return Diamond(Exists(f.var, conj(guards + [self._go(f.body)])))
        if isinstance(f, AForall):
            inner = AExists(f.var, positive_form(f.body, neg=True))
            return Not(self._go(inner))
        raise ArithError(f"cannot translate {f!r}")


def translate(f: AFormula, cap: int = DEFAULT_VALUE_CAP) -> Formula:
    return Translator(cap).translate(f)


def recommended_ceiling(f: AFormula, cap: int = DEFAULT_VALUE_CAP, base: int = 1) -> int:
    """Documented per-sentence ceiling for evaluating a translation at a
    ``base``-vertex world: one code per quantified or free variable plus
    the largest gadget (hub and connectors) plus slack."""
    nquant = 0
    stack = [f]
    has_times = False
    has_plus = False
    while stack:
        g = stack.pop()
        if isinstance(g, (AForall, AExists)):
            nquant += 1
        if isinstance(g, AEq) and isinstance(g.left, AMul):
            has_times = True
        if isinstance(g, AEq) and isinstance(g.left, AAdd):
            has_plus = True
        stack.extend(a_children(g))
    nvars = nquant + len(a_free_vars(f))
    if has_times:
        extra = cap * cap + 1
    elif has_plus:
        extra = 2 * cap + 1
    else:
        extra = cap + 1
    return base + nvars * (cap + 4) + extra + 2


def atom_ceiling(world: Graph, kind: str, m: int, n: int = 0) -> int:
    """Ceiling for evaluating a relation formula on codes with the given
    values: the world plus connectors plus hub plus slack."""
    connectors = {"leq": m, "lt": m, "eq": m, "plus": m + n, "times": m * n}[kind]
    return world.n + connectors + 1 + 2


# ---------------------------------------------------------------------------
# Bounded arithmetic oracle


def arith_oracle(f: AFormula, cutoff: int) -> bool:
    """Truth over the naturals with all quantifiers restricted to
    0..cutoff."""

    def term(t: Term, env: Dict[str, int]) -> int:
        if isinstance(t, AVar):
            return env[t.name]
        if isinstance(t, AConst):
            return t.value
        if isinstance(t, AAdd):
            return term(t.left, env) + term(t.right, env)
        return term(t.left, env) * term(t.right, env)

    def go(g: AFormula, env: Dict[str, int]) -> bool:
        if isinstance(g, AEq):
            return term(g.left, env) == term(g.right, env)
        if isinstance(g, ALt):
            return term(g.left, env) < term(g.right, env)
        if isinstance(g, ANot):
            return not go(g.body, env)
        if isinstance(g, AAnd):
            return go(g.left, env) and go(g.right, env)
        if isinstance(g, AOr):
            return go(g.left, env) or go(g.right, env)
        if isinstance(g, AImplies):
            return (not go(g.left, env)) or go(g.right, env)
        if isinstance(g, AForall):
            return all(go(g.body, {**env, g.var: k}) for k in range(cutoff + 1))
        if isinstance(g, AExists):
            return any(go(g.body, {**env, g.var: k}) for k in range(cutoff + 1))
        raise ArithError(f"cannot evaluate {g!r}")

    frees = a_free_vars(f)
    if frees:
        raise ArithError(f"oracle needs a closed formula; free: {sorted(frees)}")
    return go(f, {})
