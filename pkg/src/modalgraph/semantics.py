"""Bounded potentialist evaluation of modal formulas at finite graph worlds.

A world class fixes a size ceiling and an optional first-order theory; the
frame is the (finite) set of graphs admitted by both.  ``<>`` searches
admitted extensions of the current world, ``[]`` is its dual, quantifiers
range over the current world, and ``@`` re-evaluates at a referenced world
on the stack.  Verdicts are exact in that truncated frame.

Three search strategies implement the extension search:

* enumeration: level-wise generation of extension patterns, deduplicated by
  colored canonical form (sound for any formula, any mode, any theory);
* tuple search: for ``<>`` over an existential prefix with quantifier-free
  matrix, only edges among the witness tuple and its parameters matter, so
  candidates shrink to tuple assignments plus local edge patterns;
* witness search: for existential matrices whose universal parts are
  quantifier-free and whose fresh witnesses carry exact-neighborhood
  constraints, a backtracking search instantiates witnesses directly.

The last two are sound and complete for their syntactic fragments (an
induced restriction of any satisfying extension to the old world plus the
witness tuple still satisfies such a matrix) and only apply in direct mode
with an empty theory; everything else falls back to enumeration.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple

from .formula import (
    And,
    At,
    Bot,
    Box,
    Diamond,
    Edge,
    Eq,
    Exists,
    Forall,
    Formula,
    Iff,
    Implies,
    Not,
    Or,
    PropVar,
    Top,
    alpha_key,
    children,
    classify,
    free_vars,
    walk,
    FRAGMENT_L,
)
from .graphs import (
    Graph,
    canonical_form_adj,
    embeddings,
    from_adjacency,
    _children_adj,
)


class SemanticsError(Exception):
    pass


class NotAdmitted(SemanticsError):
    """The entry world violates the world class (size or theory)."""


class SearchBudgetExceeded(SemanticsError):
    """The modal search explored more candidates than the configured budget."""


DIRECT = "direct"
EMBEDDED = "embedded"

EXACT_IN_FRAME = "ExactInFrame"
SOUND_POSITIVE = "SoundPositive"
SOUND_NEGATIVE = "SoundNegative"


@dataclass(frozen=True)
class WorldClass:
    """Ceiling plus an optional closed first-order theory constraint."""

    ceiling: int
    theory: Tuple[Formula, ...] = ()

    def __post_init__(self):
        if self.ceiling < 1:
            raise SemanticsError("ceiling must be at least 1")
        for t in self.theory:
            if classify(t) != FRAGMENT_L:
                raise SemanticsError(f"theory formula is not first-order: {t}")
            if free_vars(t):
                raise SemanticsError(f"theory formula is not closed: {t}")


@dataclass(frozen=True)
class EvalConfig:
    world_class: WorldClass
    accessibility: str = DIRECT
    cache_enabled: bool = True
    search_budget: Optional[int] = None
    worlds_limit: int = 8
    enumeration_only: bool = False  # disable the fragment fast paths (testing)

    def __post_init__(self):
        if self.accessibility not in (DIRECT, EMBEDDED):
            raise SemanticsError(f"unknown accessibility mode {self.accessibility!r}")


@dataclass
class Verdict:
    value: bool
    witness: Optional[List[Graph]] = None
    soundness: str = EXACT_IN_FRAME


# ---------------------------------------------------------------------------
# Theory checking (classical first-order evaluation)


def check_theory(g: Graph, theory: Sequence[Formula]) -> bool:
    """Classical truth of a set of closed first-order sentences in ``g``."""
    adj = g.adjacency()
    dom = tuple(range(g.n))
    for t in theory:
        if classify(t) != FRAGMENT_L:
            raise SemanticsError(f"theory formula is not first-order: {t}")
        if free_vars(t):
            raise SemanticsError(f"theory formula is not closed: {t}")
        if not _compile_fo(t)(adj, dom, {}, None):
            return False
    return True


# ---------------------------------------------------------------------------
# Compiled first-order evaluation.
#
# Closures take (adj, dom, env, worlds): adjacency masks, the current
# quantifier domain, the variable environment, and the label-world table
# (None entry = evaluation entry world) used by actuality membership and
# domain switches.

_MISSING = object()


def _is_membership(f: Formula) -> Optional[Tuple[Optional[int], str]]:
    """Match the actuality-predicate shape ``@[i] E u . u = x``."""
    if (
        isinstance(f, At)
        and isinstance(f.body, Exists)
        and isinstance(f.body.body, Eq)
        and f.body.body.left == f.body.var
        and f.body.body.right != f.body.var
    ):
        return (f.label, f.body.body.right)
    return None


def is_fo(f: Formula) -> bool:
    """Modal-free up to actuality membership predicates and general ``@``
    over modal-free bodies (a pure domain switch)."""
    if isinstance(f, (Diamond, Box, PropVar)):
        return False
    if isinstance(f, At):
        return _is_membership(f) is not None or is_fo(f.body)
    return all(is_fo(c) for c in children(f))


def _compile_fo(f: Formula) -> Callable:
    if isinstance(f, Top):
        return lambda adj, dom, env, worlds: True
    if isinstance(f, Bot):
        return lambda adj, dom, env, worlds: False
    if isinstance(f, Edge):
        x, y = f.left, f.right
        return lambda adj, dom, env, worlds: (adj[env[x]] >> env[y]) & 1 == 1
    if isinstance(f, Eq):
        x, y = f.left, f.right
        return lambda adj, dom, env, worlds: env[x] == env[y]
    if isinstance(f, Not):
        b = _compile_fo(f.body)
        return lambda adj, dom, env, worlds: not b(adj, dom, env, worlds)
    if isinstance(f, And):
        l, r = _compile_fo(f.left), _compile_fo(f.right)
        return lambda adj, dom, env, worlds: l(adj, dom, env, worlds) and r(adj, dom, env, worlds)
    if isinstance(f, Or):
        l, r = _compile_fo(f.left), _compile_fo(f.right)
        return lambda adj, dom, env, worlds: l(adj, dom, env, worlds) or r(adj, dom, env, worlds)
    if isinstance(f, Implies):
        l, r = _compile_fo(f.left), _compile_fo(f.right)
        return lambda adj, dom, env, worlds: (not l(adj, dom, env, worlds)) or r(adj, dom, env, worlds)
    if isinstance(f, Iff):
        l, r = _compile_fo(f.left), _compile_fo(f.right)
        return lambda adj, dom, env, worlds: l(adj, dom, env, worlds) == r(adj, dom, env, worlds)
    if isinstance(f, Forall):
        v, b = f.var, _compile_fo(f.body)

        def run_all(adj, dom, env, worlds, _v=None, _b=b, _var=v):
            old = env.get(_var, _MISSING)
            try:
                for w in dom:
                    env[_var] = w
                    if not _b(adj, dom, env, worlds):
                        return False
                return True
            finally:
                if old is _MISSING:
                    env.pop(_var, None)
                else:
                    env[_var] = old

        return run_all
    if isinstance(f, Exists):
        v, b = f.var, _compile_fo(f.body)

        def run_any(adj, dom, env, worlds, _b=b, _var=v):
            old = env.get(_var, _MISSING)
            try:
                for w in dom:
                    env[_var] = w
                    if _b(adj, dom, env, worlds):
                        return True
                return False
            finally:
                if old is _MISSING:
                    env.pop(_var, None)
                else:
                    env[_var] = old

        return run_any
    if isinstance(f, At):
        mem = _is_membership(f)
        if mem is not None:
            lbl, var = mem

            def member(adj, dom, env, worlds, _lbl=lbl, _var=var):
                mask = worlds[_lbl]
                return (mask >> env[_var]) & 1 == 1

            return member
        b = _compile_fo(f.body)
        lbl = f.label

        def switch(adj, dom, env, worlds, _b=b, _lbl=lbl):
            mask = worlds[_lbl]
            sub = _mask_bits(mask)
            return _b(adj, sub, env, worlds)

        return switch
    raise SemanticsError(f"not compilable to first-order code: {f!r}")


def _mask_bits(mask: int) -> Tuple[int, ...]:
    out = []
    while mask:
        b = mask & -mask
        out.append(b.bit_length() - 1)
        mask ^= b
    return tuple(out)


# ---------------------------------------------------------------------------
# Negation normal form


def nnf(f: Formula, neg: bool = False) -> Formula:
    if isinstance(f, Top):
        return FALSE_ if neg else f
    if isinstance(f, Bot):
        return TRUE_ if neg else f
    if isinstance(f, (Edge, Eq, PropVar)):
        return Not(f) if neg else f
    if _is_membership(f) is not None:
        return Not(f) if neg else f
    if isinstance(f, Not):
        return nnf(f.body, not neg)
    if isinstance(f, And):
        l, r = nnf(f.left, neg), nnf(f.right, neg)
        return Or(l, r) if neg else And(l, r)
    if isinstance(f, Or):
        l, r = nnf(f.left, neg), nnf(f.right, neg)
        return And(l, r) if neg else Or(l, r)
    if isinstance(f, Implies):
        if neg:
            return And(nnf(f.left, False), nnf(f.right, True))
        return Or(nnf(f.left, True), nnf(f.right, False))
    if isinstance(f, Iff):
        pos = Or(And(nnf(f.left, False), nnf(f.right, False)),
                 And(nnf(f.left, True), nnf(f.right, True)))
        if neg:
            return Or(And(nnf(f.left, False), nnf(f.right, True)),
                      And(nnf(f.left, True), nnf(f.right, False)))
        return pos
    if isinstance(f, Forall):
        return Exists(f.var, nnf(f.body, True)) if neg else Forall(f.var, nnf(f.body, False))
    if isinstance(f, Exists):
        return Forall(f.var, nnf(f.body, True)) if neg else Exists(f.var, nnf(f.body, False))
    if isinstance(f, Diamond):
        return Box(nnf(f.body, True), f.label) if neg else Diamond(nnf(f.body, False), f.label)
    if isinstance(f, Box):
        return Diamond(nnf(f.body, True), f.label) if neg else Box(nnf(f.body, False), f.label)
    if isinstance(f, At):
        return At(nnf(f.body, neg), f.label)
    raise SemanticsError(f"cannot normalize {f!r}")


from .formula import TRUE as TRUE_, FALSE as FALSE_  # noqa: E402


# ---------------------------------------------------------------------------
# Fragment analysis for the fast diamond searches


def _is_qf_local(f: Formula) -> bool:
    """Quantifier-free, modal-free; membership predicates allowed."""
    if isinstance(f, (Top, Bot, Edge, Eq)):
        return True
    if _is_membership(f) is not None:
        return True
    if isinstance(f, Not):
        return _is_qf_local(f.body)
    if isinstance(f, (And, Or, Implies, Iff)):
        return _is_qf_local(f.left) and _is_qf_local(f.right)
    return False


def _is_forall_qf(f: Formula) -> bool:
    if isinstance(f, Forall):
        return _is_forall_qf(f.body)
    return _is_qf_local(f)


def _tuple_matrix(f: Formula) -> Optional[Tuple[List[str], Formula]]:
    """Match an existential prefix over a quantifier-free matrix."""
    names: List[str] = []
    g = f
    while isinstance(g, Exists):
        names.append(g.var)
        g = g.body
    if _is_qf_local(g):
        return names, g
    return None


@dataclass
class _ExactPlan:
    targets: Tuple[str, ...]        # neighborhood bound (variable names)
    required: Tuple[str, ...]       # positive edge partners (subset of targets)


def _match_exactness(conjuncts: List[Formula], var: str) -> Optional[_ExactPlan]:
    """Find ``A w . w ~ var -> w = t1 | ... | w = tk`` among conjuncts, plus
    the positive edge literals on ``var``."""
    targets: Optional[List[str]] = None
    for c in conjuncts:
        if not isinstance(c, Forall):
            continue
        body = c.body
        if not isinstance(body, Or) and not isinstance(body, Implies):
            continue
        # NNF form: ! (w ~ var) | (w = t1 | ...)
        if isinstance(body, Implies):
            guard, rhs = body.left, body.right
            guard_ok = isinstance(guard, Edge) and var in (guard.left, guard.right) and c.var in (guard.left, guard.right)
        else:
            guard, rhs = body.left, body.right
            guard_ok = (
                isinstance(guard, Not)
                and isinstance(guard.body, Edge)
                and var in (guard.body.left, guard.body.right)
                and c.var in (guard.body.left, guard.body.right)
            )
        if not guard_ok:
            continue
        names: List[str] = []
        stack = [rhs]
        ok = True
        while stack:
            node = stack.pop()
            if isinstance(node, Or):
                stack.extend((node.left, node.right))
            elif isinstance(node, Bot):
                continue
            elif isinstance(node, Eq) and c.var in (node.left, node.right):
                other = node.right if node.left == c.var else node.left
                names.append(other)
            else:
                ok = False
                break
        if ok and all(t != c.var and t != var for t in names):
            targets = names
            break
    if targets is None:
        return None
    required = []
    for c in conjuncts:
        if isinstance(c, Edge) and var in (c.left, c.right):
            other = c.right if c.left == var else c.left
            if other in targets:
                required.append(other)
    return _ExactPlan(tuple(targets), tuple(dict.fromkeys(required)))


def _exactness_plans(f: Formula, var: str) -> List[_ExactPlan]:
    """Exact-neighborhood plans for ``var`` in ``f``: one per disjunctive
    branch carrying a neighborhood guard.  Plans from a branch use that
    branch's conjuncts for the required edges."""
    conj = _conjunctive_closure(f)
    out = []
    p = _match_exactness(conj, var)
    if p is not None:
        out.append(p)
    for c in conj:
        if isinstance(c, Or):
            out.extend(_exactness_plans(c.left, var))
            out.extend(_exactness_plans(c.right, var))
    seen = set()
    uniq = []
    for p in out:
        key = (p.targets, p.required)
        if key not in seen:
            seen.add(key)
            uniq.append(p)
    return uniq


def _flatten_and(f: Formula) -> List[Formula]:
    if isinstance(f, And):
        return _flatten_and(f.left) + _flatten_and(f.right)
    return [f]


def _conjunctive_closure(f: Formula) -> List[Formula]:
    """All conjuncts guaranteed to hold on any successful branch through
    ``f``: descends conjunctions and existential bodies, stops at
    disjunctions."""
    if isinstance(f, And):
        return _conjunctive_closure(f.left) + _conjunctive_closure(f.right)
    if isinstance(f, Exists):
        return [f] + _conjunctive_closure(f.body)
    return [f]


def _membership_forced(conjuncts: List[Formula], var: str) -> bool:
    """A positive actuality-membership literal pins ``var`` to a stacked
    world, so fresh instantiation is never needed for it."""
    for c in conjuncts:
        mem = _is_membership(c)
        if mem is not None and mem[1] == var:
            return True
    return False


def _witness_fragment_ok(f: Formula) -> bool:
    """NNF formula usable by the witness search: positive compositions of
    literals, universal quantifier-free blocks, and positive diamonds."""
    if _is_qf_local(f):
        return True
    if isinstance(f, Forall):
        return _is_forall_qf(f)
    if isinstance(f, Diamond):
        return True  # evaluated in full at the materialized world
    if isinstance(f, And) or isinstance(f, Or):
        return _witness_fragment_ok(f.left) and _witness_fragment_ok(f.right)
    if isinstance(f, Exists):
        return _witness_fragment_ok(f.body)
    return False


def _witness_vars_ok(f: Formula) -> bool:
    """Every existential variable must carry an exact-neighborhood bound (so
    fresh instantiation is complete) or be pinned to a stacked world by a
    positive membership literal (so it never needs to be fresh)."""
    if isinstance(f, Exists):
        if not _exactness_plans(f.body, f.var) and not _membership_forced(
            _conjunctive_closure(f.body), f.var
        ):
            return False
        return _witness_vars_ok(f.body)
    if isinstance(f, (And, Or)):
        return _witness_vars_ok(f.left) and _witness_vars_ok(f.right)
    return True


# ---------------------------------------------------------------------------
# Evaluation state


class _Ctx:
    __slots__ = ("n", "adj", "cur", "entry", "labels", "env")

    def __init__(self, n, adj, cur, entry, labels, env):
        self.n = n
        self.adj = adj          # list of int masks (universe adjacency)
        self.cur = cur          # int mask: current world domain
        self.entry = entry      # int mask: evaluation entry world
        self.labels = labels    # dict label -> int mask
        self.env = env          # dict var -> vertex

    def worlds_table(self) -> Dict[Optional[int], int]:
        t: Dict[Optional[int], int] = {None: self.entry}
        t.update(self.labels)
        return t


class Evaluator:
    """Reusable evaluator with an isomorphism-keyed verdict cache."""

    def __init__(self, cfg: EvalConfig):
        self.cfg = cfg
        self.cache: Dict[tuple, bool] = {}
        self.stats = {"modal_searches": 0, "candidates": 0, "cache_hits": 0}
        self._fo_compiled: Dict[int, Callable] = {}
        self._nnf: Dict[int, Formula] = {}
        self._is_fo_cache: Dict[int, bool] = {}
        self._plans_cache: Dict[tuple, list] = {}
        self._frees_cache: Dict[int, frozenset] = {}
        self._alpha: Dict[tuple, str] = {}
        self._budget_used = 0
        self._theory_key = "|".join(sorted(alpha_key(t) for t in cfg.world_class.theory))

    # -- public ------------------------------------------------------------

    def evaluate(self, f: Formula, g: Graph, assignment: Optional[Dict[str, int]] = None) -> Verdict:
        assignment = dict(assignment or {})
        wc = self.cfg.world_class
        if g.n > wc.ceiling or not check_theory(g, wc.theory):
            raise NotAdmitted(f"world with {g.n} vertices is not admitted by the world class")
        missing = free_vars(f) - set(assignment)
        if missing:
            raise SemanticsError(f"unassigned free variables: {sorted(missing)}")
        for v, vertex in assignment.items():
            if not (0 <= vertex < g.n):
                raise SemanticsError(f"assignment {v}={vertex} outside the world")
        self._budget_used = 0
        ctx = _Ctx(
            n=g.n,
            adj=g.adjacency(),
            cur=(1 << g.n) - 1,
            entry=(1 << g.n) - 1,
            labels={},
            env=dict(assignment),
        )
        if isinstance(f, Diamond):
            got = self._search_diamond(f.body, f.label, ctx, capture=True)
            if got is False:
                return Verdict(value=False, witness=None, soundness=EXACT_IN_FRAME)
            ctx2, world = got
            chain = [world] + (self._witness_chain(f.body, ctx2, True) or [])
            return Verdict(value=True, witness=chain, soundness=EXACT_IN_FRAME)
        if isinstance(f, Box):
            got = self._search_diamond(Not(f.body), f.label, ctx, capture=True)
            if got is False:
                return Verdict(value=True, witness=None, soundness=EXACT_IN_FRAME)
            ctx2, world = got
            chain = [world] + (self._witness_chain(f.body, ctx2, False) or [])
            return Verdict(value=False, witness=chain, soundness=EXACT_IN_FRAME)
        value = self._eval(f, ctx)
        return Verdict(value=value, witness=None, soundness=EXACT_IN_FRAME)

    # -- witness extraction --------------------------------------------------

    def _witness_chain(self, f: Formula, ctx: _Ctx, value: bool) -> Optional[List[Graph]]:
        """For a top-level true diamond (or false box), one accessed world
        witnessing the verdict, continued greedily through nested modal
        prefixes."""
        chain: List[Graph] = []
        node, want = f, value
        guard = 0
        while guard < 8:
            guard += 1
            if isinstance(node, Diamond) and want:
                got = self._search_diamond(node.body, node.label, ctx, capture=True)
                if not isinstance(got, tuple):
                    break
                ctx2, world = got
                chain.append(world)
                node, ctx, want = node.body, ctx2, True
                continue
            if isinstance(node, Box) and not want:
                got = self._search_diamond(Not(node.body), node.label, ctx, capture=True)
                if not isinstance(got, tuple):
                    break
                ctx2, world = got
                chain.append(world)
                node, ctx, want = node.body, ctx2, False
                continue
            break
        return chain or None

    # -- core recursion ------------------------------------------------------

    def _eval(self, f: Formula, ctx: _Ctx) -> bool:
        fo = self._is_fo_cache.get(id(f))
        if fo is None:
            fo = is_fo(f)
            self._is_fo_cache[id(f)] = fo
        if fo:
            fn = self._fo_compiled.get(id(f))
            if fn is None:
                fn = _compile_fo(f)
                self._fo_compiled[id(f)] = fn
            return fn(ctx.adj, _mask_bits(ctx.cur), ctx.env, ctx.worlds_table())
        if isinstance(f, Not):
            return not self._eval(f.body, ctx)
        if isinstance(f, And):
            return self._eval(f.left, ctx) and self._eval(f.right, ctx)
        if isinstance(f, Or):
            return self._eval(f.left, ctx) or self._eval(f.right, ctx)
        if isinstance(f, Implies):
            return (not self._eval(f.left, ctx)) or self._eval(f.right, ctx)
        if isinstance(f, Iff):
            return self._eval(f.left, ctx) == self._eval(f.right, ctx)
        if isinstance(f, Forall):
            return all(
                self._eval_bound(f.body, ctx, f.var, v) for v in _mask_bits(ctx.cur)
            )
        if isinstance(f, Exists):
            return any(
                self._eval_bound(f.body, ctx, f.var, v) for v in _mask_bits(ctx.cur)
            )
        if isinstance(f, At):
            mask = ctx.entry if f.label is None else ctx.labels.get(f.label)
            if mask is None:
                raise SemanticsError(f"@{f.label} used with no world {f.label} on the stack")
            sub = _Ctx(ctx.n, ctx.adj, mask, ctx.entry, ctx.labels, ctx.env)
            return self._eval(f.body, sub)
        if isinstance(f, Diamond):
            return self._modal(f.body, f.label, ctx, diamond=True)
        if isinstance(f, Box):
            return self._modal(f.body, f.label, ctx, diamond=False)
        raise SemanticsError(f"cannot evaluate {f!r}")

    def _eval_bound(self, body: Formula, ctx: _Ctx, var: str, vertex: int) -> bool:
        old = ctx.env.get(var, _MISSING)
        ctx.env[var] = vertex
        try:
            return self._eval(body, ctx)
        finally:
            if old is _MISSING:
                ctx.env.pop(var, None)
            else:
                ctx.env[var] = old

    # -- modal nodes -----------------------------------------------------------

    def _modal(self, body: Formula, label: Optional[int], ctx: _Ctx, diamond: bool) -> bool:
        matrix = body if diamond else Not(body)
        key = None
        if self.cfg.cache_enabled:
            key = self._memo_key(matrix, label, ctx)
            if key is not None and key in self.cache:
                self.stats["cache_hits"] += 1
                hit = self.cache[key]
                return hit if diamond else not hit
        found = self._search_diamond(matrix, label, ctx, capture=False)
        if key is not None:
            self.cache[key] = found
        return found if diamond else not found

    def _memo_key(self, matrix: Formula, label: Optional[int], ctx: _Ctx):
        # reduced key: sound when the referenced worlds are visible from the
        # current world alone (entry == current, no outer labels) and all
        # parameters live inside the current world
        frees = sorted(free_vars(matrix))
        uses_at = any(isinstance(g, At) for g in walk(matrix))
        if uses_at and (ctx.labels or ctx.entry != ctx.cur):
            return None
        for v in frees:
            if not ((ctx.cur >> ctx.env[v]) & 1):
                return None
        verts = _mask_bits(ctx.cur)
        pos = {vtx: i for i, vtx in enumerate(verts)}
        slots = {name: i for i, name in enumerate(frees)}
        colors = [0] * len(verts)
        for name in frees:
            colors[pos[ctx.env[name]]] |= 1 << (slots[name] + 1)
        sub_adj = [0] * len(verts)
        for i, u in enumerate(verts):
            for j, w in enumerate(verts):
                if (ctx.adj[u] >> w) & 1:
                    sub_adj[i] |= 1 << j
        dense = _dense_colors(colors)
        canon = canonical_form_adj(len(verts), sub_adj, dense)
        akey = self._alpha_key(matrix, slots)
        headroom = self.cfg.world_class.ceiling - len(verts)
        return (akey, label is not None, self.cfg.accessibility, headroom, self._theory_key, canon, tuple(sorted(set(colors))))

    def _alpha_key(self, f: Formula, slots: Dict[str, int]) -> str:
        k = (id(f), tuple(sorted(slots.items())))
        out = self._alpha.get(k)
        if out is None:
            out = alpha_key(f, slots)
            self._alpha[k] = out
        return out

    # -- diamond search dispatch ----------------------------------------------

    def _search_diamond(self, matrix: Formula, label: Optional[int], ctx: _Ctx, capture: bool):
        self.stats["modal_searches"] += 1
        if self.cfg.accessibility == EMBEDDED:
            return self._search_embedded(matrix, label, ctx, capture)
        if not self.cfg.world_class.theory and not self.cfg.enumeration_only:
            m = self._get_nnf(matrix)
            tup = _tuple_matrix(m)
            if tup is not None:
                return self._search_tuple(m, tup, label, ctx, capture)
            if _witness_fragment_ok(m) and _witness_vars_ok(m):
                return self._search_witness(m, label, ctx, capture)
        return self._search_enumeration(matrix, label, ctx, capture)

    def _get_nnf(self, f: Formula) -> Formula:
        out = self._nnf.get(id(f))
        if out is None:
            out = nnf(f)
            self._nnf[id(f)] = out
        return out

    def _get_plans(self, body: Formula, var: str) -> list:
        key = (id(body), var)
        out = self._plans_cache.get(key)
        if out is None:
            out = _exactness_plans(body, var)
            self._plans_cache[key] = out
        return out

    def _get_frees(self, f: Formula) -> frozenset:
        out = self._frees_cache.get(id(f))
        if out is None:
            out = free_vars(f)
            self._frees_cache[id(f)] = out
        return out

    def _spend(self, amount: int = 1) -> None:
        self.stats["candidates"] += amount
        if self.cfg.search_budget is None:
            return
        self._budget_used += amount
        if self._budget_used > self.cfg.search_budget:
            raise SearchBudgetExceeded(
                f"modal search exceeded budget of {self.cfg.search_budget} candidates"
            )

    # -- strategy: plain enumeration -------------------------------------------

    def _state_colors(self, ctx: _Ctx, matrix: Formula) -> List[int]:
        frees = sorted(v for v in free_vars(matrix) if v in ctx.env)
        labels = sorted(ctx.labels)
        colors = []
        for v in range(ctx.n):
            c = ((ctx.cur >> v) & 1) | (((ctx.entry >> v) & 1) << 1)
            shift = 2
            for lbl in labels:
                c |= ((ctx.labels[lbl] >> v) & 1) << shift
                shift += 1
            for i, name in enumerate(frees):
                if ctx.env[name] == v:
                    c |= 1 << (shift + i)
            colors.append(c)
        return colors

    def _admitted(self, ctx_n: int, adj: List[int], world_mask: int) -> bool:
        wc = self.cfg.world_class
        if not wc.theory:
            return True
        verts = _mask_bits(world_mask)
        pos = {u: i for i, u in enumerate(verts)}
        sub = [0] * len(verts)
        for i, u in enumerate(verts):
            for j, w in enumerate(verts):
                if (adj[u] >> w) & 1:
                    sub[i] |= 1 << j
        return check_theory(from_adjacency(len(verts), sub), wc.theory)

    def _search_enumeration(self, matrix: Formula, label: Optional[int], ctx: _Ctx, capture: bool):
        ceiling = self.cfg.world_class.ceiling
        max_add = ceiling - bin(ctx.cur).count("1")
        base_colors = self._state_colors(ctx, matrix)
        fresh_color = max(base_colors) + 1 if base_colors else 1

        def try_world(n2: int, adj2: List[int], cur2: int):
            if not self._admitted(n2, adj2, cur2):
                return None
            labels2 = dict(ctx.labels)
            if label is not None:
                labels2[label] = cur2
            sub = _Ctx(n2, adj2, cur2, ctx.entry, labels2, ctx.env)
            if self._eval(matrix, sub):
                return sub
            return None

        self._spend()
        hit = try_world(ctx.n, list(ctx.adj), ctx.cur)
        if hit is not None:
            return self._capture(hit, capture)

        level = [(ctx.n, ctx.adj, ctx.cur)]
        for _ in range(max_add):
            seen = set()
            nxt = []
            for (m, adj, cur) in level:
                for child in _children_adj_masked(m, adj, cur):
                    self._spend()
                    colors = list(base_colors) + [fresh_color] * (m + 1 - ctx.n)
                    key = canonical_form_adj(m + 1, child, _dense_colors(colors))
                    if key in seen:
                        continue
                    seen.add(key)
                    cur2 = cur | (1 << m)
                    hit = try_world(m + 1, child, cur2)
                    if hit is not None:
                        return self._capture(hit, capture)
                    nxt.append((m + 1, child, cur2))
            level = nxt
        return False

    def _capture(self, sub: _Ctx, capture: bool):
        if not capture:
            return True
        verts = _mask_bits(sub.cur)
        pos = {u: i for i, u in enumerate(verts)}
        edges = [
            (pos[u], pos[w])
            for u in verts
            for w in verts
            if u < w and (sub.adj[u] >> w) & 1
        ]
        return (sub, Graph.make(len(verts), edges))

    # -- strategy: tuple search (existential prefix, quantifier-free matrix) ----

    def _search_tuple(self, m: Formula, tup, label, ctx: _Ctx, capture: bool):
        names, matrix = tup
        fn = self._fo_compiled.get(id(matrix))
        if fn is None:
            fn = _compile_fo(matrix)
            self._fo_compiled[id(matrix)] = fn
        params = sorted(v for v in free_vars(m) if v in ctx.env)
        ceiling = self.cfg.world_class.ceiling
        cur_bits = _mask_bits(ctx.cur)
        budget = ceiling - len(cur_bits)
        k = len(names)
        relevant_base = sorted({ctx.env[p] for p in params})

        env = dict(ctx.env)

        def leaf(assign: List[int], fresh_count: int):
            # enumerate edge patterns among fresh vertices and from fresh to
            # the relevant base vertices
            fresh_ids = list(range(ctx.n, ctx.n + fresh_count))
            base_targets = sorted(set(relevant_base) | {a for a in assign if a < ctx.n})
            pairs = []
            for i, fv in enumerate(fresh_ids):
                for b in base_targets:
                    pairs.append((fv, b))
                for g2 in fresh_ids[i + 1:]:
                    pairs.append((fv, g2))
            n2 = ctx.n + fresh_count
            cur2 = ctx.cur | sum(1 << fv for fv in fresh_ids)
            for pattern in range(1 << len(pairs)):
                self._spend()
                adj2 = list(ctx.adj) + [0] * fresh_count
                for idx, (a, b) in enumerate(pairs):
                    if (pattern >> idx) & 1:
                        adj2[a] |= 1 << b
                        adj2[b] |= 1 << a
                for nm, vtx in zip(names, assign):
                    env[nm] = vtx
                labels2 = dict(ctx.labels)
                if label is not None:
                    labels2[label] = cur2
                worlds = {None: ctx.entry}
                worlds.update(labels2)
                ok = fn(adj2, _mask_bits(cur2), env, worlds)
                for nm in names:
                    env.pop(nm, None)
                if ok:
                    sub = _Ctx(n2, adj2, cur2, ctx.entry, labels2, dict(ctx.env))
                    for nm, vtx in zip(names, assign):
                        sub.env[nm] = vtx
                    return sub
            return None

        def assign_vars(i: int, assign: List[int], fresh_count: int):
            if i == k:
                return leaf(assign, fresh_count)
            cands = list(cur_bits) + [ctx.n + j for j in range(fresh_count)]
            for c in cands:
                assign.append(c)
                got = assign_vars(i + 1, assign, fresh_count)
                if got is not None:
                    return got
                assign.pop()
            if fresh_count < min(k, budget):
                assign.append(ctx.n + fresh_count)
                got = assign_vars(i + 1, assign, fresh_count + 1)
                if got is not None:
                    return got
                assign.pop()
            return None

        hit = assign_vars(0, [], 0)
        if hit is None:
            return False
        return self._capture(hit, capture)

    # -- strategy: witness search ----------------------------------------------

    def _search_witness(self, m: Formula, label, ctx: _Ctx, capture: bool):
        ceiling = self.cfg.world_class.ceiling
        cur_bits = _mask_bits(ctx.cur)
        budget = ceiling - len(cur_bits)

        def guard_prune(head: Forall, env) -> bool:
            """False when the block is already refuted by fixed vertices.

            Generic case: all free vars existing, evaluate over the base
            world (sound: the domain only grows, old edges are fixed).
            Neighborhood-bound case ``A g . g ~ t -> g = n1 | ..`` with
            ``t`` existing: every existing neighbor of t must be one of the
            names; fresh names never equal an existing vertex.
            """
            fv = self._get_frees(head)
            if all(env.get(v, ctx.n) < ctx.n for v in fv):
                sub = _Ctx(ctx.n, ctx.adj, ctx.cur, ctx.entry, ctx.labels, env)
                return bool(self._eval(head, sub))
            body = head.body
            guard = rhs = None
            if isinstance(body, Implies) and isinstance(body.left, Edge):
                guard, rhs = body.left, body.right
            elif isinstance(body, Or) and isinstance(body.left, Not) and isinstance(body.left.body, Edge):
                guard, rhs = body.left.body, body.right
            if guard is None or head.var not in (guard.left, guard.right):
                return True
            anchor = guard.right if guard.left == head.var else guard.left
            t = env.get(anchor)
            if t is None or t >= ctx.n:
                return True
            names = []
            stack = [rhs]
            while stack:
                node = stack.pop()
                if isinstance(node, Or):
                    stack.extend((node.left, node.right))
                elif isinstance(node, Bot):
                    continue
                elif isinstance(node, Eq) and head.var in (node.left, node.right):
                    other = node.right if node.left == head.var else node.left
                    if other == head.var:
                        return True
                    names.append(other)
                else:
                    return True  # unrecognized shape: no pruning
            allowed = {env[nm] for nm in names if nm in env and env[nm] < ctx.n}
            unresolved = any(nm not in env for nm in names)
            if unresolved:
                return True
            m = ctx.adj[t]
            while m:
                b = m & -m
                w = b.bit_length() - 1
                m ^= b
                if w not in allowed:
                    return False
            return True

        # goals and deferred are cons lists: None | (item, rest)
        def run(goals, env: Dict[str, int], fresh: list, deferred):
            while True:
                if goals is None:
                    out = []
                    d = deferred
                    while d is not None:
                        out.append(d[0])
                        d = d[1]
                    out.reverse()
                    return materialize(env, list(fresh), out)
                head, goals = goals
                if isinstance(head, Top):
                    continue
                if isinstance(head, Bot):
                    return None
                if isinstance(head, And):
                    goals = (head.left, (head.right, goals))
                    continue
                if isinstance(head, Or):
                    got = run((head.left, goals), env, fresh, deferred)
                    if got is not None:
                        return got
                    goals = (head.right, goals)
                    continue
                if isinstance(head, Exists):
                    plans = self._get_plans(head.body, head.var)
                    old = env.get(head.var, _MISSING)
                    try:
                        for cand in cur_bits:
                            self._spend()
                            env[head.var] = cand
                            got = run((head.body, goals), env, fresh, deferred)
                            if got is not None:
                                return got
                        for j in range(len(fresh)):
                            self._spend()
                            env[head.var] = ctx.n + j
                            got = run((head.body, goals), env, fresh, deferred)
                            if got is not None:
                                return got
                        if len(fresh) < budget:
                            env[head.var] = ctx.n + len(fresh)
                            for plan in plans:
                                self._spend()
                                fresh.append(plan)
                                got = run((head.body, goals), env, fresh, deferred)
                                if got is not None:
                                    return got
                                fresh.pop()
                        return None
                    finally:
                        if old is _MISSING:
                            env.pop(head.var, None)
                        else:
                            env[head.var] = old
                # ground literal: decide now when possible (prune), else defer
                mem = _is_membership(head)
                neg_mem = _is_membership(head.body) if isinstance(head, Not) else None
                if mem is not None or neg_mem is not None:
                    lbl, name = mem if mem is not None else neg_mem
                    vtx = env.get(name)
                    if vtx is not None:
                        mask = ctx.entry if lbl is None else ctx.labels.get(lbl)
                        if mask is None:
                            raise SemanticsError(f"@{lbl} used with no world {lbl} on the stack")
                        truth = vtx < ctx.n and bool((mask >> vtx) & 1)
                        if neg_mem is not None:
                            truth = not truth
                        if not truth:
                            return None
                        continue
                atom = head.body if isinstance(head, Not) else head
                if isinstance(atom, Eq):
                    a, b = env.get(atom.left), env.get(atom.right)
                    if a is not None and b is not None:
                        truth = a == b
                        if isinstance(head, Not):
                            truth = not truth
                        if not truth:
                            return None
                        continue
                if isinstance(atom, Edge):
                    a, b = env.get(atom.left), env.get(atom.right)
                    if a is not None and b is not None and a < ctx.n and b < ctx.n:
                        truth = bool((ctx.adj[a] >> b) & 1)
                        if isinstance(head, Not):
                            truth = not truth
                        if not truth:
                            return None
                        continue
                if isinstance(head, Forall) and not guard_prune(head, env):
                    return None
                deferred = ((head, dict(env)), deferred)

        got = run((m, None), dict(ctx.env), [], None)
        if got is None:
            return False
        return self._capture(got, capture)

    # -- strategy: embedded mode -------------------------------------------------

    def _search_embedded(self, matrix: Formula, label, ctx: _Ctx, capture: bool):
        frees = free_vars(matrix)
        for name, vtx in ctx.env.items():
            if name in frees and not ((ctx.cur >> vtx) & 1):
                raise SemanticsError("embedded mode: parameters outside the current world")
        for lbl, mask in ctx.labels.items():
            if not _submask(mask, ctx.cur):
                raise SemanticsError("embedded mode: stacked world outside the current world")
        if not _submask(ctx.entry, ctx.cur):
            raise SemanticsError("embedded mode: entry world outside the current world")
        verts = _mask_bits(ctx.cur)
        pos = {u: i for i, u in enumerate(verts)}
        sub_adj = [0] * len(verts)
        for i, u in enumerate(verts):
            for j, w in enumerate(verts):
                if (ctx.adj[u] >> w) & 1:
                    sub_adj[i] |= 1 << j
        gcur = from_adjacency(len(verts), sub_adj)
        relevant_env = {v: pos[x] for v, x in ctx.env.items() if v in frees}

        seen = set()
        for world in self._worlds():
            if world.n < gcur.n:
                continue
            wadj = world.adjacency()
            for emb in embeddings(gcur, world):
                self._spend()
                env2 = {v: emb[i] for v, i in relevant_env.items()}
                entry2 = 0
                for u in _mask_bits(ctx.entry):
                    entry2 |= 1 << emb[pos[u]]
                labels2 = {}
                for lbl, mask in ctx.labels.items():
                    m2 = 0
                    for u in _mask_bits(mask):
                        m2 |= 1 << emb[pos[u]]
                    labels2[lbl] = m2
                cur2 = (1 << world.n) - 1
                if label is not None:
                    labels2[label] = cur2
                colors = [0] * world.n
                for u in _mask_bits(entry2):
                    colors[u] |= 1
                shift = 1
                for lbl in sorted(labels2):
                    for u in _mask_bits(labels2[lbl]):
                        colors[u] |= 1 << shift
                    shift += 1
                for i, name in enumerate(sorted(env2)):
                    colors[env2[name]] |= 1 << (shift + i)
                key = canonical_form_adj(world.n, wadj, _dense_colors(colors))
                if key in seen:
                    continue
                seen.add(key)
                sub = _Ctx(world.n, wadj, cur2, entry2, labels2, env2)
                if self._eval(matrix, sub):
                    return self._capture(sub, capture)
        return False

    def _worlds(self) -> List[Graph]:
        return worlds_of(self.cfg.world_class, self.cfg.worlds_limit)


def _submask(a: int, b: int) -> bool:
    return a & ~b == 0


def _dense_colors(colors: Sequence[int]) -> List[int]:
    legend = {c: i for i, c in enumerate(sorted(set(colors)))}
    return [legend[c] for c in colors]


def _children_adj_masked(m: int, adj: List[int], cur: int) -> Iterator[List[int]]:
    """One-vertex extensions of the current world inside a larger universe:
    the new vertex may attach only to current-world vertices."""
    cur_bits = _mask_bits(cur)
    for pattern in range(1 << len(cur_bits)):
        new_adj = list(adj)
        mask = 0
        for i, v in enumerate(cur_bits):
            if (pattern >> i) & 1:
                mask |= 1 << v
                new_adj[v] |= 1 << m
        new_adj.append(mask)
        yield new_adj


# ---------------------------------------------------------------------------
# The frame as an explicit list of worlds


_WORLDS_CACHE: Dict[tuple, List[Graph]] = {}


def worlds_of(wc: WorldClass, hard_limit: int = 8) -> List[Graph]:
    """All isomorphism classes of admitted worlds with 1..ceiling vertices.

    Guarded by ``hard_limit``: enumerating all graph classes beyond ~8
    vertices is not desk-scale.
    """
    if wc.ceiling > hard_limit:
        raise SemanticsError(
            f"ceiling {wc.ceiling} above the enumeration limit {hard_limit}"
        )
    key = (wc.ceiling, "|".join(sorted(alpha_key(t) for t in wc.theory)))
    if key in _WORLDS_CACHE:
        return _WORLDS_CACHE[key]
    from .graphs import all_graphs

    out: List[Graph] = []
    for n in range(1, wc.ceiling + 1):
        for g in all_graphs(n):
            if check_theory(g, wc.theory):
                out.append(g)
    _WORLDS_CACHE[key] = out
    return out


# ---------------------------------------------------------------------------
# Module-level convenience


def evaluate(
    f: Formula,
    g: Graph,
    assignment: Optional[Dict[str, int]] = None,
    cfg: Optional[EvalConfig] = None,
    ceiling: Optional[int] = None,
) -> Verdict:
    """Evaluate ``f`` at world ``g``; ``ceiling`` is shorthand for a plain
    world class of that size."""
    if cfg is None:
        if ceiling is None:
            ceiling = g.n + 3
        cfg = EvalConfig(world_class=WorldClass(ceiling=ceiling))
    return Evaluator(cfg).evaluate(f, g, assignment)
