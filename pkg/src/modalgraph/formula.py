"""AST, parser, and printer for the first-order modal language of graphs.

The language has edge atoms ``x ~ y``, equality ``x = y``, the Boolean
connectives, quantifiers ``A x .`` / ``E x .``, the modal operators ``<>``
and ``[]`` (optionally carrying a numeric world label), and the actuality
operator ``@`` (optionally labelled).  ``@ x`` applied to a bare variable
is sugar for "x exists in the referenced world"; the parser expands it to
``@ E u . u = x`` so that a single canonical AST shape remains.

Propositional modal formulas (used as validity templates) reuse the same
node types plus :class:`PropVar`; they are parsed with ``parse_prop``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterator, Optional, Tuple
import re


class FormulaError(Exception):
    """Base class for formula-layer errors."""


class ParseError(FormulaError):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class UnboundLabelError(FormulaError):
    """An ``@``-label is used without an enclosing ``<>``/``[]`` binding it."""


class SubstitutionError(FormulaError):
    """A propositional variable has no image under substitution."""


# ---------------------------------------------------------------------------
# AST nodes


@dataclass(frozen=True)
class Formula:
    def __str__(self) -> str:
        return render(self)


@dataclass(frozen=True)
class Top(Formula):
    pass


@dataclass(frozen=True)
class Bot(Formula):
    pass


@dataclass(frozen=True)
class Edge(Formula):
    left: str
    right: str


@dataclass(frozen=True)
class Eq(Formula):
    left: str
    right: str


@dataclass(frozen=True)
class Not(Formula):
    body: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Implies(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Iff(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Forall(Formula):
    var: str
    body: Formula


@dataclass(frozen=True)
class Exists(Formula):
    var: str
    body: Formula


@dataclass(frozen=True)
class Diamond(Formula):
    body: Formula
    label: Optional[int] = None


@dataclass(frozen=True)
class Box(Formula):
    body: Formula
    label: Optional[int] = None


@dataclass(frozen=True)
class At(Formula):
    body: Formula
    label: Optional[int] = None


@dataclass(frozen=True)
class PropVar(Formula):
    """Propositional variable; only valid inside propositional templates."""

    name: str


TRUE = Top()
FALSE = Bot()


def conj(parts) -> Formula:
    """Left-assoc conjunction of a sequence; empty sequence is ``true``."""
    parts = list(parts)
    if not parts:
        return TRUE
    out = parts[0]
    for p in parts[1:]:
        out = And(out, p)
    return out


def disj(parts) -> Formula:
    parts = list(parts)
    if not parts:
        return FALSE
    out = parts[0]
    for p in parts[1:]:
        out = Or(out, p)
    return out


def neq(a: str, b: str) -> Formula:
    return Not(Eq(a, b))


def actual(var: str, label: Optional[int] = None) -> Formula:
    """``x`` exists in the referenced world: sugar for ``@ E u . u = x``."""
    u = "u" if var != "u" else "u0"
    return At(Exists(u, Eq(u, var)), label)


def exists_many(names, body: Formula) -> Formula:
    out = body
    for v in reversed(list(names)):
        out = Exists(v, out)
    return out


def forall_many(names, body: Formula) -> Formula:
    out = body
    for v in reversed(list(names)):
        out = Forall(v, out)
    return out


# ---------------------------------------------------------------------------
# Traversal helpers


def children(f: Formula) -> Tuple[Formula, ...]:
    if isinstance(f, Not):
        return (f.body,)
    if isinstance(f, (And, Or, Implies, Iff)):
        return (f.left, f.right)
    if isinstance(f, (Forall, Exists)):
        return (f.body,)
    if isinstance(f, (Diamond, Box, At)):
        return (f.body,)
    return ()


def walk(f: Formula) -> Iterator[Formula]:
    yield f
    for c in children(f):
        yield from walk(c)


def free_vars(f: Formula) -> frozenset:
    if isinstance(f, (Edge, Eq)):
        return frozenset((f.left, f.right))
    if isinstance(f, (Forall, Exists)):
        return free_vars(f.body) - {f.var}
    out = frozenset()
    for c in children(f):
        out |= free_vars(c)
    return out


def bound_vars(f: Formula) -> frozenset:
    out = frozenset()
    if isinstance(f, (Forall, Exists)):
        out |= {f.var}
    for c in children(f):
        out |= bound_vars(c)
    return out


def prop_vars(f: Formula) -> frozenset:
    out = frozenset()
    if isinstance(f, PropVar):
        return frozenset((f.name,))
    for c in children(f):
        out |= prop_vars(c)
    return out


def is_prop(f: Formula) -> bool:
    """True for propositional modal formulas: PropVar/true/false, Boolean
    connectives and unlabelled modal operators only."""
    if isinstance(f, (PropVar, Top, Bot)):
        return True
    if isinstance(f, (Not, And, Or, Implies, Iff)):
        return all(is_prop(c) for c in children(f))
    if isinstance(f, (Diamond, Box)) and f.label is None:
        return is_prop(f.body)
    return False


def rename_var(f: Formula, old: str, new: str) -> Formula:
    """Rename free occurrences of ``old`` to ``new`` (no capture check)."""
    if isinstance(f, Edge):
        return Edge(new if f.left == old else f.left, new if f.right == old else f.right)
    if isinstance(f, Eq):
        return Eq(new if f.left == old else f.left, new if f.right == old else f.right)
    if isinstance(f, (Forall, Exists)):
        if f.var == old:
            return f
        return type(f)(f.var, rename_var(f.body, old, new))
    if isinstance(f, Not):
        return Not(rename_var(f.body, old, new))
    if isinstance(f, (And, Or, Implies, Iff)):
        return type(f)(rename_var(f.left, old, new), rename_var(f.right, old, new))
    if isinstance(f, (Diamond, Box, At)):
        return type(f)(rename_var(f.body, old, new), f.label)
    return f


def substitute(template: Formula, mapping: Dict[str, Formula]) -> Formula:
    """Replace every propositional variable of ``template`` by its image.

    Raises :class:`SubstitutionError` if a propositional variable has no
    image.  The replacement is homomorphic; templates carry no quantifiers,
    so no capture can occur.
    """
    if isinstance(template, PropVar):
        if template.name not in mapping:
            raise SubstitutionError(f"no image for propositional variable {template.name!r}")
        return mapping[template.name]
    if isinstance(template, (Top, Bot, Edge, Eq)):
        return template
    if isinstance(template, Not):
        return Not(substitute(template.body, mapping))
    if isinstance(template, (And, Or, Implies, Iff)):
        return type(template)(
            substitute(template.left, mapping), substitute(template.right, mapping)
        )
    if isinstance(template, (Forall, Exists)):
        return type(template)(template.var, substitute(template.body, mapping))
    if isinstance(template, (Diamond, Box, At)):
        return type(template)(substitute(template.body, mapping), template.label)
    raise FormulaError(f"cannot substitute into {template!r}")


# ---------------------------------------------------------------------------
# Fragment classification

FRAGMENT_L = "L"
FRAGMENT_DIAMOND_L = "DiamondL"
FRAGMENT_L_DIAMOND = "LDiamond"
FRAGMENT_L_DIAMOND_AT = "LDiamondAt"


def classify(f: Formula) -> str:
    """Classify into the language hierarchy.

    ``L``: no modal or actuality operator.  ``DiamondL``: modal operators
    occur but never under a quantifier, and no actuality.  ``LDiamond``:
    modal under quantifiers allowed, still no actuality.  ``LDiamondAt``:
    anything using ``@``.
    """
    has_at = any(isinstance(g, At) for g in walk(f))
    if has_at:
        return FRAGMENT_L_DIAMOND_AT
    has_modal = any(isinstance(g, (Diamond, Box)) for g in walk(f))
    if not has_modal:
        return FRAGMENT_L

    def modal_under_quantifier(g: Formula, under: bool) -> bool:
        if isinstance(g, (Diamond, Box)) and under:
            return True
        under = under or isinstance(g, (Forall, Exists))
        return any(modal_under_quantifier(c, under) for c in children(g))

    if modal_under_quantifier(f, False):
        return FRAGMENT_L_DIAMOND
    return FRAGMENT_DIAMOND_L


# ---------------------------------------------------------------------------
# Lexer

_TOKEN_RE = re.compile(
    r"""
      (?P<ws>\s+)
    | (?P<arrow2><->)
    | (?P<arrow>->)
    | (?P<diamond><>)
    | (?P<box>\[\])
    | (?P<num>\d+)
    | (?P<ident>[a-z][a-zA-Z0-9_]*)
    | (?P<kw>[AE])(?![a-zA-Z0-9_])
    | (?P<sym>[~=&|!@().])
    """,
    re.VERBOSE,
)

_KEYWORDS = {"true", "false"}


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str):
    toks = []
    line, col = 1, 1
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        lexeme = m.group()
        if kind != "ws":
            if kind == "ident" and lexeme in _KEYWORDS:
                kind = lexeme
            toks.append(_Tok(kind, lexeme, line, col))
        for ch in lexeme:
            if ch == "\n":
                line += 1
                col = 1
            else:
                col += 1
        pos = m.end()
    toks.append(_Tok("eof", "", line, col))
    return toks


# ---------------------------------------------------------------------------
# Parser (recursive descent)
#
#   formula := iff
#   iff     := implies ('<->' implies)*            left assoc
#   implies := or ('->' implies)?                  right assoc
#   or      := and ('|' and)*
#   and     := unary ('&' unary)*
#   unary   := '!' unary | '<>' [NUM] unary | '[]' [NUM] unary
#            | '@' [NUM] (VAR-not-starting-atom | unary)
#            | 'A' VAR '.' formula | 'E' VAR '.' formula | atom
#   atom    := 'true' | 'false' | '(' formula ')' | VAR ('~'|'=') VAR
#
# Quantifier bodies extend as far right as possible.  A bare variable after
# '@' (not followed by '~' or '=') is the actuality predicate sugar.


class _Parser:
    def __init__(self, text: str, prop_mode: bool = False):
        self.toks = _tokenize(text)
        self.i = 0
        self.prop_mode = prop_mode

    def peek(self, ahead: int = 0) -> _Tok:
        return self.toks[min(self.i + ahead, len(self.toks) - 1)]

    def next(self) -> _Tok:
        t = self.toks[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def expect(self, kind: str, what: str) -> _Tok:
        t = self.peek()
        if t.kind != kind and not (kind == "sym" and t.kind == "sym"):
            raise ParseError(f"expected {what}, found {t.text or 'end of input'!r}", t.line, t.col)
        return self.next()

    def expect_sym(self, sym: str) -> _Tok:
        t = self.peek()
        if t.kind != "sym" or t.text != sym:
            raise ParseError(f"expected {sym!r}, found {t.text or 'end of input'!r}", t.line, t.col)
        return self.next()

    def parse(self) -> Formula:
        f = self.parse_iff()
        t = self.peek()
        if t.kind != "eof":
            raise ParseError(f"unexpected trailing input {t.text!r}", t.line, t.col)
        return f

    def parse_iff(self) -> Formula:
        f = self.parse_implies()
        while self.peek().kind == "arrow2":
            self.next()
            f = Iff(f, self.parse_implies())
        return f

    def parse_implies(self) -> Formula:
        f = self.parse_or()
        if self.peek().kind == "arrow":
            self.next()
            return Implies(f, self.parse_implies())
        return f

    def parse_or(self) -> Formula:
        f = self.parse_and()
        while self.peek().kind == "sym" and self.peek().text == "|":
            self.next()
            f = Or(f, self.parse_and())
        return f

    def parse_and(self) -> Formula:
        f = self.parse_unary()
        while self.peek().kind == "sym" and self.peek().text == "&":
            self.next()
            f = And(f, self.parse_unary())
        return f

    def _label(self) -> Optional[int]:
        if self.peek().kind == "num":
            return int(self.next().text)
        return None

    def parse_unary(self) -> Formula:
        t = self.peek()
        if t.kind == "sym" and t.text == "!":
            self.next()
            return Not(self.parse_unary())
        if t.kind == "diamond":
            self.next()
            label = self._label()
            return Diamond(self.parse_unary(), label)
        if t.kind == "box":
            self.next()
            label = self._label()
            return Box(self.parse_unary(), label)
        if t.kind == "sym" and t.text == "@":
            self.next()
            label = self._label()
            nxt = self.peek()
            if (
                not self.prop_mode
                and nxt.kind == "ident"
                and not (self.peek(1).kind == "sym" and self.peek(1).text in ("~", "="))
            ):
                self.next()
                return actual(nxt.text, label)
            return At(self.parse_unary(), label)
        if t.kind == "kw":
            self.next()
            var = self.expect("ident", "a variable")
            self.expect_sym(".")
            body = self.parse_iff()
            return (Forall if t.text == "A" else Exists)(var.text, body)
        return self.parse_atom()

    def parse_atom(self) -> Formula:
        t = self.peek()
        if t.kind == "true":
            self.next()
            return TRUE
        if t.kind == "false":
            self.next()
            return FALSE
        if t.kind == "sym" and t.text == "(":
            self.next()
            f = self.parse_iff()
            self.expect_sym(")")
            return f
        if t.kind == "ident":
            self.next()
            op = self.peek()
            if op.kind == "sym" and op.text in ("~", "="):
                self.next()
                rhs = self.expect("ident", "a variable")
                return Edge(t.text, rhs.text) if op.text == "~" else Eq(t.text, rhs.text)
            if self.prop_mode:
                return PropVar(t.text)
            raise ParseError(f"expected '~' or '=' after variable {t.text!r}", t.line, t.col)
        raise ParseError(f"expected a formula, found {t.text or 'end of input'!r}", t.line, t.col)


def _check_labels(f: Formula, in_scope: frozenset) -> None:
    if isinstance(f, At) and f.label is not None and f.label not in in_scope:
        raise UnboundLabelError(
            f"@{f.label} is not under a <>{f.label} or []{f.label} operator"
        )
    if isinstance(f, (Diamond, Box)) and f.label is not None:
        in_scope = in_scope | {f.label}
    for c in children(f):
        _check_labels(c, in_scope)


def _make_capture_free(f: Formula) -> Formula:
    free = free_vars(f)
    used = set(free) | set(bound_vars(f))

    def fresh(name: str) -> str:
        k = 0
        while f"{name}{k}" in used:
            k += 1
        used.add(f"{name}{k}")
        return f"{name}{k}"

    def fix(g: Formula) -> Formula:
        if isinstance(g, (Forall, Exists)):
            body = fix(g.body)
            if g.var in free:
                new = fresh(g.var)
                return type(g)(new, rename_var(body, g.var, new))
            return type(g)(g.var, body)
        if isinstance(g, Not):
            return Not(fix(g.body))
        if isinstance(g, (And, Or, Implies, Iff)):
            return type(g)(fix(g.left), fix(g.right))
        if isinstance(g, (Diamond, Box, At)):
            return type(g)(fix(g.body), g.label)
        return g

    return fix(f)


def parse(text: str) -> Formula:
    """Parse a formula from source text.

    The result is capture-free (no bound variable shares a name with a free
    variable) and every labelled ``@`` is checked to sit under a matching
    labelled modal operator.
    """
    f = _Parser(text).parse()
    f = _make_capture_free(f)
    _check_labels(f, frozenset())
    return f


def parse_prop(text: str) -> Formula:
    """Parse a propositional modal template; bare identifiers become
    propositional variables."""
    f = _Parser(text, prop_mode=True).parse()
    if not is_prop(f):
        raise ParseError("not a propositional modal formula", 0, 0)
    return f


# ---------------------------------------------------------------------------
# Renderer

_PREC_IFF = 1
_PREC_IMPLIES = 2
_PREC_OR = 3
_PREC_AND = 4
_PREC_UNARY = 5
_PREC_ATOM = 10


def _render(f: Formula, ctx: int) -> str:
    if isinstance(f, Top):
        return "true"
    if isinstance(f, Bot):
        return "false"
    if isinstance(f, Edge):
        return f"{f.left} ~ {f.right}"
    if isinstance(f, Eq):
        return f"{f.left} = {f.right}"
    if isinstance(f, PropVar):
        return f.name
    if isinstance(f, At):
        body = f.body
        lbl = "" if f.label is None else str(f.label)
        if (
            isinstance(body, Exists)
            and isinstance(body.body, Eq)
            and body.body.left == body.var
            and body.body.right != body.var
            and body.var == ("u" if body.body.right != "u" else "u0")
        ):
            return f"@{lbl} {body.body.right}"
        s = f"@{lbl} {_render(body, _PREC_UNARY)}"
        return f"({s})" if ctx > _PREC_UNARY else s
    if isinstance(f, Not):
        s = f"! {_render(f.body, _PREC_UNARY)}"
        return f"({s})" if ctx > _PREC_UNARY else s
    if isinstance(f, Diamond):
        lbl = "" if f.label is None else str(f.label)
        s = f"<>{lbl} {_render(f.body, _PREC_UNARY)}"
        return f"({s})" if ctx > _PREC_UNARY else s
    if isinstance(f, Box):
        lbl = "" if f.label is None else str(f.label)
        s = f"[]{lbl} {_render(f.body, _PREC_UNARY)}"
        return f"({s})" if ctx > _PREC_UNARY else s
    if isinstance(f, (Forall, Exists)):
        q = "A" if isinstance(f, Forall) else "E"
        s = f"{q} {f.var} . {_render(f.body, 0)}"
        return f"({s})" if ctx > 0 else s
    if isinstance(f, And):
        s = f"{_render(f.left, _PREC_AND)} & {_render(f.right, _PREC_AND + 1)}"
        return f"({s})" if ctx > _PREC_AND else s
    if isinstance(f, Or):
        s = f"{_render(f.left, _PREC_OR)} | {_render(f.right, _PREC_OR + 1)}"
        return f"({s})" if ctx > _PREC_OR else s
    if isinstance(f, Implies):
        s = f"{_render(f.left, _PREC_IMPLIES + 1)} -> {_render(f.right, _PREC_IMPLIES)}"
        return f"({s})" if ctx > _PREC_IMPLIES else s
    if isinstance(f, Iff):
        s = f"{_render(f.left, _PREC_IFF)} <-> {_render(f.right, _PREC_IFF + 1)}"
        return f"({s})" if ctx > _PREC_IFF else s
    raise FormulaError(f"cannot render {f!r}")


def render(f: Formula) -> str:
    """Source text for a formula; ``parse(render(f))`` equals ``f`` for any
    capture-free ``f``."""
    return _render(f, 0)


# ---------------------------------------------------------------------------
# Alpha-canonical keys (for evaluation caches)


def alpha_key(f: Formula, free_slots: Optional[Dict[str, int]] = None) -> str:
    """A de-Bruijn-style string key, invariant under bound-variable renaming.

    ``free_slots`` maps free variable names to slot numbers; callers that
    cache on (world marks, formula) use the same slot numbering for vertex
    marks and for the key.
    """
    parts = []
    env: Dict[str, str] = {}
    if free_slots:
        for name, slot in free_slots.items():
            env[name] = f"f{slot}"
    counter = [0]

    def go(g: Formula, env: Dict[str, str]) -> None:
        if isinstance(g, Top):
            parts.append("T")
        elif isinstance(g, Bot):
            parts.append("F")
        elif isinstance(g, Edge):
            parts.append(f"E{env.get(g.left, g.left)},{env.get(g.right, g.right)}")
        elif isinstance(g, Eq):
            parts.append(f"Q{env.get(g.left, g.left)},{env.get(g.right, g.right)}")
        elif isinstance(g, PropVar):
            parts.append(f"P{g.name}")
        elif isinstance(g, Not):
            parts.append("!")
            go(g.body, env)
        elif isinstance(g, (And, Or, Implies, Iff)):
            parts.append({And: "&", Or: "|", Implies: ">", Iff: "="}[type(g)])
            go(g.left, env)
            go(g.right, env)
        elif isinstance(g, (Forall, Exists)):
            parts.append("A(" if isinstance(g, Forall) else "E(")
            name = f"b{counter[0]}"
            counter[0] += 1
            inner = dict(env)
            inner[g.var] = name
            go(g.body, inner)
            parts.append(")")
        elif isinstance(g, (Diamond, Box, At)):
            tag = {Diamond: "D", Box: "B", At: "@"}[type(g)]
            parts.append(f"{tag}{'' if g.label is None else g.label}(")
            go(g.body, env)
            parts.append(")")
        else:
            raise FormulaError(f"cannot key {g!r}")

    go(f, env)
    return "".join(parts)
