"""Finite graphs, canonical forms, extension and embedding enumeration.

Graphs are irreflexive and symmetric, over vertex set ``{0..n-1}``.  The
substructure relation used everywhere is *induced*: an extension never adds
edges between old vertices, so atomic facts persist upward.

Canonicalization uses iterated degree refinement plus branching over the
first non-singleton cell, with interchangeable-twin pruning; only the
contract matters: two graphs get the same form iff they are isomorphic
(respecting vertex colors, when given).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional, Sequence, Tuple
import json
import re


class GraphError(Exception):
    pass


@dataclass(frozen=True)
class Graph:
    n: int
    edges: frozenset  # frozenset of (u, v) pairs with u < v

    def __post_init__(self):
        if self.n < 1:
            raise GraphError("graphs must have at least one vertex")
        for u, v in self.edges:
            if not (0 <= u < v < self.n):
                raise GraphError(f"bad edge ({u}, {v}) for {self.n} vertices")

    @staticmethod
    def make(n: int, edges=()) -> "Graph":
        norm = frozenset((min(u, v), max(u, v)) for u, v in edges if u != v)
        if any(u == v for u, v in edges):
            raise GraphError("self-loops are not allowed")
        return Graph(n, norm)

    def adjacency(self) -> List[int]:
        adj = [0] * self.n
        for u, v in self.edges:
            adj[u] |= 1 << v
            adj[v] |= 1 << u
        return adj

    def has_edge(self, u: int, v: int) -> bool:
        return (min(u, v), max(u, v)) in self.edges

    def neighbors(self, v: int) -> List[int]:
        return [u for u in range(self.n) if self.has_edge(u, v)]

    def degree(self, v: int) -> int:
        return len(self.neighbors(v))

    def induced(self, vertices: Sequence[int]) -> "Graph":
        order = list(vertices)
        pos = {v: i for i, v in enumerate(order)}
        edges = [
            (pos[u], pos[v])
            for u, v in self.edges
            if u in pos and v in pos
        ]
        return Graph.make(len(order), edges)

    def relabel(self, perm: Sequence[int]) -> "Graph":
        """Image under ``v -> perm[v]``; ``perm`` must be a permutation."""
        return Graph.make(self.n, [(perm[u], perm[v]) for u, v in self.edges])

    def __str__(self) -> str:
        es = ",".join(f"{u}-{v}" for u, v in sorted(self.edges))
        return f"Graph(n={self.n}, {{{es}}})"


def from_adjacency(n: int, adj: Sequence[int]) -> Graph:
    edges = []
    for u in range(n):
        m = adj[u] >> (u + 1)
        v = u + 1
        while m:
            if m & 1:
                edges.append((u, v))
            m >>= 1
            v += 1
    return Graph.make(n, edges)


# ---------------------------------------------------------------------------
# Small constructors (used widely in tests and the CLI examples)


def empty_graph(n: int) -> Graph:
    return Graph.make(n, [])


def complete_graph(n: int) -> Graph:
    return Graph.make(n, [(u, v) for u in range(n) for v in range(u + 1, n)])


def path_graph(n: int) -> Graph:
    return Graph.make(n, [(i, i + 1) for i in range(n - 1)])


def cycle_graph(n: int) -> Graph:
    if n < 3:
        raise GraphError("cycles need at least 3 vertices")
    return Graph.make(n, [(i, (i + 1) % n) for i in range(n)])


def star_graph(leaves: int) -> Graph:
    return Graph.make(leaves + 1, [(0, i) for i in range(1, leaves + 1)])


def disjoint_union(*graphs: Graph) -> Graph:
    n = 0
    edges = []
    for g in graphs:
        edges.extend((u + n, v + n) for u, v in g.edges)
        n += g.n
    return Graph.make(n, edges)


# ---------------------------------------------------------------------------
# Canonical forms


def _refine(n: int, adj: List[int], cells: List[List[int]]) -> List[List[int]]:
    while True:
        masks = []
        for cell in cells:
            m = 0
            for v in cell:
                m |= 1 << v
            masks.append(m)
        new_cells: List[List[int]] = []
        changed = False
        for cell in cells:
            if len(cell) == 1:
                new_cells.append(cell)
                continue
            keyed: Dict[Tuple[int, ...], List[int]] = {}
            for v in cell:
                key = tuple((adj[v] & m).bit_count() for m in masks)
                keyed.setdefault(key, []).append(v)
            if len(keyed) == 1:
                new_cells.append(cell)
            else:
                changed = True
                for key in sorted(keyed):
                    new_cells.append(keyed[key])
        cells = new_cells
        if not changed:
            return cells


def _encode(n: int, adj: List[int], colors: Sequence[int], order: List[int]) -> bytes:
    pos = {v: i for i, v in enumerate(order)}
    bits = bytearray()
    acc = 0
    nbits = 0
    for i in range(n):
        u = order[i]
        for j in range(i + 1, n):
            acc = (acc << 1) | ((adj[u] >> order[j]) & 1)
            nbits += 1
            if nbits == 8:
                bits.append(acc)
                acc = 0
                nbits = 0
    if nbits:
        bits.append(acc << (8 - nbits))
    return bytes([n]) + bytes(colors[v] % 256 for v in order) + bytes(bits)


def _canon_search(n, adj, colors, cells, best):
    if all(len(c) == 1 for c in cells):
        cand = _encode(n, adj, colors, [c[0] for c in cells])
        if best[0] is None or cand < best[0]:
            best[0] = cand
        return
    idx = next(i for i, c in enumerate(cells) if len(c) > 1)
    cell = cells[idx]
    # vertices interchangeable by a twin transposition give identical
    # branches; keep one representative per twin class
    reps = []
    seen_open = set()
    seen_closed = set()
    for v in cell:
        k1 = adj[v]
        k2 = adj[v] | (1 << v)
        if k1 in seen_open or k2 in seen_closed:
            continue
        seen_open.add(k1)
        seen_closed.add(k2)
        reps.append(v)
    for v in reps:
        rest = [u for u in cell if u != v]
        branched = cells[:idx] + [[v], rest] + cells[idx + 1:]
        _canon_search(n, adj, colors, _refine(n, adj, branched), best)


def canonical_form(g: Graph, colors: Optional[Sequence[int]] = None) -> bytes:
    """Total isomorphism invariant: equal forms iff isomorphic.

    ``colors`` assigns an integer color per vertex; isomorphisms must then
    preserve colors (used to mark old vertices, assigned parameters, and
    stacked-world membership).
    """
    n = g.n
    adj = g.adjacency()
    return canonical_form_adj(n, adj, colors)


def canonical_form_adj(n: int, adj: List[int], colors: Optional[Sequence[int]] = None) -> bytes:
    if colors is None:
        colors = [0] * n
    cells_by_color: Dict[int, List[int]] = {}
    for v in range(n):
        cells_by_color.setdefault(colors[v], []).append(v)
    cells = [cells_by_color[c] for c in sorted(cells_by_color)]
    cells = _refine(n, adj, cells)
    best = [None]
    _canon_search(n, adj, colors, cells, best)
    return best[0]


def canonical_order(g: Graph, colors: Optional[Sequence[int]] = None) -> List[int]:
    """One vertex order realizing the canonical form (for stable output)."""
    n = g.n
    adj = g.adjacency()
    if colors is None:
        colors = [0] * n
    best = canonical_form_adj(n, adj, colors)
    # recompute by trying orders; small graphs only
    cells_by_color: Dict[int, List[int]] = {}
    for v in range(n):
        cells_by_color.setdefault(colors[v], []).append(v)
    cells = _refine(n, adj, [cells_by_color[c] for c in sorted(cells_by_color)])
    result: List[Optional[List[int]]] = [None]

    def search(cells):
        if result[0] is not None:
            return
        if all(len(c) == 1 for c in cells):
            order = [c[0] for c in cells]
            if _encode(n, adj, colors, order) == best:
                result[0] = order
            return
        idx = next(i for i, c in enumerate(cells) if len(c) > 1)
        for v in cells[idx]:
            branched = cells[:idx] + [[v], [u for u in cells[idx] if u != v]] + cells[idx + 1:]
            search(_refine(n, adj, branched))

    search(cells)
    return result[0]


def isomorphic(g: Graph, h: Graph) -> bool:
    return g.n == h.n and canonical_form(g) == canonical_form(h)


def automorphisms(g: Graph) -> List[Tuple[int, ...]]:
    """All automorphisms (brute force; desk-scale graphs only)."""
    return [tuple(e) for e in embeddings(g, g)]


# ---------------------------------------------------------------------------
# Extensions


@dataclass(frozen=True)
class Extension:
    parent: Graph
    child: Graph

    def __post_init__(self):
        if self.child.n < self.parent.n:
            raise GraphError("child smaller than parent")
        if self.child.induced(range(self.parent.n)) != self.parent:
            raise GraphError("child does not extend parent (old edges changed)")

    @property
    def added(self) -> int:
        return self.child.n - self.parent.n


def _children_adj(n: int, adj: List[int]) -> Iterator[List[int]]:
    """All one-vertex extensions as adjacency lists (new vertex last)."""
    for mask in range(1 << n):
        new_adj = list(adj)
        for v in range(n):
            if (mask >> v) & 1:
                new_adj[v] |= 1 << n
        new_adj.append(mask)
        yield new_adj


def extend_levels(
    n: int,
    adj: List[int],
    base_colors: Sequence[int],
    max_add: int,
    new_color: int,
) -> Iterator[Tuple[int, List[int]]]:
    """Yield (size, adjacency) for every extension with up to ``max_add``
    new vertices, deduplicated per level by colored canonical form; old
    vertices keep their colors, new ones all get ``new_color``."""
    yield (n, adj)
    level = [(n, adj)]
    for _ in range(max_add):
        seen = set()
        nxt = []
        for (m, a) in level:
            colors = list(base_colors) + [new_color] * (m + 1 - n)
            for child in _children_adj(m, a):
                key = canonical_form_adj(m + 1, child, colors)
                if key not in seen:
                    seen.add(key)
                    nxt.append((m + 1, child))
        for item in nxt:
            yield item
        level = nxt


def extensions(g: Graph, max_add: int) -> Iterator[Extension]:
    """Every extension of ``g`` with at most ``max_add`` new vertices, up to
    isomorphism fixing the old vertices pointwise."""
    if max_add < 0:
        raise GraphError("max_add must be nonnegative")
    n = g.n
    base_colors = list(range(n))  # old vertices individually marked
    for (m, adj) in extend_levels(n, g.adjacency(), base_colors, max_add, n):
        yield Extension(g, from_adjacency(m, adj))


# ---------------------------------------------------------------------------
# Embeddings (induced): injections preserving edges and non-edges


def embeddings(g: Graph, h: Graph) -> Iterator[Tuple[int, ...]]:
    gadj = g.adjacency()
    hadj = h.adjacency()

    def backtrack(mapping: List[int], used: int) -> Iterator[Tuple[int, ...]]:
        i = len(mapping)
        if i == g.n:
            yield tuple(mapping)
            return
        for cand in range(h.n):
            if (used >> cand) & 1:
                continue
            ok = True
            for j in range(i):
                ge = (gadj[i] >> j) & 1
                he = (hadj[cand] >> mapping[j]) & 1
                if ge != he:
                    ok = False
                    break
            if ok:
                mapping.append(cand)
                yield from backtrack(mapping, used | (1 << cand))
                mapping.pop()

    yield from backtrack([], 0)


def has_induced_copy(pattern: Graph, host: Graph) -> bool:
    return next(embeddings(pattern, host), None) is not None


# ---------------------------------------------------------------------------
# Classical oracles (independent ground truth)


def k_colorable(g: Graph, k: int) -> bool:
    if k < 1:
        raise GraphError("k must be at least 1")
    adj = g.adjacency()
    order = sorted(range(g.n), key=lambda v: -adj[v].bit_count())
    color = [-1] * g.n

    def place(i: int, used: int) -> bool:
        if i == g.n:
            return True
        v = order[i]
        forbidden = set(color[u] for u in range(g.n) if (adj[v] >> u) & 1 and color[u] >= 0)
        for c in range(min(used + 1, k)):
            if c in forbidden:
                continue
            color[v] = c
            if place(i + 1, max(used, c + 1)):
                return True
            color[v] = -1
        return False

    return place(0, 0)


def k_colorable_bruteforce(g: Graph, k: int) -> bool:
    """Exhaustive check over all k^n colorings; test oracle for small n."""
    from itertools import product

    for assignment in product(range(k), repeat=g.n):
        if all(assignment[u] != assignment[v] for u, v in g.edges):
            return True
    return False


def connected(g: Graph, x: int, y: int) -> bool:
    adj = g.adjacency()
    seen = 1 << x
    frontier = [x]
    while frontier:
        v = frontier.pop()
        if v == y:
            return True
        m = adj[v] & ~seen
        seen |= m
        while m:
            b = m & -m
            frontier.append(b.bit_length() - 1)
            m ^= b
    return bool((seen >> y) & 1)


def is_connected(g: Graph) -> bool:
    return all(connected(g, 0, v) for v in range(g.n))


def has_cycle_of_length(g: Graph, k: int) -> bool:
    """Whether ``g`` contains a (not necessarily induced) cycle on ``k``
    distinct vertices."""
    if k < 3:
        raise GraphError("cycle length must be at least 3")
    if k > g.n:
        return False
    adj = g.adjacency()

    def dfs(start: int, v: int, depth: int, used: int) -> bool:
        if depth == k:
            return bool((adj[v] >> start) & 1)
        m = adj[v]
        while m:
            b = m & -m
            u = b.bit_length() - 1
            m ^= b
            if u > start and not ((used >> u) & 1):
                if dfs(start, u, depth + 1, used | (1 << u)):
                    return True
        return False

    return any(dfs(s, s, 1, 1 << s) for s in range(g.n))


def isolated_count(g: Graph) -> int:
    adj = g.adjacency()
    return sum(1 for v in range(g.n) if adj[v] == 0)


def all_graphs(n: int) -> List[Graph]:
    """All isomorphism classes on exactly ``n`` vertices (grown vertex by
    vertex with canonical deduplication)."""
    if n < 1:
        raise GraphError("n must be at least 1")
    level = [empty_graph(1)]
    for m in range(1, n):
        seen = set()
        nxt = []
        for g in level:
            adj = g.adjacency()
            for child in _children_adj(m, adj):
                key = canonical_form_adj(m + 1, child)
                if key not in seen:
                    seen.add(key)
                    nxt.append(from_adjacency(m + 1, child))
        level = nxt
    return level


def universal_for_finite(g: Graph, m: int) -> bool:
    """Whether ``g`` holds an induced copy of every graph on at most ``m``
    vertices."""
    if m < 1:
        raise GraphError("m must be at least 1")
    for t in range(1, m + 1):
        for pattern in all_graphs(t):
            if not has_induced_copy(pattern, g):
                return False
    return True


# ---------------------------------------------------------------------------
# I/O: JSON and a DOT subset (undirected, integer node ids)


def to_json(g: Graph) -> str:
    return json.dumps({"n": g.n, "edges": [list(e) for e in sorted(g.edges)]})


def from_json(text: str) -> Graph:
    data = json.loads(text)
    if not isinstance(data, dict) or "n" not in data:
        raise GraphError("graph JSON must be an object with 'n' and 'edges'")
    return Graph.make(int(data["n"]), [tuple(e) for e in data.get("edges", [])])


_DOT_EDGE = re.compile(r"^\s*(\d+)\s*--\s*(\d+)\s*;?\s*$")
_DOT_NODE = re.compile(r"^\s*(\d+)\s*;?\s*$")


def to_dot(g: Graph, name: str = "g") -> str:
    lines = [f"graph {name} {{"]
    for v in range(g.n):
        lines.append(f"  {v};")
    for u, v in sorted(g.edges):
        lines.append(f"  {u} -- {v};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def from_dot(text: str) -> Graph:
    body = text
    m = re.search(r"\{(.*)\}", text, re.DOTALL)
    if m:
        body = m.group(1)
    nodes = set()
    edges = []
    for raw in re.split(r"[;\n]", body):
        line = raw.strip()
        if not line:
            continue
        em = _DOT_EDGE.match(line)
        if em:
            u, v = int(em.group(1)), int(em.group(2))
            nodes.update((u, v))
            edges.append((u, v))
            continue
        nm = _DOT_NODE.match(line)
        if nm:
            nodes.add(int(nm.group(1)))
            continue
        raise GraphError(f"cannot parse DOT line: {line!r}")
    if not nodes:
        raise GraphError("empty DOT graph")
    n = max(nodes) + 1
    return Graph.make(n, edges)


def load_graph(path: str) -> Graph:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    if path.endswith(".dot") or text.lstrip().startswith("graph"):
        return from_dot(text)
    return from_json(text)
