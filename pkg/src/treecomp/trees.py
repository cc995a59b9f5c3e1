"""Tree-encoding notation: parsing, formatting, isomorphism and constraint lowering.

Two grammars share one entry point.  A notation made of digits and
parentheses only is an unlabeled shape: each integer k gives k leaf children,
each bracket pair one internal child, e.g. ``2(2)``, ``(1(2))``, ``4(1)``.
Anything else is the labeled form ``root/children`` where children are label
items and bracketed subtrees, e.g. ``p/xy(q/vw)``.  A label is one
alphanumeric character plus optional apostrophes; longer labels must be
comma-separated from their siblings.
"""

from __future__ import annotations

from dataclasses import dataclass

Relation = str  # "eq", "ge", "le", "free"

EQUAL: Relation = "eq"
AT_LEAST: Relation = "ge"
AT_MOST: Relation = "le"
FREE: Relation = "free"


class TreeSyntaxError(ValueError):
    def __init__(self, message, position):
        super().__init__(f"{message} at position {position}")
        self.position = position


class DuplicateLabel(ValueError):
    def __init__(self, name):
        super().__init__(f"duplicate label {name!r}")
        self.name = name


class EmptyTree(ValueError):
    pass


class UnassignedVertex(KeyError):
    pass


class OverlappingColors(ValueError):
    pass


@dataclass(frozen=True)
class ComparisonTree:
    """Tree on vertices 0..n-1; ``labels`` maps labeled vertices to names."""

    n_vertices: int
    edges: frozenset[tuple[int, int]]
    labels: dict[int, str] | None = None
    root: int | None = None

    def __post_init__(self):
        if self.n_vertices < 1:
            raise EmptyTree("tree must have at least one vertex")
        if len(self.edges) != self.n_vertices - 1:
            raise ValueError("edge count does not match a tree")
        seen = {0} if self.n_vertices else set()
        adj = self.adjacency()
        stack = [0]
        while stack:
            v = stack.pop()
            for w in adj[v]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        if len(seen) != self.n_vertices:
            raise ValueError("edge set is not connected")
        if self.labels:
            names = list(self.labels.values())
            if len(set(names)) != len(names):
                raise DuplicateLabel(next(x for x in names if names.count(x) > 1))

    def adjacency(self) -> list[list[int]]:
        adj = [[] for _ in range(self.n_vertices)]
        for i, j in sorted(self.edges):
            adj[i].append(j)
            adj[j].append(i)
        return adj

    def degree(self, v: int) -> int:
        return sum(1 for e in self.edges if v in e)

    def poles(self) -> list[int]:
        return [v for v in range(self.n_vertices) if self.degree(v) >= 2]

    def leaves(self) -> list[int]:
        return [v for v in range(self.n_vertices) if self.degree(v) == 1]

    def label_of(self, v: int) -> str:
        if self.labels and v in self.labels:
            return self.labels[v]
        return f"v{v}"


@dataclass(frozen=True)
class ConstraintGraph:
    """Per-pair relation set over n model points."""

    n: int
    relation: dict[tuple[int, int], Relation]

    def __post_init__(self):
        for i in range(self.n):
            for j in range(i + 1, self.n):
                if (i, j) not in self.relation:
                    raise ValueError(f"pair ({i},{j}) has no relation")

    def counts(self) -> dict[Relation, int]:
        out: dict[Relation, int] = {}
        for rel in self.relation.values():
            out[rel] = out.get(rel, 0) + 1
        return out


def _is_shape_notation(text: str) -> bool:
    stripped = text.strip()
    return bool(stripped) and all(ch.isdigit() or ch in "()" for ch in stripped)


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.edges: list[tuple[int, int]] = []
        self.labels: dict[int, str] = {}
        self.n = 0

    def error(self, msg):
        raise TreeSyntaxError(msg, self.pos)

    def peek(self):
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def take(self):
        ch = self.peek()
        self.pos += 1
        return ch

    def new_vertex(self, label=None):
        v = self.n
        self.n += 1
        if label is not None:
            if label in self.labels.values():
                raise DuplicateLabel(label)
            self.labels[v] = label
        return v

    def link(self, a, b):
        self.edges.append((min(a, b), max(a, b)))

    # --- unlabeled shape grammar ---
    def parse_shape_root(self):
        root = self.new_vertex()
        if self.peek() == "(":
            # head bracket: a childless-at-head root with one internal child
            self.take()
            child = self.new_vertex()
            self.link(root, child)
            self.parse_shape_children(child)
            if self.peek() != ")":
                self.error("expected ')'")
            self.take()
        else:
            self.parse_shape_children(root)
        if self.pos != len(self.text):
            self.error("trailing input")
        return root

    def parse_shape_children(self, parent):
        if not self.peek().isdigit():
            self.error("expected leaf count")
        start = self.pos
        num = ""
        while self.peek().isdigit():
            num += self.take()
        count = int(num)
        if count == 0:
            self.pos = start
            self.error("leaf count must be positive")
        for _ in range(count):
            leaf = self.new_vertex()
            self.link(parent, leaf)
        if self.peek() == "(":
            self.take()
            child = self.new_vertex()
            self.link(parent, child)
            self.parse_shape_children(child)
            if self.peek() != ")":
                self.error("expected ')'")
            self.take()

    # --- labeled grammar ---
    def parse_labeled_root(self):
        label = self.read_label(compact=False)
        if self.peek() != "/":
            self.error("expected '/' after root label")
        self.take()
        root = self.new_vertex(label)
        items = self.parse_items(root)
        if items == 0:
            self.error("root needs at least one child")
        if self.pos != len(self.text):
            self.error("trailing input")
        return root

    def _sequence_has_comma(self) -> bool:
        """Lookahead: a ',' at this bracket depth switches to long labels."""
        depth = 0
        for ch in self.text[self.pos:]:
            if ch == "(":
                depth += 1
            elif ch == ")":
                if depth == 0:
                    return False
                depth -= 1
            elif ch == "," and depth == 0:
                return True
        return False

    def parse_items(self, parent) -> int:
        count = 0
        comma_mode = self._sequence_has_comma()
        while True:
            ch = self.peek()
            if ch == ",":
                if count == 0:
                    self.error("unexpected ','")
                self.take()
                ch = self.peek()
            if ch == "(":
                self.take()
                child = self.parse_node()
                if self.peek() != ")":
                    self.error("expected ')'")
                self.take()
                self.link(parent, child)
                count += 1
            elif ch.isalnum():
                label = self.read_label(compact=not comma_mode)
                leaf = self.new_vertex(label)
                self.link(parent, leaf)
                count += 1
            else:
                return count

    def parse_node(self):
        start = self.pos
        label = self.read_label(compact=False)
        if self.peek() != "/":
            self.pos = start
            self.error("expected 'label/children' inside brackets")
        self.take()
        v = self.new_vertex(label)
        if self.parse_items(v) == 0:
            self.error("bracketed vertex needs at least one child")
        return v

    def read_label(self, compact: bool) -> str:
        if not self.peek().isalnum():
            self.error("expected label")
        if compact:
            label = self.take()
        else:
            label = ""
            while self.peek().isalnum():
                label += self.take()
        while self.peek() == "'":
            label += self.take()
        return label


def parse_tree(notation: str) -> ComparisonTree:
    """Parse either grammar; the first vertex created is the root."""
    text = notation.strip()
    if not text:
        raise EmptyTree("empty notation")
    parser = _Parser(text)
    if _is_shape_notation(text):
        root = parser.parse_shape_root()
        labels = None
    else:
        root = parser.parse_labeled_root()
        labels = parser.labels
    return ComparisonTree(
        n_vertices=parser.n,
        edges=frozenset(parser.edges),
        labels=labels,
        root=root,
    )


def _compact(label: str) -> bool:
    return len(label.rstrip("'")) == 1


def format_tree(tree: ComparisonTree, root: int | None = None) -> str:
    """Re-encode the tree rooted at ``root``; inverse of parse_tree up to isomorphism."""
    if root is None:
        root = tree.root if tree.root is not None else 0
    if not 0 <= root < tree.n_vertices:
        raise IndexError(f"root {root} out of range")
    adj = tree.adjacency()
    if tree.labels is None:
        return _format_shape(tree, adj, root)

    def children_of(v, parent):
        return [w for w in adj[v] if w != parent]

    def items_str(v, parent):
        kids = children_of(v, parent)
        leaf_labels = [tree.label_of(w) for w in kids if not children_of(w, v)]
        internal = [w for w in kids if children_of(w, v)]
        if leaf_labels and not all(_compact(x) for x in leaf_labels):
            body = ",".join(leaf_labels)
        else:
            body = "".join(leaf_labels)
        for w in internal:
            body += "(" + node_str(w, v) + ")"
        return body

    def node_str(v, parent):
        return tree.label_of(v) + "/" + items_str(v, parent)

    if not adj[root]:
        raise EmptyTree("single vertex has no encoding")
    return node_str(root, None)


def _format_shape(tree, adj, root) -> str:
    def children_of(v, parent):
        return [w for w in adj[v] if w != parent]

    def encode(v, parent, at_head):
        kids = children_of(v, parent)
        leaves = [w for w in kids if not children_of(w, v)]
        internal = [w for w in kids if children_of(w, v)]
        if len(internal) > 1:
            raise ValueError("shape notation cannot encode a vertex with two internal children")
        if not leaves and not at_head:
            raise ValueError("shape notation requires leaves on non-head vertices")
        body = str(len(leaves)) if leaves else ""
        if internal:
            body += "(" + encode(internal[0], v, False) + ")"
        return body

    out = encode(root, None, True)
    if not out:
        raise EmptyTree("single vertex has no encoding")
    if out.startswith("("):
        return out
    return out


def _canonical(tree: ComparisonTree, use_labels: bool) -> str:
    """AHU canonical form, rooted at the tree center (exact for trees)."""
    adj = tree.adjacency()
    n = tree.n_vertices
    if n == 1:
        return tree.labels.get(0, "") if (use_labels and tree.labels) else "()"
    # find center(s) by leaf stripping
    deg = [len(adj[v]) for v in range(n)]
    layer = [v for v in range(n) if deg[v] == 1]
    removed = 0
    alive = [True] * n
    while n - removed > 2:
        nxt = []
        for v in layer:
            alive[v] = False
            removed += 1
            for w in adj[v]:
                if alive[w]:
                    deg[w] -= 1
                    if deg[w] == 1:
                        nxt.append(w)
        layer = nxt
    centers = [v for v in range(n) if alive[v]]

    def enc(v, parent):
        parts = sorted(enc(w, v) for w in adj[v] if w != parent)
        me = tree.labels.get(v, "?") if (use_labels and tree.labels) else ""
        return "(" + me + "".join(parts) + ")"

    return min(enc(c, None) for c in centers)


def tree_isomorphic(a: ComparisonTree, b: ComparisonTree, respect_labels: bool = False) -> bool:
    """Graph isomorphism of unrooted trees, optionally label-preserving."""
    if a.n_vertices != b.n_vertices:
        return False
    if respect_labels:
        la = a.labels or {}
        lb = b.labels or {}
        if len(la) != a.n_vertices or len(lb) != b.n_vertices:
            # fall back to structural comparison including partial labels
            return _canonical(a, True) == _canonical(b, True)
        if set(la.values()) != set(lb.values()):
            return False
        to_b = {v: next(w for w, s in lb.items() if s == la[v]) for v in la}
        edges_b = {(min(to_b[i], to_b[j]), max(to_b[i], to_b[j])) for i, j in a.edges}
        return edges_b == set(b.edges)
    return _canonical(a, False) == _canonical(b, False)


def contains_induced_tripod(tree: ComparisonTree) -> bool:
    """True iff the tree is not a path (some vertex has degree >= 3)."""
    return any(tree.degree(v) >= 3 for v in range(tree.n_vertices))


def resolve_assignment(tree: ComparisonTree, assignment) -> list[int]:
    """Point index for each vertex; keys may be labels or vertex ids."""
    out = []
    for v in range(tree.n_vertices):
        if v in assignment:
            out.append(int(assignment[v]))
        else:
            name = tree.labels.get(v) if tree.labels else None
            if name is not None and name in assignment:
                out.append(int(assignment[name]))
            else:
                raise UnassignedVertex(f"vertex {v} ({tree.label_of(v)}) unassigned")
    return out


def tree_to_constraints(tree: ComparisonTree, assignment=None) -> ConstraintGraph:
    """Lower a tree comparison: adjacent pairs Equal, every other pair AtLeast.

    Constraints live on vertex pairs; ``assignment`` (label-or-vertex to point
    index) is validated for totality when given, since targets are read
    through it later.
    """
    if assignment is not None:
        resolve_assignment(tree, assignment)
    rel = {}
    for i in range(tree.n_vertices):
        for j in range(i + 1, tree.n_vertices):
            rel[(i, j)] = EQUAL if (i, j) in tree.edges else AT_LEAST
    return ConstraintGraph(n=tree.n_vertices, relation=rel)


def graph_to_constraints(edges_minus, edges_plus, n: int) -> ConstraintGraph:
    """(-)-edges bound the model distance above, (+)-edges below, rest free."""
    minus = {(min(i, j), max(i, j)) for i, j in edges_minus}
    plus = {(min(i, j), max(i, j)) for i, j in edges_plus}
    both = minus & plus
    if both:
        raise OverlappingColors(f"pairs colored both ways: {sorted(both)}")
    rel = {}
    for i in range(n):
        for j in range(i + 1, n):
            if (i, j) in minus:
                rel[(i, j)] = AT_MOST
            elif (i, j) in plus:
                rel[(i, j)] = AT_LEAST
            else:
                rel[(i, j)] = FREE
    return ConstraintGraph(n=n, relation=rel)
