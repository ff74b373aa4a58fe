"""Newick and extended-Newick reading and writing.

Trees are written with children sorted by their smallest leaf label, so the
output is canonical.  Networks use hybrid tags ``#H<int>``: the first
occurrence of a tag carries the subtree below the reticulation and all later
occurrences are bare references.  Branch lengths, internal labels and
bracketed comments are accepted and thrown away.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .networks import Network, NetworkError
from .trees import Tree, TreeError

META = set("(),;:#")


class ParseError(ValueError):
    """A rejected input, with a 1-based position."""

    def __init__(self, message: str, line: int = 1, column: int = 1, kind: str = "syntax"):
        super().__init__(f"{line}:{column}: {kind} error: {message}")
        self.message = message
        self.line = line
        self.column = column
        self.kind = kind

    @property
    def diagnostics(self) -> list[tuple[int, int, str]]:
        return [(self.line, self.column, self.message)]


class LabelSet:
    """Ordered set of taxon labels with dense integer ids."""

    def __init__(self, labels: Iterable[str] = ()):
        self._ids: dict[str, int] = {}
        self._labels: list[str] = []
        for lab in labels:
            self.add(lab)

    def add(self, label: str) -> int:
        if not label or META & set(label) or any(ch.isspace() for ch in label):
            raise ValueError(f"invalid leaf label {label!r}")
        if label not in self._ids:
            self._ids[label] = len(self._labels)
            self._labels.append(label)
        return self._ids[label]

    def id(self, label: str) -> int:
        return self._ids[label]

    def label(self, i: int) -> str:
        return self._labels[i]

    def __contains__(self, label: object) -> bool:
        return label in self._ids

    def __iter__(self) -> Iterator[str]:
        return iter(self._labels)

    def __len__(self) -> int:
        return len(self._labels)

    def __repr__(self) -> str:
        return f"LabelSet({self._labels!r})"


# ---------------------------------------------------------------------------
# Parsing


@dataclass
class _Node:
    label: str | None
    hybrid: int | None
    line: int
    col: int
    children: list["_Node"] = field(default_factory=list)
    has_group: bool = False


class _Reader:
    def __init__(self, text: str, line: int = 1):
        self.text = text
        self.i = 0
        self.line0 = line

    def pos(self, i: int | None = None) -> tuple[int, int]:
        i = self.i if i is None else i
        before = self.text[:i]
        line = self.line0 + before.count("\n")
        col = i - (before.rfind("\n") + 1) + 1
        return line, col

    def error(self, msg: str, i: int | None = None, kind: str = "syntax") -> ParseError:
        line, col = self.pos(i)
        return ParseError(msg, line, col, kind)

    def skip(self) -> None:
        while self.i < len(self.text):
            ch = self.text[self.i]
            if ch.isspace():
                self.i += 1
            elif ch == "[":
                end = self.text.find("]", self.i)
                if end < 0:
                    raise self.error("unterminated comment")
                self.i = end + 1
            else:
                break

    def peek(self) -> str:
        self.skip()
        return self.text[self.i] if self.i < len(self.text) else ""

    def word(self) -> str:
        self.skip()
        start = self.i
        if self.i < len(self.text) and self.text[self.i] == "'":
            end = self.text.find("'", self.i + 1)
            if end < 0:
                raise self.error("unterminated quoted label")
            self.i = end + 1
            return self.text[start + 1:end]
        while self.i < len(self.text) and self.text[self.i] not in "(),;:[" and not self.text[self.i].isspace():
            self.i += 1
        return self.text[start:self.i]

    def node(self) -> _Node:
        self.skip()
        line, col = self.pos()
        node = _Node(None, None, line, col)
        if self.peek() == "(":
            node.has_group = True
            self.i += 1
            while True:
                node.children.append(self.node())
                ch = self.peek()
                if ch == ",":
                    self.i += 1
                elif ch == ")":
                    self.i += 1
                    break
                elif ch in ("", ";"):
                    raise self.error("unbalanced parentheses: missing ')'")
                else:
                    raise self.error(f"unexpected character {ch!r}")
        start = self.i
        raw = self.word()
        if "#" in raw:
            lab, _, tag = raw.partition("#")
            digits = tag[1:] if tag[:1] in ("H", "h") else tag
            if not digits.isdigit():
                raise self.error(f"bad hybrid tag {raw!r}", start)
            node.hybrid = int(digits)
            raw = lab
        if raw:
            node.label = raw
        if self.peek() == ":":
            self.i += 1
            self.word()
        return node

    def parse(self) -> _Node:
        root = self.node()
        ch = self.peek()
        if ch == ")":
            raise self.error("unbalanced parentheses: unexpected ')'")
        if ch != ";":
            if ch == "":
                raise self.error("missing ';' at end of input")
            raise self.error(f"unexpected character {ch!r}")
        self.i += 1
        if self.peek():
            raise self.error("trailing characters after ';'")
        return root


def _read(text: str, line: int = 1) -> tuple[_Node, _Reader]:
    reader = _Reader(text, line)
    if not text.strip():
        raise ParseError("empty input", line, 1)
    return reader.parse(), reader


def _check_label(node: _Node, labels: LabelSet | None) -> None:
    lab = node.label
    if lab is None:
        return
    if META & set(lab):
        raise ParseError(f"label {lab!r} contains a Newick metacharacter", node.line, node.col, "semantic")
    if labels is not None:
        labels.add(lab)


def parse_tree(text: str, labels: LabelSet | None = None, line: int = 1) -> Tree:
    """Parse one Newick tree.  New labels are appended to ``labels``."""
    root, _ = _read(text, line)
    seen: set[str] = set()

    def build(node: _Node):
        if node.hybrid is not None:
            raise ParseError("hybrid tag in a tree", node.line, node.col, "semantic")
        if node.children:
            if len(node.children) == 1:
                raise ParseError("internal vertex with outdegree 1", node.line, node.col, "semantic")
            return tuple(build(c) for c in node.children)
        if node.has_group:
            raise ParseError("empty parentheses", node.line, node.col, "syntax")
        if node.label is None:
            raise ParseError("unlabelled leaf", node.line, node.col, "semantic")
        if node.label in seen:
            raise ParseError(f"duplicate leaf label {node.label!r}", node.line, node.col, "semantic")
        _check_label(node, None)
        seen.add(node.label)
        return node.label

    nested = build(root)
    if labels is not None:
        for lab in _leaf_order(nested):
            labels.add(lab)
    return Tree.from_nested(nested)


def _leaf_order(nested) -> Iterator[str]:
    if isinstance(nested, str):
        yield nested
    else:
        for c in nested:
            yield from _leaf_order(c)


def parse_network(text: str, labels: LabelSet | None = None, line: int = 1) -> Network:
    """Parse an extended-Newick network.

    A childless ``label#H1`` occurrence is read as a reticulation with the
    single leaf ``label`` below it.
    """
    root, _ = _read(text, line)
    net = Network()
    hybrid_vertex: dict[int, int] = {}
    hybrid_node: dict[int, _Node] = {}
    defined: set[int] = set()
    seen: set[str] = set()
    order: list[str] = []

    def add_leaf(node: _Node) -> int:
        _check_label(node, None)
        if node.label in seen:
            raise ParseError(f"duplicate leaf label {node.label!r}", node.line, node.col, "semantic")
        seen.add(node.label)
        order.append(node.label)
        return net.add_vertex(node.label)

    def build(node: _Node) -> int:
        if node.hybrid is None:
            if node.children:
                v = net.add_vertex()
                for c in node.children:
                    net.add_edge(v, build(c))
                return v
            if node.has_group:
                raise ParseError("empty parentheses", node.line, node.col, "syntax")
            if node.label is None:
                raise ParseError("unlabelled leaf", node.line, node.col, "semantic")
            return add_leaf(node)
        h = node.hybrid
        if h not in hybrid_vertex:
            hybrid_vertex[h] = net.add_vertex()
            hybrid_node[h] = node
        v = hybrid_vertex[h]
        if node.children or node.label is not None:
            if h in defined:
                raise ParseError(f"hybrid #H{h} defined twice", node.line, node.col, "semantic")
            defined.add(h)
            hybrid_node[h] = node
            if node.children:
                for c in node.children:
                    net.add_edge(v, build(c))
            else:
                net.add_edge(v, add_leaf(node))
        return v

    top = build(root)
    for h, node in hybrid_node.items():
        if h not in defined:
            raise ParseError(f"hybrid #H{h} referenced but never defined", node.line, node.col, "semantic")
    try:
        net.topological_order()
    except NetworkError:
        raise ParseError("hybrid references introduce a directed cycle", root.line, root.col, "semantic") from None
    for h, v in hybrid_vertex.items():
        if net.indegree(v) == 1 and net.outdegree(v) == 1:
            node = hybrid_node[h]
            raise ParseError(f"#H{h} has indegree 1 and is not a reticulation", node.line, node.col, "semantic")
    for v in net.vertices:
        if v not in net.label and net.indegree(v) == 1 and net.outdegree(v) == 1:
            raise ParseError("vertex with indegree 1 and outdegree 1", root.line, root.col, "semantic")
    if net.roots != [top]:
        raise ParseError("network must have a single root", root.line, root.col, "semantic")
    if net.outdegree(top) == 1 and top not in net.label:
        raise ParseError("root has outdegree 1", root.line, root.col, "semantic")
    if labels is not None:
        for lab in order:
            labels.add(lab)
    return net


# ---------------------------------------------------------------------------
# Writing


def _tree_string(t: Tree, v: int) -> tuple[str, str]:
    """(newick, smallest label) of the subtree at ``v``."""
    if t.is_leaf(v):
        return t.label[v], t.label[v]
    parts = sorted((_tree_string(t, c) for c in t.children[v]), key=lambda p: (p[1], p[0]))
    return "(" + ",".join(p[0] for p in parts) + ")", parts[0][1]


def serialize_tree(t: Tree) -> str:
    return _tree_string(t, t.root)[0] + ";"


def serialize_network(n: Network) -> str:
    """Canonical extended Newick; trees come out as plain Newick."""
    below = n.descendants_leaves()
    unfold: dict[int, str] = {}

    def key(v: int) -> tuple[str, str]:
        if v not in unfold:
            if v in n.label:
                unfold[v] = n.label[v]
            else:
                kids = sorted(n.succ[v], key=key)
                unfold[v] = "(" + ",".join(unfold[w] for w in kids) + ")"
        return (min(below[v]) if below[v] else "", unfold[v])

    tags: dict[int, int] = {}

    def emit(v: int) -> str:
        if n.indegree(v) >= 2:
            if v in tags:
                return f"#H{tags[v]}"
            tags[v] = len(tags) + 1
            suffix = f"#H{tags[v]}"
            if v in n.label:
                return f"({n.label[v]}){suffix}"
        else:
            suffix = ""
            if v in n.label:
                return n.label[v]
        kids = sorted(n.succ[v], key=key)
        return "(" + ",".join(emit(w) for w in kids) + ")" + suffix

    return emit(n.root) + ";"


# ---------------------------------------------------------------------------
# Files


def _content_lines(text: str) -> Iterator[tuple[int, str]]:
    for i, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        yield i, raw


def parse_trees(text: str, labels: LabelSet | None = None) -> list[Tree]:
    """Parse tree-file contents: one tree per line, ``#`` comment lines."""
    labels = LabelSet() if labels is None else labels
    trees: list[Tree] = []
    first: frozenset[str] | None = None
    for lineno, raw in _content_lines(text):
        tree = parse_tree(raw, labels, line=lineno)
        if first is None:
            first = tree.leaves
        elif tree.leaves != first:
            diff = ", ".join(sorted(first ^ tree.leaves))
            raise ParseError(f"label set differs from the first tree ({diff})", lineno, 1, "semantic")
        trees.append(tree)
    if not trees:
        raise ParseError("no trees in input", 1, 1, "semantic")
    return trees


def load_trees(path: str | Path, labels: LabelSet | None = None) -> list[Tree]:
    return parse_trees(Path(path).read_text(encoding="utf-8"), labels)


def load_network(path: str | Path, labels: LabelSet | None = None) -> Network:
    text = Path(path).read_text(encoding="utf-8")
    body = "\n".join("" if ln.strip().startswith("#") else ln for ln in text.splitlines())
    return parse_network(body, labels)


def write_trees(trees: Iterable[Tree]) -> str:
    return "".join(serialize_tree(t) + "\n" for t in trees)


__all__ = [
    "LabelSet", "ParseError", "parse_tree", "serialize_tree", "parse_network",
    "serialize_network", "parse_trees", "load_trees", "load_network", "write_trees",
    "TreeError",
]
