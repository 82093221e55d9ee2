"""Formal iterated brackets and their combinatorics.

A formal bracket is a binary tree whose leaves are indexed variables ``X_j``.
Text form follows the grammar ``B ::= "X"<digits> | "[" B "," B "]"``; the
letter sequence of a valid bracket must be a run of consecutive indices.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterator, Sequence, Union

__all__ = [
    "BracketSyntaxError",
    "ConventionError",
    "Leaf",
    "Node",
    "FormalBracket",
    "Smoothness",
    "BracketAnalysis",
    "BoundBracket",
    "parse_formal_bracket",
    "parse_field_bracket",
    "analyze",
    "diff_degree",
    "basic_sub_brackets",
    "var_degrees",
    "diff_degree_of_sub",
    "bracket_counting_degree",
    "sub_bracket",
    "iter_sub_brackets",
    "required_regularity",
    "n_of_b",
    "as_bound",
]


class BracketSyntaxError(ValueError):
    """Malformed bracket text."""


class ConventionError(ValueError):
    """Letter sequence is not a run of consecutive indices."""


@dataclass(frozen=True)
class Leaf:
    index: int

    @property
    def length(self) -> int:
        return 1

    @property
    def seq(self) -> tuple[int, ...]:
        return (self.index,)

    def __str__(self) -> str:
        return f"X{self.index}"


@dataclass(frozen=True)
class Node:
    left: "FormalBracket"
    right: "FormalBracket"
    length: int = field(init=False, compare=False, repr=False)
    seq: tuple[int, ...] = field(init=False, compare=False, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "length", self.left.length + self.right.length)
        object.__setattr__(self, "seq", self.left.seq + self.right.seq)

    def __str__(self) -> str:
        return f"[{self.left},{self.right}]"


FormalBracket = Union[Leaf, Node]

_TOKEN = re.compile(r"\s*(?:(X)(\d+)|(\[)|(\])|(,))")


def _tokenize(text: str) -> list[tuple[str, int | None]]:
    tokens = []
    pos = 0
    stripped = text.rstrip()
    while pos < len(stripped):
        m = _TOKEN.match(stripped, pos)
        if m is None:
            raise BracketSyntaxError(f"unexpected character at {pos}: {stripped[pos:pos + 10]!r}")
        if m.group(1):
            tokens.append(("X", int(m.group(2))))
        else:
            tokens.append((m.group(0).strip(), None))
        pos = m.end()
    return tokens


def _parse_tree(text: str) -> FormalBracket:
    tokens = _tokenize(text)
    if not tokens:
        raise BracketSyntaxError("empty bracket")
    pos = 0

    def expect(kind: str) -> None:
        nonlocal pos
        if pos >= len(tokens) or tokens[pos][0] != kind:
            got = tokens[pos][0] if pos < len(tokens) else "end of input"
            raise BracketSyntaxError(f"expected {kind!r}, got {got!r}")
        pos += 1

    def parse() -> FormalBracket:
        nonlocal pos
        if pos >= len(tokens):
            raise BracketSyntaxError("unexpected end of input")
        kind, value = tokens[pos]
        if kind == "X":
            pos += 1
            if value < 1:
                raise BracketSyntaxError("variable indices must be positive")
            return Leaf(value)
        expect("[")
        left = parse()
        expect(",")
        right = parse()
        expect("]")
        return Node(left, right)

    tree = parse()
    if pos != len(tokens):
        raise BracketSyntaxError(f"trailing input after position {pos}")
    return tree


def _check_convention(b: FormalBracket) -> None:
    seq = b.seq
    for a, c in zip(seq, seq[1:]):
        if c != a + 1:
            raise ConventionError(
                f"letter sequence {['X%d' % j for j in seq]} is not consecutive in {b}"
            )


def parse_formal_bracket(text: str) -> FormalBracket:
    """Parse bracket text, enforcing the consecutive-index convention."""
    tree = _parse_tree(text)
    _check_convention(tree)
    return tree


def _relabel(b: FormalBracket, start: int) -> tuple[FormalBracket, dict[int, int]]:
    binding: dict[int, int] = {}

    def walk(s: FormalBracket) -> FormalBracket:
        if isinstance(s, Leaf):
            j = start + len(binding)
            binding[j] = s.index
            return Leaf(j)
        return Node(walk(s.left), walk(s.right))

    return walk(b), binding


@dataclass(frozen=True)
class BoundBracket:
    """A formal bracket together with the field index substituted for each variable."""

    bracket: FormalBracket
    binding: tuple[tuple[int, int], ...]

    @classmethod
    def identity(cls, b: FormalBracket) -> "BoundBracket":
        return cls(b, tuple((j, j) for j in b.seq))

    @classmethod
    def from_map(cls, b: FormalBracket, binding: dict[int, int]) -> "BoundBracket":
        missing = [j for j in b.seq if j not in binding]
        if missing:
            raise ValueError(f"binding does not cover variables {missing}")
        return cls(b, tuple((j, int(binding[j])) for j in b.seq))

    def field_of(self, j: int) -> int:
        for var, f in self.binding:
            if var == j:
                return f
        raise KeyError(j)

    @property
    def fields(self) -> tuple[int, ...]:
        """Field indices in letter-sequence order."""
        return tuple(f for _, f in self.binding)

    @property
    def length(self) -> int:
        return self.bracket.length

    def field_text(self) -> str:
        """Bracket text with variables replaced by their field indices."""

        def walk(s: FormalBracket) -> str:
            if isinstance(s, Leaf):
                return f"X{self.field_of(s.index)}"
            return f"[{walk(s.left)},{walk(s.right)}]"

        return walk(self.bracket)

    def __str__(self) -> str:
        return self.field_text()


def parse_field_bracket(text: str) -> BoundBracket:
    """Parse bracket text whose variable indices name fields directly.

    ``"[X1,[X1,X2]]"`` becomes the formal bracket ``[X1,[X2,X3]]`` bound to
    fields ``(1, 1, 2)``.  Repeated or non-consecutive field indices are
    allowed here since the letter-sequence convention applies to the
    relabelled variables.
    """
    tree = _parse_tree(text)
    relabelled, binding = _relabel(tree, 1)
    return BoundBracket.from_map(relabelled, binding)


def as_bound(b: FormalBracket | BoundBracket) -> BoundBracket:
    if isinstance(b, BoundBracket):
        return b
    return BoundBracket.identity(b)


# --- tree queries -----------------------------------------------------------

Path = Sequence[str]


def _normalize_path(path: Path) -> tuple[str, ...]:
    steps = []
    for step in path:
        s = str(step).upper()
        if s in ("L", "0"):
            steps.append("L")
        elif s in ("R", "1"):
            steps.append("R")
        else:
            raise ValueError(f"invalid path step {step!r}")
    return tuple(steps)


def sub_bracket(b: FormalBracket, path: Path) -> FormalBracket:
    node = b
    for step in _normalize_path(path):
        if isinstance(node, Leaf):
            raise ValueError(f"path {''.join(_normalize_path(path))} descends below a leaf")
        node = node.left if step == "L" else node.right
    return node


def iter_sub_brackets(b: FormalBracket) -> Iterator[tuple[tuple[str, ...], FormalBracket]]:
    """Yield ``(path, sub_bracket)`` in left-to-right pre-order."""
    stack: list[tuple[tuple[str, ...], FormalBracket]] = [((), b)]
    while stack:
        path, s = stack.pop()
        yield path, s
        if isinstance(s, Node):
            stack.append((path + ("R",), s.right))
            stack.append((path + ("L",), s.left))


def _is_pair(s: FormalBracket) -> bool:
    return isinstance(s, Node) and isinstance(s.left, Leaf) and isinstance(s.right, Leaf)


def basic_sub_brackets(b: FormalBracket) -> list[tuple[tuple[str, ...], FormalBracket]]:
    """Basic sub-brackets with their paths, ordered by position (left to right).

    A sub-bracket is basic when it has length 2, or it is a variable that is
    not one half of a length-2 sub-bracket.
    """
    out = []

    def walk(s: FormalBracket, path: tuple[str, ...], parent_is_pair: bool) -> None:
        if isinstance(s, Leaf):
            if not parent_is_pair:
                out.append((path, s))
            return
        if _is_pair(s):
            out.append((path, s))
            return
        walk(s.left, path + ("L",), False)
        walk(s.right, path + ("R",), False)

    walk(b, (), False)
    return out


def diff_degree(b: FormalBracket) -> int:
    return len(basic_sub_brackets(b))


def var_degrees(b: FormalBracket) -> dict[int, int]:
    """Differentiation degree of each variable inside ``b`` (its depth)."""
    out: dict[int, int] = {}

    def walk(s: FormalBracket, depth: int) -> None:
        if isinstance(s, Leaf):
            out[s.index] = depth
        else:
            walk(s.left, depth + 1)
            walk(s.right, depth + 1)

    walk(b, 0)
    return out


def diff_degree_of_sub(b: FormalBracket, path: Path) -> int:
    """Degree of the sub-bracket at ``path`` inside ``b``.

    Uses the recursion Deg(B;B) = 0, Deg(S_i;B) = Deg([S_1,S_2];B) + 1,
    which amounts to the depth of the addressed node.
    """
    steps = _normalize_path(path)
    sub_bracket(b, steps)
    return len(steps)


def _span(b: FormalBracket, path: tuple[str, ...]) -> tuple[str, int, int]:
    """Canonical text of ``b`` and the [start, end) span of the sub-bracket."""
    pieces: list[str] = []
    span = [0, 0]

    def emit(s: FormalBracket, p: tuple[str, ...]) -> None:
        if p == path:
            span[0] = sum(len(x) for x in pieces)
        if isinstance(s, Leaf):
            pieces.append(str(s))
        else:
            pieces.append("[")
            emit(s.left, p + ("L",))
            pieces.append(",")
            emit(s.right, p + ("R",))
            pieces.append("]")
        if p == path:
            span[1] = sum(len(x) for x in pieces)

    emit(b, ())
    return "".join(pieces), span[0], span[1]


def bracket_counting_degree(b: FormalBracket, path: Path) -> int:
    """Right brackets minus left brackets to the right of the addressed sub-bracket."""
    steps = _normalize_path(path)
    sub_bracket(b, steps)
    text, _, end = _span(b, steps)
    tail = text[end:]
    return tail.count("]") - tail.count("[")


def n_of_b(b: FormalBracket) -> int:
    """Number of flow segments in the multi-flow of ``b``."""
    if isinstance(b, Leaf):
        return 1
    return 2 * n_of_b(b.left) + 2 * n_of_b(b.right)


# --- regularity ---------------------------------------------------------------


@dataclass(frozen=True, order=True)
class Smoothness:
    """Class C^k (``lipschitz=False``) or C^{k,1} (``lipschitz=True``).

    ``order=None`` encodes C^infinity.  Ordering is by strength:
    C^k < C^{k,1} < C^{k+1}.
    """

    rank: float = field(init=False, repr=False)
    order: int | None = field(compare=False, default=0)
    lipschitz: bool = field(compare=False, default=False)

    def __post_init__(self) -> None:
        rank = float("inf") if self.order is None else 2 * self.order + int(self.lipschitz)
        object.__setattr__(self, "rank", rank)

    @classmethod
    def parse(cls, tag: str) -> "Smoothness":
        """Parse tags such as ``C0``, ``C0_1``, ``C1_1``, ``C3``, ``Smooth``."""
        t = tag.strip()
        if t.lower() in ("smooth", "cinf", "c_inf", "c^inf"):
            return cls(None)
        m = re.fullmatch(r"[Cc]\^?\{?(\d+)(?:[_,](?:1))?\}?", t)
        if m is None:
            raise ValueError(f"unknown regularity tag {tag!r}")
        lipschitz = "_" in t or "," in t
        return cls(int(m.group(1)), lipschitz)

    @property
    def tag(self) -> str:
        if self.order is None:
            return "Smooth"
        return f"C{self.order}_1" if self.lipschitz else f"C{self.order}"

    def __str__(self) -> str:
        if self.order is None:
            return "C^inf"
        return f"C^{{{self.order},1}}" if self.lipschitz else f"C^{self.order}"


def required_regularity(b: FormalBracket, k: int = 0, lipschitz: bool = True) -> dict[int, Smoothness]:
    """Per-variable class for ``g`` to be C^{B+k} (or C^{B+k-1,1} when ``lipschitz``)."""
    if k < 0:
        raise ValueError("k must be non-negative")
    if isinstance(b, Leaf):
        if lipschitz:
            if k < 1:
                raise ValueError("C^{B+k-1,1} with Length(B)=1 needs k >= 1")
            return {b.index: Smoothness(k - 1, True)}
        return {b.index: Smoothness(k, False)}
    degs = var_degrees(b)
    if lipschitz:
        return {j: Smoothness(d + k - 1, True) for j, d in degs.items()}
    return {j: Smoothness(d + k, False) for j, d in degs.items()}


def _default_regularity(b: FormalBracket) -> dict[int, Smoothness]:
    # C^B for single variables, C^{B-1,1} otherwise
    if isinstance(b, Leaf):
        return required_regularity(b, 0, lipschitz=False)
    return required_regularity(b, 0, lipschitz=True)


@dataclass(frozen=True)
class BracketAnalysis:
    bracket: FormalBracket
    length: int
    seq: tuple[int, ...]
    diff_degree: int
    basic_sub_brackets: tuple[FormalBracket, ...]
    var_degrees: dict[int, int]
    regularity: dict[int, Smoothness]
    n_of_b: int

    def to_dict(self) -> dict:
        return {
            "bracket": str(self.bracket),
            "length": self.length,
            "seq": list(self.seq),
            "diff_degree": self.diff_degree,
            "basic_sub_brackets": [str(s) for s in self.basic_sub_brackets],
            "var_degrees": {str(j): d for j, d in self.var_degrees.items()},
            "regularity": {str(j): str(c) for j, c in self.regularity.items()},
            "n_of_b": self.n_of_b,
        }


def analyze(b: FormalBracket) -> BracketAnalysis:
    return BracketAnalysis(
        bracket=b,
        length=b.length,
        seq=b.seq,
        diff_degree=diff_degree(b),
        basic_sub_brackets=tuple(s for _, s in basic_sub_brackets(b)),
        var_degrees=var_degrees(b),
        regularity=_default_regularity(b),
        n_of_b=n_of_b(b),
    )
