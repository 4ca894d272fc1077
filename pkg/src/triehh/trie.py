"""Server-side prefix trie and the one-level voting step.

A :class:`Trie` is an immutable value. Growing it returns a new trie, so a
trie can be shared between threads or kept in a round log without copying.
Prefixes are plain strings; the end-of-sequence marker ``EOS`` is an ordinary
symbol that may only appear last.
"""

from __future__ import annotations

from collections import Counter
from typing import Iterable, Mapping

from .errors import AlphabetError, ParameterError

EOS = "$"

#: Printable ASCII without whitespace. ``EOS`` is part of it.
DEFAULT_ALPHABET = frozenset(chr(c) for c in range(33, 127))

#: Symbols a raw token may contain (everything but the EOS marker).
TOKEN_SYMBOLS = DEFAULT_ALPHABET - {EOS}


class Node:
    __slots__ = ("symbol", "depth", "_children")

    def __init__(self, symbol: str | None, depth: int):
        self.symbol = symbol
        self.depth = depth
        self._children: dict[str, Node] = {}

    @property
    def children(self) -> tuple["Node", ...]:
        """Child nodes in symbol order."""
        return tuple(self._children[s] for s in sorted(self._children))

    def child(self, symbol: str) -> "Node | None":
        return self._children.get(symbol)

    @property
    def is_leaf(self) -> bool:
        return not self._children

    def __repr__(self):
        return f"Node({self.symbol!r}, depth={self.depth}, children={len(self._children)})"


class Trie:
    """Immutable prefix tree.

    Build one with :meth:`empty` or :meth:`from_prefixes`; grow it with
    :meth:`with_prefixes` or :func:`grow_one_level`. Two tries compare equal
    when they hold the same set of prefixes.
    """

    __slots__ = ("_root", "_prefixes", "_levels")

    def __init__(self, prefixes: Iterable[str] = ()):
        prefixes = frozenset(prefixes)
        root = Node(None, 0)
        # Insert shortest first so every parent exists before its children.
        for p in sorted(prefixes, key=lambda s: (len(s), s)):
            if not p:
                raise ParameterError("the empty prefix is the root and cannot be added")
            parent = root
            for sym in p[:-1]:
                parent = parent.child(sym)
                if parent is None:
                    raise ParameterError(f"prefix {p!r} added without its parent {p[:-1]!r}")
            if parent.symbol == EOS:
                raise ParameterError(f"prefix {p!r} extends past the end-of-sequence marker")
            if p[-1] not in parent._children:
                parent._children[p[-1]] = Node(p[-1], len(p))
        self._root = root
        self._prefixes = prefixes
        self._levels = max(map(len, prefixes), default=0)

    @classmethod
    def empty(cls) -> "Trie":
        return cls()

    @classmethod
    def from_prefixes(cls, prefixes: Iterable[str]) -> "Trie":
        return cls(prefixes)

    @classmethod
    def from_words(cls, words: Iterable[str]) -> "Trie":
        """Trie holding every prefix of every word."""
        return cls(w[:i] for w in words for i in range(1, len(w) + 1))

    @property
    def root(self) -> Node:
        return self._root

    @property
    def prefixes(self) -> frozenset[str]:
        return self._prefixes

    @property
    def levels(self) -> int:
        """Depth of the deepest node; 0 for the bare root."""
        return self._levels

    def level(self, i: int) -> frozenset[str]:
        return frozenset(p for p in self._prefixes if len(p) == i)

    def with_prefixes(self, new: Iterable[str]) -> "Trie":
        new = frozenset(new)
        if new <= self._prefixes:
            return self
        return Trie(self._prefixes | new)

    def __contains__(self, prefix: str) -> bool:
        # The empty prefix is the root, which is always present.
        return prefix == "" or prefix in self._prefixes

    def __len__(self):
        return len(self._prefixes)

    def __eq__(self, other):
        if not isinstance(other, Trie):
            return NotImplemented
        return self._prefixes == other._prefixes

    def __hash__(self):
        return hash(self._prefixes)

    def __repr__(self):
        return f"Trie({len(self._prefixes)} prefixes, {self._levels} levels)"

    def to_dict(self) -> dict:
        def encode(node: Node) -> dict:
            return {"symbol": node.symbol, "children": [encode(c) for c in node.children]}

        return {"node": encode(self._root)}

    @classmethod
    def from_dict(cls, data: Mapping) -> "Trie":
        prefixes = []

        def walk(node: Mapping, path: str):
            for child in node.get("children", []):
                p = path + child["symbol"]
                prefixes.append(p)
                walk(child, p)

        walk(data["node"], "")
        return cls(prefixes)


def check_alphabet(sequences: Iterable[str], alphabet: frozenset[str] = DEFAULT_ALPHABET) -> None:
    """Raise :class:`AlphabetError` for foreign symbols or a misplaced EOS."""
    for seq in set(sequences):
        bad = set(seq) - alphabet
        if bad:
            raise AlphabetError(f"sequence {seq!r} uses symbols outside the alphabet: {sorted(bad)}")
        if EOS in seq[:-1]:
            raise AlphabetError(f"sequence {seq!r} has the end-of-sequence marker before its end")


class VoteTally(Counter):
    """Votes per length-``level`` candidate prefix for one round."""

    def __init__(self, votes: Mapping[str, int] | None = None, level: int = 0):
        super().__init__(votes or {})
        self.level = level

    def above(self, threshold: int) -> frozenset[str]:
        return frozenset(p for p, c in self.items() if c >= threshold)

    def to_dict(self) -> dict[str, int]:
        return {p: self[p] for p in sorted(self)}


def tally_votes(sequences: Iterable[str], trie: Trie, level: int) -> VoteTally:
    """Count one vote for ``w[:level]`` from each sequence whose parent prefix is in ``trie``.

    Duplicate sequences vote separately. Sequences shorter than ``level``
    abstain.
    """
    if level < 1:
        raise ParameterError(f"level must be >= 1, got {level}")
    parent = level - 1
    tally = VoteTally(level=level)
    for w in sequences:
        if len(w) >= level and w[:parent] in trie:
            tally[w[:level]] += 1
    return tally


def grow_one_level(
    sampled_sequences: Iterable[str],
    trie: Trie,
    threshold: int,
    level: int,
    alphabet: frozenset[str] = DEFAULT_ALPHABET,
) -> Trie:
    """Return ``trie`` plus every length-``level`` prefix with at least ``threshold`` votes."""
    if threshold < 1:
        raise ParameterError(f"threshold must be >= 1, got {threshold}")
    if level < 1:
        raise ParameterError(f"level must be >= 1, got {level}")
    if trie.levels > level - 1:
        raise ParameterError(f"trie already has {trie.levels} levels; cannot grow level {level}")
    sampled_sequences = list(sampled_sequences)
    check_alphabet(sampled_sequences, alphabet)
    return trie.with_prefixes(tally_votes(sampled_sequences, trie, level).above(threshold))


def extract_words(trie: Trie) -> list[str]:
    """Completely learned sequences: root-to-leaf paths ending in EOS, sorted."""
    return sorted(p for p in trie.prefixes if p.endswith(EOS))


def extract_prefixes(trie: Trie) -> list[str]:
    """Every discovered prefix, ordered by depth-first symbol order."""
    out: list[str] = []

    def walk(node: Node, path: str):
        for c in node.children:
            p = path + c.symbol
            out.append(p)
            walk(c, p)

    walk(trie.root, "")
    return out
