"""User population model: each user holds a multiset of EOS-terminated sequences."""

from __future__ import annotations

import hashlib
import json
from collections import Counter
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DatasetError
from .trie import EOS, check_alphabet


def _check_sequence(seq, max_length):
    if not isinstance(seq, str) or len(seq) < 2 or not seq.endswith(EOS):
        raise DatasetError(f"sequence {seq!r} must be at least one symbol followed by {EOS!r}")
    if EOS in seq[:-1]:
        raise DatasetError(f"sequence {seq!r} holds {EOS!r} before its end")
    if max_length is not None and len(seq) > max_length:
        raise DatasetError(f"sequence {seq!r} is longer than max_length={max_length}")


class UserDataset:
    """``n`` users, each with sequence counts ``c_i(w)``.

    Parameters
    ----------
    counts : sequence of mappings
        One ``{sequence: count}`` per user. Every sequence ends with ``EOS``;
        every count is a positive integer.
    user_ids : sequence of str, optional
        Defaults to ``"0"``, ``"1"``, ...
    max_length : int, optional
        Declared maximum sequence length (EOS included). Checked if given.
    origins : sequence of mappings, optional
        Per user, ``{sequence: raw forms}`` for sequences whose raw token is
        not simply the sequence minus EOS (truncated tokens). Used by OOV
        filtering.
    """

    def __init__(
        self,
        counts: Sequence[Mapping[str, int]],
        user_ids: Sequence[str] | None = None,
        max_length: int | None = None,
        origins: Sequence[Mapping[str, frozenset]] | None = None,
    ):
        if len(counts) == 0:
            raise DatasetError("dataset has no users")
        if user_ids is None:
            user_ids = [str(i) for i in range(len(counts))]
        if len(user_ids) != len(counts):
            raise DatasetError("user_ids and counts differ in length")
        if max_length is not None and max_length < 2:
            raise DatasetError(f"max_length >= 2 violated: {max_length}")
        clean = []
        for uid, user in zip(user_ids, counts):
            if not uid:
                raise DatasetError("empty user identifier")
            if not user:
                raise DatasetError(f"user {uid!r} holds no sequences")
            for seq, c in user.items():
                _check_sequence(seq, max_length)
                if int(c) != c or c < 1:
                    raise DatasetError(f"user {uid!r}: count for {seq!r} must be a positive integer, got {c}")
            clean.append({s: int(user[s]) for s in sorted(user)})
        self._counts = tuple(clean)
        self._user_ids = tuple(str(u) for u in user_ids)
        self._declared_length = max_length
        if origins is None:
            origins = [{} for _ in clean]
        self._origins = tuple({s: frozenset(o[s]) for s in sorted(o)} for o in origins)
        self._index()

    def _index(self):
        seqs, cum_counts, starts, totals = [], [], [], []
        running = 0
        for user in self._counts:
            starts.append(running)
            total = 0
            for s, c in user.items():
                seqs.append(s)
                running += c
                total += c
                cum_counts.append(running)
            totals.append(total)
        self._flat = np.array(seqs, dtype=object)
        self._cum = np.array(cum_counts, dtype=np.int64)
        self._starts = np.array(starts, dtype=np.int64)
        self._totals = np.array(totals, dtype=np.int64)
        self._single = all(len(u) == 1 for u in self._counts)
        self._max_seq = max(len(s) for s in seqs)
        self._alphabets_ok: set[frozenset] = set()

    def check_alphabet(self, alphabet: frozenset) -> None:
        """Raise :class:`AlphabetError` if any sequence leaves ``alphabet``; cached per alphabet."""
        if alphabet not in self._alphabets_ok:
            check_alphabet(self.sequences(), alphabet)
            self._alphabets_ok.add(alphabet)

    @classmethod
    def from_words(cls, words: Iterable[str], user_ids=None, max_length=None) -> "UserDataset":
        """One sequence per user; ``EOS`` is appended when missing."""
        words = [w if w.endswith(EOS) else w + EOS for w in words]
        return cls([{w: 1} for w in words], user_ids=user_ids, max_length=max_length)

    @property
    def n(self) -> int:
        return len(self._counts)

    def __len__(self):
        return len(self._counts)

    @property
    def user_ids(self) -> tuple[str, ...]:
        return self._user_ids

    @property
    def counts(self) -> tuple[dict[str, int], ...]:
        return self._counts

    @property
    def origins(self) -> tuple[dict[str, frozenset], ...]:
        return self._origins

    @property
    def max_length(self) -> int:
        """Declared maximum length, or the longest sequence present."""
        return self._declared_length if self._declared_length is not None else self._max_seq

    @property
    def longest_sequence(self) -> int:
        return self._max_seq

    @property
    def is_single_word(self) -> bool:
        return self._single

    def sequences(self) -> set[str]:
        return set(self._flat.tolist())

    def frequencies(self, i: int) -> dict[str, float]:
        """Local frequencies ``f_i(w) = c_i(w) / sum_w c_i(w)`` of user ``i``."""
        user = self._counts[i]
        total = sum(user.values())
        return {s: c / total for s, c in user.items()}

    def population_frequencies(self) -> dict[str, float]:
        """``F(w) = (1/n) sum_i f_i(w)``."""
        acc: dict[str, float] = {}
        for user in self._counts:
            total = sum(user.values())
            for s, c in user.items():
                acc[s] = acc.get(s, 0.0) + c / total
        return {s: v / self.n for s, v in acc.items()}

    def holders(self) -> Counter:
        """Number of users holding each sequence."""
        return Counter(s for user in self._counts for s in user)

    def top_k(self, k: int) -> list[str]:
        """The ``k`` sequences of highest population frequency, ties in symbol order."""
        freq = self.population_frequencies()
        return sorted(freq, key=lambda s: (-freq[s], s))[:k]

    def draw(self, users: np.ndarray, rng: np.random.Generator) -> list[str]:
        """One sequence per listed user, chosen with probability ``f_i(w)``.

        A dataset where every user holds one sequence consumes no randomness.
        """
        users = np.asarray(users, dtype=np.int64)
        if self._single:
            return self._flat[users].tolist()
        offsets = rng.integers(0, self._totals[users])
        idx = np.searchsorted(self._cum, self._starts[users] + offsets, side="right")
        return self._flat[idx].tolist()

    def single_words(self) -> list[str]:
        if not self._single:
            raise DatasetError("dataset has users with more than one distinct sequence")
        return self._flat.tolist()

    def replace(self, counts, user_ids, origins=None) -> "UserDataset":
        return UserDataset(counts, user_ids=user_ids, max_length=self._declared_length, origins=origins)

    def iter_records(self):
        for uid, user, orig in zip(self._user_ids, self._counts, self._origins):
            rec = {"user": uid, "words": user}
            if orig:
                rec["origins"] = {s: sorted(o) for s, o in orig.items()}
            yield rec

    def to_jsonl(self) -> str:
        """Canonical dump: one ``{"user", "words"[, "origins"]}`` object per line."""
        return "".join(json.dumps(r, sort_keys=True, ensure_ascii=False) + "\n" for r in self.iter_records())

    def fingerprint(self) -> str:
        return hashlib.sha256(self.to_jsonl().encode("utf-8")).hexdigest()

    def __eq__(self, other):
        if not isinstance(other, UserDataset):
            return NotImplemented
        return (self._user_ids, self._counts, self._origins) == (other._user_ids, other._counts, other._origins)

    def __repr__(self):
        kind = "single-word" if self._single else "multi-word"
        return f"UserDataset(n={self.n}, {kind}, longest={self._max_seq})"
