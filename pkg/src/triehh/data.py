"""Building user datasets: corpus ingestion, OOV filtering, synthetic generation.

Raw tokens become sequences by truncating to ``max_length - 1`` symbols and
appending ``EOS``, so ``max_length`` counts the marker.
"""

from __future__ import annotations

import csv
import json
import string
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator, Mapping

import numpy as np

from .dataset import UserDataset
from .errors import DatasetError, ParameterError
from .trie import EOS, TOKEN_SYMBOLS

FIXTURES = {
    "sentiment140-top100": "sentiment140_top100.json",
    "oov-top100": "oov_top100.json",
}

TOP1 = "top1"
ALL = "all"


@dataclass(frozen=True)
class CorpusRecord:
    user: str
    text: str

    def __post_init__(self):
        if not self.user:
            raise DatasetError("corpus record with empty user identifier")


@dataclass(frozen=True)
class IngestConfig:
    """How raw text becomes sequences.

    ``selection="top1"`` keeps only each user's most frequent sequence.
    Punctuation stripping is off by default so tokens such as ``*hugs*`` or
    ``:'(`` survive.
    """

    max_length: int = 10
    lowercase: bool = True
    allowed_symbols: frozenset = field(default=TOKEN_SYMBOLS)
    strip_punctuation: bool = False
    oov_dictionary: str | Path | None = None
    selection: str = ALL
    encoding: str = "utf-8"

    def __post_init__(self):
        if self.max_length < 2:
            raise ParameterError(f"max_length >= 2 violated: {self.max_length}")
        if self.selection not in (ALL, TOP1):
            raise ParameterError(f"selection must be {ALL!r} or {TOP1!r}, got {self.selection!r}")
        if EOS in self.allowed_symbols:
            raise ParameterError(f"allowed_symbols must not contain the end-of-sequence marker {EOS!r}")


def tokenize(text: str, config: IngestConfig = IngestConfig()) -> list[str]:
    """Whitespace tokens that pass the symbol filter."""
    out = []
    for tok in text.split():
        if config.lowercase:
            tok = tok.lower()
        if config.strip_punctuation:
            tok = tok.strip(string.punctuation)
        if tok and set(tok) <= config.allowed_symbols:
            out.append(tok)
    return out


def to_sequence(token: str, max_length: int) -> str:
    return token[: max_length - 1] + EOS


def load_dictionary(path: str | Path, lowercase: bool = False) -> set[str]:
    """One word per line, UTF-8; blank lines ignored."""
    with open(path, encoding="utf-8") as f:
        words = {line.strip() for line in f}
    words.discard("")
    return {w.lower() for w in words} if lowercase else words


def _build(user_tokens: Mapping[str, Counter], config: IngestConfig, dictionary=None) -> UserDataset:
    ids, counts, origins = [], [], []
    for uid, tokens in user_tokens.items():
        seq_counts: Counter = Counter()
        seq_origins: dict[str, set] = {}
        for tok, c in tokens.items():
            if dictionary is not None and tok in dictionary:
                continue
            seq = to_sequence(tok, config.max_length)
            seq_counts[seq] += c
            seq_origins.setdefault(seq, set()).add(tok)
        if not seq_counts:
            continue
        if config.selection == TOP1:
            best = min(seq_counts, key=lambda s: (-seq_counts[s], s))
            seq_counts = Counter({best: 1})
        ids.append(uid)
        counts.append(dict(seq_counts))
        origins.append({s: frozenset(o) for s, o in seq_origins.items() if s in seq_counts and o != {s[:-1]}})
    if not counts:
        raise DatasetError("no users left after tokenization and filtering")
    return UserDataset(counts, user_ids=ids, max_length=config.max_length, origins=origins)


def _dictionary_for(config: IngestConfig):
    if config.oov_dictionary is None:
        return None
    return load_dictionary(config.oov_dictionary, lowercase=config.lowercase)


def ingest_records(records: Iterable[CorpusRecord], config: IngestConfig = IngestConfig()) -> UserDataset:
    """Aggregate tokens per user, in order of first appearance."""
    per_user: dict[str, Counter] = {}
    for rec in records:
        per_user.setdefault(rec.user, Counter()).update(tokenize(rec.text, config))
    return _build(per_user, config, _dictionary_for(config))


def read_csv_records(path: str | Path, encoding: str = "utf-8") -> Iterator[CorpusRecord]:
    """Records from a 6-column Sentiment140 file or a 2-column ``user,text`` file.

    The layout is fixed by the first row. A 2-column header ``user,text`` is
    skipped.
    """
    with open(path, newline="", encoding=encoding, errors="replace") as f:
        reader = csv.reader(f)
        width = None
        for lineno, row in enumerate(reader, start=1):
            if not row:
                continue
            if width is None:
                width = len(row)
                if width not in (2, 6):
                    raise DatasetError(f"{path}: expected 2 or 6 columns, found {width}")
                if width == 2 and [c.strip().lower() for c in row] == ["user", "text"]:
                    continue
            if len(row) != width:
                raise DatasetError(f"{path}:{lineno}: expected {width} columns, found {len(row)}")
            user, text = (row[4], row[5]) if width == 6 else (row[0], row[1])
            yield CorpusRecord(user, text)


def ingest_csv(path: str | Path, config: IngestConfig = IngestConfig()) -> UserDataset:
    return ingest_records(read_csv_records(path, config.encoding), config)


def ingest_jsonl(path: str | Path, config: IngestConfig = IngestConfig()) -> UserDataset:
    """Pre-tokenized input, one ``{"user": ..., "words": {word: count}}`` per line.

    A trailing ``EOS`` on a word is dropped before the token is processed, so
    canonical dumps can be re-ingested.
    """
    per_user: dict[str, Counter] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                user, words = str(obj["user"]), obj["words"]
            except (ValueError, KeyError, TypeError) as e:
                raise DatasetError(f"{path}:{lineno}: bad record ({e})") from None
            if not user:
                raise DatasetError(f"{path}:{lineno}: empty user identifier")
            bucket = per_user.setdefault(user, Counter())
            for word, c in words.items():
                if word.endswith(EOS):
                    word = word[:-1]
                if config.lowercase:
                    word = word.lower()
                if word and set(word) <= config.allowed_symbols:
                    bucket[word] += int(c)
    return _build(per_user, config, _dictionary_for(config))


def save_dataset(dataset: UserDataset, path: str | Path) -> None:
    Path(path).write_text(dataset.to_jsonl(), encoding="utf-8")


def load_dataset(path: str | Path, max_length: int | None = None) -> UserDataset:
    """Read a canonical dump written by :func:`save_dataset`, exactly."""
    ids, counts, origins = [], [], []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                ids.append(str(obj["user"]))
                counts.append(obj["words"])
                origins.append({s: frozenset(o) for s, o in obj.get("origins", {}).items()})
            except (ValueError, KeyError, TypeError) as e:
                raise DatasetError(f"{path}:{lineno}: bad record ({e})") from None
    return UserDataset(counts, user_ids=ids, max_length=max_length, origins=origins)


def filter_oov(dataset: UserDataset, dictionary: Iterable[str]) -> UserDataset:
    """Drop sequences whose raw form is a dictionary word; drop users left empty.

    A truncated sequence that came from several raw tokens is dropped only
    when all of them are dictionary words.
    """
    dictionary = set(dictionary)
    if not dictionary:
        raise ParameterError("OOV dictionary is empty")
    ids, counts, origins = [], [], []
    for uid, user, orig in zip(dataset.user_ids, dataset.counts, dataset.origins):
        kept, kept_orig = {}, {}
        for seq, c in user.items():
            raw = orig.get(seq, frozenset({seq[:-1]}))
            survivors = raw - dictionary
            if not survivors:
                continue
            kept[seq] = c
            if seq in orig:
                kept_orig[seq] = survivors
        if kept:
            ids.append(uid)
            counts.append(kept)
            origins.append(kept_orig)
    if not counts:
        raise DatasetError("every user was removed by the OOV filter")
    return dataset.replace(counts, ids, origins)


def select_top1(dataset: UserDataset) -> UserDataset:
    """Keep each user's most frequent sequence (ties in symbol order) with count 1."""
    counts, origins = [], []
    for user, orig in zip(dataset.counts, dataset.origins):
        best = min(user, key=lambda s: (-user[s], s))
        counts.append({best: 1})
        origins.append({best: orig[best]} if best in orig else {})
    return dataset.replace(counts, dataset.user_ids, origins)


def load_fixture(name: str) -> dict[str, float]:
    """Bundled top-100 word frequency tables: ``sentiment140-top100`` or ``oov-top100``."""
    if name not in FIXTURES:
        raise ParameterError(f"unknown fixture {name!r}; choose from {sorted(FIXTURES)}")
    text = resources.files("triehh").joinpath("fixtures").joinpath(FIXTURES[name]).read_text(encoding="utf-8")
    return {w: float(f) for w, f in json.loads(text).items()}


def _random_fillers(count: int, lengths: tuple[int, int], taken: set, rng: np.random.Generator) -> list[str]:
    lo, hi = lengths
    letters = np.frombuffer(string.ascii_lowercase.encode(), dtype=np.uint8)
    sizes = rng.integers(lo, hi + 1, size=count)
    chars = letters[rng.integers(0, 26, size=(count, hi))]
    out = []
    for row, size in zip(chars, sizes):
        word = row[:size].tobytes().decode()
        tries = 0
        while word in taken:
            tries += 1
            if tries % 32 == 0:
                # Short lengths run out of unused strings; lengthen.
                if size >= hi:
                    raise ParameterError(f"cannot draw {count} distinct filler words of length <= {hi}")
                size += 1
            word = letters[rng.integers(0, 26, size=size)].tobytes().decode()
        taken.add(word)
        out.append(word)
    return out


def generate_synthetic(
    table: Mapping[str, float],
    n: int,
    words_per_user: int = 1,
    seed: int = 0,
    max_length: int = 10,
    filler_lengths: tuple[int, int] | None = None,
) -> UserDataset:
    """Draw ``words_per_user`` words per user i.i.d. from a frequency table.

    Mass not covered by ``table`` goes to filler words: random lowercase
    strings, each drawn once (lengths uniform in ``filler_lengths``, default
    ``6 .. max_length - 1``).
    """
    if n < 1:
        raise ParameterError(f"n >= 1 violated: n={n}")
    if words_per_user < 1:
        raise ParameterError(f"words_per_user >= 1 violated: {words_per_user}")
    if max_length < 2:
        raise ParameterError(f"max_length >= 2 violated: {max_length}")
    words, probs = [], []
    for w, f in table.items():
        f = float(f)
        w = w[:-1] if w.endswith(EOS) else w
        if not w or EOS in w:
            raise ParameterError(f"invalid table word {w!r}")
        if not 0 <= f <= 1:
            raise ParameterError(f"frequency of {w!r} outside [0, 1]: {f}")
        words.append(w)
        probs.append(f)
    total = sum(probs)
    if total > 1 + 1e-9:
        raise ParameterError(f"frequencies sum to {total} > 1")
    if filler_lengths is None:
        filler_lengths = (min(6, max_length - 1), max_length - 1)
    remainder = max(0.0, 1.0 - total)
    p = np.array(probs + [remainder])
    p /= p.sum()

    rng = np.random.default_rng(seed)
    draws = rng.choice(len(p), size=n * words_per_user, p=p)
    filler_slots = np.flatnonzero(draws == len(words))
    taken = set(words)
    fillers = _random_fillers(len(filler_slots), filler_lengths, taken, rng)
    tokens = np.array(words + [""], dtype=object)[draws]
    tokens[filler_slots] = fillers

    counts, origins = [], []
    for u in range(n):
        c: Counter = Counter()
        o: dict[str, set] = {}
        for tok in tokens[u * words_per_user:(u + 1) * words_per_user]:
            seq = to_sequence(tok, max_length)
            c[seq] += 1
            o.setdefault(seq, set()).add(tok)
        counts.append(dict(c))
        origins.append({s: frozenset(t) for s, t in o.items() if t != {s[:-1]}})
    return UserDataset(counts, max_length=max_length, origins=origins)


def zipf_table(vocab_size: int, s: float = 1.0, seed: int = 0, max_length: int = 10) -> dict[str, float]:
    """Frequency table ``f_k = k^-s / H`` over ``vocab_size`` random lowercase words.

    Words are distinct after truncation to ``max_length - 1`` symbols, ranked
    in order of generation.
    """
    if vocab_size < 1:
        raise ParameterError(f"vocab_size >= 1 violated: {vocab_size}")
    if s <= 0:
        raise ParameterError(f"s > 0 violated: s={s}")
    if max_length < 2:
        raise ParameterError(f"max_length >= 2 violated: {max_length}")
    rng = np.random.default_rng(seed)
    hi = max_length - 1
    words = _random_fillers(vocab_size, (min(3, hi), hi), set(), rng)
    weights = np.arange(1, vocab_size + 1, dtype=float) ** -s
    weights /= weights.sum()
    return dict(zip(words, weights.tolist()))


def planted_dataset(
    n: int,
    target: str,
    count: int,
    shared_prefix: int = 0,
    seed: int = 0,
    max_length: int = 10,
) -> UserDataset:
    """``count`` users hold ``target``; the rest hold distinct random fillers.

    With ``shared_prefix=0`` no filler starts with the target's first symbol,
    so the target shares no prefix with anything else. Otherwise every filler
    starts with the target's first ``shared_prefix`` symbols and then
    diverges. Users are shuffled.
    """
    target = target[:-1] if target.endswith(EOS) else target
    if not target or len(target) + 1 > max_length or EOS in target:
        raise ParameterError(f"target {target!r} must be 1..{max_length - 1} symbols")
    if not 0 <= count <= n or n < 1:
        raise ParameterError(f"0 <= count <= n violated: count={count}, n={n}")
    if not 0 <= shared_prefix < len(target):
        raise ParameterError(f"0 <= shared_prefix < len(target) violated: {shared_prefix}")
    rng = np.random.default_rng(seed)
    head = target[:shared_prefix]
    rest = max_length - 1 - shared_prefix
    if rest < 1:
        raise ParameterError("max_length leaves no room after the shared prefix")
    avoid = target[shared_prefix]
    bodies = _random_fillers(n - count, (min(6, rest), rest), set(), rng)
    # Move any filler that would agree with the target at the divergence point.
    shift = {c: chr((ord(c) - 97 + 1) % 26 + 97) for c in string.ascii_lowercase}
    fillers = []
    taken = {target}
    for b in bodies:
        if b[0] == avoid:
            b = shift.get(b[0], "a") + b[1:]
        w = head + b
        while w in taken:
            w = head + "".join(rng.choice(list(string.ascii_lowercase), size=rest))
            if w[shared_prefix] == avoid:
                w = w[:shared_prefix] + shift.get(avoid, "a") + w[shared_prefix + 1:]
        taken.add(w)
        fillers.append(w)
    words = [target] * count + fillers
    order = rng.permutation(n)
    return UserDataset.from_words([words[i] for i in order], max_length=max_length)
