"""Multi-round protocol simulation.

Each round draws ``m`` users uniformly without replacement, collects one
sequence from each, and grows the trie by one level. The loop stops at the
first round that adds nothing, or after ``L + 1`` rounds.

Randomness: ``numpy.random.SeedSequence(seed)`` is spawned into one child
per round, and round ``i`` uses ``default_rng(child[i-1])`` (PCG64) for both
the user sample and the per-user sequence draw. Runs are reproducible across
platforms for a given seed.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .dataset import UserDataset
from .errors import DatasetError, ParameterError
from .trie import DEFAULT_ALPHABET, Trie, extract_words, tally_votes

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

SINGLE_WORD = "single_word"
MULTI_WORD = "multi_word"


@dataclass(frozen=True)
class ProtocolParams:
    """Bare protocol knobs, without the privacy-range checks.

    Useful for toy populations (``theta=2, m=10``) outside the regime where
    the privacy bound applies. :class:`~triehh.privacy.PrivacyParams` exposes
    the same ``theta``, ``m`` and ``max_length`` attributes and can be passed
    wherever this is accepted.
    """

    theta: int
    m: int
    max_length: int | None = None

    def to_dict(self):
        return {"theta": self.theta, "m": self.m, "max_length": self.max_length}


@dataclass
class RoundLog:
    level: int
    added: dict[str, int]
    sampled_users: list[int] | None = None
    tally: dict[str, int] | None = None

    def to_dict(self):
        d: dict[str, Any] = {"level": self.level, "added": self.added}
        if self.sampled_users is not None:
            d["sampled_users"] = self.sampled_users
        if self.tally is not None:
            d["tally"] = self.tally
        return d


@dataclass
class RunReport:
    trie: Trie
    words: list[str]
    rounds: list[RoundLog]
    params: Any
    seed: int
    mode: str
    rounds_executed: int = field(init=False)

    def __post_init__(self):
        self.rounds_executed = len(self.rounds)

    def to_dict(self, include_rounds: bool = True) -> dict:
        d = {
            "schema_version": SCHEMA_VERSION,
            "mode": self.mode,
            "seed": self.seed,
            "params": self.params.to_dict(),
            "rounds_executed": self.rounds_executed,
            "words": self.words,
            "trie": self.trie.to_dict(),
        }
        if include_rounds:
            d["rounds"] = [r.to_dict() for r in self.rounds]
        return d

    def to_json(self, include_rounds: bool = True) -> str:
        return json.dumps(self.to_dict(include_rounds), sort_keys=True, ensure_ascii=False)


def sample_users(n: int, m: int, rng: np.random.Generator) -> np.ndarray:
    """``m`` distinct user indices out of ``range(n)``, every ``m``-subset equally likely."""
    if n < 1:
        raise ParameterError(f"n >= 1 violated: n={n}")
    if not 1 <= m <= n:
        raise ParameterError(f"1 <= m <= n violated: m={m}, n={n}")
    return rng.choice(n, size=m, replace=False)


def round_generators(seed: int, rounds: int) -> list[np.random.Generator]:
    children = np.random.SeedSequence(seed).spawn(rounds)
    return [np.random.default_rng(c) for c in children]


def _run(dataset: UserDataset, params, seed: int, mode: str, keep_rounds: bool, alphabet) -> RunReport:
    if not isinstance(seed, (int, np.integer)) or seed < 0:
        raise ParameterError(f"seed must be a non-negative integer, got {seed!r}")
    theta, m = int(params.theta), int(params.m)
    if theta < 1:
        raise ParameterError(f"theta >= 1 violated: theta={theta}")
    if m > dataset.n:
        raise ParameterError(f"m <= n violated: m={m}, n={dataset.n}")
    L = params.max_length if params.max_length is not None else dataset.max_length
    if dataset.longest_sequence > L:
        raise ParameterError(f"dataset holds a sequence of length {dataset.longest_sequence} > L={L}")
    dataset.check_alphabet(frozenset(alphabet))

    trie = Trie.empty()
    rounds: list[RoundLog] = []
    for level, rng in enumerate(round_generators(int(seed), L + 1), start=1):
        users = sample_users(dataset.n, m, rng)
        votes = dataset.draw(users, rng)
        tally = tally_votes(votes, trie, level)
        added = {p: tally[p] for p in sorted(tally.above(theta))}
        rounds.append(
            RoundLog(
                level=level,
                added=added,
                sampled_users=sorted(users.tolist()) if keep_rounds else None,
                tally=tally.to_dict() if keep_rounds else None,
            )
        )
        logger.info("seed %d round %d: %d votes, %d prefixes added", seed, level, len(votes), len(added))
        if not added:
            break
        trie = trie.with_prefixes(added)
    return RunReport(trie=trie, words=extract_words(trie), rounds=rounds, params=params, seed=int(seed), mode=mode)


def run_single_word(dataset: UserDataset, params, seed: int, keep_rounds: bool = True,
                    alphabet=DEFAULT_ALPHABET) -> RunReport:
    """One execution where each user holds a single sequence.

    ``params`` needs ``theta``, ``m`` and ``max_length`` (``None`` means the
    dataset's). Deterministic given ``seed``.
    """
    if not dataset.is_single_word:
        raise DatasetError("run_single_word needs exactly one distinct sequence per user")
    return _run(dataset, params, seed, SINGLE_WORD, keep_rounds, alphabet)


def run_multi_word(dataset: UserDataset, params, seed: int, keep_rounds: bool = True,
                   alphabet=DEFAULT_ALPHABET) -> RunReport:
    """One execution where each sampled user votes with one sequence drawn by local frequency."""
    return _run(dataset, params, seed, MULTI_WORD, keep_rounds, alphabet)


def run(dataset: UserDataset, params, seed: int, mode: str = SINGLE_WORD, keep_rounds: bool = True) -> RunReport:
    if mode == SINGLE_WORD:
        return run_single_word(dataset, params, seed, keep_rounds)
    if mode == MULTI_WORD:
        return run_multi_word(dataset, params, seed, keep_rounds)
    raise ParameterError(f"unknown mode {mode!r}; use {SINGLE_WORD!r} or {MULTI_WORD!r}")
