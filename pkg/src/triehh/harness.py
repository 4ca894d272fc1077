"""Experiment batteries: many seeded runs, top-K metrics, discovery curves.

Metric conventions (per run, for a cut-off ``K``):

* ``truth(K)`` is the ``K`` sequences of highest population frequency;
* recall is ``|D & truth(K)| / K`` for the discovered set ``D``;
* precision is ``|D & truth(K)| / |D|``, and 0 when nothing was discovered.

Means across runs carry a normal-approximation 95% half-width
``1.96 * s / sqrt(R)`` (0 for a single run). The reported F1 is the harmonic
mean of the mean precision and mean recall; its half-width comes from the
per-run F1 values.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .analysis import discovery_rate
from .dataset import UserDataset
from .errors import ParameterError
from .privacy import PrivacyParams, choose_parameters
from .simulation import MULTI_WORD, SINGLE_WORD, SCHEMA_VERSION, ProtocolParams, RunReport, run

Z95 = 1.959963984540054


@dataclass(frozen=True)
class ExperimentSpec:
    """What to run.

    Either ``params`` is given, or ``epsilon`` (with ``delta_mode`` and
    ``max_length``) from which :func:`~triehh.privacy.choose_parameters`
    derives them for this dataset's ``n``.
    """

    dataset: UserDataset
    runs: int = 1
    top_k: Sequence[int] = (10,)
    base_seed: int = 0
    mode: str = SINGLE_WORD
    params: PrivacyParams | ProtocolParams | None = None
    epsilon: float | None = None
    delta_mode: Any = "invn2"
    max_length: int | None = None
    workers: int = 1

    def __post_init__(self):
        if self.runs < 1:
            raise ParameterError(f"runs >= 1 violated: runs={self.runs}")
        if not self.top_k or any(int(k) != k or k < 1 for k in self.top_k):
            raise ParameterError(f"top-K values must be integers >= 1, got {list(self.top_k)}")
        if self.base_seed < 0:
            raise ParameterError(f"base_seed must be non-negative, got {self.base_seed}")
        if self.mode not in (SINGLE_WORD, MULTI_WORD):
            raise ParameterError(f"unknown mode {self.mode!r}")
        if self.params is None and self.epsilon is None:
            raise ParameterError("give either params or epsilon")
        if self.workers < 1:
            raise ParameterError(f"workers >= 1 violated: {self.workers}")

    def resolve_params(self):
        if self.params is not None:
            return self.params
        L = self.max_length if self.max_length is not None else self.dataset.max_length
        return choose_parameters(self.dataset.n, L, self.epsilon, self.delta_mode)

    def seeds(self) -> range:
        return range(self.base_seed, self.base_seed + self.runs)


def mean_ci(values) -> tuple[float, float]:
    """Mean and 95% normal half-width; the half-width is 0 for fewer than two values."""
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise ParameterError("no values to aggregate")
    if x.size == 1:
        return float(x[0]), 0.0
    return float(x.mean()), float(Z95 * x.std(ddof=1) / math.sqrt(x.size))


def harmonic(p: float, r: float) -> float:
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)


def run_metrics(discovered, truth, k: int) -> tuple[float, float, float]:
    """(precision, recall, F1) of one run at cut-off ``k``."""
    hits = len(set(discovered) & set(truth))
    precision = hits / len(discovered) if discovered else 0.0
    recall = hits / k
    return precision, recall, harmonic(precision, recall)


@dataclass
class Stat:
    mean: float
    ci: float

    def to_dict(self):
        return {"mean": self.mean, "ci95": self.ci}


@dataclass
class KMetrics:
    k: int
    precision: Stat
    recall: Stat
    f1: Stat

    def to_dict(self):
        return {"k": self.k, "precision": self.precision.to_dict(), "recall": self.recall.to_dict(),
                "f1": self.f1.to_dict()}


@dataclass
class MetricsReport:
    mode: str
    params: Any
    seeds: list[int]
    n: int
    per_k: list[KMetrics]
    discovery_counts: dict[str, int]
    word_rates: dict[str, float]
    theoretical: dict[str, float] | None
    words_discovered: Stat
    rounds_executed: Stat
    kanon_violations: int
    runtime: dict[str, float] = field(default_factory=dict)
    runs: list[RunReport] | None = None

    @property
    def R(self) -> int:
        return len(self.seeds)

    def metric(self, k: int) -> KMetrics:
        for row in self.per_k:
            if row.k == k:
                return row
        raise KeyError(k)

    def to_dict(self, include_runtime: bool = False) -> dict:
        d = {
            "schema_version": SCHEMA_VERSION,
            "mode": self.mode,
            "params": self.params.to_dict(),
            "n": self.n,
            "runs": self.R,
            "seeds": [self.seeds[0], self.seeds[-1]],
            "top_k": [m.to_dict() for m in self.per_k],
            "word_rates": self.word_rates,
            "words_discovered": self.words_discovered.to_dict(),
            "rounds_executed": self.rounds_executed.to_dict(),
            "kanon_violations": self.kanon_violations,
        }
        if self.theoretical is not None:
            d["theoretical_rates"] = self.theoretical
        if include_runtime:
            d["runtime"] = self.runtime
        return d

    def to_json(self, include_runtime: bool = False) -> str:
        return json.dumps(self.to_dict(include_runtime), sort_keys=True, ensure_ascii=False, indent=1) + "\n"

    def to_csv(self) -> str:
        """One row per (K, metric)."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "metric", "mean", "ci95"])
        for m in self.per_k:
            for name in ("precision", "recall", "f1"):
                s = getattr(m, name)
                w.writerow([m.k, name, repr(s.mean), repr(s.ci)])
        return buf.getvalue()


def kanon_violations(report: RunReport, theta: int) -> int:
    """Prefixes added with a logged tally below ``theta``."""
    return sum(1 for r in report.rounds for c in r.added.values() if c < theta)


_shared: dict[str, Any] = {}


def _init_worker(dataset, params, mode, keep_rounds):
    _shared.update(dataset=dataset, params=params, mode=mode, keep_rounds=keep_rounds)


def _one(seed: int) -> RunReport:
    return run(_shared["dataset"], _shared["params"], seed, _shared["mode"], _shared["keep_rounds"])


def run_reports(spec: ExperimentSpec, keep_rounds: bool = False) -> list[RunReport]:
    """The ``R`` run reports, ordered by seed.

    With ``workers > 1`` the dataset is shipped once to each worker process.
    """
    params = spec.resolve_params()
    seeds = list(spec.seeds())
    if spec.workers == 1 or spec.runs == 1:
        return [run(spec.dataset, params, s, spec.mode, keep_rounds) for s in seeds]
    with ProcessPoolExecutor(max_workers=spec.workers, initializer=_init_worker,
                             initargs=(spec.dataset, params, spec.mode, keep_rounds)) as pool:
        return list(pool.map(_one, seeds, chunksize=max(1, spec.runs // (4 * spec.workers))))


def run_battery(spec: ExperimentSpec, keep_runs: bool = False, keep_rounds: bool = False) -> MetricsReport:
    """Execute ``spec.runs`` independent seeded runs and aggregate top-K metrics."""
    params = spec.resolve_params()
    dataset = spec.dataset
    started = time.perf_counter()
    reports = run_reports(spec, keep_rounds)
    elapsed = time.perf_counter() - started

    ks = sorted(set(int(k) for k in spec.top_k))
    ranked = dataset.top_k(max(ks))
    per_k = []
    for k in ks:
        truth = ranked[:k]
        rows = np.array([run_metrics(r.words, truth, k) for r in reports])
        p, pci = mean_ci(rows[:, 0])
        rc, rci = mean_ci(rows[:, 1])
        _, fci = mean_ci(rows[:, 2])
        per_k.append(KMetrics(k, Stat(p, pci), Stat(rc, rci), Stat(harmonic(p, rc), fci)))

    counts = Counter(w for r in reports for w in r.words)
    R = len(reports)
    # Rates for the tracked words: the largest truth set plus anything discovered.
    tracked = sorted(set(ranked) | set(counts))
    word_rates = {w: counts.get(w, 0) / R for w in tracked}
    theoretical = None
    if spec.mode == SINGLE_WORD:
        holders = dataset.holders()
        theoretical = {w: discovery_rate(dataset.n, params.m, params.theta, holders.get(w, 0), len(w))
                       for w in tracked}

    return MetricsReport(
        mode=spec.mode,
        params=params,
        seeds=list(spec.seeds()),
        n=dataset.n,
        per_k=per_k,
        discovery_counts=dict(sorted(counts.items())),
        word_rates=word_rates,
        theoretical=theoretical,
        words_discovered=Stat(*mean_ci([len(r.words) for r in reports])),
        rounds_executed=Stat(*mean_ci([r.rounds_executed for r in reports])),
        kanon_violations=sum(kanon_violations(r, params.theta) for r in reports),
        runtime={"wall_seconds": elapsed, "seconds_per_run": elapsed / R},
        runs=reports if keep_runs else None,
    )


@dataclass
class CurveRow:
    f_lo: float
    f_hi: float
    frequency: float
    words: int
    empirical: float
    ci: float
    theoretical: float | None
    sigma: float | None

    def to_dict(self):
        return {k: getattr(self, k) for k in
                ("f_lo", "f_hi", "frequency", "words", "empirical", "ci", "theoretical", "sigma")}


def discovery_curve(spec: ExperimentSpec, frequency_bins: Sequence[float],
                    report: MetricsReport | None = None) -> list[CurveRow]:
    """Empirical against worst-case discovery rate, bucketed by population frequency.

    ``frequency_bins`` are increasing edges; bin ``j`` is ``[e_j, e_{j+1})``
    and the last bin is closed. Every word of the population in a bin
    contributes its own rate (never-discovered words count as 0). The
    theoretical column averages :func:`~triehh.analysis.discovery_rate` over
    the bin's words, each with its exact holder count and length; ``sigma``
    is the binomial standard error of the empirical column under those
    rates. Both are ``None`` in multi-word mode. Empty bins are skipped.
    """
    edges = np.asarray(frequency_bins, dtype=float)
    if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
        raise ParameterError("frequency_bins must be at least two strictly increasing edges")
    if report is None:
        report = run_battery(spec)
    params = report.params
    dataset = spec.dataset
    R = report.R
    freq = dataset.population_frequencies()
    holders = dataset.holders()
    counts = report.discovery_counts
    words = sorted(freq)
    f = np.array([freq[w] for w in words])
    idx = np.searchsorted(edges, f, side="right") - 1
    idx[f == edges[-1]] = edges.size - 2
    rows = []
    for j in range(edges.size - 1):
        members = [words[i] for i in np.flatnonzero(idx == j)]
        if not members:
            continue
        emp = np.array([counts.get(w, 0) / R for w in members])
        e_mean, e_ci = mean_ci(emp)
        theo = sigma = None
        if spec.mode == SINGLE_WORD:
            t = np.array([discovery_rate(dataset.n, params.m, params.theta, holders[w], len(w)) for w in members])
            theo = float(t.mean())
            sigma = float(math.sqrt(np.sum(t * (1 - t)) / R) / len(members))
        rows.append(CurveRow(float(edges[j]), float(edges[j + 1]), float(np.mean([freq[w] for w in members])),
                             len(members), e_mean, e_ci, theo, sigma))
    return rows


def plot_rows(report: MetricsReport, curve: Sequence[CurveRow] | None = None) -> list[tuple]:
    """Flat ``(series, x, y, ci)`` rows: recall, precision and F1 against K, and the discovery curve."""
    rows = []
    for name in ("recall", "precision", "f1"):
        for m in report.per_k:
            s = getattr(m, name)
            rows.append((f"{name}_at_k", m.k, s.mean, s.ci))
    for row in curve or ():
        rows.append(("discovery_empirical", row.frequency, row.empirical, row.ci))
        if row.theoretical is not None:
            rows.append(("discovery_theoretical", row.frequency, row.theoretical, 0.0))
    return rows


def plot_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["series", "x", "y", "ci95"])
    for series, x, y, ci in rows:
        w.writerow([series, repr(x) if isinstance(x, float) else x, repr(float(y)), repr(float(ci))])
    return buf.getvalue()
