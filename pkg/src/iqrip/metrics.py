"""Corpus statistics for generated text: windowed repetition entropy, loop
detection, trajectory extraction, Zipf coefficient, Self-BLEU and perplexity.

All metrics work on integer token ids.
"""

from __future__ import annotations

import math
from collections import Counter
from collections.abc import Callable, Hashable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from . import kernels
from .dist import Distribution, entropy
from .errors import DistributionError, InfinitePerplexityError, ParameterError, UndefinedFitError

if TYPE_CHECKING:
    from .toy_lm import ToyModel

DEFAULT_WINDOW = 200
LOOP_THRESHOLD = 2.0
BLEU_EPSILON = 1e-9


@dataclass
class Sample:
    """One generated sequence plus optional per-step records."""

    tokens: list[int]
    step_logprobs: list[float] | None = None
    step_distributions: list[Distribution] | None = None
    prompt: list[int] = field(default_factory=list)

    def __post_init__(self):
        self.tokens = [int(t) for t in self.tokens]
        self.prompt = [int(t) for t in self.prompt]
        for name in ("step_logprobs", "step_distributions"):
            seq = getattr(self, name)
            if seq is not None and len(seq) != len(self.tokens):
                raise ValueError(f"{name} has {len(seq)} entries for {len(self.tokens)} tokens")

    def to_json(self) -> dict:
        out: dict = {"tokens": self.tokens}
        if self.step_logprobs is not None:
            out["logprobs"] = self.step_logprobs
        if self.prompt:
            out["prompt"] = self.prompt
        if self.step_distributions is not None:
            out["dists"] = [d.to_json() for d in self.step_distributions]
        return out

    @classmethod
    def from_json(cls, obj: dict) -> Sample:
        dists = obj.get("dists")
        return cls(
            tokens=obj["tokens"],
            step_logprobs=obj.get("logprobs"),
            step_distributions=None if dists is None else [Distribution.from_json(d) for d in dists],
            prompt=obj.get("prompt", []),
        )


@dataclass(frozen=True)
class LoopSpan:
    sample: int
    start: int
    end: int  # exclusive token index


@dataclass(frozen=True)
class TrajectoryPoint:
    appearance: int
    prob: float
    rank: int
    entropy: float


@dataclass(frozen=True)
class Trajectory:
    word: int
    sample: int
    points: tuple[TrajectoryPoint, ...]

    def series(self, attr: str) -> list[float]:
        return [getattr(pt, attr) for pt in self.points]


@dataclass(frozen=True)
class MetricsReport:
    perplexity: float | None
    self_bleu4: float
    self_bleu5: float
    zipf: float
    h_rep: float
    loop_spans: tuple[LoopSpan, ...] = ()

    def to_json(self) -> dict:
        return {
            "perplexity": self.perplexity,
            "self_bleu4": self.self_bleu4,
            "self_bleu5": self.self_bleu5,
            "zipf": self.zipf,
            "h_rep": self.h_rep,
            "loop_spans": [[s.sample, s.start, s.end] for s in self.loop_spans],
        }


# -- repetition entropy -----------------------------------------------------


def _dense_codes(tokens: Sequence[Hashable]) -> tuple[np.ndarray, int]:
    _, codes = np.unique(np.asarray(tokens), return_inverse=True)
    codes = codes.astype(np.int64).ravel()
    return codes, int(codes.max()) + 1


def h_rep(window: Sequence[Hashable]) -> float:
    """Entropy (nats) of the token-frequency distribution inside ``window``."""
    if len(window) == 0:
        raise DistributionError("empty window")
    counts = np.fromiter(Counter(window).values(), dtype=np.float64)
    return entropy(counts / counts.sum())


def window_entropies(tokens: Sequence[Hashable], window_len: int = DEFAULT_WINDOW) -> np.ndarray:
    """``h_rep`` of every stride-1 window; one whole-sample window if shorter."""
    if window_len < 1:
        raise ParameterError(f"window_len must be >= 1, got {window_len}")
    if len(tokens) == 0:
        raise DistributionError("empty sample")
    codes, n_codes = _dense_codes(tokens)
    return kernels.window_entropies(codes, min(window_len, codes.size), n_codes)


def sample_h_rep(tokens: Sequence[Hashable], window_len: int = DEFAULT_WINDOW) -> float:
    """Mean windowed entropy of one sample."""
    return float(np.mean(window_entropies(tokens, window_len)))


def _runs(flags: np.ndarray) -> list[tuple[int, int]]:
    """Maximal runs of True as (first, last) inclusive indices."""
    padded = np.concatenate(([False], flags, [False])).astype(np.int8)
    edges = np.flatnonzero(np.diff(padded))
    return [(int(a), int(b) - 1) for a, b in zip(edges[::2], edges[1::2])]


def detect_loops(
    tokens: Sequence[Hashable], window_len: int = DEFAULT_WINDOW, threshold: float = LOOP_THRESHOLD
) -> list[tuple[int, int]]:
    """Token spans ``(start, end)`` (end exclusive) covered by low-entropy windows.

    Consecutive windows with ``h_rep < threshold`` are merged into one span.
    """
    ent = window_entropies(tokens, window_len)
    width = min(window_len, len(tokens))
    return [(a, b + width) for a, b in _runs(ent < threshold)]


def extract_trajectories(
    samples: Sequence[Sample], window_len: int = DEFAULT_WINDOW, min_count: int = 30, threshold: float = LOOP_THRESHOLD
) -> list[Trajectory]:
    """Trace repetitive tokens through their step distributions.

    A token is repetitive when it occurs more than ``min_count`` times in some
    low-entropy window.  Every appearance of it in the sample becomes one
    point: its predicted probability, rank and the step distribution's entropy.
    """
    out: list[Trajectory] = []
    for si, s in enumerate(samples):
        if s.step_distributions is None:
            raise DistributionError(f"sample {si} carries no step distributions")
        if not s.tokens:
            continue
        ent = window_entropies(s.tokens, window_len)
        width = min(window_len, len(s.tokens))
        repetitive: set[int] = set()
        for w in np.flatnonzero(ent < threshold).tolist():
            counts = Counter(s.tokens[w : w + width])
            repetitive.update(t for t, c in counts.items() if c > min_count)
        entropies: dict[int, float] = {}
        for word in sorted(repetitive):
            points = []
            for j, t in enumerate(s.tokens):
                if t != word:
                    continue
                d = s.step_distributions[j]
                if j not in entropies:
                    entropies[j] = entropy(d)
                points.append(TrajectoryPoint(len(points), d.prob(word), d.rank(word), entropies[j]))
            out.append(Trajectory(word=word, sample=si, points=tuple(points)))
    return out


# -- Zipf -------------------------------------------------------------------


def zipf_from_frequencies(freqs: Sequence[float] | np.ndarray) -> float:
    """Negated least-squares slope of log frequency against log rank."""
    f = np.sort(np.asarray(freqs, dtype=np.float64))[::-1]
    f = f[f > 0]
    if f.size < 2:
        raise UndefinedFitError("need at least two distinct tokens for a Zipf fit")
    x = np.log(np.arange(1, f.size + 1, dtype=np.float64))
    y = np.log(f)
    xc = x - x.mean()
    # centered closed form: constant frequencies give exactly zero
    slope = float(np.dot(xc, y - y.mean()) / np.dot(xc, xc))
    return -slope + 0.0


def zipf_coefficient(samples: Sequence[Sample], key: Callable[[int], Hashable] | None = None) -> float:
    """Zipf coefficient of the pooled corpus.

    ``key`` maps token ids to the unit being counted (e.g. a detokenizer
    returning words); ids are counted directly by default.
    """
    counts: Counter = Counter()
    for s in samples:
        counts.update(s.tokens if key is None else map(key, s.tokens))
    if not counts:
        raise UndefinedFitError("empty corpus")
    return zipf_from_frequencies(list(counts.values()))


# -- Self-BLEU --------------------------------------------------------------


def _ngram_counts(tokens: Sequence[int], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu(hypothesis: Sequence[int], references: Sequence[Sequence[int]], max_ngram: int = 4) -> float:
    """Sentence BLEU with uniform weights and closest-reference brevity penalty.

    Zero n-gram matches are replaced by ``1e-9`` before taking logs.
    """
    if not references:
        raise ParameterError("at least one reference is required")
    hyp_len = len(hypothesis)
    if hyp_len == 0:
        return 0.0
    log_sum = 0.0
    for n in range(1, max_ngram + 1):
        hyp = _ngram_counts(hypothesis, n)
        total = max(sum(hyp.values()), 1)
        best: Counter = Counter()
        for ref in references:
            for g, c in _ngram_counts(ref, n).items():
                if c > best[g]:
                    best[g] = c
        matches = sum(min(c, best[g]) for g, c in hyp.items())
        log_sum += math.log((matches if matches > 0 else BLEU_EPSILON) / total)
    ref_len = min((len(r) for r in references), key=lambda r: (abs(r - hyp_len), r))
    bp = 1.0 if hyp_len > ref_len else math.exp(1.0 - ref_len / hyp_len)
    return bp * math.exp(log_sum / max_ngram)


class _TopTwo:
    """Per n-gram, the two largest counts across samples and who holds the first."""

    __slots__ = ("table",)

    def __init__(self, per_sample: list[Counter]):
        table: dict = {}
        for i, counts in enumerate(per_sample):
            for g, c in counts.items():
                slot = table.get(g)
                if slot is None:
                    table[g] = [c, i, 0]
                elif c > slot[0]:
                    slot[2] = slot[0]
                    slot[0], slot[1] = c, i
                elif c > slot[2]:
                    slot[2] = c
        self.table = table

    def max_excluding(self, g, i: int) -> int:
        slot = self.table[g]
        return slot[2] if slot[1] == i else slot[0]


def _self_bleu_scores(token_lists: list[list[int]], max_ngram: int, workers: int) -> list[float]:
    n_samples = len(token_lists)
    per_n = [[_ngram_counts(t, n) for t in token_lists] for n in range(1, max_ngram + 1)]
    tops = [_TopTwo(counts) for counts in per_n]
    lengths = np.array([len(t) for t in token_lists])

    def score(i: int) -> float:
        hyp_len = len(token_lists[i])
        if hyp_len == 0:
            return 0.0
        log_sum = 0.0
        for n in range(max_ngram):
            hyp = per_n[n][i]
            total = max(sum(hyp.values()), 1)
            top = tops[n]
            matches = sum(min(c, top.max_excluding(g, i)) for g, c in hyp.items())
            log_sum += math.log((matches if matches > 0 else BLEU_EPSILON) / total)
        others = np.delete(lengths, i)
        diff = np.abs(others - hyp_len)
        ref_len = int(others[diff == diff.min()].min())
        bp = 1.0 if hyp_len > ref_len else math.exp(1.0 - ref_len / hyp_len)
        return bp * math.exp(log_sum / max_ngram)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(score, range(n_samples)))
    return [score(i) for i in range(n_samples)]


def self_bleu(samples: Sequence[Sample], max_ngram: int = 4, ref_count: int = 0, workers: int = 1) -> float:
    """Mean BLEU of each sample against the others.

    ``ref_count = 0`` uses every other sample as a reference; otherwise the
    next ``ref_count`` samples in cyclic order are used.  Scores are averaged
    in sample order, so the result does not depend on ``workers``.
    """
    if len(samples) < 2:
        raise ParameterError("self-BLEU needs at least two samples")
    if max_ngram < 1:
        raise ParameterError(f"max_ngram must be >= 1, got {max_ngram}")
    token_lists = [list(s.tokens) for s in samples]
    if ref_count <= 0 or ref_count >= len(samples) - 1:
        scores = _self_bleu_scores(token_lists, max_ngram, workers)
    else:
        n = len(token_lists)
        scores = [
            bleu(token_lists[i], [token_lists[(i + j) % n] for j in range(1, ref_count + 1)], max_ngram)
            for i in range(n)
        ]
    return float(math.fsum(scores) / len(scores))


# -- perplexity -------------------------------------------------------------


def perplexity_from_logprobs(logprobs: Sequence[float]) -> float:
    lp = np.asarray(logprobs, dtype=np.float64)
    if lp.size == 0:
        raise DistributionError("no tokens to score")
    if np.any(np.isneginf(lp)):
        raise InfinitePerplexityError("a token has zero probability")
    return float(math.exp(-math.fsum(lp) / lp.size))


def perplexity(model: ToyModel, samples: Sequence[Sample]) -> float:
    """exp of the mean per-token negative log likelihood under ``model``.

    Each sample is scored with its prompt as left context.
    """
    logprobs: list[float] = []
    for s in samples:
        logprobs.extend(model.score(s.tokens, s.prompt))
    return perplexity_from_logprobs(logprobs)


# -- report -----------------------------------------------------------------


def corpus_h_rep(samples: Sequence[Sample], window_len: int = DEFAULT_WINDOW) -> float:
    return float(np.mean([sample_h_rep(s.tokens, window_len) for s in samples]))


def analyze(
    samples: Sequence[Sample],
    model: ToyModel | None = None,
    window_len: int = DEFAULT_WINDOW,
    threshold: float = LOOP_THRESHOLD,
    workers: int = 1,
) -> MetricsReport:
    """Full report; perplexity falls back to recorded log probabilities when
    no model is given (and is ``None`` if neither is available)."""
    if not samples:
        raise DistributionError("empty corpus")
    if model is not None:
        ppl = perplexity(model, samples)
    elif all(s.step_logprobs is not None for s in samples):
        ppl = perplexity_from_logprobs([lp for s in samples for lp in s.step_logprobs])
    else:
        ppl = None
    if len(samples) >= 2:
        sb4 = self_bleu(samples, 4, workers=workers)
        sb5 = self_bleu(samples, 5, workers=workers)
    else:
        sb4 = sb5 = math.nan
    spans = tuple(
        LoopSpan(i, a, b) for i, s in enumerate(samples) for a, b in detect_loops(s.tokens, window_len, threshold)
    )
    try:
        zipf = zipf_coefficient(samples)
    except UndefinedFitError:
        zipf = math.nan
    return MetricsReport(
        perplexity=ppl,
        self_bleu4=sb4,
        self_bleu5=sb5,
        zipf=zipf,
        h_rep=corpus_h_rep(samples, window_len),
        loop_spans=spans,
    )
