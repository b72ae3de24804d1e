"""A small interpolated add-alpha n-gram model and the autoregressive
generation loop used to compare decoding methods.

The model is word level: the corpus is split on whitespace (optionally
lowercased) and ids are assigned in order of first appearance.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from collections import Counter, OrderedDict
from collections.abc import Sequence
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import kernels
from .dist import Distribution, RngState, from_sorted, sample_token
from .errors import CorpusError, ParameterError
from .iqr_ip import Method, SamplerConfig, decode_step, iqr_ip_trace
from .metrics import Sample

log = logging.getLogger(__name__)

MODEL_FORMAT = "iqrip-ngram"
MODEL_VERSION = 1
DEFAULT_ORDER = 3
DEFAULT_ALPHA = 0.01
DEFAULT_LAMBDA = 0.8
DEFAULT_PROMPT = "she walks in beauty"
_CACHE_SIZE = 1024


def tokenize(text: str, lowercase: bool = True) -> list[str]:
    return (text.lower() if lowercase else text).split()


def bundled_corpus_path() -> Path:
    return Path(str(resources.files("iqrip") / "data" / "corpus.txt"))


def load_corpus(path: str | Path | None = None, lowercase: bool = True) -> list[str]:
    """Whitespace-tokenized UTF-8 text; the bundled corpus when ``path`` is None."""
    p = bundled_corpus_path() if path is None else Path(path)
    return tokenize(p.read_text(encoding="utf-8"), lowercase)


@dataclass(eq=False)
class ToyModel:
    """Interpolated add-alpha n-gram model over a closed word vocabulary.

    ``tables[j - 1]`` maps a length-``j`` context tuple to
    ``(next_ids, counts, total)``.
    """

    order: int
    vocab: tuple[str, ...]
    alpha: float
    backoff_lambda: float
    unigram: np.ndarray
    tables: list[dict]
    _word_ids: dict = field(default=None, init=False, repr=False)
    _cache: OrderedDict = field(default_factory=OrderedDict, init=False, repr=False)

    def __post_init__(self):
        self._word_ids = {w: i for i, w in enumerate(self.vocab)}
        self._base = (self.unigram + self.alpha) / (self.unigram.sum() + self.alpha * len(self.vocab))

    @property
    def vocab_size(self) -> int:
        return len(self.vocab)

    @property
    def context_len(self) -> int:
        return self.order - 1

    def encode(self, words: Sequence[str]) -> list[int]:
        try:
            return [self._word_ids[w] for w in words]
        except KeyError as exc:
            raise CorpusError(f"word {exc.args[0]!r} is not in the vocabulary") from None

    def decode(self, ids: Sequence[int]) -> list[str]:
        return [self.vocab[i] for i in ids]

    def next_probs(self, context: Sequence[int]) -> np.ndarray:
        """Probability vector over the whole vocabulary, indexed by token id."""
        p = self._base
        ctx = tuple(int(t) for t in context[len(context) - self.context_len :]) if self.context_len else ()
        for j in range(1, self.order):
            if len(ctx) < j:
                break
            entry = self.tables[j - 1].get(ctx[len(ctx) - j :])
            if entry is None:
                break
            next_ids, counts, total = entry
            p = kernels.mix_level(p, next_ids, counts, total, self.alpha, self.backoff_lambda)
        return p

    def logprob(self, token: int, context: Sequence[int]) -> float:
        return math.log(self.next_probs(context)[token])

    def score(self, tokens: Sequence[int], prompt: Sequence[int] = ()) -> list[float]:
        """Per-token log probabilities of ``tokens`` following ``prompt``."""
        history = list(prompt)
        out = []
        for t in tokens:
            out.append(math.log(self.next_probs(history)[t]))
            history.append(t)
        return out

    def next_distribution(self, context: Sequence[int]) -> Distribution:
        key = tuple(int(t) for t in context[len(context) - self.context_len :]) if self.context_len else ()
        hit = self._cache.get(key)
        if hit is not None:
            self._cache.move_to_end(key)
            return hit
        p = self.next_probs(key)
        d = from_sorted(np.arange(p.size), p)
        self._cache[key] = d
        if len(self._cache) > _CACHE_SIZE:
            self._cache.popitem(last=False)
        return d

    # -- serialization ------------------------------------------------------

    def to_json(self) -> dict:
        tables = []
        for table in self.tables:
            rows = [
                [list(ctx), entry[0].tolist(), [int(c) for c in entry[1].tolist()]]
                for ctx, entry in sorted(table.items())
            ]
            tables.append(rows)
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "config": {"order": self.order, "alpha": self.alpha, "backoff_lambda": self.backoff_lambda},
            "vocab": list(self.vocab),
            "unigram": [int(c) for c in self.unigram.tolist()],
            "tables": tables,
        }

    @classmethod
    def from_json(cls, obj: dict) -> ToyModel:
        if obj.get("format") != MODEL_FORMAT:
            raise CorpusError(f"not a {MODEL_FORMAT} model file")
        if obj.get("version") != MODEL_VERSION:
            raise CorpusError(f"unsupported model version {obj.get('version')!r}")
        cfg = obj["config"]
        tables = []
        for rows in obj["tables"]:
            table = {}
            for ctx, ids, counts in rows:
                c = np.asarray(counts, dtype=np.float64)
                table[tuple(ctx)] = (np.asarray(ids, dtype=np.int64), c, float(c.sum()))
            tables.append(table)
        return cls(
            order=int(cfg["order"]),
            vocab=tuple(obj["vocab"]),
            alpha=float(cfg["alpha"]),
            backoff_lambda=float(cfg["backoff_lambda"]),
            unigram=np.asarray(obj["unigram"], dtype=np.float64),
            tables=tables,
        )

    def to_bytes(self) -> bytes:
        return (json.dumps(self.to_json(), separators=(",", ":"), sort_keys=True) + "\n").encode("utf-8")

    def digest(self) -> str:
        return hashlib.sha256(self.to_bytes()).hexdigest()


def save_model(model: ToyModel, path: str | Path) -> None:
    Path(path).write_bytes(model.to_bytes())


def load_model(path: str | Path) -> ToyModel:
    return ToyModel.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def train_ngram(
    corpus: Sequence[str],
    order: int = DEFAULT_ORDER,
    alpha: float = DEFAULT_ALPHA,
    backoff_lambda: float = DEFAULT_LAMBDA,
) -> ToyModel:
    """Count n-grams of every length up to ``order`` over ``corpus``.

    ``p(t | ctx) = lam * (c(ctx, t) + alpha) / (c(ctx) + alpha * V)
    + (1 - lam) * p(t | shorter ctx)``, bottoming out in the add-alpha
    unigram.  Contexts never seen in training back off to the shorter
    estimate unchanged.
    """
    if int(order) != order or order < 2:
        raise ParameterError(f"order must be an integer >= 2, got {order}")
    if not alpha > 0:
        raise ParameterError(f"alpha must be > 0, got {alpha}")
    if not 0.0 < backoff_lambda < 1.0:
        raise ParameterError(f"backoff_lambda must lie in (0, 1), got {backoff_lambda}")
    if len(corpus) < order:
        raise CorpusError(f"corpus has {len(corpus)} tokens, fewer than the order {order}")
    word_ids: dict[str, int] = {}
    ids = [word_ids.setdefault(w, len(word_ids)) for w in corpus]
    unigram = np.bincount(ids, minlength=len(word_ids)).astype(np.float64)
    tables = []
    for j in range(1, order):
        grams = Counter(tuple(ids[i - j : i + 1]) for i in range(j, len(ids)))
        by_ctx: dict[tuple, dict[int, int]] = {}
        for gram, c in grams.items():
            by_ctx.setdefault(gram[:-1], {})[gram[-1]] = c
        table = {}
        for ctx, succ in by_ctx.items():
            nxt = np.array(sorted(succ), dtype=np.int64)
            counts = np.array([succ[t] for t in nxt.tolist()], dtype=np.float64)
            table[ctx] = (nxt, counts, float(counts.sum()))
        tables.append(table)
    return ToyModel(
        order=int(order),
        vocab=tuple(word_ids),
        alpha=float(alpha),
        backoff_lambda=float(backoff_lambda),
        unigram=unigram,
        tables=tables,
    )


_default_model: ToyModel | None = None


def default_model() -> ToyModel:
    """Trigram model on the bundled corpus with the default smoothing (cached)."""
    global _default_model
    if _default_model is None:
        _default_model = train_ngram(load_corpus())
    return _default_model


def default_prompt(model: ToyModel) -> list[int]:
    words = tokenize(DEFAULT_PROMPT)
    if all(w in model._word_ids for w in words):
        return model.encode(words)
    first = list(model.vocab[: model.order])
    return model.encode(first)


@dataclass
class GenerationRecord:
    """A generated sample with the settings that produced it.

    ``sample.step_logprobs`` holds the raw model log probability of each
    chosen token.  ``filtered_logprobs`` uses the truncated distribution
    before permutation and ``sampled_logprobs`` the distribution actually
    sampled from.
    """

    sample: Sample
    config: SamplerConfig
    method: Method
    filtered_logprobs: list[float]
    sampled_logprobs: list[float]
    very_low_steps: int = 0

    def to_json(self) -> dict:
        out = self.sample.to_json()
        out["method"] = self.method.value
        out["config"] = self.config.to_json()
        out["filtered_logprobs"] = self.filtered_logprobs
        out["sampled_logprobs"] = self.sampled_logprobs
        return out


def generate(
    model: ToyModel,
    cfg: SamplerConfig,
    method: Method | str,
    prompt: Sequence[int],
    *,
    record_dists: bool = False,
    repartition: bool = False,
    permute: bool = True,
) -> GenerationRecord:
    """Sample ``cfg.max_len`` tokens after ``prompt`` with the chosen method.

    ``record_dists`` keeps each step's raw model distribution on the sample.
    """
    method = Method(method)
    if len(prompt) == 0:
        raise CorpusError("prompt must be nonempty")
    rng = RngState(cfg.seed)
    history = [int(t) for t in prompt]
    tokens: list[int] = []
    raw_lp: list[float] = []
    filt_lp: list[float] = []
    samp_lp: list[float] = []
    dists: list[Distribution] | None = [] if record_dists else None
    very_low = 0
    for _ in range(cfg.max_len):
        raw = model.next_distribution(history)
        if method is Method.IQR_IP:
            trace = iqr_ip_trace(raw, cfg, repartition=repartition, permute=permute)
            filtered, final = trace.filtered, trace.output
            if 4 in trace.partition.codes:
                very_low += 1
        else:
            filtered, final = decode_step(raw, cfg, method)
        t = sample_token(final, rng)
        raw_lp.append(math.log(raw.prob(t)))
        filt_lp.append(math.log(filtered.prob(t)))
        samp_lp.append(math.log(final.prob(t)))
        if dists is not None:
            dists.append(raw)
        tokens.append(t)
        history.append(t)
    if very_low:
        log.info("VeryLow band was nonempty on %d of %d steps (seed %d)", very_low, cfg.max_len, cfg.seed)
    sample = Sample(tokens=tokens, step_logprobs=raw_lp, step_distributions=dists, prompt=list(prompt))
    return GenerationRecord(sample, cfg, method, filt_lp, samp_lp, very_low)
