"""Canonical finite distributions over token ids and the primitives built on them."""

from __future__ import annotations

import json
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DistributionError, ParameterError

SUM_TOLERANCE = 1e-9
# Inputs already this close to unit mass are not divided again, which makes
# normalize() exactly idempotent.
_RENORM_SLACK = 1e-12


def _canonical_order(ids: np.ndarray, probs: np.ndarray) -> np.ndarray:
    # descending probability, ties by ascending id
    return np.lexsort((ids, -probs))


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Distribution:
    """Token ids paired with strictly positive probabilities.

    Always stored in canonical order (descending probability, ascending id
    among ties).  Build instances with :func:`normalize`; the constructor
    only validates.
    """

    ids: np.ndarray
    probs: np.ndarray
    _index: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        ids = np.asarray(self.ids, dtype=np.int64)
        probs = np.asarray(self.probs, dtype=np.float64)
        if ids.ndim != 1 or ids.shape != probs.shape:
            raise DistributionError("ids and probs must be 1-d and equally long")
        if ids.size == 0:
            raise DistributionError("empty distribution")
        if np.any(ids < 0):
            raise DistributionError("token ids must be nonnegative")
        if not np.all(probs > 0):
            raise DistributionError("probabilities must be strictly positive")
        if abs(math.fsum(probs) - 1.0) > SUM_TOLERANCE:
            raise DistributionError(f"probabilities sum to {math.fsum(probs)!r}, not 1")
        if ids.size > 1:
            step = np.diff(probs)
            ties = step == 0
            if np.any(step > 0) or np.any(ids[1:][ties] <= ids[:-1][ties]):
                raise DistributionError("distribution is not in canonical order")
            top = int(ids.max())
            if top < 4 * ids.size + 1024:
                dup = np.bincount(ids, minlength=top + 1).max() > 1
            else:
                dup = np.unique(ids).size != ids.size
            if dup:
                raise DistributionError("duplicate token ids")
        object.__setattr__(self, "ids", _frozen(ids if ids is not self.ids else ids.copy()))
        object.__setattr__(self, "probs", _frozen(probs if probs is not self.probs else probs.copy()))

    def __len__(self) -> int:
        return int(self.ids.size)

    def __repr__(self) -> str:
        pairs = ", ".join(f"{i}: {p:.6g}" for i, p in zip(self.ids[:6].tolist(), self.probs[:6].tolist()))
        more = ", ..." if len(self) > 6 else ""
        return f"Distribution({{{pairs}{more}}})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, Distribution):
            return NotImplemented
        return np.array_equal(self.ids, other.ids) and np.array_equal(self.probs, other.probs)

    __hash__ = None

    @property
    def index(self) -> dict[int, int]:
        """Map from token id to its position in canonical order."""
        if self._index is None:
            object.__setattr__(self, "_index", {t: i for i, t in enumerate(self.ids.tolist())})
        return self._index

    def prob(self, token: int) -> float:
        """Probability of ``token``; 0.0 when it is outside the support."""
        pos = self.index.get(int(token))
        return 0.0 if pos is None else float(self.probs[pos])

    def rank(self, token: int) -> int:
        """1-based rank in canonical order; ``len(self) + 1`` outside the support."""
        pos = self.index.get(int(token))
        return len(self) + 1 if pos is None else pos + 1

    def as_dict(self) -> dict[int, float]:
        return dict(zip(self.ids.tolist(), self.probs.tolist()))

    def mask(self, ids: Iterable[int]) -> np.ndarray:
        """Boolean mask over canonical positions selecting ``ids``."""
        wanted = np.fromiter((int(t) for t in ids), dtype=np.int64)
        return np.isin(self.ids, wanted)

    def restrict(self, ids: Iterable[int]) -> Distribution:
        """Renormalize onto the subset ``ids`` of the support."""
        m = self.mask(ids)
        if not m.any():
            raise DistributionError("restriction leaves no support")
        return normalize(self.probs[m], self.ids[m])

    def to_json(self) -> dict:
        return {"ids": self.ids.tolist(), "probs": self.probs.tolist()}

    @classmethod
    def from_json(cls, obj: Mapping) -> Distribution:
        try:
            return normalize(obj["probs"], obj["ids"])
        except KeyError as exc:
            raise DistributionError(f"missing field {exc.args[0]!r}") from None


def from_sorted(ids: np.ndarray, probs: np.ndarray) -> Distribution:
    """Wrap arrays that are known to be positive and unit-sum, sorting only."""
    ids = np.asarray(ids, dtype=np.int64)
    probs = np.asarray(probs, dtype=np.float64)
    order = _canonical_order(ids, probs)
    return Distribution(ids[order], probs[order])


def normalize(weights: Sequence[float] | np.ndarray, ids: Sequence[int] | np.ndarray) -> Distribution:
    """Scale nonnegative ``weights`` to unit mass, drop zeros and sort canonically.

    Raises:
        DistributionError: on length mismatch, negative or non-finite
            weights, duplicate ids, or when no weight is positive.
    """
    w = np.asarray(weights, dtype=np.float64).ravel()
    t = np.asarray(ids, dtype=np.int64).ravel()
    if w.shape != t.shape:
        raise DistributionError(f"{w.size} weights but {t.size} ids")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise DistributionError("weights must be finite and nonnegative")
    if np.unique(t).size != t.size:
        raise DistributionError("duplicate token ids")
    keep = w > 0
    if not keep.any():
        raise DistributionError("all weights are zero")
    w, t = w[keep], t[keep]
    total = math.fsum(w)
    if abs(total - 1.0) > _RENORM_SLACK:
        w = w / total
        # subnormal weights can underflow to zero when scaled
        if not np.all(w > 0):
            w, t = w[w > 0], t[w > 0]
    order = _canonical_order(t, w)
    return Distribution(t[order], w[order])


def uniform(ids: Sequence[int] | np.ndarray) -> Distribution:
    t = np.asarray(ids, dtype=np.int64)
    return normalize(np.ones(t.size), t)


def quantile(dist: Distribution | Sequence[float] | np.ndarray, q: float) -> float:
    """Linear-interpolation quantile of the probability *values*.

    With values sorted ascending as ``v``, ``h = (N - 1) * q`` and the result
    is ``v[floor(h)] + (h - floor(h)) * (v[floor(h) + 1] - v[floor(h)])``.
    """
    values = dist.probs if isinstance(dist, Distribution) else np.asarray(dist, dtype=np.float64)
    if values.size == 0:
        raise DistributionError("quantile of an empty distribution")
    if not 0.0 <= q <= 1.0:
        raise ParameterError(f"q must lie in [0, 1], got {q}")
    v = np.sort(values)
    h = (v.size - 1) * q
    lo = math.floor(h)
    if lo >= v.size - 1:
        return float(v[-1])
    frac = h - lo
    return float(v[lo] + frac * (v[lo + 1] - v[lo]))


def entropy(dist: Distribution | Sequence[float] | np.ndarray) -> float:
    """Shannon entropy in nats."""
    p = dist.probs if isinstance(dist, Distribution) else np.asarray(dist, dtype=np.float64)
    if p.size == 0:
        raise DistributionError("entropy of an empty distribution")
    p = p[p > 0]
    h = -float(np.sum(p * np.log(p)))
    return h if h > 0.0 else 0.0


class RngState:
    """Seeded uniform stream (PCG64) owned by a single generation stream."""

    MAX_SEED = 2**64 - 1

    def __init__(self, seed: int):
        seed = int(seed)
        if not 0 <= seed <= self.MAX_SEED:
            raise ParameterError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = seed
        self.draws = 0
        self._gen = np.random.Generator(np.random.PCG64(seed))

    def uniform(self) -> float:
        """One draw from [0, 1)."""
        self.draws += 1
        return float(self._gen.random())

    def __repr__(self) -> str:
        return f"RngState(seed={self.seed}, draws={self.draws})"


def sample_token(dist: Distribution, rng: RngState) -> int:
    """Inverse-CDF draw in canonical order, consuming exactly one uniform."""
    u = rng.uniform()
    return int(dist.ids[kernels.inverse_cdf_index(dist.probs, u)])


def dumps_jsonl(dists: Iterable[Distribution]) -> str:
    return "".join(json.dumps(d.to_json()) + "\n" for d in dists)
