"""Vocabulary filters: top-k, nucleus, top-1-controlled, their joint use and
the dynamic pruning rule that combines them with an IQR partition.

Every filter keeps a prefix of the canonical order, so results are returned
as :class:`CandidateSet` objects that preserve that order.
"""

from __future__ import annotations

from collections.abc import Iterable, Iterator
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from .dist import Distribution
from .errors import ConsistencyError, ParameterError

if TYPE_CHECKING:
    from .iqr_ip import IqrPartition


@dataclass(frozen=True)
class CandidateSet:
    """Ordered, duplicate-free token ids surviving a filter."""

    ids: tuple[int, ...]
    _members: frozenset = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        ids = tuple(int(t) for t in self.ids)
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "_members", frozenset(ids))

    @classmethod
    def of(cls, ids: Iterable[int]) -> CandidateSet:
        return cls(tuple(ids))

    def __len__(self) -> int:
        return len(self.ids)

    def __iter__(self) -> Iterator[int]:
        return iter(self.ids)

    def __contains__(self, token) -> bool:
        return int(token) in self._members

    def as_set(self) -> frozenset:
        return self._members

    def issubset(self, other: Iterable[int]) -> bool:
        other = other.as_set() if isinstance(other, CandidateSet) else frozenset(other)
        return self._members <= other

    def intersect(self, other: Iterable[int]) -> CandidateSet:
        """Members also in ``other``, in this set's order."""
        other = other.as_set() if isinstance(other, CandidateSet) else frozenset(other)
        return CandidateSet(tuple(t for t in self.ids if t in other))


def _prefix(dist: Distribution, length: int) -> CandidateSet:
    return CandidateSet(tuple(dist.ids[: max(1, length)].tolist()))


def top_k_set(dist: Distribution, k: int) -> CandidateSet:
    """The ``k`` most probable candidates (the whole support if smaller)."""
    if int(k) != k or k < 1:
        raise ParameterError(f"k must be a positive integer, got {k}")
    return _prefix(dist, int(k))


def top_p_length(probs: np.ndarray, p: float) -> int:
    """Length of the nucleus prefix: entries whose inclusive cdf is <= p, at least 1."""
    if not 0.0 < p <= 1.0:
        raise ParameterError(f"p must lie in (0, 1], got {p}")
    if p == 1.0:
        return int(probs.size)
    cdf = np.cumsum(probs)
    return max(1, int(np.searchsorted(cdf, p, side="right")))


def top_p_set(dist: Distribution, p: float) -> CandidateSet:
    """Nucleus filter; the argmax survives even when its mass alone exceeds ``p``."""
    return _prefix(dist, top_p_length(dist.probs, p))


def top1ctrl_length(probs: np.ndarray, n: float) -> int:
    if not n >= 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    return int(np.count_nonzero(probs >= probs[0] / n))


def top1ctrl_set(dist: Distribution, n: float) -> CandidateSet:
    """Candidates whose probability is at least ``max(p) / n``."""
    return _prefix(dist, top1ctrl_length(dist.probs, n))


def joint_filter(dist: Distribution, k: int, p: float) -> CandidateSet:
    """Intersection of the top-k and nucleus sets."""
    kset = top_k_set(dist, k)
    return _prefix(dist, min(len(kset), top_p_length(dist.probs, p)))


def dynamic_prune(partition: IqrPartition, k0: CandidateSet, vn: CandidateSet) -> CandidateSet:
    """Prune ``k0`` with the top1ctrl set ``vn``.

    When ``vn`` lies entirely inside VeryHigh and High, the result is exactly
    VeryHigh and High (Medium and Low are dropped as too far from the peak);
    otherwise it is ``k0 & vn``.
    """
    if partition.ids != k0.ids:
        if frozenset(partition.ids) != k0.as_set():
            raise ConsistencyError("partition was not computed on this candidate set")
    head = partition.head()
    if vn.issubset(head):
        return head
    out = k0.intersect(vn)
    if not out:
        raise ConsistencyError("pruned set is empty; vn and k0 share no candidates")
    return out
