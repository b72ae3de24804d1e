"""Interquartile-range subset division and inverse-probability permutation.

One sampling step (:func:`iqr_ip_step`) runs:

1. joint top-k / nucleus filter -> ``k0``
2. renormalize on ``k0``
3. IQR partition of the renormalized values
4. top1ctrl filter on the raw distribution -> ``vn``
5. dynamic pruning of ``k0`` by ``vn`` -> ``k1``
6. renormalize on ``k1``
7. inverse-probability permutation of VeryHigh & ``k1``
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .dist import Distribution, from_sorted, quantile
from .errors import DistributionError, ParameterError
from .filters import CandidateSet, dynamic_prune, joint_filter, top1ctrl_set, top_k_set

DEFAULT_RHO = 1.5
DEFAULT_N = 100.0
MIN_PARTITION_SIZE = 4


class Band(enum.IntEnum):
    VERY_HIGH = kernels.VERY_HIGH
    HIGH = kernels.HIGH
    MEDIUM = kernels.MEDIUM
    LOW = kernels.LOW
    VERY_LOW = kernels.VERY_LOW


class Method(str, enum.Enum):
    IQR_IP = "iqr-ip"
    NUCLEUS = "nucleus"
    TOP_K = "top-k"
    PURE = "pure"


@dataclass(frozen=True)
class SamplerConfig:
    """Hyperparameters of one decoding run."""

    p: float = 0.8
    k: int = 640
    n: float = DEFAULT_N
    rho: float = DEFAULT_RHO
    seed: int = 0
    max_len: int = 200

    def __post_init__(self):
        if not 0.0 < self.p <= 1.0:
            raise ParameterError(f"p must lie in (0, 1], got {self.p}")
        if int(self.k) != self.k or self.k < 1:
            raise ParameterError(f"k must be a positive integer, got {self.k}")
        if not self.n >= 1:
            raise ParameterError(f"n must be >= 1, got {self.n}")
        if not self.rho > 0:
            raise ParameterError(f"rho must be > 0, got {self.rho}")
        if int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise ParameterError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if int(self.max_len) != self.max_len or self.max_len < 1:
            raise ParameterError(f"max_len must be a positive integer, got {self.max_len}")
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "max_len", int(self.max_len))

    def with_(self, **changes) -> SamplerConfig:
        return replace(self, **changes)

    def to_json(self) -> dict:
        return {
            "p": self.p,
            "k": self.k,
            "n": self.n,
            "rho": self.rho if math.isfinite(self.rho) else "inf",
            "seed": self.seed,
            "max_len": self.max_len,
        }

    @classmethod
    def from_json(cls, obj: dict) -> SamplerConfig:
        obj = dict(obj)
        if obj.get("rho") == "inf":
            obj["rho"] = math.inf
        return cls(**obj)


@dataclass(frozen=True)
class IqrPartition:
    """Band assignment of a candidate set by quartiles of its probabilities."""

    q1: float
    q3: float
    iqr: float
    rho: float
    ids: tuple[int, ...]
    codes: tuple[int, ...]

    @property
    def bands(self) -> dict[int, Band]:
        return {t: Band(c) for t, c in zip(self.ids, self.codes)}

    @property
    def upper_fence(self) -> float:
        return self.q3 + _spread(self.rho, self.iqr)

    @property
    def lower_fence(self) -> float:
        return self.q1 - _spread(self.rho, self.iqr)

    def members(self, *bands: Band) -> CandidateSet:
        wanted = {int(b) for b in bands}
        return CandidateSet(tuple(t for t, c in zip(self.ids, self.codes) if c in wanted))

    @property
    def very_high(self) -> CandidateSet:
        return self.members(Band.VERY_HIGH)

    def head(self) -> CandidateSet:
        """VeryHigh and High together."""
        return self.members(Band.VERY_HIGH, Band.HIGH)


def _spread(rho: float, iqr: float) -> float:
    # rho = inf means "no VeryHigh band" even when IQR is 0; any finite rho
    # times a zero IQR is 0, so tied values at Q3 all count as VeryHigh.
    if math.isinf(rho):
        return math.inf
    return rho * iqr


def iqr_partition(p_fil: Distribution, rho: float = DEFAULT_RHO) -> IqrPartition:
    """Split ``p_fil``'s support into VeryHigh/High/Medium/Low/VeryLow.

    Lower bounds are inclusive and upper bounds exclusive.  Supports with
    fewer than four candidates never produce a VeryHigh band.
    """
    if len(p_fil) == 0:
        raise DistributionError("empty distribution")
    if not rho > 0:
        raise ParameterError(f"rho must be > 0, got {rho}")
    q1 = quantile(p_fil, 0.25)
    q3 = quantile(p_fil, 0.75)
    iqr = q3 - q1
    spread = _spread(rho, iqr)
    codes = kernels.assign_bands(
        p_fil.probs, q3 + spread, q3, q1, q1 - spread, len(p_fil) >= MIN_PARTITION_SIZE
    )
    return IqrPartition(
        q1=q1,
        q3=q3,
        iqr=iqr,
        rho=float(rho),
        ids=tuple(p_fil.ids.tolist()),
        codes=tuple(codes.tolist()),
    )


def inverse_permute(p_fil: Distribution, very_high: CandidateSet) -> Distribution:
    """Reassign the band's mass proportionally to inverse probability.

    Probabilities outside ``very_high`` are left untouched (bit for bit) and
    the band keeps its total mass.
    """
    if len(very_high) <= 1:
        if len(very_high) == 1 and very_high.ids[0] not in p_fil.index:
            raise DistributionError(f"token {very_high.ids[0]} is not in the support")
        return p_fil
    index = p_fil.index
    try:
        pos = np.fromiter((index[t] for t in very_high), dtype=np.int64, count=len(very_high))
    except KeyError as exc:
        raise DistributionError(f"token {exc.args[0]} is not in the support") from None
    band = p_fil.probs[pos]
    inv = 1.0 / band
    probs = p_fil.probs.copy()
    probs[pos] = band.sum() * (inv / inv.sum())
    return from_sorted(p_fil.ids, probs)


@dataclass(frozen=True)
class StepTrace:
    """Intermediate sets and distributions of one :func:`iqr_ip_step`."""

    k0: CandidateSet
    partition: IqrPartition
    vn: CandidateSet
    k1: CandidateSet
    filtered: Distribution
    permuted_band: CandidateSet
    output: Distribution


def iqr_ip_trace(
    raw: Distribution, cfg: SamplerConfig, *, repartition: bool = False, permute: bool = True
) -> StepTrace:
    """Run every stage of one IQR-IP step and keep the intermediates.

    ``repartition`` recomputes the partition on the pruned set instead of
    carrying VeryHigh forward from ``k0``; ``permute=False`` stops after
    filtering, which is plain sampling on the pruned set.
    """
    k0 = joint_filter(raw, cfg.k, cfg.p)
    on_k0 = raw.restrict(k0)
    partition = iqr_partition(on_k0, cfg.rho)
    vn = top1ctrl_set(raw, cfg.n)
    k1 = dynamic_prune(partition, k0, vn)
    filtered = raw.restrict(k1) if len(k1) < len(k0) else on_k0
    if repartition:
        band = iqr_partition(filtered, cfg.rho).very_high
    else:
        band = partition.very_high.intersect(k1)
    output = inverse_permute(filtered, band) if permute else filtered
    return StepTrace(k0, partition, vn, k1, filtered, band, output)


def iqr_ip_step(raw: Distribution, cfg: SamplerConfig, *, repartition: bool = False) -> Distribution:
    """Distribution to sample from after the full IQR-IP pipeline."""
    return iqr_ip_trace(raw, cfg, repartition=repartition).output


def plain_filtered(raw: Distribution, cfg: SamplerConfig) -> Distribution:
    """The pipeline's filtered distribution without any permutation."""
    return iqr_ip_trace(raw, cfg, permute=False).output


def decode_step(
    raw: Distribution, cfg: SamplerConfig, method: Method | str, *, repartition: bool = False, permute: bool = True
) -> tuple[Distribution, Distribution]:
    """``(filtered, final)`` distributions for one step of ``method``.

    ``filtered`` is the truncated distribution before any permutation;
    ``final`` is what gets sampled.
    """
    method = Method(method)
    if method is Method.PURE:
        return raw, raw
    if method is Method.TOP_K:
        d = raw.restrict(top_k_set(raw, cfg.k)) if cfg.k < len(raw) else raw
        return d, d
    if method is Method.NUCLEUS:
        k0 = joint_filter(raw, cfg.k, cfg.p)
        d = raw.restrict(k0) if len(k0) < len(raw) else raw
        return d, d
    trace = iqr_ip_trace(raw, cfg, repartition=repartition, permute=permute)
    return trace.filtered, trace.output


__all__ = [
    "Band",
    "IqrPartition",
    "Method",
    "SamplerConfig",
    "StepTrace",
    "decode_step",
    "inverse_permute",
    "iqr_ip_step",
    "iqr_ip_trace",
    "iqr_partition",
    "plain_filtered",
]

