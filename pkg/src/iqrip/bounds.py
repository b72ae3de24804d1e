"""Numerical checks of the total-variation bound for the inverse permutation.

For a filtered distribution ``p_fil``, its permuted form ``p_inv`` and a
reference ``p_ref`` the bound reads::

    tv(p_inv, p_ref)**2 <= KL(p_ref || p_fil) / 2 + 2*m + m**2

with ``Z_p = sum_VH(p) / sum_VH(1/p)`` and ``m = max_VH |p - Z_p / p|``.
Total variance is half the L1 distance.

Under that reading the inequality is guaranteed when the VeryHigh band has
at most three members (then ``tv(p_inv, p_fil) <= m``) but can fail for
larger bands, because the permutation moves up to ``|VH| * m / 2`` of mass
while ``m`` only bounds the per-token shift.  Reports therefore also carry
the sup-norm distance ``max |p_inv - p_ref|``, for which the inequality
holds on every input.
"""

from __future__ import annotations

import math
from collections.abc import Iterable
from dataclasses import dataclass

import numpy as np

from .dist import Distribution
from .errors import DistributionError, InfiniteDivergenceError
from .filters import CandidateSet
from .iqr_ip import inverse_permute

BOUND_SLACK = 1e-12


@dataclass(frozen=True)
class BoundReport:
    z_p: float  # nan when VeryHigh is empty
    m: float
    kl: float
    tv: float
    bound: float
    satisfied: bool
    sup_tv: float = math.nan

    @property
    def sup_satisfied(self) -> bool:
        """The same inequality with the sup-norm distance on the left."""
        return self.sup_tv**2 <= self.bound + BOUND_SLACK

    @property
    def slack(self) -> float:
        return self.bound - self.tv**2

    def to_json(self) -> dict:
        return {
            "z_p": None if math.isnan(self.z_p) else self.z_p,
            "m": self.m,
            "kl": self.kl,
            "tv": self.tv,
            "bound": self.bound,
            "slack": self.slack,
            "satisfied": self.satisfied,
            "sup_tv": self.sup_tv,
            "sup_satisfied": self.sup_satisfied,
        }


def _aligned(p: Distribution, q: Distribution) -> tuple[np.ndarray, np.ndarray]:
    support = np.union1d(p.ids, q.ids)
    a = np.zeros(support.size)
    b = np.zeros(support.size)
    a[np.searchsorted(support, p.ids)] = p.probs
    b[np.searchsorted(support, q.ids)] = q.probs
    return a, b


def tv_distance(p: Distribution, q: Distribution) -> float:
    """Half the L1 distance over the union of both supports."""
    a, b = _aligned(p, q)
    return 0.5 * float(np.abs(a - b).sum())


def sup_distance(p: Distribution, q: Distribution) -> float:
    """Largest per-token absolute difference over the union of both supports."""
    a, b = _aligned(p, q)
    return float(np.abs(a - b).max())


def kl_divergence(p_ref: Distribution, p_fil: Distribution) -> float:
    """``KL(p_ref || p_fil)`` in nats.

    Raises:
        InfiniteDivergenceError: if ``p_ref`` puts mass outside ``p_fil``'s support.
    """
    index = p_fil.index
    missing = [t for t in p_ref.ids.tolist() if t not in index]
    if missing:
        raise InfiniteDivergenceError(f"reference mass on ids outside the support: {missing[:5]}")
    q = p_fil.probs[[index[t] for t in p_ref.ids.tolist()]]
    kl = float(np.sum(p_ref.probs * np.log(p_ref.probs / q)))
    return max(kl, 0.0)


def band_probs(p_fil: Distribution, very_high: Iterable[int]) -> np.ndarray:
    index = p_fil.index
    try:
        return p_fil.probs[[index[int(t)] for t in very_high]]
    except KeyError as exc:
        raise DistributionError(f"token {exc.args[0]} is not in the support") from None


def z_p(band: np.ndarray) -> float:
    return float(band.sum() / (1.0 / band).sum())


def m_constant(band: np.ndarray) -> float:
    """``max |p - Z_p / p|`` over every band member."""
    if band.size == 0:
        return 0.0
    return float(np.max(np.abs(band - z_p(band) / band)))


def m_from_extremes(band: np.ndarray) -> float:
    """Same maximum evaluated on the largest and smallest member only."""
    if band.size == 0:
        return 0.0
    z = z_p(band)
    hi, lo = float(band.max()), float(band.min())
    return max(abs(hi - z / hi), abs(lo - z / lo))


def corollary_bound(p_fil: Distribution, very_high: CandidateSet, p_ref: Distribution) -> BoundReport:
    """Evaluate both sides of the bound for one triple."""
    band = band_probs(p_fil, very_high)
    kl = kl_divergence(p_ref, p_fil)
    if band.size == 0:
        zp, m = math.nan, 0.0
    else:
        zp, m = z_p(band), m_constant(band)
    bound = 0.5 * kl + 2.0 * m + m * m
    p_inv = inverse_permute(p_fil, very_high)
    tv = tv_distance(p_inv, p_ref)
    return BoundReport(
        z_p=zp,
        m=m,
        kl=kl,
        tv=tv,
        bound=bound,
        satisfied=tv * tv <= bound + BOUND_SLACK,
        sup_tv=sup_distance(p_inv, p_ref),
    )
