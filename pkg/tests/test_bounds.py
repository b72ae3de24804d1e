import math

import numpy as np
import pytest
from mpmath import mp, mpf

from iqrip.bounds import (
    corollary_bound,
    kl_divergence,
    m_constant,
    m_from_extremes,
    sup_distance,
    tv_distance,
    z_p,
)
from iqrip.dist import normalize
from iqrip.errors import DistributionError, InfiniteDivergenceError
from iqrip.filters import CandidateSet
from iqrip.iqr_ip import iqr_partition

from conftest import random_dist


def test_tv_examples():
    p = normalize([0.2, 0.4, 0.4], [0, 1, 2])
    q = normalize([0.4, 0.2, 0.4], [0, 1, 2])
    assert tv_distance(p, p) == 0
    assert tv_distance(p, q) == pytest.approx(0.2, abs=1e-15)
    assert tv_distance(normalize([1], [0]), normalize([1], [1])) == 1.0


def test_kl_examples():
    p = normalize([0.3, 0.7], [0, 1])
    assert kl_divergence(p, p) == 0
    assert kl_divergence(normalize([1], [0]), normalize([0.5, 0.5], [0, 1])) == pytest.approx(math.log(2), abs=1e-15)
    with pytest.raises(InfiniteDivergenceError):
        kl_divergence(normalize([1], [5]), p)


def test_kl_matches_high_precision(rng):
    mp.dps = 50
    for _ in range(50):
        p = random_dist(rng, 10, 10)
        q = normalize(rng.dirichlet(np.ones(10)), p.ids)
        ref = sum(mpf(a) * mp.log(mpf(a) / mpf(q.prob(t))) for a, t in zip(p.probs.tolist(), p.ids.tolist()))
        assert kl_divergence(p, q) == pytest.approx(float(ref), abs=1e-10)


def test_hand_traced_example():
    p_fil = normalize([0.4, 0.2, 0.4], [0, 1, 2])
    rep = corollary_bound(p_fil, CandidateSet((0, 1)), p_fil)
    assert rep.z_p == pytest.approx(0.08, abs=1e-15)
    assert rep.m == pytest.approx(0.2, abs=1e-15)
    assert rep.bound == pytest.approx(0.44, abs=1e-15)
    assert rep.tv == pytest.approx(0.2, abs=1e-15)
    assert rep.satisfied and rep.sup_satisfied
    assert rep.slack == pytest.approx(0.40, abs=1e-15)


def test_empty_band():
    p = normalize([0.6, 0.4], [0, 1])
    rep = corollary_bound(p, CandidateSet(()), p)
    assert math.isnan(rep.z_p) and rep.m == 0 and rep.bound == 0 and rep.tv == 0 and rep.satisfied
    assert rep.to_json()["z_p"] is None
    q = normalize([0.5, 0.5], [0, 1])
    assert corollary_bound(p, CandidateSet(()), q).bound == pytest.approx(0.5 * kl_divergence(q, p))


def test_band_outside_support_rejected():
    p = normalize([0.6, 0.4], [0, 1])
    with pytest.raises(DistributionError):
        corollary_bound(p, CandidateSet((0, 7)), p)


def test_m_is_attained_at_extremes(rng):
    for _ in range(2000):
        band = rng.dirichlet(np.ones(int(rng.integers(1, 30)))) * rng.uniform(0.1, 1)
        band = band[band > 0]
        assert m_constant(band) == pytest.approx(m_from_extremes(band), rel=1e-12, abs=1e-15)


def _top_term(band):
    top = band.max()
    return abs(top - z_p(band) / top)


def test_lower_member_raises_the_top_term(rng):
    """A new member below the band lowers Z_p (q**2 < min**2 <= Z_p), so the
    term of m at the band maximum strictly grows."""
    for _ in range(2000):
        band = np.sort(rng.uniform(0.01, 0.3, size=int(rng.integers(2, 10))))
        extra = np.append(band, band.min() * rng.uniform(0.05, 0.999))
        assert z_p(extra) < z_p(band)
        assert _top_term(extra) > _top_term(band)
        assert m_constant(extra) >= _top_term(band)


def test_m_itself_can_shrink_when_band_gains_lower_member():
    # m sits at the minimum (0.082) before and moves to the new minimum after
    band = np.array([0.08199126, 0.28312283, 0.28517553])
    extra = np.append(band, 0.05607182)
    assert m_constant(extra) < m_constant(band)


def test_pinsker(rng):
    for _ in range(2000):
        p = random_dist(rng, 2, 50)
        q = normalize(rng.dirichlet(np.ones(len(p))), p.ids)
        assert tv_distance(p, q) ** 2 <= 0.5 * kl_divergence(p, q) + 1e-12


def _triple(rng):
    p_fil = random_dist(rng, 2, 60)
    vh = iqr_partition(p_fil, 1.5).very_high
    sub = rng.choice(p_fil.ids, size=int(rng.integers(1, len(p_fil) + 1)), replace=False)
    p_ref = normalize(rng.dirichlet(np.ones(sub.size)), sub) if rng.random() < 0.5 else p_fil
    return p_fil, vh, p_ref


def test_bound_holds_for_bands_of_at_most_three(rng):
    checked = 0
    for _ in range(4000):
        p_fil, vh, p_ref = _triple(rng)
        if len(vh) <= 3:
            checked += 1
            assert corollary_bound(p_fil, vh, p_ref).satisfied
        # arbitrary small bands, not just pipeline ones
        band = CandidateSet(tuple(rng.choice(p_fil.ids, size=min(3, len(p_fil)), replace=False).tolist()))
        assert corollary_bound(p_fil, band, p_ref).satisfied
    assert checked > 1000


def test_sup_norm_form_always_holds(rng):
    for _ in range(3000):
        p_fil, _, p_ref = _triple(rng)
        band = CandidateSet(tuple(rng.choice(p_fil.ids, size=int(rng.integers(0, len(p_fil) + 1)), replace=False).tolist()))
        rep = corollary_bound(p_fil, band, p_ref)
        assert rep.sup_satisfied
        assert rep.sup_tv <= rep.tv + 1e-12


def test_counterexample_with_six_member_band():
    """A flat head of six candidates: permutation moves 0.82 of mass while m is 0.27."""
    probs = [0.3] * 3 + [0.082 / 3] * 3 + [0.001] * 18
    p_fil = normalize(probs, range(24))
    vh = iqr_partition(p_fil, 1.5).very_high
    assert len(vh) == 6
    rep = corollary_bound(p_fil, vh, p_fil)
    assert rep.m == pytest.approx(0.2727, abs=1e-4)
    assert rep.tv == pytest.approx(0.818, abs=1e-3)
    assert not rep.satisfied
    assert rep.sup_satisfied


def test_sup_distance():
    p = normalize([0.5, 0.5], [0, 1])
    q = normalize([1.0], [2])
    assert sup_distance(p, q) == 1.0
