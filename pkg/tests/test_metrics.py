import math

import numpy as np
import pytest

from iqrip.dist import normalize, uniform
from iqrip.errors import DistributionError, InfinitePerplexityError, ParameterError, UndefinedFitError
from iqrip.metrics import (
    MetricsReport,
    Sample,
    analyze,
    bleu,
    detect_loops,
    extract_trajectories,
    h_rep,
    perplexity,
    perplexity_from_logprobs,
    sample_h_rep,
    self_bleu,
    window_entropies,
    zipf_coefficient,
    zipf_from_frequencies,
)


class UniformModel:
    def __init__(self, v):
        self.v = v

    def score(self, tokens, prompt=()):
        return [-math.log(self.v)] * len(tokens)


class CertainModel:
    def score(self, tokens, prompt=()):
        return [0.0] * len(tokens)


def test_h_rep_examples():
    assert h_rep([7] * 200) == 0
    assert h_rep(list(range(200))) == pytest.approx(math.log(200), abs=1e-9)
    assert h_rep(["a", "a", "a", "b"]) == pytest.approx(0.562335144618808, abs=1e-12)
    with pytest.raises(DistributionError):
        h_rep([])


def test_h_rep_permutation_invariant_and_maximal(rng):
    for _ in range(200):
        w = rng.integers(0, 30, size=50).tolist()
        assert h_rep(w) == pytest.approx(h_rep(rng.permutation(w).tolist()), abs=1e-12)
        assert h_rep(w) <= math.log(50) + 1e-12
        assert (abs(h_rep(w) - math.log(50)) < 1e-12) == (len(set(w)) == 50)


def test_sample_h_rep_examples(rng):
    s = rng.integers(0, 40, size=200).tolist()
    assert sample_h_rep(s, 200) == pytest.approx(h_rep(s), abs=1e-12)
    assert sample_h_rep([3] * 777, 200) == 0
    assert sample_h_rep([1, 2] * 100, 200) == pytest.approx(math.log(2), abs=1e-12)
    assert sample_h_rep([1, 2, 3], 200) == pytest.approx(math.log(3))
    with pytest.raises(DistributionError):
        sample_h_rep([], 200)
    with pytest.raises(ParameterError):
        sample_h_rep([1], 0)


def test_sample_h_rep_period_invariance(rng):
    for _ in range(50):
        s = rng.integers(0, 20, size=int(rng.integers(5, 60))).tolist()
        assert sample_h_rep(s + s, len(s)) == pytest.approx(sample_h_rep(s, len(s)), abs=1e-12)


def test_window_entropies_match_direct(rng):
    s = rng.integers(0, 12, size=300).tolist()
    ent = window_entropies(s, 50)
    direct = [h_rep(s[i : i + 50]) for i in range(251)]
    np.testing.assert_allclose(ent, direct, rtol=0, atol=1e-10)


def test_detect_loops_examples():
    assert detect_loops([1] * 1000) == [(0, 1000)]
    assert detect_loops(list(range(1000))) == []
    refrain = [0, 1, 2, 3, 4] * 200
    assert h_rep(refrain[:200]) == pytest.approx(math.log(5))
    assert detect_loops(refrain) == [(0, 1000)]


def test_detect_loops_partial_and_zero_threshold():
    tokens = list(range(300)) + [5] * 300 + list(range(1000, 1300))
    spans = detect_loops(tokens)
    assert len(spans) == 1
    a, b = spans[0]
    assert a <= 300 and b >= 600
    # strict comparison: no window has entropy below 0
    assert detect_loops([1] * 400, threshold=0.0) == []


def test_extract_trajectories_fixed_point():
    d = normalize([1.0], [9])
    s = Sample(tokens=[9] * 250, step_distributions=[d] * 250)
    trajs = extract_trajectories([s])
    assert len(trajs) == 1
    t = trajs[0]
    assert t.word == 9 and len(t.points) == 250
    assert set(t.series("prob")) == {1.0} and set(t.series("rank")) == {1} and set(t.series("entropy")) == {0.0}
    assert all(b.appearance > a.appearance for a, b in zip(t.points, t.points[1:]))


def test_extract_trajectories_no_loops_and_missing_dists():
    d = uniform(range(300))
    s = Sample(tokens=list(range(300)), step_distributions=[d] * 300)
    assert extract_trajectories([s]) == []
    with pytest.raises(DistributionError):
        extract_trajectories([Sample(tokens=[1, 2])])


@pytest.mark.parametrize("s", [0.93, 1.0, 1.5])
def test_zipf_recovers_exponent(s):
    r = np.arange(1, 1001)
    freqs = np.round(1e6 * r**-s)
    assert zipf_from_frequencies(freqs) == pytest.approx(s, abs=0.02)
    tokens = np.repeat(np.arange(1000), freqs.astype(int)).tolist()
    assert zipf_coefficient([Sample(tokens=tokens)]) == pytest.approx(s, abs=0.02)


def test_zipf_edge_cases():
    assert zipf_coefficient([Sample(tokens=[1, 2, 1, 2])]) == 0.0
    with pytest.raises(UndefinedFitError):
        zipf_coefficient([Sample(tokens=[1, 1, 1])])
    f = np.array([100, 40, 20, 9, 3])
    assert zipf_from_frequencies(f * 7) == pytest.approx(zipf_from_frequencies(f), abs=1e-12)


def test_zipf_key_maps_units():
    s = Sample(tokens=[1, 2, 3, 4, 1, 2])
    assert zipf_coefficient([s], key=lambda t: t % 2) == 0.0


def test_bleu_hand_computed():
    assert bleu([1, 2, 3, 4, 5], [[1, 2, 3, 4, 6]]) == pytest.approx((4 / 5 * 3 / 4 * 2 / 3 * 1 / 2) ** 0.25)
    # brevity penalty against the closest (shorter on ties) reference
    assert bleu([1, 2, 3, 4], [[1, 2, 3, 4, 5, 6]], 4) == pytest.approx(math.exp(1 - 6 / 4))
    assert bleu([1, 2, 3, 4], [[1, 2, 3, 4, 5], [1, 2, 3]], 4) == pytest.approx(1.0)


def test_self_bleu_examples():
    same = [Sample(tokens=[1, 2, 3, 4, 5, 6])] * 4
    assert self_bleu(same, 4) == pytest.approx(1.0)
    assert self_bleu(same, 5) == pytest.approx(1.0)
    disjoint = [Sample(tokens=list(range(10 * i, 10 * i + 10))) for i in range(4)]
    assert self_bleu(disjoint, 4) < 1e-6
    with pytest.raises(ParameterError):
        self_bleu(same[:1])


def test_self_bleu_fast_path_matches_naive(rng):
    samples = [Sample(tokens=rng.integers(0, 8, size=int(rng.integers(5, 40))).tolist()) for _ in range(12)]
    for n in (4, 5):
        naive = np.mean([bleu(s.tokens, [o.tokens for j, o in enumerate(samples) if j != i], n)
                         for i, s in enumerate(samples)])
        assert self_bleu(samples, n) == pytest.approx(naive, abs=1e-12)
        assert self_bleu(samples, n, workers=4) == self_bleu(samples, n)
    ref2 = np.mean([bleu(s.tokens, [samples[(i + 1) % 12].tokens, samples[(i + 2) % 12].tokens], 4)
                    for i, s in enumerate(samples)])
    assert self_bleu(samples, 4, ref_count=2) == pytest.approx(ref2, abs=1e-12)


def test_self_bleu_symmetry_and_disjoint_replacement(rng):
    samples = [Sample(tokens=rng.integers(0, 6, size=30).tolist()) for _ in range(6)]
    shuffled = [samples[i] for i in rng.permutation(6)]
    assert self_bleu(shuffled) == pytest.approx(self_bleu(samples), abs=1e-12)
    dup = samples[:5] + [samples[0]]
    replaced = samples[:5] + [Sample(tokens=list(range(100, 130)))]
    assert self_bleu(replaced) < self_bleu(dup)


def test_perplexity_examples():
    samples = [Sample(tokens=[1, 2, 3]), Sample(tokens=[4, 5])]
    assert perplexity(UniformModel(50), samples) == pytest.approx(50, rel=1e-12)
    assert perplexity(CertainModel(), samples) == 1.0
    assert perplexity_from_logprobs([math.log(0.5)] * 4) == pytest.approx(2.0)
    with pytest.raises(InfinitePerplexityError):
        perplexity_from_logprobs([-math.inf])
    with pytest.raises(DistributionError):
        perplexity_from_logprobs([])


def test_sample_length_validation_and_json():
    with pytest.raises(ValueError):
        Sample(tokens=[1, 2], step_logprobs=[0.0])
    d = normalize([0.5, 0.5], [1, 2])
    s = Sample(tokens=[1], step_logprobs=[-0.69], step_distributions=[d], prompt=[4])
    back = Sample.from_json(s.to_json())
    assert back.tokens == [1] and back.prompt == [4] and back.step_distributions[0] == d


def test_analyze_report():
    samples = [Sample(tokens=[1, 2, 3, 1, 2, 3], step_logprobs=[-1.0] * 6)] * 3
    rep = analyze(samples, window_len=4)
    assert isinstance(rep, MetricsReport)
    assert rep.self_bleu4 == pytest.approx(1.0)
    assert rep.perplexity == pytest.approx(math.e)
    assert rep.h_rep == pytest.approx(sample_h_rep(samples[0].tokens, 4))
    assert rep.to_json()["loop_spans"] == [[i, 0, 6] for i in range(3)]
    assert analyze([Sample(tokens=[1, 2])]).perplexity is None
    with pytest.raises(DistributionError):
        analyze([])
