import math

import numpy as np
import pytest

from iqrip.errors import CorpusError, ParameterError
from iqrip.iqr_ip import SamplerConfig
from iqrip.metrics import detect_loops, perplexity
from iqrip.toy_lm import (
    DEFAULT_PROMPT,
    ToyModel,
    default_prompt,
    generate,
    load_corpus,
    load_model,
    save_model,
    tokenize,
    train_ngram,
)

SMALL = "the cat sat on the mat . the dog sat on the rug . a cat ran ."


def test_bigram_limit():
    m = train_ngram("a b a b".split(), order=2, alpha=1e-9, backoff_lambda=1 - 1e-9)
    a, b = m.encode(["a", "b"])
    assert m.next_probs([a])[b] == pytest.approx(1.0, abs=1e-6)


def test_unseen_context_backs_off_exactly():
    words = tokenize(SMALL)
    tri = train_ngram(words, 3, 0.01, 0.8)
    bi = train_ngram(words, 2, 0.01, 0.8)
    ctx = tri.encode(["rug", "the"])  # "rug the" never occurs, "the" does
    assert (tuple(ctx) not in tri.tables[1]) and ((ctx[1],) in tri.tables[0])
    np.testing.assert_array_equal(tri.next_probs(ctx), bi.next_probs(ctx[1:]))


def test_empty_context_is_smoothed_unigram():
    m = train_ngram(tokenize(SMALL), 3, 0.5, 0.8)
    counts = m.unigram
    expected = (counts + 0.5) / (counts.sum() + 0.5 * m.vocab_size)
    np.testing.assert_allclose(m.next_probs([]), expected, rtol=0, atol=1e-15)
    assert m.next_distribution([]).probs[0] == expected.max()


def test_context_seen_once_predicts_successor():
    m = train_ngram(tokenize(SMALL), 3, 0.01, 0.8)
    ctx = m.encode(["dog", "sat"])
    assert m.next_distribution(ctx).ids[0] == m.encode(["on"])[0]


def test_retraining_is_identical():
    words = load_corpus()
    a, b = train_ngram(words), train_ngram(words)
    assert a.digest() == b.digest()
    rng = np.random.default_rng(0)
    for _ in range(50):
        ctx = rng.integers(0, a.vocab_size, size=2).tolist()
        assert a.next_distribution(ctx) == b.next_distribution(ctx)


def test_distributions_normalized_and_floored(toy_model):
    rng = np.random.default_rng(1)
    m = toy_model
    floor = m.alpha / (m.unigram.sum() + m.alpha * m.vocab_size)
    corpus_ids = m.encode(load_corpus())
    for i in range(1000):
        if i % 2:
            ctx = rng.integers(0, m.vocab_size, size=2).tolist()
        else:
            j = int(rng.integers(2, len(corpus_ids)))
            ctx = corpus_ids[j - 2 : j]
        p = m.next_probs(ctx)
        assert abs(math.fsum(p) - 1) <= 1e-9
        assert p.min() >= floor * (1 - 1e-12)
        assert len(m.next_distribution(ctx)) == m.vocab_size


def test_train_errors():
    with pytest.raises(ParameterError):
        train_ngram(["a", "b"], order=1)
    with pytest.raises(ParameterError):
        train_ngram(["a", "b", "c"], alpha=0)
    with pytest.raises(ParameterError):
        train_ngram(["a", "b", "c"], backoff_lambda=1.0)
    with pytest.raises(CorpusError):
        train_ngram(["a", "b"], order=3)


def test_model_roundtrip(tmp_path, toy_model):
    path = tmp_path / "m.json"
    save_model(toy_model, path)
    back = load_model(path)
    assert back.digest() == toy_model.digest()
    assert back.next_distribution([1, 2]) == toy_model.next_distribution([1, 2])
    path.write_text('{"format": "other"}')
    with pytest.raises(CorpusError):
        load_model(path)


def test_encode_unknown_word(toy_model):
    with pytest.raises(CorpusError):
        toy_model.encode(["zzzunknownzzz"])


def test_default_prompt(toy_model):
    assert toy_model.decode(default_prompt(toy_model)) == tokenize(DEFAULT_PROMPT)
    m = train_ngram(tokenize(SMALL), 3)
    assert m.decode(default_prompt(m)) == ["the", "cat", "sat"]


def test_generation_is_deterministic(toy_model):
    cfg = SamplerConfig(seed=11, max_len=60)
    pr = default_prompt(toy_model)
    a = generate(toy_model, cfg, "iqr-ip", pr)
    b = generate(toy_model, cfg, "iqr-ip", pr)
    assert a.sample.tokens == b.sample.tokens
    assert a.sample.step_logprobs == b.sample.step_logprobs


def test_pure_equals_full_nucleus(toy_model):
    pr = default_prompt(toy_model)
    cfg = SamplerConfig(p=1.0, k=toy_model.vocab_size, seed=3, max_len=80)
    assert generate(toy_model, cfg, "pure", pr).sample.tokens == generate(toy_model, cfg, "nucleus", pr).sample.tokens


def test_rho_inf_is_plain_filtered_sampling(toy_model):
    pr = default_prompt(toy_model)
    for seed in range(5):
        cfg = SamplerConfig(rho=math.inf, seed=seed, max_len=80)
        a = generate(toy_model, cfg, "iqr-ip", pr)
        b = generate(toy_model, cfg.with_(rho=1.5), "iqr-ip", pr, permute=False)
        assert a.sample.tokens == b.sample.tokens


def test_logprobs_rescore_and_records(toy_model):
    pr = default_prompt(toy_model)
    rec = generate(toy_model, SamplerConfig(seed=5, max_len=100), "iqr-ip", pr, record_dists=True)
    s = rec.sample
    assert len(s.step_distributions) == len(s.tokens) == 100
    rescored = toy_model.score(s.tokens, pr)
    np.testing.assert_allclose(s.step_logprobs, rescored, rtol=0, atol=1e-9)
    assert perplexity(toy_model, [s]) == pytest.approx(math.exp(-np.mean(s.step_logprobs)), rel=1e-9)
    # filtering only removes candidates, so the filtered log prob is never lower
    assert all(f >= r - 1e-12 for f, r in zip(rec.filtered_logprobs, s.step_logprobs))
    assert rec.to_json()["method"] == "iqr-ip"


def test_greedy_decoding_loops(toy_model):
    rec = generate(toy_model, SamplerConfig(k=1, max_len=400), "top-k", default_prompt(toy_model))
    assert detect_loops(rec.sample.tokens)


def test_empty_prompt_rejected(toy_model):
    with pytest.raises(CorpusError):
        generate(toy_model, SamplerConfig(max_len=5), "pure", [])


def test_unknown_method(toy_model):
    with pytest.raises(ValueError):
        generate(toy_model, SamplerConfig(max_len=5), "beam", [0])


def test_model_type(toy_model):
    assert isinstance(toy_model, ToyModel)
    assert toy_model.order == 3 and toy_model.context_len == 2
