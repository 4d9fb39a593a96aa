import numpy as np
import pytest

import naive
from dialoglearn import memn2n as mn
from dialoglearn.memn2n import (
    CapacityError,
    TextSet,
    Vocabulary,
    encode_bow,
    forward_answer,
    forward_predict,
    init_params,
    predict,
    subsample_negatives,
)

VOCAB = Vocabulary(["where", "is", "mary", "john", "kitchen", "bathroom", "went", "to", "the"])


def test_encode_bow():
    v = encode_bow("Where is Mary?", VOCAB)
    assert v.sum() == 3
    for w in ("where", "is", "mary"):
        assert v[VOCAB.index[w]] == 1
    assert not encode_bow("", VOCAB).any()
    z = encode_bow("zebra", VOCAB)
    assert z[VOCAB.index[mn.UNK]] == 1 and z.sum() == 1


def test_tokenize_strips_trailing_punctuation():
    assert mn.tokenize("No, the answer is Kitchen.") == ["no", "the", "answer", "is", "kitchen"]


def zero_store(dim, V, hops=2):
    st = init_params(V, dim, hops=hops, memory_size=10, sigma=0.0, identity_maps="none")
    return st


def test_zero_params_uniform():
    cands = TextSet(["kitchen", "bathroom", "the", "to", "went", "john"], VOCAB)
    st = zero_store(4, len(VOCAB))
    dist, _ = forward_answer(st, encode_bow("where is mary", VOCAB), [encode_bow("mary went to the kitchen", VOCAB)], cands)
    np.testing.assert_allclose(dist, np.full(6, 1 / 6), atol=1e-15)
    assert predict(st, encode_bow("where", VOCAB), [], cands) == "kitchen"


def random_instance(rng, dim, n_mem, n_cand, V=6, n_resp=3):
    st = init_params(V, dim, hops=2, memory_size=5, rng=rng, sigma=0.7, identity_maps="none")
    x = rng.integers(0, 3, V).astype(float)
    mems = [rng.integers(0, 3, V).astype(float) for _ in range(n_mem)]
    vocab = Vocabulary([f"w{i}" for i in range(V - 1)])
    cand_texts = [f"w{i}" for i in range(n_cand)]
    cands = TextSet(cand_texts, vocab)
    resp = TextSet([f"w{i} w{(i + 1) % (V - 1)}" for i in range(n_resp)], vocab)
    return st, x, mems, cands, resp


def test_hand_set_instance_matches_oracle():
    rng = np.random.default_rng(0)
    st, x, mems, cands, resp = random_instance(rng, 2, 2, 2, V=3)
    got, trace = forward_answer(st, x, mems, cands)
    want, steps = naive.answer(st.params, x, mems, cands.bow.tolist())
    np.testing.assert_allclose(got, want, atol=1e-10)
    np.testing.assert_allclose(trace.p1, steps[0][0], atol=1e-10)
    np.testing.assert_allclose(trace.u2, steps[1][2], atol=1e-10)


def test_beta_zero_makes_action_irrelevant():
    rng = np.random.default_rng(1)
    st, x, mems, cands, resp = random_instance(rng, 3, 2, 3)
    st["beta_star"][:] = 0
    outs = [forward_predict(st, x, mems, cands, a, resp)[0] for a in cands.texts]
    for o in outs[1:]:
        np.testing.assert_array_equal(o, outs[0])


def test_o3_decomposition():
    rng = np.random.default_rng(2)
    st, x, mems, cands, resp = random_instance(rng, 4, 3, 3)
    _, tr = forward_predict(st, x, mems, cands, "w1", resp)
    AY = cands.bow @ st["A"].T
    np.testing.assert_allclose(tr.o3, tr.p3 @ AY + tr.p3[1] * st["beta_star"], atol=1e-14)


def test_chop_off_purity():
    rng = np.random.default_rng(3)
    st, x, mems, cands, _ = random_instance(rng, 4, 3, 3)
    before, _ = forward_answer(st, x, mems, cands)
    st["R_fp"][:] = rng.normal(size=st["R_fp"].shape) * 1e6
    st["beta_star"][:] = np.nan
    after, _ = forward_answer(st, x, mems, cands)
    assert before.tobytes() == after.tobytes()


def test_distributions_sum_to_one():
    rng = np.random.default_rng(4)
    for _ in range(20):
        st, x, mems, cands, resp = random_instance(rng, 3, int(rng.integers(0, 4)), 3)
        d, _ = forward_answer(st, x, mems, cands)
        r, _ = forward_predict(st, x, mems, cands, "w0", resp)
        assert abs(d.sum() - 1) < 1e-12 and abs(r.sum() - 1) < 1e-12


def test_batched_equals_single():
    rng = np.random.default_rng(5)
    st, _, _, cands, _ = random_instance(rng, 4, 0, 3)
    xs = [rng.integers(0, 2, 6).astype(float) for _ in range(4)]
    ms = [np.array([rng.integers(0, 2, 6) for _ in range(n)], dtype=float).reshape(n, 6) for n in (0, 1, 3, 2)]
    scores, _ = mn.answer_scores(st, mn.Batch.build(xs, ms, 5), cands.bow)
    for b in range(4):
        single, _ = forward_answer(st, xs[b], list(ms[b]), cands)
        np.testing.assert_allclose(mn.softmax(scores[b]), single, atol=1e-14)


def test_memory_capacity():
    st = zero_store(2, len(VOCAB))
    cands = TextSet(["kitchen"], VOCAB)
    mems = [encode_bow("the", VOCAB)] * 11
    with pytest.raises(CapacityError):
        forward_answer(st, encode_bow("where", VOCAB), mems, cands)


def test_most_recent_memory_uses_slot_zero():
    b = mn.Batch.build([np.zeros(3)], [np.eye(3)], 5)
    assert b.slots[0].tolist() == [2, 1, 0]


def test_unknown_action_rejected():
    rng = np.random.default_rng(6)
    st, x, mems, cands, resp = random_instance(rng, 2, 1, 2)
    with pytest.raises(ValueError):
        forward_predict(st, x, mems, cands, "nope", resp)


def test_subsample_negatives():
    vocab = Vocabulary()
    resp = TextSet([f"r{i}" for i in range(100)], vocab)
    small = TextSet(["a", "b", "c"], vocab)
    rng = np.random.default_rng(7)
    assert sorted(subsample_negatives(small, "b", 16, rng)) == ["a", "b", "c"]
    assert subsample_negatives(resp, "r42", 1, rng) == ["r42"]
    for _ in range(1000):
        s = subsample_negatives(resp, "r42", 16, rng)
        assert len(s) == len(set(s)) == 16 and "r42" in s
    with pytest.raises(ValueError):
        subsample_negatives(resp, "zzz", 4, rng)


def test_init_params_validation():
    with pytest.raises(ValueError):
        init_params(5, 4, hops=4)
    with pytest.raises(ValueError):
        init_params(5, 4, identity_maps="some")
