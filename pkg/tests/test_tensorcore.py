import math

import numpy as np
import pytest

from dialoglearn.tensorcore import (
    ParamStore,
    TrainingError,
    cross_entropy,
    gradcheck,
    load_checkpoint,
    masked_softmax,
    save_checkpoint,
    sgd_step,
    softmax,
)


def test_softmax_examples():
    np.testing.assert_allclose(softmax([0, 0, 0]), [1 / 3] * 3, atol=1e-15)
    s = np.array([0.3, -1.2, 2.0])
    np.testing.assert_allclose(softmax(s), softmax(s + 1000), atol=1e-12)
    np.testing.assert_allclose(softmax(np.log([1, 2, 3])), [1 / 6, 2 / 6, 3 / 6], atol=1e-15)
    with pytest.raises(ValueError):
        softmax([])


def test_masked_softmax():
    s = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
    m = np.array([[True, True, False], [False, False, False]])
    out = masked_softmax(s, m)
    np.testing.assert_allclose(out[0, :2], softmax([1.0, 2.0]))
    assert out[0, 2] == 0 and not out[1].any()


def test_cross_entropy_examples():
    loss, g = cross_entropy(np.eye(4)[2], 2)
    assert loss == 0 and not g.any()
    for t in range(6):
        assert math.isclose(cross_entropy(np.full(6, 1 / 6), t)[0], math.log(6), rel_tol=1e-12)


def test_cross_entropy_gradient_vs_finite_differences():
    rng = np.random.default_rng(0)
    for _ in range(20):
        s = rng.normal(size=10)
        t = int(rng.integers(10))
        _, g = cross_entropy(softmax(s), t)
        eps = 1e-5
        for i in range(10):
            up, down = s.copy(), s.copy()
            up[i] += eps
            down[i] -= eps
            num = (cross_entropy(softmax(up), t)[0] - cross_entropy(softmax(down), t)[0]) / (2 * eps)
            assert abs(num - g[i]) / max(abs(num), abs(g[i]), 1e-6) < 1e-6


def scalar_store(p=1.0):
    st = ParamStore()
    st.add("p", np.array([p]))
    return st


def test_sgd_examples():
    st = scalar_store()
    sgd_step(st, 0.1)
    assert st["p"][0] == 1.0
    st.grads["p"][0] = 2.0
    sgd_step(st, 0.1)
    assert math.isclose(st["p"][0], 0.8)
    assert st.grads["p"][0] == 0


def test_sgd_replay_two_steps_equal_summed():
    rng = np.random.default_rng(1)
    g1, g2 = rng.normal(size=(2, 3, 4))
    a = ParamStore()
    a.add("w", rng.normal(size=(3, 4)))
    b = a.copy()
    a.grads["w"][:] = g1
    sgd_step(a, 0.05)
    a.grads["w"][:] = g2
    sgd_step(a, 0.05)
    b.grads["w"][:] = g1 + g2
    sgd_step(b, 0.05)
    np.testing.assert_allclose(a["w"], b["w"], atol=1e-15)


def test_sgd_clip_and_nonfinite():
    st = scalar_store(0.0)
    st.grads["p"][0] = 100.0
    sgd_step(st, 1.0, clip_norm=1.0)
    assert math.isclose(st["p"][0], -1.0)
    st.grads["p"][0] = np.nan
    with pytest.raises(TrainingError):
        sgd_step(st, 1.0)


def test_gradcheck_quadratic():
    rng = np.random.default_rng(2)
    st = ParamStore()
    st.add("a", rng.normal(size=(5, 7)))
    st.add("b", rng.normal(size=40))
    sq = lambda: 0.5 * sum(float(np.sum(v * v)) for v in st.params.values())

    def grad():
        for n, v in st.params.items():
            st.grads[n] += v

    rep = gradcheck(sq, grad, st, n_coords=200, rng=rng)
    assert rep.coordinates == 75
    assert rep.max_rel_error < 1e-8 and rep.passed


def test_gradcheck_detects_wrong_gradient():
    st = scalar_store(3.0)
    loss = lambda: float(st["p"][0] ** 2)

    def bad():
        st.grads["p"] += st["p"]  # should be 2p

    assert not gradcheck(loss, bad, st).passed
    with pytest.raises(ValueError):
        gradcheck(loss, bad, st, eps=0.1)


def test_checkpoint_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    st = ParamStore()
    st.add("A", rng.normal(size=(4, 6)))
    st.add("beta", rng.normal(size=4) * 1e-300)
    save_checkpoint(tmp_path / "c.json", st, {"k": [1, "x"]})
    back, meta = load_checkpoint(tmp_path / "c.json")
    assert meta == {"k": [1, "x"]}
    assert back.names() == sorted(st.names())
    for n in st.names():
        assert np.array_equal(back[n], st[n])
    save_checkpoint(tmp_path / "d.json", back, meta)
    assert (tmp_path / "c.json").read_bytes() == (tmp_path / "d.json").read_bytes()


def test_checkpoint_rejects_foreign_json(tmp_path):
    (tmp_path / "x.json").write_text('{"format": "other"}')
    with pytest.raises(ValueError):
        load_checkpoint(tmp_path / "x.json")
