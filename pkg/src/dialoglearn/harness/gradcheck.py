"""Finite-difference checks of both loss paths on random toy episodes."""

from __future__ import annotations

import numpy as np

from .. import memn2n as mn
from ..tensorcore import GradcheckReport, gradcheck


def toy_problem(seed: int = 0, dim: int = 8, n_memories: int = 3, vocab: int = 10, n_candidates: int = 4, n_responses: int = 6, batch: int = 2):
    rng = np.random.default_rng(seed)
    store = mn.init_params(vocab, dim, hops=2, memory_size=n_memories + 2, rng=rng, sigma=0.3)
    xs = [rng.integers(0, 3, vocab).astype(float) for _ in range(batch)]
    mems = [rng.integers(0, 2, (n_memories, vocab)).astype(float) for _ in range(batch)]
    return {
        "store": store,
        "batch": mn.Batch.build(xs, mems, n_memories + 2),
        "cands": rng.integers(0, 2, (n_candidates, vocab)).astype(float) + np.eye(n_candidates, vocab),
        "targets": rng.integers(0, n_candidates, batch),
        "actions": rng.integers(0, n_candidates, batch),
        "responses": rng.integers(0, 2, (batch, n_responses, vocab)).astype(float),
        "resp_targets": rng.integers(0, n_responses, batch),
    }


def check_gradients(
    seed: int = 0,
    dim: int = 8,
    eps: float = 1e-5,
    n_coords: int = 200,
    answer_backward=mn.answer_backward,
    fp_backward=mn.fp_backward,
) -> dict[str, GradcheckReport]:
    """Max relative gradient error of the answer loss and the forward-prediction loss.

    The backward functions are injectable so a deliberately broken one can
    be shown to fail.
    """
    toy = toy_problem(seed, dim)
    store, batch = toy["store"], toy["batch"]

    def answer_loss():
        scores, _ = mn.answer_scores(store, batch, toy["cands"])
        return mn.batch_cross_entropy(scores, toy["targets"])[0]

    def answer_grad():
        scores, cache = mn.answer_scores(store, batch, toy["cands"])
        _, g = mn.batch_cross_entropy(scores, toy["targets"])
        answer_backward(store, cache, g)

    def fp_loss():
        scores, _ = mn.fp_scores(store, batch, toy["cands"], toy["actions"], toy["responses"])
        return mn.batch_cross_entropy(scores, toy["resp_targets"])[0]

    def fp_grad():
        scores, cache = mn.fp_scores(store, batch, toy["cands"], toy["actions"], toy["responses"])
        _, g = mn.batch_cross_entropy(scores, toy["resp_targets"])
        fp_backward(store, cache, g)

    rng = np.random.default_rng(seed + 1)
    return {
        "answer": gradcheck(answer_loss, answer_grad, store, eps, n_coords, rng),
        "forward_prediction": gradcheck(fp_loss, fp_grad, store, eps, n_coords, rng),
    }
