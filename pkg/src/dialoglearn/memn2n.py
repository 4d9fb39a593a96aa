"""End-to-end memory network with an answer head and a forward-prediction head.

One shared embedding ``A`` (d x V) encodes the question, memories, candidate
answers and teacher responses as bags of words. Memories additionally get a
learned time vector per slot, counted back from the most recent one.

Answer path, for hops ``h = 1..H`` starting from ``u0 = A x``::

    p_h = softmax(M u_{h-1}),  o_h = M^T p_h,  u_h = R_h (o_h + u_{h-1})
    answer = softmax(u_H . A y_j)

Forward-prediction path attends over the candidates with ``u_H``, mixes in
``beta_star`` at the chosen action, and scores teacher responses::

    p3 = softmax(u_H . A y_i),  o3 = sum_i p3_i A y_i + p3[a] beta_star
    u3 = R_fp (o3 + u_H),       response = softmax(u3 . A xbar_j)

All functions here work on mini-batches; memories are padded and masked.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .tensorcore import ParamStore, masked_softmax, softmax

UNK = "<unk>"
MEMORY_SIZE = 50
INIT_SIGMA = 0.1

_PUNCT = re.compile(r"[.,!?;:]+$")


class CapacityError(ValueError):
    pass


def tokenize(text: str) -> list[str]:
    out = []
    for tok in text.lower().split():
        tok = _PUNCT.sub("", tok)
        if tok:
            out.append(tok)
    return out


class Vocabulary:
    def __init__(self, words: Sequence[str] = ()):
        self.words = [UNK] + sorted(set(words) - {UNK})
        self.index = {w: i for i, w in enumerate(self.words)}

    @classmethod
    def from_texts(cls, texts) -> "Vocabulary":
        words = set()
        for t in texts:
            words.update(tokenize(t))
        return cls(sorted(words))

    def __len__(self) -> int:
        return len(self.words)

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self.words == other.words


def encode_bow(text: str, vocab: Vocabulary) -> np.ndarray:
    """Token counts over the vocabulary (dense; the vocabulary is small)."""
    v = np.zeros(len(vocab))
    unk = vocab.index[UNK]
    for tok in tokenize(text):
        v[vocab.index.get(tok, unk)] += 1.0
    return v


class TextSet:
    """Ordered, duplicate-free set of strings with their bag-of-words rows.

    Used both for candidate answers and for teacher responses.
    """

    def __init__(self, texts: Sequence[str], vocab: Vocabulary):
        texts = list(texts)
        if not texts:
            raise ValueError("empty text set")
        if len(set(texts)) != len(texts):
            raise ValueError("text set has duplicates")
        self.texts = texts
        self.index = {t: i for i, t in enumerate(texts)}
        self.bow = np.stack([encode_bow(t, vocab) for t in texts]) if texts else np.zeros((0, len(vocab)))

    def __len__(self) -> int:
        return len(self.texts)


CandidateSet = TextSet
ResponseSet = TextSet


def init_params(
    vocab_size: int,
    dim: int,
    hops: int = 2,
    memory_size: int = MEMORY_SIZE,
    rng: np.random.Generator | None = None,
    sigma: float = INIT_SIGMA,
    identity_maps: str = "all",
) -> ParamStore:
    """Gaussian(0, sigma) everywhere. ``identity_maps`` ("all", "fp" or
    "none") picks which d x d maps start at identity plus that noise."""
    if not 1 <= hops <= 3:
        raise ValueError(f"hops must be 1..3, got {hops}")
    rng = rng or np.random.default_rng(0)
    store = ParamStore()
    if identity_maps not in ("all", "fp", "none"):
        raise ValueError(f"identity_maps must be all, fp or none; got {identity_maps!r}")
    eye = np.eye(dim)
    store.add("A", rng.normal(0.0, sigma, (dim, vocab_size)))
    for h in range(1, hops + 1):
        store.add(f"R{h}", (eye if identity_maps == "all" else 0.0) + rng.normal(0.0, sigma, (dim, dim)))
    store.add("R_fp", (eye if identity_maps != "none" else 0.0) + rng.normal(0.0, sigma, (dim, dim)))
    store.add("beta_star", rng.normal(0.0, sigma, dim))
    store.add("T", rng.normal(0.0, sigma, (dim, memory_size)))
    return store


def n_hops(store: ParamStore) -> int:
    return sum(1 for k in store.names() if re.fullmatch(r"R\d", k))


@dataclass
class Batch:
    """Padded mini-batch: questions (B,V), memories (B,N,V), mask and slots (B,N)."""

    x: np.ndarray
    mem: np.ndarray
    mask: np.ndarray
    slots: np.ndarray

    @classmethod
    def build(cls, xs: Sequence[np.ndarray], mems: Sequence[np.ndarray], memory_size: int = MEMORY_SIZE) -> "Batch":
        V = len(xs[0])
        B = len(xs)
        N = max(1, max(len(m) for m in mems))
        mem = np.zeros((B, N, V))
        mask = np.zeros((B, N), dtype=bool)
        slots = np.zeros((B, N), dtype=np.int64)
        for b, m in enumerate(mems):
            n = len(m)
            if n > memory_size:
                raise CapacityError(f"{n} memories exceed capacity {memory_size}")
            if n:
                mem[b, :n] = m
                mask[b, :n] = True
                slots[b, :n] = np.arange(n - 1, -1, -1)
        return cls(np.asarray(xs, dtype=np.float64), mem, mask, slots)


def _encode_memories(store: ParamStore, batch: Batch) -> np.ndarray:
    A, T = store["A"], store["T"]
    M = batch.mem @ A.T + T.T[batch.slots]
    return M * batch.mask[..., None]


def controller(store: ParamStore, batch: Batch):
    """Run the memory hops. Returns the final state and a cache for backward."""
    A = store["A"]
    M = _encode_memories(store, batch)
    u = batch.x @ A.T
    hops = []
    for h in range(1, n_hops(store) + 1):
        R = store[f"R{h}"]
        p = masked_softmax(np.einsum("bnd,bd->bn", M, u), batch.mask)
        o = np.einsum("bn,bnd->bd", p, M)
        z = o + u
        hops.append((u, p, o, z))
        u = z @ R.T
    return u, {"M": M, "hops": hops, "batch": batch}


def controller_backward(store: ParamStore, cache, g_u: np.ndarray) -> None:
    batch: Batch = cache["batch"]
    M = cache["M"]
    g_M = np.zeros_like(M)
    for h in range(len(cache["hops"]), 0, -1):
        u_prev, p, o, z = cache["hops"][h - 1]
        R = store[f"R{h}"]
        store.grads[f"R{h}"] += g_u.T @ z
        g_z = g_u @ R
        g_o = g_z
        g_u = g_z.copy()
        g_p = np.einsum("bnd,bd->bn", M, g_o)
        g_M += p[:, :, None] * g_o[:, None, :]
        g_s = p * (g_p - np.sum(p * g_p, axis=1, keepdims=True))
        g_M += g_s[:, :, None] * u_prev[:, None, :]
        g_u += np.einsum("bn,bnd->bd", g_s, M)
    g_M *= batch.mask[..., None]
    store.grads["A"] += g_u.T @ batch.x + np.einsum("bnd,bnv->dv", g_M, batch.mem)
    g_T = store.grads["T"]
    d = g_T.shape[0]
    np.add.at(g_T.T, batch.slots.ravel(), g_M.reshape(-1, d))


def answer_scores(store: ParamStore, batch: Batch, cand_bow: np.ndarray):
    u, cache = controller(store, batch)
    AY = cand_bow @ store["A"].T
    cache.update(u_final=u, AY=AY, cand_bow=cand_bow)
    return u @ AY.T, cache


def answer_backward(store: ParamStore, cache, g_scores: np.ndarray) -> None:
    AY, u = cache["AY"], cache["u_final"]
    g_u = g_scores @ AY
    g_AY = g_scores.T @ u
    store.grads["A"] += g_AY.T @ cache["cand_bow"]
    controller_backward(store, cache, g_u)


def fp_scores(store: ParamStore, batch: Batch, cand_bow: np.ndarray, actions: np.ndarray, resp_bow: np.ndarray):
    """Scores over per-example response lists ``resp_bow`` (B,K,V)."""
    u, cache = controller(store, batch)
    A, beta, Rf = store["A"], store["beta_star"], store["R_fp"]
    AY = cand_bow @ A.T
    p3 = softmax(u @ AY.T)
    rows = np.arange(len(actions))
    pa = p3[rows, actions]
    o3 = p3 @ AY + pa[:, None] * beta[None, :]
    z3 = o3 + u
    u3 = z3 @ Rf.T
    AX = resp_bow @ A.T
    scores = np.einsum("bkd,bd->bk", AX, u3)
    cache.update(u_final=u, AY=AY, cand_bow=cand_bow, p3=p3, o3=o3, pa=pa, actions=actions, z3=z3, u3=u3, AX=AX, resp_bow=resp_bow)
    return scores, cache


def fp_backward(store: ParamStore, cache, g_scores: np.ndarray) -> None:
    A_grad = store.grads["A"]
    u, AY, p3, pa = cache["u_final"], cache["AY"], cache["p3"], cache["pa"]
    actions = cache["actions"]
    rows = np.arange(len(actions))
    g_u3 = np.einsum("bk,bkd->bd", g_scores, cache["AX"])
    g_AX = g_scores[:, :, None] * cache["u3"][:, None, :]
    A_grad += np.einsum("bkd,bkv->dv", g_AX, cache["resp_bow"])
    store.grads["R_fp"] += g_u3.T @ cache["z3"]
    g_z3 = g_u3 @ store["R_fp"]
    g_o3 = g_z3
    g_u = g_z3.copy()
    beta = store["beta_star"]
    g_p3 = g_o3 @ AY.T
    g_p3[rows, actions] += g_o3 @ beta
    g_AY = p3.T @ g_o3
    store.grads["beta_star"] += pa @ g_o3
    g_s3 = p3 * (g_p3 - np.sum(p3 * g_p3, axis=1, keepdims=True))
    g_u += g_s3 @ AY
    g_AY += g_s3.T @ u
    A_grad += g_AY.T @ cache["cand_bow"]
    controller_backward(store, cache, g_u)


def batch_cross_entropy(scores: np.ndarray, targets: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over the batch and its gradient w.r.t. the scores.

    Uses log-softmax directly, so no probability clamping is needed.
    """
    shifted = scores - scores.max(axis=1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    logp = shifted - logz
    B = len(targets)
    rows = np.arange(B)
    g = np.exp(logp)
    g[rows, targets] -= 1.0
    return float(-logp[rows, targets].mean()), g / B


# Single-example API -------------------------------------------------------


@dataclass
class AttentionTrace:
    p1: np.ndarray
    p2: np.ndarray | None
    o1: np.ndarray
    o2: np.ndarray | None
    u1: np.ndarray
    u2: np.ndarray | None


@dataclass
class FPTrace:
    p3: np.ndarray
    o3: np.ndarray
    u3: np.ndarray


def _single_batch(x: np.ndarray, c: Sequence[np.ndarray], memory_size: int) -> Batch:
    mem = np.asarray(c, dtype=np.float64).reshape(len(c), len(x))
    return Batch.build([x], [mem], memory_size)


def _trace(cache) -> AttentionTrace:
    hops = cache["hops"]
    n = len(cache["batch"].mask[0].nonzero()[0])
    ps = [h[1][0, :n] for h in hops]
    os_ = [h[2][0] for h in hops]
    us = [h[0][0] for h in hops[1:]] + [cache["u_final"][0]]
    get = lambda xs, i: xs[i] if i < len(xs) else None  # noqa: E731
    return AttentionTrace(ps[0], get(ps, 1), os_[0], get(os_, 1), us[0], get(us, 1))


def forward_answer(store: ParamStore, x: np.ndarray, c: Sequence[np.ndarray], candidates: TextSet):
    """Distribution over candidates for question ``x`` given memories ``c``."""
    memory_size = store["T"].shape[1]
    scores, cache = answer_scores(store, _single_batch(x, c, memory_size), candidates.bow)
    return softmax(scores[0]), _trace(cache)


def forward_predict(
    store: ParamStore,
    x: np.ndarray,
    c: Sequence[np.ndarray],
    candidates: TextSet,
    action: str,
    responses: TextSet,
):
    if action not in candidates.index:
        raise ValueError(f"action {action!r} is not a candidate")
    memory_size = store["T"].shape[1]
    batch = _single_batch(x, c, memory_size)
    a = np.array([candidates.index[action]])
    scores, cache = fp_scores(store, batch, candidates.bow, a, responses.bow[None])
    trace = FPTrace(cache["p3"][0], cache["o3"][0], cache["u3"][0])
    return softmax(scores[0]), trace


def predict(store: ParamStore, x: np.ndarray, c: Sequence[np.ndarray], candidates: TextSet) -> str:
    dist, _ = forward_answer(store, x, c, candidates)
    return candidates.texts[int(np.argmax(dist))]


def subsample_negatives(responses: TextSet, true_response: str, k: int, rng: np.random.Generator) -> list[str]:
    """``min(k, |responses|)`` distinct responses, always including the true one."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if true_response not in responses.index:
        raise ValueError(f"unknown response {true_response!r}")
    return [responses.texts[i] for i in sample_response_ids(len(responses), responses.index[true_response], k, rng)]


def sample_response_ids(n: int, true_id: int, k: int, rng: np.random.Generator) -> np.ndarray:
    if k >= n:
        return np.arange(n)
    others = rng.choice(n - 1, size=k - 1, replace=False)
    others = others + (others >= true_id)
    ids = np.concatenate([[true_id], others])
    rng.shuffle(ids)
    return ids
