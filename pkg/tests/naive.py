"""Loop-only reimplementation of the memory network forward passes.

Deliberately shares nothing with the package beyond plain parameter arrays:
no batching, no masking, no einsum; every sum written out.
"""

import math


def _matvec(M, v):
    return [sum(M[r][c] * v[c] for c in range(len(v))) for r in range(len(M))]


def _embed(A, bow):
    d = len(A)
    return [sum(A[r][j] * bow[j] for j in range(len(bow))) for r in range(d)]


def _dot(a, b):
    return sum(x * y for x, y in zip(a, b))


def _softmax(xs):
    top = max(xs)
    e = [math.exp(x - top) for x in xs]
    s = sum(e)
    return [v / s for v in e]


def controller(params, x, memories, hops):
    A = params["A"].tolist()
    T = params["T"].tolist()
    d = len(A)
    n = len(memories)
    mem = []
    for i, c in enumerate(memories):
        slot = n - 1 - i
        e = _embed(A, c)
        mem.append([e[r] + T[r][slot] for r in range(d)])
    u = _embed(A, x)
    trace = []
    for h in range(1, hops + 1):
        R = params[f"R{h}"].tolist()
        if mem:
            p = _softmax([_dot(u, m) for m in mem])
            o = [sum(p[i] * mem[i][r] for i in range(n)) for r in range(d)]
        else:
            p, o = [], [0.0] * d
        u = _matvec(R, [o[r] + u[r] for r in range(d)])
        trace.append((p, o, u))
    return u, trace


def answer(params, x, memories, cands, hops=2):
    A = params["A"].tolist()
    u, trace = controller(params, x, memories, hops)
    return _softmax([_dot(u, _embed(A, y)) for y in cands]), trace


def forward_prediction(params, x, memories, cands, action, responses, hops=2):
    A = params["A"].tolist()
    beta = params["beta_star"].tolist()
    Rf = params["R_fp"].tolist()
    d = len(A)
    u, _ = controller(params, x, memories, hops)
    ay = [_embed(A, y) for y in cands]
    p3 = _softmax([_dot(u, e) for e in ay])
    o3 = [0.0] * d
    for i, e in enumerate(ay):
        for r in range(d):
            o3[r] += p3[i] * (e[r] + (beta[r] if i == action else 0.0))
    u3 = _matvec(Rf, [o3[r] + u[r] for r in range(d)])
    return _softmax([_dot(u3, _embed(A, xb)) for xb in responses]), p3, o3
