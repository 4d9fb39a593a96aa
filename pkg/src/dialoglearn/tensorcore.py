"""Small dense-numerics core: softmax, cross-entropy, SGD and gradient checks.

Everything runs in float64. Backward passes elsewhere in the package are
written by hand against these primitives.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

log = logging.getLogger(__name__)

PROB_FLOOR = 1e-12
CHECKPOINT_FORMAT = "dialoglearn-checkpoint v1"


class TrainingError(RuntimeError):
    pass


class ParamStore:
    """Named float64 parameters, each with a same-shaped gradient buffer."""

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}

    def add(self, name: str, value: np.ndarray) -> np.ndarray:
        if name in self.params:
            raise KeyError(f"duplicate parameter {name!r}")
        value = np.array(value, dtype=np.float64)
        self.params[name] = value
        self.grads[name] = np.zeros_like(value)
        return value

    def __getitem__(self, name: str) -> np.ndarray:
        return self.params[name]

    def __contains__(self, name: str) -> bool:
        return name in self.params

    def names(self) -> list[str]:
        return list(self.params)

    def zero_grad(self) -> None:
        for g in self.grads.values():
            g.fill(0.0)

    def copy(self) -> "ParamStore":
        out = ParamStore()
        for k, v in self.params.items():
            out.add(k, v.copy())
        return out

    def load(self, other: "ParamStore") -> None:
        for k, v in other.params.items():
            self.params[k][...] = v

    def flat(self) -> np.ndarray:
        return np.concatenate([v.ravel() for v in self.params.values()])

    def flat_grad(self) -> np.ndarray:
        return np.concatenate([g.ravel() for g in self.grads.values()])

    def size(self) -> int:
        return sum(v.size for v in self.params.values())

    def coordinate(self, index: int) -> tuple[str, int]:
        for name, v in self.params.items():
            if index < v.size:
                return name, index
            index -= v.size
        raise IndexError(index)


def softmax(scores) -> np.ndarray:
    scores = np.asarray(scores, dtype=np.float64)
    if scores.shape[-1] == 0:
        raise ValueError("softmax of an empty vector")
    z = np.exp(scores - scores.max(axis=-1, keepdims=True))
    return z / z.sum(axis=-1, keepdims=True)


def masked_softmax(scores: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Row-wise softmax over ``mask``-ed entries; all-masked rows give zeros."""
    s = np.where(mask, scores, -np.inf)
    top = s.max(axis=-1, keepdims=True)
    top = np.where(np.isfinite(top), top, 0.0)
    z = np.where(mask, np.exp(s - top), 0.0)
    total = z.sum(axis=-1, keepdims=True)
    return z / np.where(total > 0, total, 1.0)


def cross_entropy(prob, target: int) -> tuple[float, np.ndarray]:
    """Loss ``-log prob[target]`` and its gradient with respect to the scores."""
    prob = np.asarray(prob, dtype=np.float64)
    p = prob[target]
    if p < PROB_FLOOR:
        log.debug("cross_entropy: target probability %.3g clamped", p)
        p = PROB_FLOOR
    grad = prob.copy()
    grad[target] -= 1.0
    return float(-np.log(p)), grad


def sgd_step(store: ParamStore, learning_rate: float, clip_norm: float | None = None) -> None:
    """In-place ``p -= lr * grad`` for every parameter, then zero the gradients.

    With ``clip_norm`` the joint gradient is rescaled to at most that L2 norm.
    """
    for name, g in store.grads.items():
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient in {name!r}")
    scale = 1.0
    if clip_norm is not None:
        norm = np.sqrt(sum(float(np.sum(g * g)) for g in store.grads.values()))
        if norm > clip_norm:
            scale = clip_norm / norm
    for name, p in store.params.items():
        p -= (learning_rate * scale) * store.grads[name]
    store.zero_grad()


@dataclass
class GradcheckReport:
    max_rel_error: float
    coordinates: int
    worst: tuple[str, int] | None

    @property
    def passed(self) -> bool:
        return self.max_rel_error < 1e-4


def gradcheck(
    loss_fn: Callable[[], float],
    grad_fn: Callable[[], None],
    store: ParamStore,
    eps: float = 1e-5,
    n_coords: int = 200,
    rng: np.random.Generator | None = None,
    floor: float = 1e-6,
) -> GradcheckReport:
    """Compare analytic gradients with central differences.

    ``grad_fn`` must fill ``store.grads`` for the current parameters;
    ``loss_fn`` evaluates the loss at whatever the parameters currently hold.
    Samples ``n_coords`` coordinates (all of them if there are fewer).
    Relative error is ``|a - n| / max(|a|, |n|, floor)``.
    """
    if not 0 < eps <= 1e-3:
        raise ValueError(f"eps must be in (0, 1e-3], got {eps}")
    rng = rng or np.random.default_rng(0)
    store.zero_grad()
    grad_fn()
    analytic = store.flat_grad()
    total = store.size()
    if total <= n_coords:
        coords = np.arange(total)
    else:
        coords = rng.choice(total, size=n_coords, replace=False)
    worst, worst_at = 0.0, None
    for c in coords:
        name, i = store.coordinate(int(c))
        flat = store.params[name].reshape(-1)
        orig = flat[i]
        flat[i] = orig + eps
        up = loss_fn()
        flat[i] = orig - eps
        down = loss_fn()
        flat[i] = orig
        numeric = (up - down) / (2 * eps)
        a = analytic[c]
        rel = abs(a - numeric) / max(abs(a), abs(numeric), floor)
        if rel > worst:
            worst, worst_at = rel, (name, i)
    store.zero_grad()
    return GradcheckReport(worst, len(coords), worst_at)


def save_checkpoint(path: str | Path, store: ParamStore, meta: dict) -> None:
    """Write a JSON checkpoint; float reprs make the round trip exact."""
    doc = {
        "format": CHECKPOINT_FORMAT,
        "meta": meta,
        "params": {
            name: {"shape": list(v.shape), "data": [float(x) for x in v.ravel()]}
            for name, v in store.params.items()
        },
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True) + "\n", encoding="utf-8")


def load_checkpoint(path: str | Path) -> tuple[ParamStore, dict]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path}: not a {CHECKPOINT_FORMAT} file")
    store = ParamStore()
    for name in sorted(doc["params"]):
        entry = doc["params"][name]
        store.add(name, np.array(entry["data"], dtype=np.float64).reshape(entry["shape"]))
    return store, doc["meta"]
