"""Synthetic model zoos: tiny trained networks with scalar quality labels.

Each entry carries the parameters, a label in [0, 1] (held-out accuracy
of the network), a split tag, and provenance.  Augmentation adds
group-transformed copies that provably compute the same function, so
labels and splits are inherited.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .netmodels import (MhaBlockParams, MlpParams, Params, SCHEMA_VERSION,
                        SchemaError, mha_forward, params_from_doc,
                        params_to_doc)
from .symmetry import (act, check_functional_equiv, element_to_doc,
                       sample_gl, sample_monomial)

SPLIT_FRACTIONS = (0.7, 0.15, 0.15)


@dataclass
class ZooEntry:
    params: Params
    label: float
    split: str
    provenance: dict = field(default_factory=dict)


@dataclass
class Zoo:
    arch: str  # mlp | mha
    entries: list[ZooEntry]
    meta: dict = field(default_factory=dict)

    def split_counts(self) -> dict:
        out: dict[str, int] = {}
        for e in self.entries:
            out[e.split] = out.get(e.split, 0) + 1
        return out


def assign_splits(n: int, rng: np.random.Generator) -> list[str]:
    order = rng.permutation(n)
    n_train = int(round(SPLIT_FRACTIONS[0] * n))
    n_val = int(round(SPLIT_FRACTIONS[1] * n))
    splits = [""] * n
    for rank, idx in enumerate(order):
        if rank < n_train:
            splits[idx] = "train"
        elif rank < n_train + n_val:
            splits[idx] = "val"
        else:
            splits[idx] = "test"
    return splits


# -- mlp zoo ------------------------------------------------------------

def _ring_task(rng: np.random.Generator, n: int):
    """Two concentric noisy rings in the plane; not linearly separable."""
    y = rng.integers(0, 2, size=n)
    radius = np.where(y == 0, 1.0, 2.0) + 0.15 * rng.standard_normal(n)
    angle = rng.uniform(0.0, 2 * np.pi, size=n)
    x = np.stack([radius * np.cos(angle), radius * np.sin(angle)], axis=1)
    return x, y


def _train_tiny_mlp(rng: np.random.Generator, dims, steps: int, lr: float):
    """Hand-rolled gradient descent on softmax cross-entropy (fast path)."""
    ws = [rng.standard_normal((dims[i + 1], dims[i]))
          * np.sqrt(2.0 / dims[i]) for i in range(len(dims) - 1)]
    bs = [np.zeros(dims[i + 1]) for i in range(len(dims) - 1)]
    x_tr, y_tr = _ring_task(rng, 128)
    for _ in range(steps):
        acts = [x_tr]
        for i, (w, b) in enumerate(zip(ws, bs)):
            z = acts[-1] @ w.T + b
            acts.append(np.maximum(z, 0.0) if i < len(ws) - 1 else z)
        logits = acts[-1] - acts[-1].max(axis=1, keepdims=True)
        p = np.exp(logits)
        p /= p.sum(axis=1, keepdims=True)
        delta = p
        delta[np.arange(len(y_tr)), y_tr] -= 1.0
        delta /= len(y_tr)
        for i in range(len(ws) - 1, -1, -1):
            gw = delta.T @ acts[i]
            gb = delta.sum(axis=0)
            if i > 0:
                delta = (delta @ ws[i]) * (acts[i] > 0)
            ws[i] -= lr * gw
            bs[i] -= lr * gb
    return MlpParams(ws, bs)


def _mlp_accuracy(params: MlpParams, x, y) -> float:
    h = x
    for i in range(params.n_layers):
        h = h @ params.weights[i].T + params.biases[i]
        if i < params.n_layers - 1:
            h = np.maximum(h, 0.0)
    return float(np.mean(h.argmax(axis=1) == y))


def gen_mlp_zoo(n: int = 500, seed: int = 0, dims=(2, 8, 8, 2),
                max_steps: int = 400, lr: float = 0.5) -> Zoo:
    """Train n tiny classifiers for varying step budgets; label = held-out
    accuracy, so labels span the range from chance to near-perfect."""
    if n < 1:
        raise ValueError("need at least one entry")
    rng = np.random.default_rng(seed)
    x_te, y_te = _ring_task(np.random.default_rng(seed + 1), 400)
    splits = assign_splits(n, rng)
    entries = []
    for i in range(n):
        model_rng = np.random.default_rng(rng.integers(0, 2**63))
        steps = int(model_rng.integers(0, max_steps))
        # log-uniform learning rates so labels spread from chance to solved
        model_lr = float(lr * 10.0 ** model_rng.uniform(-3.0, 0.0))
        params = _train_tiny_mlp(model_rng, list(dims), steps, model_lr)
        entries.append(ZooEntry(params, _mlp_accuracy(params, x_te, y_te),
                                splits[i],
                                {"origin": "trained", "index": i,
                                 "steps": steps, "lr": model_lr}))
    return Zoo("mlp", entries, {"seed": seed, "dims": list(dims),
                                "task": "rings"})


# -- mha zoo ------------------------------------------------------------

def _majority_probe(rng: np.random.Generator, n: int, d: int, t: int = 6):
    x = rng.standard_normal((n, t, d))
    y = (x[:, :, 0].sum(axis=1) > 0).astype(int)
    return x, y


def _mha_accuracy(params: MhaBlockParams, x, y) -> float:
    hits = 0
    for xi, yi in zip(x, y):
        out = mha_forward(params, xi)
        hits += int((out[:, 0].mean() > 0) == bool(yi))
    return hits / len(y)


def gen_mha_zoo(n: int = 200, seed: int = 0, heads: int = 2, d: int = 8,
                d_head: int = 4, has_ff: bool = False) -> Zoo:
    """Random attention blocks scored on a sign-of-majority probe task.

    Entries interpolate between noise and a planted solution, so the
    probe accuracy (the label) covers a wide range.
    """
    if n < 1:
        raise ValueError("need at least one entry")
    rng = np.random.default_rng(seed)
    x_te, y_te = _majority_probe(np.random.default_rng(seed + 1), 200, d)
    # planted solution: value/output path copies coordinate 0 of the mean
    planted_wv = np.zeros((d, d_head))
    planted_wv[0, 0] = 1.0
    planted_wo = np.zeros((d, d_head))
    planted_wo[0, 0] = 1.0
    splits = assign_splits(n, rng)
    entries = []
    for i in range(n):
        mix = rng.uniform(0.0, 1.0)
        scale = rng.uniform(0.3, 1.5)

        def draw():
            return rng.standard_normal((d, d_head)) * scale / np.sqrt(d)

        wv = [(1 - mix) * draw() + mix * planted_wv for _ in range(heads)]
        wo = [(1 - mix) * draw() + mix * planted_wo for _ in range(heads)]
        ff = None
        if has_ff:
            d_f = 2 * d
            ff = (rng.standard_normal((d_f, d)) / np.sqrt(d), np.zeros(d_f),
                  rng.standard_normal((d, d_f)) / np.sqrt(d_f), np.zeros(d))
        params = MhaBlockParams([draw() for _ in range(heads)],
                                [draw() for _ in range(heads)], wv, wo, ff)
        entries.append(ZooEntry(params, _mha_accuracy(params, x_te, y_te),
                                splits[i],
                                {"origin": "random", "index": i,
                                 "mix": float(mix)}))
    return Zoo("mha", entries, {"seed": seed, "heads": heads, "d": d,
                                "d_head": d_head, "task": "majority"})


# -- augmentation -------------------------------------------------------

def augment_zoo(zoo: Zoo, factor: int = 2, seed: int = 0,
                scale_exp: int = 1, gl_spread: float = 1.0,
                permute: bool = True, certify: bool = True) -> Zoo:
    """Originals plus (factor-1) transformed copies of each entry.

    Monomial diagonals are uniform on [1, 10**scale_exp]; each copy is
    certified to compute the same function as its source, with tolerance
    loosened in proportion to the scale range.
    """
    if factor < 1:
        raise ValueError("factor must be >= 1")
    rng = np.random.default_rng(seed)
    entries = list(zoo.entries)
    if zoo.arch == "mlp":
        tol = 1e-6 * 10.0 ** scale_exp
    else:
        # GL pairs can be badly conditioned even at small spread
        tol = 1e-4 * max(1.0, gl_spread) ** 2
    for idx, entry in enumerate(zoo.entries):
        for k in range(factor - 1):
            if zoo.arch == "mlp":
                g = sample_monomial(entry.params.dims, 1.0, 10.0 ** scale_exp,
                                    permute=permute, rng=rng)
            else:
                g = sample_gl(entry.params.heads, entry.params.d_head,
                              spread=gl_spread, rng=rng, permute=permute)
            moved = act(g, entry.params)
            if certify:
                ok, worst = check_functional_equiv(entry.params, moved,
                                                  n_samples=20, tol=tol,
                                                  rng=rng)
                if not ok:
                    raise ArithmeticError(
                        f"augmented copy of entry {idx} drifted by {worst:g}")
            entries.append(ZooEntry(moved, entry.label, entry.split,
                                    {"origin": "augmented", "source": idx,
                                     "copy": k, "element": element_to_doc(g)}))
    meta = dict(zoo.meta)
    meta.update({"augment_factor": factor, "augment_seed": seed,
                 "scale_exp": scale_exp})
    return Zoo(zoo.arch, entries, meta)


# -- persistence --------------------------------------------------------

def save_zoo(zoo: Zoo, path, manifest_path=None) -> None:
    doc = {"version": SCHEMA_VERSION, "kind": "zoo", "arch": zoo.arch,
           "meta": zoo.meta,
           "entries": [{"label": e.label, "split": e.split,
                        "provenance": e.provenance,
                        "params": params_to_doc(e.params)}
                       for e in zoo.entries]}
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True)
    if manifest_path is not None:
        with open(manifest_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["index", "label", "split", "origin"])
            for i, e in enumerate(zoo.entries):
                writer.writerow([i, repr(e.label), e.split,
                                 e.provenance.get("origin", "")])


def load_zoo(path) -> Zoo:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("version") != SCHEMA_VERSION or doc.get("kind") != "zoo":
        raise SchemaError("not a weightsym/1 zoo file")
    entries = [ZooEntry(params_from_doc(e["params"]), float(e["label"]),
                        e["split"], dict(e.get("provenance", {})))
               for e in doc["entries"]]
    return Zoo(doc["arch"], entries, dict(doc.get("meta", {})))
