"""Invariant metanetworks: equivariant stack + quasi layer + pooling + head.

The backbone is a stack of channel-mixing layers with ReLU; when the
quasi layer is enabled the learned scale (or GL pair) acts on the final
equivariant feature.  The read-out is invariant pooling followed by a
small dense head, so predictions are invariant under the full symmetry
group of the input parameters.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

import numpy as np

from .equivlayers import (channel_mix, equiv_relu, head_pool, invariant_pool,
                          lift, mha_invariants)
from .metrics import kendall_tau
from .netmodels import (Conv1dParams, MhaBlockParams, MlpParams, Params,
                        SCHEMA_VERSION, SchemaError, _tensor_doc,
                        _tensor_from_doc)
from .optim import AdamState, adam_step, bce_loss, mse_loss
from .quasilayers import (GlNet, ScaleNet, quasi_apply_mha, scale_act_feature,
                          scale_forward, xavier)
from .statfeat import mha_stat_features, mlp_stat_features
from .tensor import ShapeError, Tensor, concat, matmul, relu, sigmoid


@dataclass
class MetanetConfig:
    arch: str = "mlp"                      # mlp | conv1d | mha
    target_dims: list[int] = field(default_factory=lambda: [2, 8, 8, 2])
    conv_windows: list[int] = field(default_factory=list)
    mha_heads: int = 2
    mha_d: int = 8
    mha_d_head: int = 4
    mha_has_ff: bool = False
    channels: list[int] = field(default_factory=lambda: [8, 8, 4])
    quasi: bool = True
    head_hidden: int = 64
    scale_hidden: int = 32
    loss: str = "bce"                      # bce | mse
    select_best: bool = True               # restore best-val-tau snapshot
    lr: float = 1e-3
    batch_size: int = 8
    epochs: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.arch not in ("mlp", "conv1d", "mha"):
            raise ValueError(f"unknown arch {self.arch!r}")
        if self.loss not in ("bce", "mse"):
            raise ValueError(f"unknown loss {self.loss!r}")
        if any(c < 1 for c in self.channels) or self.head_hidden < 1:
            raise ValueError("widths must be positive")


def _template_params(cfg: MetanetConfig) -> Params:
    """A zero parameter point of the target architecture, for shape probing."""
    if cfg.arch == "mlp":
        d = cfg.target_dims
        return MlpParams([np.zeros((d[i + 1], d[i])) for i in range(len(d) - 1)],
                         [np.zeros(d[i + 1]) for i in range(len(d) - 1)])
    if cfg.arch == "conv1d":
        d = cfg.target_dims
        wins = cfg.conv_windows or [2] * (len(d) - 1)
        return Conv1dParams(
            [np.zeros((d[i + 1], d[i], wins[i])) for i in range(len(d) - 1)],
            [np.zeros(d[i + 1]) for i in range(len(d) - 1)])
    ff = None
    if cfg.mha_has_ff:
        d_f = 2 * cfg.mha_d
        ff = (np.zeros((d_f, cfg.mha_d)), np.zeros(d_f),
              np.zeros((cfg.mha_d, d_f)), np.zeros(cfg.mha_d))
    shape = (cfg.mha_d, cfg.mha_d_head)
    zs = lambda: [np.zeros(shape) for _ in range(cfg.mha_heads)]
    return MhaBlockParams(zs(), zs(), zs(), zs(), ff)


class TrainedMetanet:
    """Config plus all learned tensors; prediction is pure and deterministic."""

    def __init__(self, config: MetanetConfig):
        self.config = config
        rng = np.random.default_rng(config.seed)
        self.history: list[float] = []
        self.val_history: list[float] = []
        self.mixes: list[Tensor] = []
        self.ff_mixes: list[Tensor] = []
        self.scale_net: ScaleNet | None = None
        self.gl_net: GlNet | None = None
        # input statistics depend only on the networks being scored, so
        # they are memoized across epochs (keyed by parameter identity)
        self._stat_cache: dict[int, tuple] = {}
        self._lift_cache: dict[int, tuple] = {}

        template = _template_params(config)
        if config.arch in ("mlp", "conv1d"):
            widths = [1] + list(config.channels)
            self.mixes = [Tensor(xavier(rng, widths[i + 1], widths[i]),
                                 requires_grad=True)
                          for i in range(len(config.channels))]
            if config.quasi:
                self.scale_net = ScaleNet.init(
                    template.dims, 14 * template.n_layers, rng,
                    hidden=config.scale_hidden)
        else:
            stat_d = 56 if config.mha_has_ff else 28
            if config.quasi:
                self.gl_net = GlNet.init(config.mha_heads, config.mha_d_head,
                                         stat_d, rng,
                                         hidden=config.scale_hidden)
            if config.mha_has_ff:
                widths = [1] + list(config.channels)
                self.ff_mixes = [Tensor(xavier(rng, widths[i + 1], widths[i]),
                                        requires_grad=True)
                                 for i in range(len(config.channels))]
        pooled = self._pooled(template)
        n_in = pooled.size
        self.head_w1 = Tensor(xavier(rng, config.head_hidden, n_in),
                              requires_grad=True)
        self.head_b1 = Tensor(np.zeros(config.head_hidden), requires_grad=True)
        self.head_w2 = Tensor(xavier(rng, 1, config.head_hidden),
                              requires_grad=True)
        self.head_b2 = Tensor(np.zeros(1), requires_grad=True)

    # -- forward --------------------------------------------------------

    def _lift(self, params):
        key = id(params)
        hit = self._lift_cache.get(key)
        if hit is None or hit[0] is not params:
            hit = (params, lift(params))
            self._lift_cache[key] = hit
        return hit[1]

    def _backbone(self, params) -> "WeightFeature":
        feat = self._lift(params)
        for mix in self.mixes:
            feat = equiv_relu(channel_mix(mix, feat))
        return feat

    def _stats(self, params) -> Tensor:
        key = id(params)
        hit = self._stat_cache.get(key)
        if hit is None or hit[0] is not params:
            fn = (mlp_stat_features if self.config.arch != "mha"
                  else mha_stat_features)
            hit = (params, fn(params))
            self._stat_cache[key] = hit
        return hit[1]

    def _pooled(self, params) -> Tensor:
        if self.config.arch in ("mlp", "conv1d"):
            feat = self._backbone(params)
            if self.scale_net is not None:
                feat = scale_act_feature(
                    scale_forward(self.scale_net, self._stats(params)), feat)
            return invariant_pool(feat)
        # mha
        if self.gl_net is not None:
            inv = mha_invariants(
                quasi_apply_mha(self.gl_net, params, self._stats(params)))
        else:
            inv = mha_invariants(params)
        pooled = head_pool(inv, mode="mean")
        if params.ff is not None:
            w_a, b_a, w_b, b_b = params.ff
            ff_params = MlpParams([w_a, w_b], [b_a, b_b])
            feat = lift(ff_params)
            for mix in self.ff_mixes:
                feat = equiv_relu(channel_mix(mix, feat))
            pooled = concat([pooled, invariant_pool(feat)])
        return pooled

    def forward(self, params) -> Tensor:
        self._check_arch(params)
        pooled = self._pooled(params).reshape(1, -1)
        h = relu(matmul(pooled, self.head_w1.T) + self.head_b1)
        out = (matmul(h, self.head_w2.T) + self.head_b2).reshape(1)
        if self.config.loss == "bce":
            out = sigmoid(out)
        return out

    def predict(self, params) -> float:
        return self.forward(params).item()

    def _check_arch(self, params) -> None:
        expected = {"mlp": MlpParams, "conv1d": Conv1dParams,
                    "mha": MhaBlockParams}[self.config.arch]
        if not isinstance(params, expected):
            raise ShapeError(
                f"model targets {self.config.arch}, got {type(params).__name__}")

    # -- parameters -----------------------------------------------------

    def parameters(self) -> list[Tensor]:
        out = list(self.mixes) + list(self.ff_mixes)
        if self.scale_net is not None:
            out += self.scale_net.parameters()
        if self.gl_net is not None:
            out += self.gl_net.parameters()
        out += [self.head_w1, self.head_b1, self.head_w2, self.head_b2]
        return out

    def n_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def freeze_eps_zero(self) -> None:
        """Pin every learnable eps to the clamp floor (strict-equivariance mode)."""
        nets = []
        if self.scale_net is not None:
            nets = self.scale_net.eps
        if self.gl_net is not None:
            nets = [self.gl_net.eps]
        for e in nets:
            zero = np.zeros(e.shape)
            zero.flags.writeable = False
            e.data = zero


def build(config: MetanetConfig) -> TrainedMetanet:
    return TrainedMetanet(config)


def train(model: TrainedMetanet, zoo, config: MetanetConfig | None = None,
          split: str = "train", log=None) -> list[float]:
    """Seeded minibatch training; returns (and stores) the loss history."""
    cfg = config or model.config
    entries = [e for e in zoo.entries if e.split == split]
    if not entries:
        raise ValueError("empty training zoo")
    loss_fn = bce_loss if cfg.loss == "bce" else mse_loss
    params = model.parameters()
    state = AdamState(lr=cfg.lr).init(params)
    rng = np.random.default_rng(cfg.seed)
    val = [e for e in zoo.entries if e.split == "val"] \
        if cfg.select_best else []
    best_tau, best_snapshot = -np.inf, None
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(entries))
        total = 0.0
        for start in range(0, len(order), cfg.batch_size):
            batch = [entries[i] for i in order[start:start + cfg.batch_size]]
            preds = concat([model.forward(e.params) for e in batch])
            targets = Tensor(np.array([e.label for e in batch]))
            loss = loss_fn(preds, targets)
            if not np.isfinite(loss.item()):
                raise ArithmeticError(f"NaN loss at epoch {epoch}")
            for p in params:
                p.zero_grad()
            loss.backward()
            grads = [p.grad if p.grad is not None else np.zeros(p.shape)
                     for p in params]
            adam_step(state, params, grads)
            total += loss.item() * len(batch)
        epoch_loss = total / len(entries)
        model.history.append(epoch_loss)
        if len(val) >= 2:
            tau = evaluate(model, zoo, split="val")["tau"]
            model.val_history.append(tau)
            if tau > best_tau:
                best_tau = tau
                best_snapshot = [p.data for p in params]
        if log is not None:
            log(epoch, epoch_loss)
    if best_snapshot is not None:
        for p, data in zip(params, best_snapshot):
            p.data = data
    return model.history


def evaluate(model: TrainedMetanet, zoo, split: str | None = "test",
             threshold: float | None = None) -> dict:
    """Kendall tau, loss, and (for binary labels) accuracy at 0.5."""
    entries = [e for e in zoo.entries
               if split is None or e.split == split]
    if threshold is not None:
        entries = [e for e in entries if e.label >= threshold]
    if not entries:
        raise ValueError("no entries to evaluate")
    preds = np.array([model.predict(e.params) for e in entries])
    labels = np.array([e.label for e in entries])
    loss_fn = bce_loss if model.config.loss == "bce" else mse_loss
    loss = loss_fn(Tensor(preds), Tensor(labels)).item()
    metrics = {"n": len(entries),
               "tau": float(kendall_tau(preds, labels))
               if len(entries) >= 2 else 0.0,
               "loss": loss}
    if set(np.unique(labels)) <= {0.0, 1.0}:
        metrics["accuracy"] = float(np.mean((preds >= 0.5) == (labels >= 0.5)))
    return metrics


# -- checkpointing ------------------------------------------------------

def _named_tensors(model: TrainedMetanet) -> dict[str, Tensor]:
    names: dict[str, Tensor] = {}
    for i, m in enumerate(model.mixes):
        names[f"mix{i}"] = m
    for i, m in enumerate(model.ff_mixes):
        names[f"ff_mix{i}"] = m
    if model.scale_net is not None:
        for i, net in enumerate(model.scale_net.nets):
            for pname, p in zip(("w1", "b1", "wg", "bg", "w2", "b2"),
                                net.parameters()):
                names[f"scale{i}_{pname}"] = p
        for i, e in enumerate(model.scale_net.eps):
            names[f"scale{i}_eps"] = e
    if model.gl_net is not None:
        for pname, p in zip(("w1", "b1", "wg", "bg", "w2", "b2"),
                            model.gl_net.net.parameters()):
            names[f"gl_{pname}"] = p
        names["gl_eps"] = model.gl_net.eps
    names["head_w1"] = model.head_w1
    names["head_b1"] = model.head_b1
    names["head_w2"] = model.head_w2
    names["head_b2"] = model.head_b2
    return names


def save_checkpoint(model: TrainedMetanet, path) -> None:
    doc = {"version": SCHEMA_VERSION, "kind": "metanet",
           "config": asdict(model.config), "history": model.history,
           "val_history": model.val_history,
           "tensors": {k: _tensor_doc(v.data)
                       for k, v in _named_tensors(model).items()}}
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True)


def load_checkpoint(path) -> TrainedMetanet:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("version") != SCHEMA_VERSION or doc.get("kind") != "metanet":
        raise SchemaError("not a weightsym/1 metanet checkpoint")
    model = TrainedMetanet(MetanetConfig(**doc["config"]))
    model.history = list(doc.get("history", []))
    model.val_history = list(doc.get("val_history", []))
    for name, tensor in _named_tensors(model).items():
        arr = _tensor_from_doc(doc["tensors"][name]).reshape(tensor.shape)
        arr.flags.writeable = False
        tensor.data = arr
    return model
