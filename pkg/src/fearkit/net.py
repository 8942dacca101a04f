"""Bidirectional LSTM + attention + fully-connected fear classifier.

Forward and backward passes are written out by hand on numpy arrays; no
autograd. The attention head follows the four-step chain

    u_t = tanh(O_t @ W_attn)        intermediate representation
    s_t = u_t @ w_proj              raw score per timestep
    a   = softmax(s)                normalized weights over the sequence
    ctx = sum_t a_t * O_t           attended context vector

where O_t is the concatenated forward/backward hidden state. Training uses
mean cross-entropy and Adam; everything is deterministic given the seed.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import Normalization, SequenceSample
from .errors import NetError, TrainingDivergedError

CHECKPOINT_SCHEMA_VERSION = 1

GATES = ("i", "f", "g", "o")


@dataclass(frozen=True)
class NetConfig:
    input_dim: int = 61
    hidden_size: int = 128
    sequence_length: int = 16
    num_classes: int = 6
    dropout_rate: float = 0.5
    learning_rate: float = 0.0001
    batch_size: int = 256
    epochs: int = 50
    seed: int = 0
    fc_width: int = 64
    attention_dim: int | None = None  # defaults to the state width (H or 2H)
    bidirectional: bool = True
    use_attention: bool = True

    def __post_init__(self):
        for name in ("input_dim", "hidden_size", "sequence_length", "num_classes",
                     "batch_size", "epochs", "fc_width"):
            if getattr(self, name) < 1:
                raise NetError(f"{name} must be positive")
        if not (0.0 <= self.dropout_rate < 1.0):
            raise NetError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        if self.learning_rate < 0:
            raise NetError("learning_rate must be nonnegative")

    @property
    def state_width(self) -> int:
        return self.hidden_size * (2 if self.bidirectional else 1)

    @property
    def effective_attention_dim(self) -> int:
        return self.state_width if self.attention_dim is None else self.attention_dim

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "NetConfig":
        return cls(**doc)


def _uniform(rng: np.random.Generator, shape: tuple, fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def init_params(config: NetConfig, rng: np.random.Generator | None = None) -> dict:
    """Seeded parameter bundle; LSTM forget-gate biases start at 1.0."""
    rng = rng or np.random.default_rng(config.seed)
    h, d = config.hidden_size, config.input_dim
    params: dict[str, np.ndarray] = {}
    directions = ("fw", "bw") if config.bidirectional else ("fw",)
    for direction in directions:
        for gate in GATES:
            params[f"{direction}_W{gate}"] = _uniform(rng, (d, h), d)
            params[f"{direction}_U{gate}"] = _uniform(rng, (h, h), h)
            bias = np.zeros(h)
            if gate == "f":
                bias[:] = 1.0
            params[f"{direction}_b{gate}"] = bias
    s = config.state_width
    if config.use_attention:
        a = config.effective_attention_dim
        params["attn_W"] = _uniform(rng, (s, a), s)
        params["attn_proj"] = _uniform(rng, (a,), a)
    params["fc1_W"] = _uniform(rng, (s, config.fc_width), s)
    params["fc1_b"] = np.zeros(config.fc_width)
    params["fc2_W"] = _uniform(rng, (config.fc_width, config.num_classes), config.fc_width)
    params["fc2_b"] = np.zeros(config.num_classes)
    return params


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def stable_softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = x - np.max(x, axis=axis, keepdims=True)
    ex = np.exp(shifted)
    return ex / np.sum(ex, axis=axis, keepdims=True)


def _lstm_direction(x: np.ndarray, params: dict, prefix: str) -> tuple[np.ndarray, dict]:
    """Run one LSTM direction over (B, l, D); returns states (B, l, H) and cache."""
    b, l, _ = x.shape
    h = params[f"{prefix}_bi"].shape[0]
    hs = np.zeros((b, h))
    cs = np.zeros((b, h))
    states = np.zeros((b, l, h))
    cache = {"x": x, "steps": []}
    for t in range(l):
        xt = x[:, t, :]
        acts = {}
        for gate in GATES:
            z = (xt @ params[f"{prefix}_W{gate}"]
                 + hs @ params[f"{prefix}_U{gate}"]
                 + params[f"{prefix}_b{gate}"])
            acts[gate] = np.tanh(z) if gate == "g" else _sigmoid(z)
        c_new = acts["f"] * cs + acts["i"] * acts["g"]
        tanh_c = np.tanh(c_new)
        h_new = acts["o"] * tanh_c
        cache["steps"].append({"x": xt, "h_prev": hs, "c_prev": cs,
                               "tanh_c": tanh_c, "c": c_new, **acts})
        hs, cs = h_new, c_new
        states[:, t, :] = h_new
    return states, cache


def _lstm_direction_backward(d_states: np.ndarray, params: dict, prefix: str,
                             cache: dict, grads: dict) -> None:
    """Backprop one direction; accumulates parameter gradients into ``grads``."""
    b, l, h = d_states.shape
    dh_next = np.zeros((b, h))
    dc_next = np.zeros((b, h))
    for t in range(l - 1, -1, -1):
        step = cache["steps"][t]
        dh = d_states[:, t, :] + dh_next
        do = dh * step["tanh_c"]
        dc = dh * step["o"] * (1.0 - step["tanh_c"] ** 2) + dc_next
        di = dc * step["g"]
        dg = dc * step["i"]
        df = dc * step["c_prev"]
        dz = {
            "i": di * step["i"] * (1.0 - step["i"]),
            "f": df * step["f"] * (1.0 - step["f"]),
            "g": dg * (1.0 - step["g"] ** 2),
            "o": do * step["o"] * (1.0 - step["o"]),
        }
        dh_next = np.zeros((b, h))
        for gate in GATES:
            grads[f"{prefix}_W{gate}"] += step["x"].T @ dz[gate]
            grads[f"{prefix}_U{gate}"] += step["h_prev"].T @ dz[gate]
            grads[f"{prefix}_b{gate}"] += dz[gate].sum(axis=0)
            dh_next += dz[gate] @ params[f"{prefix}_U{gate}"].T
        dc_next = dc * step["f"]


def blstm_forward(x: np.ndarray, params: dict, config: NetConfig
                  ) -> tuple[np.ndarray, dict]:
    """Concatenated per-timestep states O of shape (B, l, state_width)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        x = x[None, :, :]
    if x.shape[1] != config.sequence_length or x.shape[2] != config.input_dim:
        raise NetError(
            f"input shape {x.shape[1:]} does not match "
            f"(l={config.sequence_length}, d={config.input_dim})")
    fw_states, fw_cache = _lstm_direction(x, params, "fw")
    if not config.bidirectional:
        return fw_states, {"fw": fw_cache}
    bw_states_rev, bw_cache = _lstm_direction(x[:, ::-1, :], params, "bw")
    bw_states = bw_states_rev[:, ::-1, :]
    return np.concatenate([fw_states, bw_states], axis=2), {"fw": fw_cache, "bw": bw_cache}


def _blstm_backward(d_states: np.ndarray, params: dict, config: NetConfig,
                    cache: dict, grads: dict) -> None:
    h = config.hidden_size
    if config.bidirectional:
        _lstm_direction_backward(d_states[:, :, :h], params, "fw", cache["fw"], grads)
        _lstm_direction_backward(d_states[:, ::-1, h:], params, "bw", cache["bw"], grads)
    else:
        _lstm_direction_backward(d_states, params, "fw", cache["fw"], grads)


@dataclass(frozen=True)
class AttentionTrace:
    """Raw scores, softmax weights, and the attended context for one sequence."""

    raw_scores: np.ndarray
    weights: np.ndarray
    context: np.ndarray


def _attention_forward(states: np.ndarray, params: dict) -> tuple[np.ndarray, dict]:
    u = np.tanh(states @ params["attn_W"])          # (B, l, A)
    raw = u @ params["attn_proj"]                   # (B, l)
    weights = stable_softmax(raw, axis=1)
    context = np.einsum("bl,bls->bs", weights, states)
    return context, {"states": states, "u": u, "raw": raw, "weights": weights}


def _attention_backward(d_context: np.ndarray, params: dict, cache: dict,
                        grads: dict) -> np.ndarray:
    states, u, weights = cache["states"], cache["u"], cache["weights"]
    d_states = weights[:, :, None] * d_context[:, None, :]
    d_weights = np.einsum("bs,bls->bl", d_context, states)
    d_raw = weights * (d_weights - (d_weights * weights).sum(axis=1, keepdims=True))
    grads["attn_proj"] += np.einsum("bla,bl->a", u, d_raw)
    du = d_raw[:, :, None] * params["attn_proj"][None, None, :]
    dz = du * (1.0 - u ** 2)
    grads["attn_W"] += np.einsum("bls,bla->sa", states, dz)
    d_states += dz @ params["attn_W"].T
    return d_states


def attention(states: np.ndarray, params: dict) -> AttentionTrace:
    """Attention over one sequence's states (l, state_width)."""
    states = np.asarray(states, dtype=np.float64)
    if states.ndim != 2:
        raise NetError(f"expected (l, state) matrix, got shape {states.shape}")
    context, cache = _attention_forward(states[None, :, :], params)
    return AttentionTrace(raw_scores=cache["raw"][0], weights=cache["weights"][0],
                          context=context[0])


def _classifier_forward(context: np.ndarray, params: dict, config: NetConfig,
                        training: bool, rng: np.random.Generator | None
                        ) -> tuple[np.ndarray, np.ndarray, dict]:
    z1 = context @ params["fc1_W"] + params["fc1_b"]
    a1 = np.tanh(z1)
    if training and config.dropout_rate > 0.0:
        if rng is None:
            raise NetError("training-mode dropout needs a random generator")
        keep = 1.0 - config.dropout_rate
        mask = (rng.random(a1.shape) < keep) / keep  # inverted scaling
        dropped = a1 * mask
    else:
        mask = None
        dropped = a1
    logits = dropped @ params["fc2_W"] + params["fc2_b"]
    probs = stable_softmax(logits, axis=-1)
    return logits, probs, {"context": context, "a1": a1, "mask": mask, "dropped": dropped}


def classify(context: np.ndarray, params: dict, config: NetConfig,
             training: bool = False, rng: np.random.Generator | None = None
             ) -> tuple[np.ndarray, np.ndarray]:
    """Logits and softmax probabilities for context vectors (B, state) or (state,)."""
    context = np.asarray(context, dtype=np.float64)
    single = context.ndim == 1
    if single:
        context = context[None, :]
    logits, probs, _ = _classifier_forward(context, params, config, training, rng)
    return (logits[0], probs[0]) if single else (logits, probs)


def _forward_full(x: np.ndarray, params: dict, config: NetConfig, training: bool,
                  rng: np.random.Generator | None) -> tuple[np.ndarray, np.ndarray, dict]:
    states, lstm_cache = blstm_forward(x, params, config)
    if config.use_attention:
        context, attn_cache = _attention_forward(states, params)
    else:
        context, attn_cache = states[:, -1, :], None
    logits, probs, fc_cache = _classifier_forward(context, params, config, training, rng)
    return logits, probs, {"states": states, "lstm": lstm_cache,
                           "attn": attn_cache, "fc": fc_cache}


def loss_and_gradients(x: np.ndarray, y: np.ndarray, params: dict, config: NetConfig,
                       training: bool = True, rng: np.random.Generator | None = None
                       ) -> tuple[float, dict]:
    """Mean cross-entropy over the batch plus gradients for every parameter."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if x.ndim != 3 or len(y) != x.shape[0]:
        raise NetError("expected x of shape (B, l, d) with one target per row")
    if x.shape[0] == 0:
        raise NetError("batch is empty")
    if y.min() < 0 or y.max() >= config.num_classes:
        raise NetError(f"targets outside [0, {config.num_classes})")
    b = x.shape[0]
    logits, probs, cache = _forward_full(x, params, config, training, rng)
    picked = probs[np.arange(b), y]
    with np.errstate(divide="ignore"):
        losses = -np.log(picked)
    if not np.all(np.isfinite(losses)):
        bad = int(np.argmax(~np.isfinite(losses)))
        raise TrainingDivergedError(f"non-finite loss at batch element {bad}",
                                    batch_index=bad)
    loss = float(losses.mean())

    grads = {name: np.zeros_like(value) for name, value in params.items()}
    d_logits = probs.copy()
    d_logits[np.arange(b), y] -= 1.0
    d_logits /= b

    fc = cache["fc"]
    grads["fc2_W"] += fc["dropped"].T @ d_logits
    grads["fc2_b"] += d_logits.sum(axis=0)
    d_dropped = d_logits @ params["fc2_W"].T
    d_a1 = d_dropped if fc["mask"] is None else d_dropped * fc["mask"]
    d_z1 = d_a1 * (1.0 - fc["a1"] ** 2)
    grads["fc1_W"] += fc["context"].T @ d_z1
    grads["fc1_b"] += d_z1.sum(axis=0)
    d_context = d_z1 @ params["fc1_W"].T

    if config.use_attention:
        d_states = _attention_backward(d_context, params, cache["attn"], grads)
    else:
        d_states = np.zeros_like(cache["states"])
        d_states[:, -1, :] = d_context
    _blstm_backward(d_states, params, config, cache["lstm"], grads)
    return loss, grads


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    val_accuracy: float
    train_accuracy: float


@dataclass
class TrainResult:
    params: dict
    config: NetConfig
    history: list = field(default_factory=list)
    best_epoch: int = 0
    best_val_accuracy: float = 0.0


def _accuracy(x: np.ndarray, y: np.ndarray, params: dict, config: NetConfig) -> float:
    _, probs, _ = _forward_full(x, params, config, training=False, rng=None)
    return float(np.mean(probs.argmax(axis=1) == y))


def _stack(samples: Sequence[SequenceSample]) -> tuple[np.ndarray, np.ndarray]:
    x = np.stack([s.features for s in samples])
    y = np.array([s.target for s in samples], dtype=np.int64)
    return x, y


def train(train_samples: Sequence[SequenceSample],
          val_samples: Sequence[SequenceSample],
          config: NetConfig,
          stop_at_train_accuracy: float | None = None) -> TrainResult:
    """Adam mini-batch training; returns the best-validation-accuracy params.

    Adam uses beta1=0.9, beta2=0.999, eps=1e-8 with bias correction. The
    run is deterministic for a fixed seed: one generator drives parameter
    init, epoch shuffles, and dropout masks in a fixed order.
    """
    if not train_samples or not val_samples:
        raise NetError("train and validation splits must be nonempty")
    rng = np.random.default_rng(config.seed)
    params = init_params(config, rng)
    m_state = {k: np.zeros_like(v) for k, v in params.items()}
    v_state = {k: np.zeros_like(v) for k, v in params.items()}
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    step = 0

    x_train, y_train = _stack(train_samples)
    x_val, y_val = _stack(val_samples)
    n = len(train_samples)
    result = TrainResult(params=copy.deepcopy(params), config=config)

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        epoch_losses = []
        for start in range(0, n, config.batch_size):
            batch = order[start:start + config.batch_size]
            try:
                loss, grads = loss_and_gradients(
                    x_train[batch], y_train[batch], params, config,
                    training=True, rng=rng)
            except TrainingDivergedError as exc:
                exc.history = result.history
                raise
            epoch_losses.append(loss)
            step += 1
            for key in sorted(params):
                g = grads[key]
                m_state[key] = beta1 * m_state[key] + (1 - beta1) * g
                v_state[key] = beta2 * v_state[key] + (1 - beta2) * g * g
                m_hat = m_state[key] / (1 - beta1 ** step)
                v_hat = v_state[key] / (1 - beta2 ** step)
                params[key] -= config.learning_rate * m_hat / (np.sqrt(v_hat) + eps)
        val_acc = _accuracy(x_val, y_val, params, config)
        train_acc = _accuracy(x_train, y_train, params, config)
        result.history.append(EpochRecord(epoch=epoch, loss=float(np.mean(epoch_losses)),
                                          val_accuracy=val_acc, train_accuracy=train_acc))
        if val_acc > result.best_val_accuracy or epoch == 1:
            result.best_val_accuracy = val_acc
            result.best_epoch = epoch
            result.params = copy.deepcopy(params)
        if stop_at_train_accuracy is not None and train_acc >= stop_at_train_accuracy:
            result.best_val_accuracy = val_acc
            result.best_epoch = epoch
            result.params = copy.deepcopy(params)
            break
    return result


@dataclass(frozen=True)
class Prediction:
    level: int
    probabilities: np.ndarray
    attention: AttentionTrace | None


def predict(window: np.ndarray, params: dict, config: NetConfig) -> Prediction:
    """Classify one already-normalized window; ties go to the lower level."""
    window = np.asarray(window, dtype=np.float64)
    if window.shape != (config.sequence_length, config.input_dim):
        raise NetError(
            f"window shape {window.shape} != "
            f"({config.sequence_length}, {config.input_dim})")
    states, _ = blstm_forward(window, params, config)
    if config.use_attention:
        trace = attention(states[0], params)
        context = trace.context
    else:
        trace = None
        context = states[0, -1, :]
    _, probs = classify(context, params, config, training=False)
    return Prediction(level=int(np.argmax(probs)), probabilities=probs, attention=trace)


def predict_batch(x: np.ndarray, params: dict, config: NetConfig) -> np.ndarray:
    _, probs, _ = _forward_full(np.asarray(x, dtype=np.float64), params, config,
                                training=False, rng=None)
    return probs


def history_csv(history: Sequence[EpochRecord], comment: str | None = None) -> str:
    out = []
    if comment:
        out.append(f"# {comment}")
    out.append("epoch,loss,val_accuracy")
    for rec in history:
        out.append(f"{rec.epoch},{repr(rec.loss)},{repr(rec.val_accuracy)}")
    return "\n".join(out) + "\n"


def save_checkpoint(path: str | Path, params: dict, config: NetConfig,
                    normalization: Normalization | None = None,
                    metadata: dict | None = None) -> None:
    doc = {
        "schema_version": CHECKPOINT_SCHEMA_VERSION,
        "config": config.to_dict(),
        "params": {
            name: {"shape": list(value.shape), "data": value.ravel().tolist()}
            for name, value in sorted(params.items())
        },
        "normalization": normalization.to_dict() if normalization else None,
        "metadata": metadata or {},
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True) + "\n", encoding="utf-8")


def load_checkpoint(path: str | Path) -> tuple[dict, NetConfig, Normalization | None, dict]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("schema_version") != CHECKPOINT_SCHEMA_VERSION:
        raise NetError(f"unsupported checkpoint schema_version {doc.get('schema_version')}")
    config = NetConfig.from_dict(doc["config"])
    params = {
        name: np.array(entry["data"], dtype=np.float64).reshape(entry["shape"])
        for name, entry in doc["params"].items()
    }
    norm = Normalization.from_dict(doc["normalization"]) if doc["normalization"] else None
    return params, config, norm, doc.get("metadata", {})
