"""Sequence network: embedding, stacked LSTM, MLP with a linear bottleneck.

The network reads a delimiter-framed symbol sequence and, at every position,
emits (a) a low-dimensional context vector summarizing the prefix so far and
(b) logits predicting the next symbol. The encoder runs through the LSTM
stack and the MLP up to and including the bottleneck layer; the decoder is
the MLP tail plus the final logits projection. Training minimizes mean
next-symbol cross entropy with full backpropagation through time and Adam.

Everything is float64 numpy. Gradients are hand-derived; their correctness
is pinned by a finite-difference test rather than by construction, so keep
the forward caches and the backward pass in sync when editing.

Parameter tensors live in an insertion-ordered dict:

    embed           (vocab, embed_dim)
    lstm{l}.wx      (in_dim, 4*hidden)   gates packed [input, forget, output, cand]
    lstm{l}.wh      (hidden, 4*hidden)
    lstm{l}.b       (4*hidden,)          forget-gate slice initialized to 1
    mlp{m}.w        (d_in, d_out)        m runs over hidden layers + logits layer
    mlp{m}.b        (d_out,)
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .numeric import RngStream, sigmoid

ALPHABET_SIZE = 257
DELIMITER = 256

CHECKPOINT_FORMAT = "seqanom-checkpoint"
CHECKPOINT_VERSION = 1


def frame(raw: bytes) -> np.ndarray:
    """Wrap a byte string in start/end delimiters, as symbol indices."""
    out = np.empty(len(raw) + 2, dtype=np.int64)
    out[0] = DELIMITER
    out[-1] = DELIMITER
    if raw:
        out[1:-1] = np.frombuffer(raw, dtype=np.uint8)
    return out


@dataclass(frozen=True)
class NetConfig:
    """Architecture hyperparameters.

    ``mlp_shape`` lists the hidden-layer widths between the LSTM stack and
    the logits projection; ``bottleneck_index`` selects the one hidden layer
    with linear activation whose output is the context vector. A ``None``
    bottleneck gives the all-relu baseline variant with no context output.
    """

    vocab: int = ALPHABET_SIZE
    embed_dim: int = 128
    lstm_layers: int = 5
    lstm_hidden: int = 128
    mlp_shape: tuple[int, ...] = (128, 128, 64, 32, 64, 128, 256)
    bottleneck_index: int | None = 3

    def __post_init__(self) -> None:
        if self.vocab < 2 or self.lstm_layers < 1 or self.lstm_hidden < 1:
            raise ValueError(f"degenerate config: {self}")
        if not self.mlp_shape:
            raise ValueError("mlp_shape must contain at least one layer")
        if self.bottleneck_index is not None and not (
            0 <= self.bottleneck_index < len(self.mlp_shape)
        ):
            raise ValueError(
                f"bottleneck_index {self.bottleneck_index} outside mlp_shape "
                f"of length {len(self.mlp_shape)}"
            )

    @property
    def context_dim(self) -> int:
        if self.bottleneck_index is None:
            raise ValueError("baseline config has no bottleneck")
        return self.mlp_shape[self.bottleneck_index]

    def mlp_dims(self) -> list[tuple[int, int]]:
        widths = [self.lstm_hidden, *self.mlp_shape, self.vocab]
        return list(zip(widths[:-1], widths[1:]))


@dataclass
class EncodedSequence:
    """Per-position outputs of a forward pass over one symbol sequence.

    Row ``i`` of ``contexts``/``logits`` is computed after consuming
    ``symbols[0..i]`` and predicts ``symbols[i+1]``; there are
    ``len(symbols) - 1`` rows. ``contexts`` is None for baseline nets.
    """

    symbols: np.ndarray
    contexts: np.ndarray | None
    logits: np.ndarray


class SequenceNet:
    """Parameter container plus Adam state for one network."""

    def __init__(self, config: NetConfig, rng: RngStream | None = None) -> None:
        self.config = config
        self.params: dict[str, np.ndarray] = {}
        self._build(rng)
        self.adam_m = {k: np.zeros_like(v) for k, v in self.params.items()}
        self.adam_v = {k: np.zeros_like(v) for k, v in self.params.items()}
        self.adam_t = 0

    def _build(self, rng: RngStream | None) -> None:
        cfg = self.config

        def init(shape: tuple[int, ...], fan_in: int) -> np.ndarray:
            if rng is None:
                return np.zeros(shape)
            bound = 1.0 / np.sqrt(fan_in)
            return rng.uniform(-bound, bound, size=shape)

        self.params["embed"] = init((cfg.vocab, cfg.embed_dim), cfg.vocab)
        h = cfg.lstm_hidden
        for layer in range(cfg.lstm_layers):
            d_in = cfg.embed_dim if layer == 0 else h
            self.params[f"lstm{layer}.wx"] = init((d_in, 4 * h), d_in)
            self.params[f"lstm{layer}.wh"] = init((h, 4 * h), h)
            bias = np.zeros(4 * h)
            bias[h : 2 * h] = 1.0
            self.params[f"lstm{layer}.b"] = bias
        for m, (d_in, d_out) in enumerate(cfg.mlp_dims()):
            self.params[f"mlp{m}.w"] = init((d_in, d_out), d_in)
            self.params[f"mlp{m}.b"] = np.zeros(d_out)

    def zero_(self) -> "SequenceNet":
        """Zero every parameter in place (constant-function net, for tests)."""
        for v in self.params.values():
            v[:] = 0.0
        return self


def _check_symbols(symbols: np.ndarray, vocab: int) -> np.ndarray:
    symbols = np.asarray(symbols, dtype=np.int64)
    if symbols.ndim != 1 or symbols.size < 2:
        raise ValueError("need a 1-D symbol sequence of length >= 2")
    if symbols.min() < 0 or symbols.max() >= vocab:
        raise ValueError(f"symbol out of range [0, {vocab})")
    return symbols


def _mlp_activation(cfg: NetConfig, layer: int) -> str:
    # Hidden layers are relu except the linear bottleneck; the final
    # projection to vocab logits is linear.
    if layer == len(cfg.mlp_shape):
        return "linear"
    if cfg.bottleneck_index is not None and layer == cfg.bottleneck_index:
        return "linear"
    return "relu"


def forward(net: SequenceNet, symbols: Sequence[int] | np.ndarray) -> EncodedSequence:
    """Run one sequence through the net; pure in (parameters, input)."""
    cfg = net.config
    symbols = _check_symbols(symbols, cfg.vocab)
    t_len = symbols.size
    h_dim = cfg.lstm_hidden

    x = net.params["embed"][symbols]
    for layer in range(cfg.lstm_layers):
        wx = net.params[f"lstm{layer}.wx"]
        wh = net.params[f"lstm{layer}.wh"]
        zx = x @ wx + net.params[f"lstm{layer}.b"]
        h = np.zeros(h_dim)
        c = np.zeros(h_dim)
        hs = np.empty((t_len, h_dim))
        for t in range(t_len):
            z = zx[t] + h @ wh
            gi = sigmoid(z[:h_dim])
            gf = sigmoid(z[h_dim : 2 * h_dim])
            go = sigmoid(z[2 * h_dim : 3 * h_dim])
            gc = np.tanh(z[3 * h_dim :])
            c = gf * c + gi * gc
            h = go * np.tanh(c)
            hs[t] = h
        x = hs

    a = x[:-1]
    contexts = None
    for m in range(len(cfg.mlp_shape) + 1):
        z = a @ net.params[f"mlp{m}.w"] + net.params[f"mlp{m}.b"]
        if _mlp_activation(cfg, m) == "relu":
            a = np.maximum(z, 0.0)
        else:
            a = z
        if cfg.bottleneck_index is not None and m == cfg.bottleneck_index:
            contexts = a
    return EncodedSequence(symbols=symbols, contexts=contexts, logits=a)


def extract_contexts(net: SequenceNet, raw: bytes) -> list[tuple[int, np.ndarray]]:
    """Pairs (next_symbol, context that predicts it) over the framed input.

    Covers every predicted position including the terminal delimiter, so the
    pair count is ``len(raw) + 1``.
    """
    enc = forward(net, frame(raw))
    if enc.contexts is None:
        raise ValueError("baseline net has no context vectors")
    return [(int(enc.symbols[i + 1]), enc.contexts[i]) for i in range(enc.symbols.size - 1)]


# ---------------------------------------------------------------------------
# Training: batched forward/backward through time.
# ---------------------------------------------------------------------------


def _pad_batch(batch: list[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    """Stack variable-length symbol sequences into (B, T) plus lengths."""
    lengths = np.array([s.size for s in batch], dtype=np.int64)
    t_max = int(lengths.max())
    sym = np.zeros((len(batch), t_max), dtype=np.int64)
    for b, s in enumerate(batch):
        sym[b, : s.size] = s
    return sym, lengths


def loss_and_grads(
    net: SequenceNet, batch: Iterable[Sequence[int] | np.ndarray]
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean next-symbol cross entropy and its gradient over a batch.

    Sequences are padded to the batch maximum; padded positions contribute
    zero loss and zero gradient. The mean runs over all predicted positions
    pooled across the batch.
    """
    cfg = net.config
    seqs = [_check_symbols(s, cfg.vocab) for s in batch]
    if not seqs:
        raise ValueError("empty batch")
    sym, lengths = _pad_batch(seqs)
    n_batch, t_max = sym.shape
    h_dim = cfg.lstm_hidden

    # Forward through the LSTM stack, caching gate values per layer and step.
    layer_inputs = [net.params["embed"][sym]]  # (B, T, D) per layer
    caches = []
    for layer in range(cfg.lstm_layers):
        x = layer_inputs[-1]
        wx = net.params[f"lstm{layer}.wx"]
        wh = net.params[f"lstm{layer}.wh"]
        zx = x @ wx + net.params[f"lstm{layer}.b"]
        gi = np.empty((t_max, n_batch, h_dim))
        gf = np.empty_like(gi)
        go = np.empty_like(gi)
        gc = np.empty_like(gi)
        cs = np.empty_like(gi)
        tc = np.empty_like(gi)
        hs = np.empty((n_batch, t_max, h_dim))
        h = np.zeros((n_batch, h_dim))
        c = np.zeros((n_batch, h_dim))
        for t in range(t_max):
            z = zx[:, t] + h @ wh
            gi[t] = sigmoid(z[:, :h_dim])
            gf[t] = sigmoid(z[:, h_dim : 2 * h_dim])
            go[t] = sigmoid(z[:, 2 * h_dim : 3 * h_dim])
            gc[t] = np.tanh(z[:, 3 * h_dim :])
            c = gf[t] * c + gi[t] * gc[t]
            tc[t] = np.tanh(c)
            h = go[t] * tc[t]
            cs[t] = c
            hs[:, t] = h
        caches.append({"gi": gi, "gf": gf, "go": go, "gc": gc, "c": cs, "tc": tc})
        layer_inputs.append(hs)

    # MLP over prediction positions (all but the last timestep), flattened.
    flat = layer_inputs[-1][:, :-1, :].reshape(n_batch * (t_max - 1), h_dim)
    mlp_inputs = [flat]
    a = flat
    for m in range(len(cfg.mlp_shape) + 1):
        z = a @ net.params[f"mlp{m}.w"] + net.params[f"mlp{m}.b"]
        a = np.maximum(z, 0.0) if _mlp_activation(cfg, m) == "relu" else z
        mlp_inputs.append(a)
    logits = a

    targets = sym[:, 1:].reshape(-1)
    valid = (np.arange(1, t_max)[None, :] < lengths[:, None]).reshape(-1)
    n_valid = int(valid.sum())

    # Log-softmax via max shift so saturated logits stay finite.
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    rows = np.arange(logits.shape[0])
    logp = shifted[rows, targets] - log_norm[:, 0]
    loss = float(-logp[valid].sum() / n_valid)
    probs = np.exp(shifted - log_norm)

    dlogits = probs.copy()
    dlogits[rows, targets] -= 1.0
    dlogits[~valid] = 0.0
    dlogits /= n_valid

    grads = {k: np.zeros_like(v) for k, v in net.params.items()}

    # Backward through the MLP.
    da = dlogits
    for m in reversed(range(len(cfg.mlp_shape) + 1)):
        if _mlp_activation(cfg, m) == "relu":
            da = da * (mlp_inputs[m + 1] > 0.0)
        grads[f"mlp{m}.w"] += mlp_inputs[m].T @ da
        grads[f"mlp{m}.b"] += da.sum(axis=0)
        da = da @ net.params[f"mlp{m}.w"].T

    # Backward through time, top layer down.
    dh_direct = np.zeros((n_batch, t_max, h_dim))
    dh_direct[:, :-1, :] = da.reshape(n_batch, t_max - 1, h_dim)
    for layer in reversed(range(cfg.lstm_layers)):
        cache = caches[layer]
        x = layer_inputs[layer]
        wx = net.params[f"lstm{layer}.wx"]
        wh = net.params[f"lstm{layer}.wh"]
        dwx = grads[f"lstm{layer}.wx"]
        dwh = grads[f"lstm{layer}.wh"]
        db = grads[f"lstm{layer}.b"]
        dx = np.empty_like(x)
        dh_next = np.zeros((n_batch, h_dim))
        dc_next = np.zeros((n_batch, h_dim))
        hs = layer_inputs[layer + 1]
        for t in reversed(range(t_max)):
            gi = cache["gi"][t]
            gf = cache["gf"][t]
            go = cache["go"][t]
            gc = cache["gc"][t]
            tc = cache["tc"][t]
            c_prev = cache["c"][t - 1] if t > 0 else np.zeros((n_batch, h_dim))
            dh = dh_direct[:, t] + dh_next
            dc = dc_next + dh * go * (1.0 - tc * tc)
            dz = np.concatenate(
                [
                    dc * gc * gi * (1.0 - gi),
                    dc * c_prev * gf * (1.0 - gf),
                    dh * tc * go * (1.0 - go),
                    dc * gi * (1.0 - gc * gc),
                ],
                axis=1,
            )
            xt = x[:, t]
            h_prev = hs[:, t - 1] if t > 0 else np.zeros((n_batch, h_dim))
            dwx += xt.T @ dz
            dwh += h_prev.T @ dz
            db += dz.sum(axis=0)
            dx[:, t] = dz @ wx.T
            dh_next = dz @ wh.T
            dc_next = dc * gf
        dh_direct = dx

    np.add.at(grads["embed"], sym.reshape(-1), dh_direct.reshape(-1, cfg.embed_dim))
    return loss, grads


def clip_global_norm(grads: dict[str, np.ndarray], max_norm: float) -> float:
    """Scale all gradients so their joint L2 norm is at most ``max_norm``."""
    total = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if total > max_norm:
        scale = max_norm / total
        for g in grads.values():
            g *= scale
    return total


ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


def adam_step(net: SequenceNet, grads: dict[str, np.ndarray], lr: float = 0.001) -> SequenceNet:
    """One Adam update with bias correction; mutates and returns the net."""
    net.adam_t += 1
    t = net.adam_t
    for key, p in net.params.items():
        g = grads[key]
        m = net.adam_m[key]
        v = net.adam_v[key]
        m *= ADAM_BETA1
        m += (1.0 - ADAM_BETA1) * g
        v *= ADAM_BETA2
        v += (1.0 - ADAM_BETA2) * (g * g)
        m_hat = m / (1.0 - ADAM_BETA1**t)
        v_hat = v / (1.0 - ADAM_BETA2**t)
        p -= lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
    return net


def train(
    net: SequenceNet,
    corpus: Sequence[bytes],
    epochs: int,
    batch_size: int,
    rng: RngStream,
    lr: float = 0.001,
    clip_norm: float = 5.0,
    epoch_callback: Callable[[int, SequenceNet, float], None] | None = None,
) -> tuple[SequenceNet, list[float]]:
    """Train on a corpus of raw byte sequences; returns per-epoch mean loss.

    The corpus is reshuffled under ``rng`` each epoch. ``epoch_callback``
    (if given) runs after every epoch with (epoch number, net, mean loss),
    e.g. to write per-epoch checkpoints for the stability study.
    """
    if not len(corpus):
        raise ValueError("empty corpus")
    framed = [frame(s) for s in corpus]
    epoch_losses: list[float] = []
    for epoch in range(1, epochs + 1):
        order = rng.permutation(len(framed))
        loss_sum = 0.0
        position_count = 0
        for start in range(0, len(order), batch_size):
            batch = [framed[i] for i in order[start : start + batch_size]]
            loss, grads = loss_and_grads(net, batch)
            clip_global_norm(grads, clip_norm)
            adam_step(net, grads, lr)
            n_pos = sum(s.size - 1 for s in batch)
            loss_sum += loss * n_pos
            position_count += n_pos
        mean_loss = loss_sum / position_count
        epoch_losses.append(mean_loss)
        if epoch_callback is not None:
            epoch_callback(epoch, net, mean_loss)
    return net, epoch_losses


# ---------------------------------------------------------------------------
# Checkpoint I/O. npz container: float64 arrays round-trip bit-exactly.
# ---------------------------------------------------------------------------


def save_checkpoint(net: SequenceNet, path: Path | str) -> None:
    cfg = net.config
    meta = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "adam_t": net.adam_t,
        "config": {
            "vocab": cfg.vocab,
            "embed_dim": cfg.embed_dim,
            "lstm_layers": cfg.lstm_layers,
            "lstm_hidden": cfg.lstm_hidden,
            "mlp_shape": list(cfg.mlp_shape),
            "bottleneck_index": cfg.bottleneck_index,
        },
    }
    arrays = {f"param:{k}": v for k, v in net.params.items()}
    arrays.update({f"m:{k}": v for k, v in net.adam_m.items()})
    arrays.update({f"v:{k}": v for k, v in net.adam_v.items()})
    with open(path, "wb") as fh:
        np.savez(fh, meta=json.dumps(meta), **arrays)


def load_checkpoint(path: Path | str) -> SequenceNet:
    with np.load(path) as data:
        meta = json.loads(str(data["meta"][()]))
        if meta.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"{path}: not a checkpoint file")
        if meta.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {meta.get('version')}")
        c = meta["config"]
        cfg = NetConfig(
            vocab=c["vocab"],
            embed_dim=c["embed_dim"],
            lstm_layers=c["lstm_layers"],
            lstm_hidden=c["lstm_hidden"],
            mlp_shape=tuple(c["mlp_shape"]),
            bottleneck_index=c["bottleneck_index"],
        )
        net = SequenceNet(cfg, rng=None)
        for key in net.params:
            net.params[key] = data[f"param:{key}"].copy()
            net.adam_m[key] = data[f"m:{key}"].copy()
            net.adam_v[key] = data[f"v:{key}"].copy()
        net.adam_t = meta["adam_t"]
    return net
