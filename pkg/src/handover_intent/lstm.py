"""Small LSTM sequence classifier, trained by mini-batch gradient descent with
hand-written backprop through time (numpy, float64, fully seeded).

Architecture: 1 or 2 standard LSTM layers; the last time step's top hidden
state passes through ReLU and a fully connected layer to a sigmoid output.
Loss is binary cross-entropy on the logit.  Optimizer is adaptive-moment
gradient descent (lr 1e-3, global gradient-norm clip 5.0).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rng import substream

LEARNING_RATE = 1e-3
CLIP_NORM = 5.0
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
EARLY_STOP_START_EPOCH = 100  # patience only counts after this many epochs


class TrainingDivergedError(RuntimeError):
    def __init__(self, epoch: int, learning_rate: float):
        super().__init__(
            f"training loss became non-finite at epoch {epoch} "
            f"(learning rate {learning_rate:g})"
        )
        self.epoch = epoch
        self.learning_rate = learning_rate


@dataclass(frozen=True)
class LstmSpec:
    layers: int
    hidden: int
    input_dim: int
    batch_size: int
    max_epochs: int
    early_stop_after: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.layers not in (1, 2):
            raise ValueError(f"layers must be 1 or 2, got {self.layers}")
        if self.hidden < 1 or self.input_dim < 1:
            raise ValueError("hidden and input_dim must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")


def param_count(spec: LstmSpec) -> int:
    h = spec.hidden
    total = 0
    d = spec.input_dim
    for _ in range(spec.layers):
        total += 4 * h * (d + h + 1)
        d = h
    return total + h + 1  # head weights + bias


@dataclass(frozen=True)
class LstmModel:
    spec: LstmSpec
    parameters: np.ndarray  # flat vector, layout per _unpack

    def __post_init__(self):
        p = np.asarray(self.parameters, dtype=float)
        if p.shape != (param_count(self.spec),):
            raise ValueError(
                f"expected {param_count(self.spec)} parameters, got {p.shape}"
            )
        object.__setattr__(self, "parameters", p)


def _unpack(spec: LstmSpec, params: np.ndarray):
    """Views into the flat vector: per layer (W, U, b) with gate rows ordered
    input, forget, candidate, output; then the head (w, b)."""
    h = spec.hidden
    layers = []
    offset = 0
    d = spec.input_dim
    for _ in range(spec.layers):
        w = params[offset : offset + 4 * h * d].reshape(4 * h, d)
        offset += 4 * h * d
        u = params[offset : offset + 4 * h * h].reshape(4 * h, h)
        offset += 4 * h * h
        b = params[offset : offset + 4 * h]
        offset += 4 * h
        layers.append((w, u, b))
        d = h
    head_w = params[offset : offset + h]
    head_b = params[offset + h : offset + h + 1]
    return layers, head_w, head_b


def init_model(spec: LstmSpec) -> LstmModel:
    """Uniform +-1/sqrt(hidden) init with the forget-gate bias raised to +1."""
    rng = substream(spec.seed, "lstm-init")
    scale = 1.0 / np.sqrt(spec.hidden)
    params = rng.uniform(-scale, scale, size=param_count(spec))
    h = spec.hidden
    offset = 0
    d = spec.input_dim
    for _ in range(spec.layers):
        offset += 4 * h * d + 4 * h * h
        params[offset + h : offset + 2 * h] += 1.0  # forget-gate bias
        offset += 4 * h
        d = h
    return LstmModel(spec=spec, parameters=params)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-z))


def _forward(spec: LstmSpec, params: np.ndarray, x: np.ndarray):
    """Batched forward pass. x: (B, T, D). Returns (logits, cache)."""
    if x.ndim != 3 or x.shape[2] != spec.input_dim:
        raise ValueError(
            f"expected sequences of shape (B, T, {spec.input_dim}), got {x.shape}"
        )
    n_batch, n_steps, _ = x.shape
    h = spec.hidden
    layers, head_w, head_b = _unpack(spec, params)
    layer_caches = []
    inputs = x
    for w, u, b in layers:
        hidden = np.zeros((n_batch, h))
        cell = np.zeros((n_batch, h))
        steps = []
        outputs = np.empty((n_batch, n_steps, h))
        for t in range(n_steps):
            xt = inputs[:, t, :]
            z = xt @ w.T + hidden @ u.T + b
            gi = _sigmoid(z[:, 0 * h : 1 * h])
            gf = _sigmoid(z[:, 1 * h : 2 * h])
            gg = np.tanh(z[:, 2 * h : 3 * h])
            go = _sigmoid(z[:, 3 * h : 4 * h])
            new_cell = gf * cell + gi * gg
            tanh_cell = np.tanh(new_cell)
            new_hidden = go * tanh_cell
            steps.append((xt, hidden, cell, gi, gf, gg, go, tanh_cell))
            hidden, cell = new_hidden, new_cell
            outputs[:, t, :] = hidden
        layer_caches.append((steps, outputs))
        inputs = outputs
    last_hidden = inputs[:, -1, :]
    rect = np.maximum(last_hidden, 0.0)
    logits = rect @ head_w + head_b[0]
    cache = (x, layer_caches, last_hidden, rect)
    return logits, cache


def _bce_from_logits(logits: np.ndarray, labels: np.ndarray) -> float:
    s, y = logits, labels
    return float(np.mean(np.maximum(s, 0.0) - s * y + np.log1p(np.exp(-np.abs(s)))))


def _loss_and_grad(spec: LstmSpec, params: np.ndarray, x: np.ndarray, y: np.ndarray):
    logits, cache = _forward(spec, params, x)
    loss = _bce_from_logits(logits, y)
    _, layer_caches, last_hidden, rect = cache
    n_batch, n_steps = x.shape[0], x.shape[1]
    h = spec.hidden
    layers, head_w, _ = _unpack(spec, params)
    grad = np.zeros_like(params)
    glayers, ghead_w, ghead_b = _unpack(spec, grad)

    dlogits = (_sigmoid(logits) - y) / n_batch
    ghead_w += rect.T @ dlogits
    ghead_b += dlogits.sum()
    drect = np.outer(dlogits, head_w)
    dtop = drect * (last_hidden > 0.0)

    # Gradient flowing into each layer's output sequence.
    dout = np.zeros((n_batch, n_steps, h))
    dout[:, -1, :] = dtop
    for layer_index in range(spec.layers - 1, -1, -1):
        w, u, _ = layers[layer_index]
        gw, gu, gb = glayers[layer_index]
        steps, _ = layer_caches[layer_index]
        din = np.zeros((n_batch, n_steps, w.shape[1]))
        dh_carry = np.zeros((n_batch, h))
        dc = np.zeros((n_batch, h))
        for t in range(n_steps - 1, -1, -1):
            xt, h_prev, c_prev, gi, gf, gg, go, tanh_cell = steps[t]
            dh = dout[:, t, :] + dh_carry
            do = dh * tanh_cell
            dc = dc + dh * go * (1.0 - tanh_cell**2)
            di = dc * gg
            dg = dc * gi
            df = dc * c_prev
            dz = np.concatenate(
                [
                    di * gi * (1.0 - gi),
                    df * gf * (1.0 - gf),
                    dg * (1.0 - gg**2),
                    do * go * (1.0 - go),
                ],
                axis=1,
            )
            gw += dz.T @ xt
            gu += dz.T @ h_prev
            gb += dz.sum(axis=0)
            din[:, t, :] = dz @ w
            dh_carry = dz @ u
            dc = dc * gf
        dout = din
    return loss, grad


def lstm_forward(model: LstmModel, seq: np.ndarray) -> float:
    """Class-1 probability for one sequence of shape (T, D)."""
    seq = np.asarray(seq, dtype=float)
    if seq.ndim != 2:
        raise ValueError(f"sequence must be (T, D), got shape {seq.shape}")
    logits, _ = _forward(model.spec, model.parameters, seq[None, :, :])
    p = float(_sigmoid(logits)[0])
    return float(np.clip(p, np.nextafter(0.0, 1.0), np.nextafter(1.0, 0.0)))


def predict_proba_batch(model: LstmModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    logits, _ = _forward(model.spec, model.parameters, x)
    return np.clip(
        _sigmoid(logits), np.nextafter(0.0, 1.0), np.nextafter(1.0, 0.0)
    )


def gradient_check(
    model: LstmModel, x: np.ndarray, y: np.ndarray, fd_step: float = 1e-5
) -> float:
    """Max relative error between analytic BPTT gradients and central finite
    differences over every parameter.  Only sensible for small models."""
    if param_count(model.spec) > 500:
        raise ValueError("gradient_check is limited to models with <= 500 parameters")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    _, analytic = _loss_and_grad(model.spec, model.parameters, x, y)
    params = model.parameters.copy()
    numeric = np.empty_like(analytic)
    for i in range(params.shape[0]):
        saved = params[i]
        params[i] = saved + fd_step
        up, _ = _forward(model.spec, params, x)
        loss_up = _bce_from_logits(up, y)
        params[i] = saved - fd_step
        down, _ = _forward(model.spec, params, x)
        loss_down = _bce_from_logits(down, y)
        params[i] = saved
        numeric[i] = (loss_up - loss_down) / (2.0 * fd_step)
    denom = np.maximum(np.abs(analytic) + np.abs(numeric), 1e-5)
    return float(np.max(np.abs(analytic - numeric) / denom))


def _stack(dataset) -> tuple[np.ndarray, np.ndarray]:
    seqs = [np.asarray(s, dtype=float) for s, _ in dataset]
    labels = np.array([float(lbl) for _, lbl in dataset])
    shapes = {s.shape for s in seqs}
    if len(shapes) != 1:
        raise ValueError(f"sequences must share one shape, got {sorted(shapes)}")
    return np.stack(seqs), labels


def lstm_train(
    spec: LstmSpec,
    train,
    val,
    learning_rate: float = LEARNING_RATE,
    clip_norm: float = CLIP_NORM,
    early_stop_start: int = EARLY_STOP_START_EPOCH,
    history: "list | None" = None,
) -> LstmModel:
    """Minimize BCE by seeded mini-batch Adam; return the parameter snapshot
    with the minimum validation loss.

    With ``spec.early_stop_after`` set, training stops once the validation
    loss has not improved for that many epochs, checked only after
    ``early_stop_start`` epochs.  ``history``, when given, collects the
    per-epoch validation losses.
    """
    if not train or not val:
        raise ValueError("train and val sets must be nonempty")
    x_train, y_train = _stack(train)
    x_val, y_val = _stack(val)
    if len(set(y_train.tolist())) < 2:
        raise ValueError("training labels contain a single class")
    if x_train.shape[1:] != x_val.shape[1:]:
        raise ValueError(
            f"val sequences {x_val.shape[1:]} differ from train {x_train.shape[1:]}"
        )

    model = init_model(spec)
    params = model.parameters.copy()
    order_rng = substream(spec.seed, "lstm-batch-order")
    m = np.zeros_like(params)
    v = np.zeros_like(params)
    step = 0

    def val_loss_of(p: np.ndarray) -> float:
        logits, _ = _forward(spec, p, x_val)
        return _bce_from_logits(logits, y_val)

    best_loss = val_loss_of(params)
    best_params = params.copy()
    best_epoch = 0
    n = x_train.shape[0]
    for epoch in range(1, spec.max_epochs + 1):
        order = order_rng.permutation(n)
        for start in range(0, n, spec.batch_size):
            batch = order[start : start + spec.batch_size]
            loss, grad = _loss_and_grad(spec, params, x_train[batch], y_train[batch])
            if not np.isfinite(loss):
                raise TrainingDivergedError(epoch, learning_rate)
            norm = float(np.linalg.norm(grad))
            if norm > clip_norm:
                grad = grad * (clip_norm / norm)
            step += 1
            m = ADAM_BETA1 * m + (1.0 - ADAM_BETA1) * grad
            v = ADAM_BETA2 * v + (1.0 - ADAM_BETA2) * grad**2
            m_hat = m / (1.0 - ADAM_BETA1**step)
            v_hat = v / (1.0 - ADAM_BETA2**step)
            params -= learning_rate * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
        current = val_loss_of(params)
        if history is not None:
            history.append(current)
        if not np.isfinite(current):
            raise TrainingDivergedError(epoch, learning_rate)
        if current < best_loss:
            best_loss = current
            best_params = params.copy()
            best_epoch = epoch
        if (
            spec.early_stop_after is not None
            and epoch >= early_stop_start
            and epoch - best_epoch >= spec.early_stop_after
        ):
            break
    return LstmModel(spec=spec, parameters=best_params)


def ensemble_predict(members, seq: np.ndarray) -> float:
    """Weighted mean of member probabilities; weights must already sum to 1."""
    members = list(members)
    if not members:
        raise ValueError("ensemble has no members")
    weights = np.array([w for _, w in members], dtype=float)
    if (weights < 0).any() or abs(weights.sum() - 1.0) > 1e-9:
        raise ValueError("weights must be nonnegative and sum to 1")
    return float(sum(w * lstm_forward(model, seq) for model, w in members))
