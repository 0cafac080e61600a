"""Sequence-to-sequence LSTM classifier written directly on numpy.

One LSTM layer (forget gate, no peepholes) followed by a softmax layer over
the five position classes:

    i = σ(W_i x + U_i h + b_i)      f = σ(W_f x + U_f h + b_f)
    o = σ(W_o x + U_o h + b_o)      g = tanh(W_g x + U_g h + b_g)
    c' = f ⊙ c + i ⊙ g              h' = o ⊙ tanh(c')
    logits = V h' + c_out

The loss is the per-timestep cross-entropy averaged over each sequence and
then over sequences. Gradients come from backpropagation through time and
parameters are updated with Adam, full batch.
"""

import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from typing import NamedTuple, Optional

import numpy as np
from scipy.special import expit
from scipy.special import softmax as _softmax

from core.errors import ConfigError, DataValidationError, DimensionError, NumericError
from core.trace import CLASSES, N_CLASSES, N_SENSORS, PositionLabel, validate_cycles

log = logging.getLogger(__name__)

GATES = ("input", "forget", "output", "candidate")
PROB_FLOOR = 1e-12
MODEL_FORMAT = "plcautomata-lstm"
MODEL_SCHEMA_VERSION = 1


# --- Parameters ---
@dataclass(frozen=True, eq=False)
class LstmParams:
    """Gate blocks are stacked along the first axis of W, U and b in the
    order input, forget, output, candidate."""

    W: np.ndarray  # (4H, 11)
    U: np.ndarray  # (4H, H)
    b: np.ndarray  # (4H,)
    V: np.ndarray  # (5, H)
    c: np.ndarray  # (5,)

    NAMES = ("W", "U", "b", "V", "c")

    def __post_init__(self):
        h = self.U.shape[-1] if self.U.ndim == 2 else -1
        expected = {
            "W": (4 * h, N_SENSORS), "U": (4 * h, h), "b": (4 * h,),
            "V": (N_CLASSES, h), "c": (N_CLASSES,),
        }
        for name in self.NAMES:
            arr = getattr(self, name)
            if h <= 0 or arr.shape != expected[name]:
                raise DimensionError(f"parameter {name} has shape {arr.shape}, expected {expected[name]}")

    @property
    def hidden(self):
        return self.U.shape[1]

    def arrays(self):
        return tuple(getattr(self, name) for name in self.NAMES)

    def items(self):
        return zip(self.NAMES, self.arrays())

    def map(self, fn, *others):
        return LstmParams(*(fn(*arrs) for arrs in zip(self.arrays(), *(o.arrays() for o in others))))

    def gate(self, name):
        """(W_g, U_g, b_g) views of one gate."""
        k = GATES.index(name)
        rows = slice(k * self.hidden, (k + 1) * self.hidden)
        return self.W[rows], self.U[rows], self.b[rows]

    def is_finite(self):
        return all(np.isfinite(a).all() for a in self.arrays())

    def size(self):
        return sum(a.size for a in self.arrays())

    @classmethod
    def zeros(cls, hidden):
        return cls(np.zeros((4 * hidden, N_SENSORS)), np.zeros((4 * hidden, hidden)),
                   np.zeros(4 * hidden), np.zeros((N_CLASSES, hidden)), np.zeros(N_CLASSES))

    @classmethod
    def initialize(cls, hidden, rng, init_scale=0.08, forget_bias=1.0):
        def uniform(*shape):
            return rng.uniform(-init_scale, init_scale, size=shape)

        b = uniform(4 * hidden)
        b[hidden:2 * hidden] += forget_bias
        return cls(uniform(4 * hidden, N_SENSORS), uniform(4 * hidden, hidden), b,
                   uniform(N_CLASSES, hidden), uniform(N_CLASSES))


@dataclass(frozen=True)
class TrainConfig:
    hidden: int = 50
    epochs: int = 1000
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    init_scale: float = 0.08
    forget_bias: float = 1.0
    seed: int = 0
    layers: int = 1

    def __post_init__(self):
        if self.layers != 1:
            raise ConfigError(f"only a single LSTM layer is supported, got layers={self.layers}")
        if self.hidden < 1:
            raise ConfigError(f"hidden must be positive, got {self.hidden}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if not (0.0 < self.beta1 < 1.0 and 0.0 < self.beta2 < 1.0):
            raise ConfigError("beta1 and beta2 must lie in (0, 1)")
        if self.learning_rate <= 0.0 or self.epsilon <= 0.0:
            raise ConfigError("learning rate and epsilon must be positive")
        if self.init_scale < 0.0:
            raise ConfigError("init_scale must be non-negative")


@dataclass
class TrainHistory:
    loss: list = field(default_factory=list)
    train_accuracy: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    val_accuracy: list = field(default_factory=list)
    test_accuracy: Optional[float] = None

    def __len__(self):
        return len(self.loss)

    def to_csv(self):
        rows = ["iteration,loss,accuracy,val_loss,val_accuracy"]
        for k in range(len(self)):
            val = (f"{self.val_loss[k]:.4f},{self.val_accuracy[k]:.4f}"
                   if k < len(self.val_loss) else ",")
            rows.append(f"{k},{self.loss[k]:.4f},{self.train_accuracy[k]:.4f},{val}")
        return "\n".join(rows) + "\n"


# --- Forward pass ---
class CellCache(NamedTuple):
    x: np.ndarray
    h_prev: np.ndarray
    c_prev: np.ndarray
    i: np.ndarray
    f: np.ndarray
    o: np.ndarray
    g: np.ndarray
    c: np.ndarray
    tanh_c: np.ndarray


def forward_cell(x, h_prev, c_prev, p: LstmParams):
    """One timestep. Works on a single vector or a batch of row vectors."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != p.W.shape[1]:
        raise DimensionError(f"input has {x.shape[-1]} features, network expects {p.W.shape[1]}")
    if np.shape(h_prev)[-1] != p.hidden or np.shape(c_prev)[-1] != p.hidden:
        raise DimensionError(f"state size does not match hidden={p.hidden}")
    H = p.hidden
    z = x @ p.W.T + h_prev @ p.U.T + p.b
    i = expit(z[..., :H])
    f = expit(z[..., H:2 * H])
    o = expit(z[..., 2 * H:3 * H])
    g = np.tanh(z[..., 3 * H:])
    c = f * c_prev + i * g
    tanh_c = np.tanh(c)
    h = o * tanh_c
    return h, c, CellCache(x, h_prev, c_prev, i, f, o, g, c, tanh_c)


def _as_matrix(seq):
    if isinstance(seq, np.ndarray):
        X = seq.astype(np.float64, copy=False)
    else:
        X = np.array([list(v) for v in seq], dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise DimensionError("sequence must be a non-empty list of sensor vectors")
    return X


def _unroll(X, p):
    """X is (T, B, 11). Returns hidden states (T, B, H) and per-step caches."""
    T, B, _ = X.shape
    h = np.zeros((B, p.hidden))
    c = np.zeros((B, p.hidden))
    hs = np.empty((T, B, p.hidden))
    caches = []
    for t in range(T):
        h, c, cache = forward_cell(X[t], h, c, p)
        hs[t] = h
        caches.append(cache)
    return hs, caches


def forward_sequence(seq, p: LstmParams):
    """Per-timestep class logits (T, 5), starting from zero state."""
    X = _as_matrix(seq)
    hs, _ = _unroll(X[:, None, :], p)
    return hs[:, 0, :] @ p.V.T + p.c


def softmax(logits):
    return _softmax(np.asarray(logits, dtype=np.float64), axis=-1)


def _label_indices(labels):
    out = []
    for label in labels:
        if isinstance(label, PositionLabel):
            out.append(label.index)
        elif isinstance(label, (int, np.integer)) and 0 <= label < N_CLASSES:
            out.append(int(label))
        else:
            raise DataValidationError(f"label {label!r} is not one of the {N_CLASSES} classes")
    return np.asarray(out, dtype=np.int64)


def sequence_loss(probs, labels):
    """Mean over timesteps of -ln p(true class); probabilities are floored
    at 1e-12 inside the log."""
    probs = np.asarray(probs, dtype=np.float64)
    y = _label_indices(labels)
    if probs.ndim != 2 or probs.shape[0] < 1 or probs.shape[0] != len(y):
        raise DimensionError(f"{probs.shape[0] if probs.ndim else 0} probability rows for {len(y)} labels")
    true = probs[np.arange(len(y)), y]
    return float(-np.mean(np.log(np.maximum(true, PROB_FLOOR))))


# --- Batching ---
class Batch(NamedTuple):
    X: np.ndarray       # (T, B, 11) zero padded
    Y: np.ndarray       # (T, B) class indices, 0 where padded
    mask: np.ndarray    # (T, B) 1 on real timesteps
    lengths: np.ndarray  # (B,)

    @classmethod
    def build(cls, seqs, labels=None):
        mats = [_as_matrix(s) for s in seqs]
        if not mats:
            raise DataValidationError("no sequences given")
        for m in mats:
            if m.shape[1] != N_SENSORS:
                raise DimensionError(f"sequence has {m.shape[1]} features, expected {N_SENSORS}")
        lengths = np.array([len(m) for m in mats])
        T, B = int(lengths.max()), len(mats)
        X = np.zeros((T, B, N_SENSORS))
        Y = np.zeros((T, B), dtype=np.int64)
        mask = np.zeros((T, B))
        for k, m in enumerate(mats):
            X[:len(m), k] = m
            mask[:len(m), k] = 1.0
            if labels is not None:
                y = _label_indices(labels[k])
                if len(y) != len(m):
                    raise DataValidationError(
                        f"sequence {k}: {len(m)} timesteps but {len(y)} labels")
                Y[:len(m), k] = y
        return cls(X, Y, mask, lengths)


def _batch_forward(batch, p):
    hs, caches = _unroll(batch.X, p)
    logits = hs @ p.V.T + p.c
    return softmax(logits), hs, caches


def _batch_loss(probs, batch):
    T, B = batch.Y.shape
    true = np.take_along_axis(probs, batch.Y[..., None], axis=-1)[..., 0]
    nll = -np.log(np.maximum(true, PROB_FLOOR)) * batch.mask
    return float(np.mean(nll.sum(axis=0) / batch.lengths))


def _batch_accuracy(probs, batch):
    hits = (np.argmax(probs, axis=-1) == batch.Y) * batch.mask
    return float(hits.sum() / batch.mask.sum())


def _cell_backward(dh, dc_next, cache, p):
    """Backprop one timestep. Returns gate pre-activation grads and the
    grads flowing into h_prev and c_prev."""
    do = dh * cache.tanh_c
    dc = dc_next + dh * cache.o * (1.0 - cache.tanh_c ** 2)
    di = dc * cache.g
    df = dc * cache.c_prev
    dg = dc * cache.i
    dz = np.concatenate([
        di * cache.i * (1.0 - cache.i),
        df * cache.f * (1.0 - cache.f),
        do * cache.o * (1.0 - cache.o),
        dg * (1.0 - cache.g ** 2),
    ], axis=-1)
    return dz, dz @ p.U, dc * cache.f


def _loss_and_grads(batch, p, weight=1.0):
    probs, hs, caches = _batch_forward(batch, p)
    loss = _batch_loss(probs, batch)
    T, B = batch.Y.shape

    scale = weight * batch.mask / (batch.lengths[None, :] * B)
    dlogits = probs.copy()
    np.put_along_axis(dlogits, batch.Y[..., None],
                      np.take_along_axis(dlogits, batch.Y[..., None], axis=-1) - 1.0, axis=-1)
    dlogits *= scale[..., None]

    dV = np.einsum("tbk,tbh->kh", dlogits, hs)
    dc_out = dlogits.sum(axis=(0, 1))
    dW = np.zeros_like(p.W)
    dU = np.zeros_like(p.U)
    db = np.zeros_like(p.b)
    dh_next = np.zeros((B, p.hidden))
    dc_next = np.zeros((B, p.hidden))
    for t in reversed(range(T)):
        dh = dlogits[t] @ p.V + dh_next
        dz, dh_next, dc_next = _cell_backward(dh, dc_next, caches[t], p)
        dW += dz.T @ caches[t].x
        dU += dz.T @ caches[t].h_prev
        db += dz.sum(axis=0)
    return loss, LstmParams(dW, dU, db, dV, dc_out), probs


def backward_sequence(seq, labels, p: LstmParams, weight=1.0):
    """Gradient of weight · sequence_loss(softmax(forward_sequence(seq)))."""
    batch = Batch.build([seq], [labels])
    _, grads, _ = _loss_and_grads(batch, p, weight=weight)
    return grads


# --- Adam ---
@dataclass(frozen=True, eq=False)
class AdamState:
    m: LstmParams
    v: LstmParams
    t: int = 0

    @classmethod
    def fresh(cls, p: LstmParams):
        return cls(p.map(np.zeros_like), p.map(np.zeros_like), 0)


def adam_update(theta, grad, m, v, t, cfg):
    """One Adam update of a single array; `t` is the step count after
    incrementing."""
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad * grad
    m_hat = m / (1.0 - cfg.beta1 ** t)
    v_hat = v / (1.0 - cfg.beta2 ** t)
    return theta - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.epsilon), m, v


def adam_step(p: LstmParams, grads: LstmParams, state: AdamState, cfg: TrainConfig):
    t = state.t + 1
    new_p, new_m, new_v = [], [], []
    for theta, g, m, v in zip(p.arrays(), grads.arrays(), state.m.arrays(), state.v.arrays()):
        if theta.shape != g.shape:
            raise DimensionError(f"gradient shape {g.shape} does not match parameter {theta.shape}")
        theta, m, v = adam_update(theta, g, m, v, t, cfg)
        new_p.append(theta)
        new_m.append(m)
        new_v.append(v)
    return LstmParams(*new_p), AdamState(LstmParams(*new_m), LstmParams(*new_v), t)


# --- Training ---
def _cycle_data(cycles):
    cycles = list(cycles)
    validate_cycles(cycles)
    return Batch.build([c.sensor_matrix() for c in cycles], [c.labels for c in cycles])


def train(train_cycles, cfg: TrainConfig, val_cycles=None):
    """Full-batch training: one Adam step per iteration on the mean of the
    per-cycle losses. History entry k is measured before step k."""
    if not train_cycles:
        raise DataValidationError("training needs at least one cycle")
    batch = _cycle_data(train_cycles)
    val_batch = _cycle_data(val_cycles) if val_cycles else None
    rng = np.random.default_rng(cfg.seed)
    p = LstmParams.initialize(cfg.hidden, rng, cfg.init_scale, cfg.forget_bias)
    state = AdamState.fresh(p)
    history = TrainHistory()
    log.info("training: %d cycles (%d timesteps), hidden=%d, %d iterations",
             len(batch.lengths), int(batch.lengths.sum()), cfg.hidden, cfg.epochs)

    for it in range(cfg.epochs):
        loss, grads, probs = _loss_and_grads(batch, p)
        if not math.isfinite(loss) or not grads.is_finite():
            raise NumericError(f"non-finite loss or gradient at iteration {it}")
        history.loss.append(loss)
        history.train_accuracy.append(_batch_accuracy(probs, batch))
        if val_batch is not None:
            val_probs, _, _ = _batch_forward(val_batch, p)
            history.val_loss.append(_batch_loss(val_probs, val_batch))
            history.val_accuracy.append(_batch_accuracy(val_probs, val_batch))
        if it % 100 == 0 or it == cfg.epochs - 1:
            log.debug("iteration %d: loss %.4f, accuracy %.4f", it, loss, history.train_accuracy[-1])
        p, state = adam_step(p, grads, state, cfg)

    if not p.is_finite():
        raise NumericError("parameters diverged to non-finite values")
    log.info("training done: loss %.4f, accuracy %.4f", history.loss[-1], history.train_accuracy[-1])
    return p, history


# --- Inference ---
def classify_sequence(seq, p: LstmParams):
    """Per-timestep argmax; equal maxima go to the lowest class (A first)."""
    probs = softmax(forward_sequence(seq, p))
    return [CLASSES[k] for k in np.argmax(probs, axis=-1)]


def accuracy(pred, truth):
    if len(pred) != len(truth):
        raise DataValidationError(f"{len(pred)} predictions for {len(truth)} labels")
    if not truth:
        raise DataValidationError("accuracy of an empty sequence is undefined")
    return sum(a == b for a, b in zip(pred, truth)) / len(truth)


@dataclass(frozen=True)
class Evaluation:
    pooled: float
    per_cycle: tuple
    predictions: tuple
    confusion: np.ndarray = field(compare=False)


def evaluate(cycles, p: LstmParams):
    """Pooled per-timestep accuracy over all cycles, plus per-cycle scores
    and a confusion matrix (rows = truth, columns = prediction)."""
    predictions, per_cycle = [], []
    confusion = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    pooled_pred, pooled_truth = [], []
    for cycle in cycles:
        pred = classify_sequence(cycle.sensor_matrix(), p)
        truth = cycle.labels
        predictions.append(tuple(pred))
        per_cycle.append(accuracy(pred, truth))
        for a, b in zip(truth, pred):
            confusion[a.index, b.index] += 1
        pooled_pred.extend(pred)
        pooled_truth.extend(truth)
    return Evaluation(accuracy(pooled_pred, pooled_truth), tuple(per_cycle),
                      tuple(predictions), confusion)


# --- Persistence ---
def model_to_json(p: LstmParams, cfg: TrainConfig, history: Optional[TrainHistory] = None):
    document = {
        "format": MODEL_FORMAT,
        "schema_version": MODEL_SCHEMA_VERSION,
        "config": asdict(cfg),
        "gate_order": list(GATES),
        "params": {name: {"shape": list(arr.shape), "data": arr.ravel().tolist()}
                   for name, arr in p.items()},
        "history": asdict(history) if history is not None else None,
    }
    return json.dumps(document, indent=1) + "\n"


def model_from_json(text):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise DataValidationError(f"model file: line {e.lineno}, column {e.colno}: {e.msg}")
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise DataValidationError("not a model file")
    if doc.get("schema_version", 0) > MODEL_SCHEMA_VERSION:
        raise DataValidationError(f"model schema_version {doc['schema_version']} is not supported")
    known = {f.name for f in fields(TrainConfig)}
    try:
        cfg = TrainConfig(**{k: v for k, v in doc["config"].items() if k in known})
        arrays = []
        for name in LstmParams.NAMES:
            entry = doc["params"][name]
            arrays.append(np.array(entry["data"], dtype=np.float64).reshape(entry["shape"]))
        history = TrainHistory(**doc["history"]) if doc.get("history") else None
    except (AttributeError, KeyError, TypeError, ValueError) as e:
        raise DataValidationError(f"model file is incomplete: {e}")
    params = LstmParams(*arrays)
    return params, cfg, history


def save_model(path, p: LstmParams, cfg: TrainConfig, history: Optional[TrainHistory] = None):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(model_to_json(p, cfg, history))
    log.info("model written to %s (%d parameters)", path, p.size())


def load_model(path):
    with open(path, "rb") as f:
        raw = f.read()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as e:
        raise DataValidationError(f"model file {path}: byte 0x{raw[e.start]:02x} is not valid UTF-8")
    return model_from_json(text)
