"""Loss, optimizers and the train / evaluate loops."""

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Tuple

import numpy as np

from .errors import InputError, NumericError
from .lif import SurrogateSpec
from .metrics import confusion, per_class_stats

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    time_steps: int = 4
    learning_rate: float = 1e-3
    batch_size: int = 64
    epochs: int = 10
    seed: int = 0
    optimizer: str = "adam"
    betas: Tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    weight_decay: float = 0.0
    # multiplicative learning-rate factor applied after every epoch
    lr_decay: float = 1.0
    surrogate: SurrogateSpec = field(default_factory=SurrogateSpec)
    deterministic: bool = True
    checked: bool = False

    def __post_init__(self):
        if self.time_steps < 1:
            raise InputError("time_steps must be >= 1")
        if self.batch_size < 1:
            raise InputError("batch_size must be >= 1")
        if not self.learning_rate > 0:
            raise InputError("learning_rate must be positive")
        if self.optimizer not in ("sgd", "adam"):
            raise InputError(f"optimizer must be 'sgd' or 'adam', got {self.optimizer!r}")


@dataclass
class LossReport:
    epoch: int
    loss: float
    n_samples: int
    n_classes: int
    per_class_correct: np.ndarray
    train_accuracy: float
    wall_seconds: float

    def log_line(self):
        return (
            f"epoch={self.epoch} mean_loss={self.loss:.8f} "
            f"train_accuracy={self.train_accuracy:.6f} wall_seconds={self.wall_seconds:.3f}"
        )


def softmax(scores):
    z = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy(scores, labels):
    """Mean softmax cross-entropy and its gradient w.r.t. ``scores``."""
    labels = np.asarray(labels)
    b, c = scores.shape
    if labels.shape != (b,) or (b and (labels.min() < 0 or labels.max() >= c)):
        raise InputError(f"labels must be {b} integers in [0, {c})")
    scores = scores.astype(np.float64)
    z = scores - scores.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    rows = np.arange(b)
    loss = float(-logp[rows, labels].mean())
    grad = np.exp(logp)
    grad[rows, labels] -= 1.0
    return max(loss, 0.0), grad / b


def predict(scores):
    """Argmax with ties resolved to the lowest class index."""
    return np.argmax(scores, axis=1)


# --------------------------------------------------------------------------
# optimizer


@dataclass
class OptimizerState:
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    lr: Optional[float] = None


def optimizer_step(network, grads, config, state=None):
    """Apply one SGD or Adam update in place, then clamp LIF decays to [0, 1]."""
    state = state or OptimizerState()
    lr = config.learning_rate if state.lr is None else state.lr
    state.step += 1
    b1, b2 = config.betas
    for name, p in network.named_parameters():
        g = grads[name]
        if g.shape != p.shape:
            raise InputError(f"gradient for {name} has shape {g.shape}, parameter {p.shape}")
        if config.checked and not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for {name}")
        if config.weight_decay:
            g = g + config.weight_decay * p
        if config.optimizer == "sgd":
            p -= (lr * g).astype(p.dtype)
            continue
        m = state.m.setdefault(name, np.zeros_like(p))
        v = state.v.setdefault(name, np.zeros_like(p))
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * np.square(g)
        mhat = m / (1 - b1**state.step)
        vhat = v / (1 - b2**state.step)
        p -= (lr * mhat / (np.sqrt(vhat) + config.eps)).astype(p.dtype)
    for layer in network.spiking_layers:
        layer.lif.clamp_()
    return state


# --------------------------------------------------------------------------
# loops


def _arrays(dataset):
    if isinstance(dataset, tuple):
        x, y = dataset
        return np.asarray(x), np.asarray(y, dtype=np.int64)
    return dataset.to_arrays()


def epoch_order(n, seed, epoch):
    """Sample order of one epoch; depends only on ``(seed, epoch)`` so runs can resume."""
    return np.random.default_rng([seed, epoch]).permutation(n)


def train(
    dataset,
    network,
    config,
    checkpoint_dir=None,
    start_epoch=0,
    state=None,
    on_epoch: Optional[Callable] = None,
):
    """Train ``network`` in place for epochs ``start_epoch + 1 .. config.epochs``.

    Writes ``model_epochN.w2s`` into ``checkpoint_dir`` after every epoch when
    given. Returns ``(network, history)``.
    """
    from .checkpoint import save_checkpoint

    x, y = _arrays(dataset)
    if len(y) == 0:
        raise InputError("cannot train on an empty dataset")
    if network.time_steps != config.time_steps:
        raise InputError(f"network unrolls {network.time_steps} steps, config asks for {config.time_steps}")
    n_classes = network.n_classes
    state = state or OptimizerState()
    if state.lr is None:
        state.lr = config.learning_rate
    history: List[LossReport] = []

    for epoch in range(start_epoch + 1, config.epochs + 1):
        t0 = time.perf_counter()
        order = epoch_order(len(y), config.seed, epoch)
        total_loss = 0.0
        correct = np.zeros(n_classes, dtype=np.int64)
        for start in range(0, len(y), config.batch_size):
            idx = order[start : start + config.batch_size]
            scores, cache = network.forward(x[idx], config.surrogate)
            loss, g = cross_entropy(scores, y[idx])
            grads = network.backward(cache, g)
            optimizer_step(network, grads, config, state)
            total_loss += loss * len(idx)
            hit = predict(scores) == y[idx]
            np.add.at(correct, y[idx][hit], 1)
        report = LossReport(
            epoch=epoch,
            loss=total_loss / len(y),
            n_samples=len(y),
            n_classes=n_classes,
            per_class_correct=correct,
            train_accuracy=float(correct.sum()) / len(y),
            wall_seconds=time.perf_counter() - t0,
        )
        history.append(report)
        state.lr *= config.lr_decay
        log.info(report.log_line())
        if checkpoint_dir is not None:
            save_checkpoint(Path(checkpoint_dir) / f"model_epoch{epoch}.w2s", network, state, epoch)
        if on_epoch is not None and on_epoch(report) is False:
            break
    return network, history


def infer(network, x, batch_size=256, spec=None):
    """Class scores for every row of ``x``."""
    out = []
    for start in range(0, len(x), batch_size):
        scores, _ = network.forward(x[start : start + batch_size], spec)
        out.append(scores)
    return np.concatenate(out) if out else np.zeros((0, network.n_classes), dtype=network.dtype)


def evaluate(dataset, network, config=None, batch_size=256):
    """Predict every sample and summarise with per-class metrics."""
    x, y = _arrays(dataset)
    if len(y) == 0:
        raise InputError("evaluation set is empty")
    spec = config.surrogate if config is not None else None
    preds = predict(infer(network, x, batch_size, spec))
    return per_class_stats(confusion(y, preds, network.n_classes))
