"""Loss assembly, optimizers, the training loop, and evaluation.

Batch loss is the mean over examples; the attention penalty is averaged per
example and added with its coefficient, L2 covers attention and head weight
matrices only. Training keeps the parameters of the best dev epoch and stops
early after ``patience`` epochs without improvement.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import attention, data
from . import tensor as T
from .config import RunConfig


class TrainingDiverged(RuntimeError):
    pass


def total_loss(logits, label, attn, coeff, l2_coeff, l2_params):
    """Cross-entropy plus coeff * penalty(A) plus l2 * sum of squared weights.

    ``attn`` is one annotation matrix or a tuple of them (pair models); with
    a zero coefficient the penalty path is not built at all.
    """
    loss = T.cross_entropy(logits, label)
    if coeff:
        mats = attn if isinstance(attn, tuple) else (attn,)
        for a in mats:
            loss = T.add(loss, T.scale(attention.penalty(a), coeff / len(mats)))
    if l2_coeff:
        for w in l2_params:
            loss = T.add(loss, T.scale(T.frobenius_sq(w), l2_coeff))
    return loss


def clip_grads(grads, clip):
    """Clamp every gradient component to [-clip, +clip]."""
    return {name: np.clip(g, -clip, clip) for name, g in grads.items()}


def sgd_step(params, grads, lr, clip=None):
    """In-place SGD update with optional elementwise gradient clamping."""
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            continue
        if clip is not None:
            g = np.clip(g, -clip, clip)
        p.data -= lr * g


def adagrad_step(params, grads, state, lr, eps=1e-8):
    """AdaGrad: accumulate squared gradients, scale steps by 1/sqrt(acc)."""
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            continue
        acc = state.get(name)
        if acc is None:
            acc = state[name] = np.zeros_like(p.data)
        acc += g * g
        p.data -= lr * g / (np.sqrt(acc) + eps)


def _forward(model, b, i, train, rng):
    if isinstance(b, data.PairBatch):
        return model.forward(b.hyp_tokens[i], b.hyp_mask[i], b.prem_tokens[i], b.prem_mask[i],
                             train=train, rng=rng)
    return model.forward(b.tokens[i], b.mask[i], train=train, rng=rng)


def _example_forward(model, ex, train=False, rng=None):
    if isinstance(ex, data.PairExample):
        return model.forward(ex.hypothesis, None, ex.premise, None, train=train, rng=rng)
    return model.forward(ex.tokens, None, train=train, rng=rng)


def evaluate(model, examples):
    """Fraction of argmax-correct predictions; dropout off, parameters untouched."""
    if not examples:
        raise ValueError("cannot evaluate on an empty dataset")
    correct = 0
    with T.no_grad():
        for ex in examples:
            logits, _ = _example_forward(model, ex)
            correct += int(np.argmax(logits.data)) == ex.label
    return correct / len(examples)


def _dev_stats(model, examples):
    """Accuracy plus the mean pairwise attention overlap over the dataset."""
    correct = 0
    overlaps = []
    with T.no_grad():
        for ex in examples:
            logits, attn = _example_forward(model, ex)
            correct += int(np.argmax(logits.data)) == ex.label
            mats = attn if isinstance(attn, tuple) else (attn,)
            overlaps.extend(attention.mean_pairwise_overlap(a) for a in mats)
    return correct / len(examples), float(np.mean(overlaps))


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    dev_acc: float
    mean_penalty: float
    mean_overlap: float


@dataclass
class TrainResult:
    history: list
    best_epoch: int
    best_dev_acc: float
    best_params: dict  # name -> array snapshot at the best dev epoch


def train(model, train_set, dev_set, cfg: RunConfig, log=None):
    """Seeded epoch loop; returns history and the best-dev parameter snapshot."""
    if not train_set or not dev_set:
        raise ValueError("training and dev sets must be nonempty")
    rng = np.random.default_rng(cfg.seed)
    params = model.named_parameters()
    l2_params = model.l2_parameters()
    adagrad_state = {}
    history = []
    best = TrainResult(history, best_epoch=0, best_dev_acc=-1.0, best_params={})
    stale = 0

    for epoch in range(1, cfg.max_epochs + 1):
        loss_sum = 0.0
        penalty_sum = 0.0
        n_seen = 0
        for bi, b in enumerate(data.batch(train_set, cfg.batch_size, rng)):
            total = None
            for i in range(len(b)):
                logits, attn = _forward(model, b, i, train=True, rng=rng)
                loss = total_loss(logits, b.labels[i], attn, cfg.penalty_coeff, cfg.l2, l2_params)
                total = loss if total is None else T.add(total, loss)
                mats = attn if isinstance(attn, tuple) else (attn,)
                penalty_sum += float(np.mean([attention.penalty_value(a) for a in mats]))
            batch_loss = T.scale(total, 1.0 / len(b))
            if not np.isfinite(batch_loss.item()):
                raise TrainingDiverged(f"non-finite loss at epoch {epoch}, batch {bi}")
            batch_loss.backward()
            grads = {name: p.grad for name, p in params.items() if p.grad is not None}
            if cfg.optimizer == "sgd":
                sgd_step(params, grads, cfg.learning_rate, cfg.clip)
            else:
                if cfg.clip is not None:
                    grads = clip_grads(grads, cfg.clip)
                adagrad_step(params, grads, adagrad_state, cfg.learning_rate)
            for p in params.values():
                p.grad = None
            loss_sum += batch_loss.item() * len(b)
            n_seen += len(b)

        dev_acc, dev_overlap = _dev_stats(model, dev_set)
        record = EpochRecord(epoch, loss_sum / n_seen, dev_acc, penalty_sum / n_seen, dev_overlap)
        history.append(record)
        if log:
            log(record)
        if dev_acc > best.best_dev_acc:
            best.best_dev_acc = dev_acc
            best.best_epoch = epoch
            best.best_params = {name: p.data.copy() for name, p in params.items()}
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break
    return best


def restore_params(model, snapshot):
    """Load a parameter snapshot (name -> array) back into a model, in place."""
    params = model.named_parameters()
    for name, arr in snapshot.items():
        p = params[name]
        if p.data.shape != arr.shape:
            raise T.ShapeError(f"snapshot shape {arr.shape} does not match {p.data.shape} for {name}")
        p.data = arr.astype(p.data.dtype, copy=True)
