"""Mini-batch SGD with classical momentum on the multitask loss."""
import csv
import time
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .errors import DivergenceError, ParameterError
from .network import batch_loss_graph, forward, multitask_loss
from .parallel import parallel_map


@dataclass
class TrainConfig:
    learning_rate: float = 1e-4
    momentum: float = 0.9
    batch_size: int = 16
    epochs: int = 15
    alpha: float = 0.4
    seed: int = 0
    clip_norm: float = None   # global gradient-norm cap; None = plain momentum SGD

    def __post_init__(self):
        if not self.learning_rate >= 0:
            raise ParameterError("learning_rate must be >= 0")
        if not 0.0 <= self.momentum < 1.0:
            raise ParameterError("momentum must lie in [0, 1)")
        if self.batch_size < 1:
            raise ParameterError("batch_size must be >= 1")
        if not 0.0 <= self.alpha <= 1.0:
            raise ParameterError("alpha must lie in [0, 1]")
        if self.clip_norm is not None and not self.clip_norm > 0:
            raise ParameterError("clip_norm must be > 0 when set")


CSV_FIELDS = [
    "epoch",
    "loss_train", "loss_teacher_train", "loss_student_train",
    "acc_teacher_train", "acc_student_train",
    "loss_teacher_val", "loss_student_val",
    "acc_teacher_val", "acc_student_val",
]


@dataclass
class TrainReport:
    epochs: list = field(default_factory=list)   # one dict per epoch, keys CSV_FIELDS
    wall_time: float = 0.0

    def last(self):
        return self.epochs[-1]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=CSV_FIELDS, lineterminator="\n")
            w.writeheader()
            for row in self.epochs:
                w.writerow({k: (v if k == "epoch" else repr(float(v))) for k, v in row.items()})


@dataclass
class Evaluation:
    teacher_accuracy: float
    student_accuracy: float
    teacher_loss: float
    student_loss: float

    def __iter__(self):
        return iter((self.teacher_accuracy, self.student_accuracy, self.teacher_loss, self.student_loss))


def _predict(model, sample):
    out = forward(model, sample.image)
    return out.YT, out.YS


def evaluate(model, samples):
    """Accuracy and mean cross-entropy of both heads over ``samples``.

    Ties in the argmax go to the lowest class index.
    """
    if not samples:
        return Evaluation(float("nan"), float("nan"), float("nan"), float("nan"))
    preds = parallel_map(lambda s: _predict(model, s), samples)
    acc_t = acc_s = loss_t = loss_s = 0.0
    for s, (yt, ys) in zip(samples, preds):
        _, lt, ls = multitask_loss(yt, ys, s.label, model.config.alpha)
        acc_t += int(np.argmax(yt) == s.label)
        acc_s += int(np.argmax(ys) == s.label)
        loss_t += lt
        loss_s += ls
    n = len(samples)
    return Evaluation(acc_t / n, acc_s / n, float(loss_t / n), float(loss_s / n))


def clip_gradients(grads, max_norm):
    """Rescale all gradients together so their joint L2 norm is at most ``max_norm``."""
    total = np.sqrt(sum(float(np.vdot(g, g)) for g in grads.values()))
    if total <= max_norm:
        return grads, total
    f = max_norm / total
    return {k: g * f for k, g in grads.items()}, total


def sgd_step(model, grads, lr, momentum):
    """buf <- momentum * buf + grad ; param <- param - lr * buf."""
    for name, g in grads.items():
        p = model.params[name]
        p.momentum *= momentum
        p.momentum += g
        p.value -= lr * p.momentum


def train_step(model, images, labels, cfg):
    """One gradient step on a batch; returns (loss, lossT, lossS, graph, per-sample nodes)."""
    g, loss, lt, ls, per = batch_loss_graph(model, images, labels, alpha=cfg.alpha)
    g.backward(loss)
    grads = g.param_grads()
    if cfg.clip_norm is not None:
        grads, _ = clip_gradients(grads, cfg.clip_norm)
    sgd_step(model, grads, cfg.learning_rate, cfg.momentum)
    return float(loss.value), float(lt.value), float(ls.value), g, per


def train(model, split, cfg, validation=None, log=None, on_epoch=None):
    """Train ``model`` in place on ``split`` (a DatasetSplit or list of samples).

    Validation metrics are computed after every epoch.  ``log`` receives one
    formatted line per epoch when given.  ``on_epoch(row)`` is called with
    each epoch's metrics; returning True ends training after that epoch.
    """
    train_set = split.train if hasattr(split, "train") else list(split)
    val_set = validation if validation is not None else getattr(split, "validation", [])
    if not train_set:
        raise ParameterError("training set is empty")
    C = model.config.num_classes
    if any(not 0 <= s.label < C for s in train_set):
        raise ParameterError(f"labels must lie in [0, {C})")
    rng = np.random.default_rng(cfg.seed)
    report = TrainReport()
    t0 = time.perf_counter()
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(train_set))
        tot = tot_t = tot_s = 0.0
        hit_t = hit_s = 0
        for bi, start in enumerate(range(0, len(order), cfg.batch_size)):
            batch = [train_set[i] for i in order[start:start + cfg.batch_size]]
            loss, lt, ls, _, per = train_step(
                model, [s.image for s in batch], [s.label for s in batch], cfg)
            if not np.isfinite(loss):
                raise DivergenceError(f"non-finite loss at epoch {epoch}, batch {bi}",
                                      epoch=epoch, batch=bi)
            n = len(batch)
            tot += loss * n
            tot_t += lt * n
            tot_s += ls * n
            for s, nodes in zip(batch, per):
                hit_t += int(np.argmax(nodes["teacher"]["logits"].value) == s.label)
                hit_s += int(np.argmax(nodes["student"]["logits"].value) == s.label)
        N = len(train_set)
        row = {
            "epoch": epoch,
            "loss_train": tot / N, "loss_teacher_train": tot_t / N, "loss_student_train": tot_s / N,
            "acc_teacher_train": hit_t / N, "acc_student_train": hit_s / N,
        }
        ev = evaluate(model, val_set)
        row.update(loss_teacher_val=ev.teacher_loss, loss_student_val=ev.student_loss,
                   acc_teacher_val=ev.teacher_accuracy, acc_student_val=ev.student_accuracy)
        report.epochs.append(row)
        if log is not None:
            log(f"epoch {epoch:3d}  loss {row['loss_train']:.4f}  "
                f"train T/S {row['acc_teacher_train']:.3f}/{row['acc_student_train']:.3f}  "
                f"val T/S {ev.teacher_accuracy:.3f}/{ev.student_accuracy:.3f}")
        if on_epoch is not None and on_epoch(row):
            break
    report.wall_time = time.perf_counter() - t0
    return report
