"""RMSProp and the training loop."""

import csv
import io
import logging
import time
from dataclasses import dataclass, field, fields

import numpy as np

from .cell import sequence_forward_backward
from .errors import ConfigError, DimensionError, TrainingDiverged

log = logging.getLogger(__name__)

METRICS_HEADER = ("iter", "loss", "val_metric", "wall_ms")


def _real_view(a):
    return a.view(np.float64) if np.iscomplexobj(a) else a


@dataclass
class RmsPropState:
    """Mean-square and momentum buffers, one pair per named parameter.

    Complex parameters are handled through their float64 view, so real and
    imaginary parts get independent accumulators.
    """

    lr: float = 1e-3
    decay: float = 0.5
    momentum: float = 0.0
    epsilon: float = 1e-8
    ms: dict = field(default_factory=dict)
    mom: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.lr < 0 or not 0 <= self.decay < 1 or not 0 <= self.momentum < 1 or self.epsilon <= 0:
            raise ConfigError(
                f"rmsprop needs lr >= 0, decay and momentum in [0, 1), epsilon > 0; got "
                f"lr={self.lr} decay={self.decay} momentum={self.momentum} epsilon={self.epsilon}")


def rmsprop_step(state, params, grads):
    """Update every array in ``params`` in place.

    ms <- decay*ms + (1-decay)*g^2;  mom <- momentum*mom + lr*g/sqrt(ms+eps);  p <- p - mom
    """
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise TrainingDiverged(f"non-finite gradient for {name}")
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise DimensionError(f"{name}: gradient {g.shape} vs parameter {p.shape}")
        pv, gv = _real_view(p), _real_view(np.ascontiguousarray(g, dtype=p.dtype))
        ms = state.ms.get(name)
        if ms is None:
            ms = state.ms[name] = np.zeros_like(pv)
            state.mom[name] = np.zeros_like(pv)
        mom = state.mom[name]
        ms *= state.decay
        ms += (1.0 - state.decay) * gv * gv
        mom *= state.momentum
        mom += state.lr * gv / np.sqrt(ms + state.epsilon)
        pv -= mom
    return params, state


@dataclass(frozen=True)
class TrainConfig:
    """Everything needed to reproduce a run. Unused task fields are ignored."""

    task: str = "copy"
    model: str = "eurnn-tunable"
    n_hidden: int = 128
    capacity: int = 2
    spectral_radius: float = 1.0
    # copying task
    n_symbols: int = 8
    m_len: int = 10
    t_delay: int = 100
    # permuted MNIST
    data_dir: str = ""
    perm_seed: int = 0
    train_subset: int = 10000
    val_holdout: int = 5000
    val_size: int = 2000
    downsample: int = 1
    # loop and optimizer
    batch: int = 128
    iters: int = 2000
    eval_every: int = 100
    seed: int = 0
    lr: float = 1e-3
    decay: float = 0.5
    momentum: float = 0.0
    epsilon: float = 1e-8
    clip: float = 1.0
    record_time: bool = False

    def __post_init__(self):
        positive = ("n_hidden", "capacity", "n_symbols", "m_len", "t_delay", "train_subset",
                    "val_holdout", "val_size", "downsample", "batch", "eval_every")
        bad = [n for n in positive if getattr(self, n) < 1]
        if bad or self.iters < 0 or self.seed < 0 or self.clip < 0:
            raise ConfigError(f"config values out of range: {', '.join(bad) or 'iters/seed/clip'}")
        if self.task not in ("copy", "mnist"):
            raise ConfigError(f"unknown task {self.task!r}")
        if self.model not in ("eurnn-tunable", "eurnn-fft", "vanilla"):
            raise ConfigError(f"unknown model {self.model!r}")
        RmsPropState(self.lr, self.decay, self.momentum, self.epsilon)

    @classmethod
    def field_types(cls):
        return {f.name: f.type for f in fields(cls)}


@dataclass
class MetricRecord:
    iter: int
    loss: float
    val_metric: float = None
    wall_ms: float = None


@dataclass
class TrainRun:
    records: list = field(default_factory=list)
    diverged: bool = False
    diagnostic: str = ""

    @property
    def losses(self):
        return np.array([r.loss for r in self.records if r.iter >= 0])

    def to_csv(self):
        return metrics_csv(self.records)


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def metrics_csv(records):
    """CSV text with header ``iter,loss,val_metric,wall_ms``; floats round-trip exactly."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(METRICS_HEADER)
    for r in records:
        w.writerow([_fmt(r.iter), _fmt(r.loss), _fmt(r.val_metric), _fmt(r.wall_ms)])
    return buf.getvalue()


def _clip(grads, max_norm):
    total = np.sqrt(sum(float(np.sum(np.abs(g) ** 2)) for g in grads.values()))
    if max_norm > 0 and total > max_norm:
        for g in grads.values():
            g *= max_norm / total
    return total


def train(config, cell, task, rng, on_record=None):
    """Sample a batch, run BPTT, take an RMSProp step; repeat ``config.iters`` times.

    Every iteration appends its training loss; every ``eval_every``
    iterations (and after the last one) the record also carries
    ``task.evaluate(cell)``. Gradient-norm clipping applies to the dense
    baseline only. On divergence the run stops and a final record with
    ``iter = -1`` and loss NaN marks it. ``on_record`` sees every record
    as it is made; a truthy return value stops the run early.
    """
    state = RmsPropState(config.lr, config.decay, config.momentum, config.epsilon)
    run = TrainRun()
    params = cell.params()
    clip = config.clip if getattr(cell, "kind", "") == "vanilla" else 0.0
    t0 = time.perf_counter()

    def emit(rec):
        run.records.append(rec)
        return on_record is not None and on_record(rec)

    for it in range(config.iters):
        try:
            batch = task.sample(rng)
            loss, grads = sequence_forward_backward(cell, batch, task.loss)
            if clip:
                _clip(grads.params, clip)
            rmsprop_step(state, params, grads.params)
        except TrainingDiverged as exc:
            run.diverged = True
            run.diagnostic = f"iteration {it}: {exc}"
            log.error("training diverged at %s", run.diagnostic)
            emit(MetricRecord(-1, float("nan")))
            break
        rec = MetricRecord(it, loss)
        if (it + 1) % config.eval_every == 0 or it + 1 == config.iters:
            rec.val_metric = task.evaluate(cell)
        if config.record_time:
            rec.wall_ms = round((time.perf_counter() - t0) * 1e3, 3)
        if emit(rec):
            break
    return run
