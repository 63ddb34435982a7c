"""Wall-time scaling of one apply + backward pass, against a dense matmul reference."""

import csv
import io
import time
from dataclasses import dataclass, field

import numpy as np

from . import unitary
from .complex_core import haar_unitary, make_rng
from .errors import ConfigError

TIMING_HEADER = ("style", "n", "capacity", "batch", "samples", "median_ms", "iqr_ms",
                 "dense_median_ms", "dense_iqr_ms")


@dataclass
class TimingRow:
    style: str
    n: int
    capacity: int
    batch: int
    samples: list = field(repr=False)
    dense_samples: list = field(repr=False)

    @property
    def median_ms(self):
        return float(np.median(self.samples))

    @property
    def dense_median_ms(self):
        return float(np.median(self.dense_samples))


@dataclass
class TimingReport:
    rows: list

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TIMING_HEADER)
        for r in self.rows:
            q = np.percentile(r.samples, [25, 75])
            dq = np.percentile(r.dense_samples, [25, 75])
            w.writerow([r.style, r.n, r.capacity, r.batch, len(r.samples),
                        f"{r.median_ms:.4f}", f"{q[1] - q[0]:.4f}",
                        f"{r.dense_median_ms:.4f}", f"{dq[1] - dq[0]:.4f}"])
        return buf.getvalue()

    def ratios(self, style, capacity=None, dense=False):
        """Median time ratios between consecutive dimensions for one (style, capacity)."""
        rows = sorted((r for r in self.rows if r.style == style and (capacity is None or r.capacity == capacity)),
                      key=lambda r: r.n)
        key = (lambda r: r.dense_median_ms) if dense else (lambda r: r.median_ms)
        return [(a.n, b.n, key(b) / key(a)) for a, b in zip(rows, rows[1:])]


def _time(fn, repeats, warmup=2):
    for _ in range(warmup):
        fn()
    out = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        out.append((time.perf_counter() - t0) * 1e3)
    return out


def _structured_pass(w, x, dy):
    cw = unitary.compile_composition(w)

    def run():
        _, acts = unitary.forward(cw, x)
        _, cots = unitary.backward_input(cw, dy)
        unitary.param_grad(cw, acts, cots)
    return run


def _dense_pass(m, x, dy):
    mh = m.conj().T

    def run():
        x @ m.T
        dy @ mh.T.conj()
        dy.T @ x.conj()
    return run


def run_bench(dims, capacities=(2,), style="tunable", batch=128, repeats=15, min_samples=5, seed=0):
    """Time apply + backward for every (n, L). ``capacities`` is ignored for fft."""
    if repeats < min_samples:
        raise ConfigError(f"repeats {repeats} below the minimum sample count {min_samples}")
    rng = make_rng(seed)
    rows = []
    caps = (0,) if style == "fft" else tuple(capacities)
    for n in dims:
        x = rng.standard_normal((batch, n)) + 1j * rng.standard_normal((batch, n))
        dy = rng.standard_normal((batch, n)) + 1j * rng.standard_normal((batch, n))
        dense = _time(_dense_pass(haar_unitary(n, rng), x, dy), repeats)
        for cap in caps:
            w = unitary.fft(n) if style == "fft" else unitary.tunable(n, cap)
            w = unitary.randomize(w, rng)
            samples = _time(_structured_pass(w, x, dy), repeats)
            rows.append(TimingRow(style, n, w.capacity, batch, samples, dense))
    return TimingReport(rows)
