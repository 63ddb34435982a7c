"""Invariant suite run by ``eunn verify``: fixed seeds, one pass/fail row per check."""

import time
from dataclasses import dataclass

import numpy as np

from . import cell as cells
from . import unitary
from .complex_core import haar_unitary, make_rng
from .gradcheck import check_gradients
from .tasks import CopyTaskConfig, copy_symbols


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    limit: float
    seconds: float = 0.0


def _norm_ratio_error(w, rng, trials=100, fault=False):
    cw = unitary.compile_composition(w)
    if fault:
        # debug hook: a corrupted angle leaves cos/sin inconsistent in one kernel
        k = cw.kernels[0]
        v1 = k.v1.copy()
        v1[0] *= 1.001
        cw = unitary.Compiled(cw.source, (type(k)(v1, k.v2, k.perm),) + cw.kernels[1:], cw.phases)
    x = rng.standard_normal((trials, w.n)) + 1j * rng.standard_normal((trials, w.n))
    y, _ = unitary.forward(cw, x)
    return float(np.max(np.abs(np.linalg.norm(y, axis=1) / np.linalg.norm(x, axis=1) - 1)))


def check_unitarity(fault=False):
    rng = make_rng(1)
    worst = 0.0
    for w in (unitary.tunable(64, 2), unitary.tunable(64, 8), unitary.tunable(64, 64), unitary.fft(64)):
        worst = max(worst, _norm_ratio_error(unitary.randomize(w, rng), rng, fault=fault))
    return worst, 1e-10


def check_gradient():
    rng = make_rng(2)
    cell = cells.init_eurnn(4, 8, 5, rng, capacity=4)
    cell.b[:] = rng.uniform(-0.3, 0.3, 8)
    batch = cells.SequenceBatch(rng.standard_normal((5, 2, 4)), rng.integers(0, 5, (5, 2)))
    return check_gradients(cell, batch).worst_rel, 1e-5


def check_roundtrip():
    rng = make_rng(3)
    worst = 0.0
    for n in (4, 8, 16):
        m = haar_unitary(n, rng)
        worst = max(worst, float(np.max(np.abs(unitary.reconstruct(unitary.decompose_unitary(m)) - m))))
    return worst, 1e-8


def check_counts():
    bad = 0
    for n in (2, 4, 8, 16, 64):
        bad += unitary.tunable(n, n).n_rotations != n * (n - 1) // 2
        bad += unitary.fft(n).n_rotations != n * int(np.log2(n)) // 2
    return float(bad), 0.5


def check_backends():
    if cells.BACKEND != "fused":
        return 0.0, 1e-10
    rng = make_rng(4)
    worst = 0.0
    for style, cap in (("tunable", 4), ("fft", 0)):
        cell = cells.init_eurnn(3, 16, 4, rng, style=style, capacity=cap or 2)
        cell.b[:] = -0.2
        batch = cells.SequenceBatch(rng.standard_normal((7, 3, 3)), rng.integers(0, 4, (7, 3)))
        la, ga = cell.forward_backward(batch, backend="fused")
        lb, gb = cell.forward_backward(batch, backend="numpy")
        worst = max(worst, abs(la - lb))
        for k in ga.params:
            scale = max(1.0, float(np.max(np.abs(gb.params[k]))))
            worst = max(worst, float(np.max(np.abs(ga.params[k] - gb.params[k]))) / scale)
    return worst, 1e-10


def check_projective():
    rng = make_rng(5)
    w = haar_unitary(16, rng)
    for _ in range(200):
        g = rng.standard_normal((16, 16)) + 1j * rng.standard_normal((16, 16))
        w = unitary.projective_update(w, g, 1e-2)
    return unitary.unitarity_error(w), 1e-6


def check_copy_layout():
    cfg = CopyTaskConfig(n_symbols=3, m_len=5, t_delay=20, batch=1)
    inp, tgt = copy_symbols(cfg, np.array([[1, 0, 2, 2, 1]]))
    ok = (inp.shape[0] == 30 and inp[24, 0] == cfg.recall
          and np.array_equal(tgt[25:, 0], inp[:5, 0]) and np.all(tgt[:25] == cfg.blank))
    return float(not ok), 0.5


def check_gradient_ratio():
    rng = make_rng(6)
    cell = cells.init_eurnn(1, 32, 2, rng, capacity=4)
    h0 = rng.standard_normal(32) + 1j * rng.standard_normal(32)
    ratio = cells.hidden_gradient_ratio(cell, 100, h0)
    # log-distance outside [1e-2, 1e2]
    return max(0.0, abs(np.log10(ratio)) - 2.0), 1e-12


CHECKS = {
    "unitarity": check_unitarity,
    "gradient": check_gradient,
    "roundtrip": check_roundtrip,
    "param_counts": check_counts,
    "fused_vs_numpy": check_backends,
    "projective_drift": check_projective,
    "copy_layout": check_copy_layout,
    "eurnn_gradient_ratio": check_gradient_ratio,
}


def run_all(fault=False):
    results = []
    for name, fn in CHECKS.items():
        t0 = time.perf_counter()
        value, limit = fn(fault=fault) if name == "unitarity" else fn()
        results.append(CheckResult(name, bool(value < limit), value, limit, time.perf_counter() - t0))
    return results


def format_table(results):
    rows = [f"{'check':<22} {'result':<6} {'value':>12} {'limit':>10} {'sec':>7}"]
    for r in results:
        rows.append(f"{r.name:<22} {'PASS' if r.passed else 'FAIL':<6} {r.value:>12.3e} {r.limit:>10.1e} {r.seconds:>7.2f}")
    return "\n".join(rows)
