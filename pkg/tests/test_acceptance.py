"""Acceptance criteria, one test each. Every test prints a single PASS/FAIL line.

Run just this module with ``pytest tests/test_acceptance.py -v``. The
training criteria (copying task, permuted MNIST) take a few minutes on one
CPU core.
"""

import os
import time
from collections import deque

import numpy as np
import pytest

from eunn import cell as C
from eunn import unitary as U
from eunn.bench import run_bench
from eunn.cli import build_experiment, main
from eunn.complex_core import haar_unitary, make_rng
from eunn.gradcheck import check_gradients
from eunn.optim import TrainConfig, train
from eunn.tasks import memoryless_baseline

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
MNIST_DIR = os.environ.get("EUNN_DATA_DIR", os.path.join(ROOT, "data", "mnist5k"))


@pytest.fixture
def report(capsys):
    def emit(number, title, passed, detail):
        with capsys.disabled():
            print(f"\n[criterion {number:>2}] {'PASS' if passed else 'FAIL'} {title}: {detail}")
        assert passed, detail
    return emit


def test_01_unitarity(report):
    t0 = time.perf_counter()
    rng = make_rng(101)
    worst = 0.0
    for n in (64, 256, 1024):
        for w in [U.tunable(n, L) for L in (2, 8, n)] + [U.fft(n)]:
            w = U.randomize(w, rng)
            x = rng.standard_normal((100, n)) + 1j * rng.standard_normal((100, n))
            ratio = np.linalg.norm(U.apply(w, x), axis=1) / np.linalg.norm(x, axis=1)
            worst = max(worst, float(np.max(np.abs(ratio - 1))))
    secs = time.perf_counter() - t0
    report(1, "unitarity", worst <= 1e-10 and secs < 60,
           f"max | ||Wx||/||x|| - 1 | = {worst:.2e} (limit 1e-10), {secs:.1f}s")


def test_02_gradient_check(report):
    t0 = time.perf_counter()
    rng = make_rng(102)
    cell = C.init_eurnn(4, 8, 5, rng, "tunable", 4)
    cell.b[:] = rng.uniform(-0.3, 0.3, 8)
    batch = C.SequenceBatch(rng.standard_normal((5, 2, 4)), rng.integers(0, 5, (5, 2)))
    res = check_gradients(cell, batch)
    secs = time.perf_counter() - t0
    report(2, "gradient check", res.worst_rel < 1e-5 and res.checked > 0 and secs < 60,
           f"worst relative error {res.worst_rel:.2e} at {res.worst_name} (limit 1e-5); "
           f"{res.checked} entries checked, {res.skipped} kink-adjacent skipped, {secs:.1f}s")


def test_03_decomposition_roundtrip(report):
    t0 = time.perf_counter()
    rng = make_rng(103)
    worst = 0.0
    for k in range(20):
        m = haar_unitary((4, 8, 16)[k % 3], rng)
        worst = max(worst, float(np.max(np.abs(U.reconstruct(U.decompose_unitary(m)) - m))))
    secs = time.perf_counter() - t0
    report(3, "decomposition round-trip", worst < 1e-8 and secs < 30,
           f"max entry error {worst:.2e} over 20 Haar matrices (limit 1e-8), {secs:.2f}s")


def test_04_parameter_counts(report):
    bad = []
    for n in (2, 4, 8, 16, 32, 64, 128, 256, 1024):
        if U.tunable(n, n).n_rotations != n * (n - 1) // 2:
            bad.append(f"tunable n={n}")
        if U.fft(n).n_rotations != n * int(np.log2(n)) // 2:
            bad.append(f"fft n={n}")
    report(4, "parameter counts", not bad,
           "tunable = n(n-1)/2 and fft = n log2(n)/2 for n in 2..1024" if not bad else ", ".join(bad))


def test_05_copy_task(report):
    t0 = time.perf_counter()
    cfg = TrainConfig(task="copy", model="eurnn-tunable", n_hidden=128, capacity=2, n_symbols=8, m_len=10,
                      t_delay=100, batch=128, lr=1e-3, decay=0.5, iters=10_000, eval_every=10_000, seed=0)
    cell, task, rng = build_experiment(cfg)
    base = memoryless_baseline(task.cfg)
    window = deque(maxlen=10)
    hits = {}

    def watch(rec):
        window.append(rec.loss)
        mean = sum(window) / len(window)
        for frac in (0.5, 0.1):
            if frac not in hits and len(window) == window.maxlen and mean < frac * base:
                hits[frac] = rec.iter + 1
        return 0.1 in hits

    run = train(cfg, cell, task, rng, watch)
    ok = not run.diverged and hits.get(0.5, 10**9) <= 2000 and hits.get(0.1, 10**9) <= 10_000
    report(5, "copying task T=100", ok,
           f"baseline {base:.5f} nats; 10-iteration mean loss < 0.5x baseline at iteration {hits.get(0.5)} "
           f"(limit 2000), < 0.1x at {hits.get(0.1)} (limit 10000); {time.perf_counter() - t0:.0f}s")


def test_06_vanishing_gradient_contrast(report):
    eurnn_ratios, vanilla_ratios = [], []
    for seed in range(5):
        rng = make_rng(600 + seed)
        eurnn = C.init_eurnn(1, 128, 2, rng, "tunable", 2)
        eurnn_ratios.append(C.hidden_gradient_ratio(eurnn, 100, rng.standard_normal(128) + 1j * rng.standard_normal(128)))
        vanilla = C.init_vanilla(1, 128, 2, rng, spectral_radius=0.8)
        vanilla_ratios.append(C.hidden_gradient_ratio(vanilla, 100, rng.standard_normal(128)))
    ok = all(1e-2 <= r <= 1e2 for r in eurnn_ratios) and all(r < 1e-6 for r in vanilla_ratios)
    report(6, "vanishing-gradient contrast", ok,
           f"EURNN ratio in [{min(eurnn_ratios):.6f}, {max(eurnn_ratios):.6f}] (need [1e-2, 1e2]); "
           f"contractive vanilla max {max(vanilla_ratios):.2e} (need < 1e-6)")


@pytest.mark.skipif(not os.path.exists(os.path.join(MNIST_DIR, "train-images-idx3-ubyte.gz")),
                    reason="MNIST IDX files not present")
def test_07_permuted_mnist(report):
    # desk scale: 14x14 average-pooled images (196 steps), 4000 train / 1000 validation
    t0 = time.perf_counter()
    cfg = TrainConfig(task="mnist", model="eurnn-tunable", n_hidden=128, capacity=2, data_dir=MNIST_DIR,
                      train_subset=4000, val_holdout=1000, val_size=1000, downsample=2, batch=128,
                      lr=1e-3, decay=0.5, iters=1500, eval_every=50, seed=0)
    cell, task, rng = build_experiment(cfg)
    best = {"acc": 0.0, "iter": None}

    def watch(rec):
        if rec.val_metric is not None and rec.val_metric > best["acc"]:
            best.update(acc=rec.val_metric, iter=rec.iter + 1)
        return best["acc"] > 0.85

    run = train(cfg, cell, task, rng, watch)
    ci_gate, full_gate = best["acc"] > 0.5, best["acc"] > 0.85
    report(7, "permuted MNIST", not run.diverged and ci_gate and full_gate,
           f"best validation accuracy {best['acc']:.3f} at iteration {best['iter']} "
           f"(CI gate > 0.5: {'met' if ci_gate else 'missed'}, desk gate > 0.85: "
           f"{'met' if full_gate else 'missed'}); {len(task.train)} train images, "
           f"{time.perf_counter() - t0:.0f}s")


def test_08_complexity_scaling(report):
    tun = run_bench([256, 512, 1024], [2], "tunable", batch=128, repeats=21, seed=8)
    fft = run_bench([256, 512, 1024], style="fft", batch=128, repeats=21, seed=8)
    structured = [r for _, _, r in tun.ratios("tunable", 2)]
    butterfly = [r for _, _, r in fft.ratios("fft")]
    dense = [r for _, _, r in tun.ratios("tunable", 2, dense=True)]
    ok = (all(1.5 <= r <= 3.5 for r in structured) and all(1.6 <= r <= 4.5 for r in butterfly)
          and all(3.0 <= r <= 5.0 for r in dense))
    fmt = lambda rs: ", ".join(f"{r:.2f}" for r in rs)
    report(8, "complexity scaling", ok,
           f"n->2n time ratios: tunable L=2 [{fmt(structured)}] (band 1.5-3.5), "
           f"fft [{fmt(butterfly)}] (band 1.6-4.5), dense [{fmt(dense)}] (band 3-5)")


def test_09_projective_drift(report):
    rng = make_rng(109)
    w = haar_unitary(16, rng)
    for _ in range(1000):
        g = rng.standard_normal((16, 16)) + 1j * rng.standard_normal((16, 16))
        w = U.projective_update(w, g, 1e-2)
    err = U.unitarity_error(w)
    report(9, "projective update drift", err < 1e-6, f"max|W^H W - I| = {err:.2e} after 1000 updates (limit 1e-6)")


def test_10_determinism(report, tmp_path):
    cases = {
        "copy eurnn-tunable": ["--iters", "20", "--eval-every", "10"],
        "copy eurnn-fft": ["--iters", "10", "--model", "eurnn-fft", "--n-hidden", "64"],
        "copy vanilla": ["--iters", "10", "--model", "vanilla", "--n-hidden", "64"],
    }
    if os.path.exists(os.path.join(MNIST_DIR, "train-images-idx3-ubyte.gz")):
        cases["mnist eurnn-tunable"] = ["--task", "mnist", "--data-dir", MNIST_DIR, "--iters", "3",
                                        "--eval-every", "3", "--downsample", "4", "--n-hidden", "32",
                                        "--train-subset", "500", "--val-holdout", "200", "--val-size", "200"]
    mismatched = []
    for k, (name, flags) in enumerate(cases.items()):
        a, b = tmp_path / f"a{k}", tmp_path / f"b{k}"
        assert main(["train", "--out", str(a)] + flags) == 0
        assert main(["train", "--config", str(a / "config.resolved"), "--out", str(b)]) == 0
        if (a / "metrics.csv").read_bytes() != (b / "metrics.csv").read_bytes():
            mismatched.append(name)
    report(10, "determinism", not mismatched,
           f"{len(cases) - len(mismatched)}/{len(cases)} reruns from config.resolved gave byte-identical metrics.csv"
           + (f"; mismatched: {', '.join(mismatched)}" if mismatched else ""))
