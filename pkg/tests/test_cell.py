import numpy as np
import pytest
from hypothesis import given, strategies as st

from eunn import cell as C
from eunn.complex_core import make_rng
from eunn.errors import DimensionError, TrainingDiverged
from eunn.gradcheck import check_gradients

from conftest import crandn


def test_modrelu_examples():
    z = np.array([3 + 4j, 0j, 0.1 + 0j, -2 + 0j])
    b = np.array([-1.0, 0.5, -0.5, 0.0])
    h = C.modrelu(z, b)
    np.testing.assert_allclose(h, [(3 + 4j) * 4 / 5, 0, 0, -2])


@given(st.floats(-3, 3), st.floats(0.01, 5), st.floats(-np.pi, np.pi))
def test_modrelu_keeps_phase_and_rectifies_modulus(b, r, ang):
    z = r * np.exp(1j * ang)
    h = C.modrelu(np.array([z]), np.array([b]))[0]
    assert abs(h) == pytest.approx(max(r + b, 0.0), abs=1e-12)
    if r + b > 1e-9:
        assert np.angle(h / z) == pytest.approx(0.0, abs=1e-9)


def test_modrelu_backward_fd(rng):
    z = crandn(rng, 3, 5)
    b = rng.uniform(-0.5, 0.5, 5)
    c = crandn(rng, 3, 5)
    dz, db = C.modrelu_backward(z, b, c)
    f = lambda zz, bb: np.sum((np.conj(c) * C.modrelu(zz, bb)).real)
    h = 1e-7
    for idx in np.ndindex(z.shape):
        e = np.zeros_like(z)
        e[idx] = h
        fd_re = (f(z + e, b) - f(z - e, b)) / (2 * h)
        fd_im = (f(z + 1j * e, b) - f(z - 1j * e, b)) / (2 * h)
        assert dz[idx] == pytest.approx(fd_re + 1j * fd_im, abs=1e-6)
    for k in range(5):
        e = np.zeros(5)
        e[k] = h
        assert db[k] == pytest.approx((f(z, b + e) - f(z, b - e)) / (2 * h), abs=1e-6)


def _toy(rng, style="tunable", capacity=4, n_hidden=8):
    cell = C.init_eurnn(4, n_hidden, 5, rng, style, capacity)
    cell.b[:] = rng.uniform(-0.3, 0.3, n_hidden)
    batch = C.SequenceBatch(rng.standard_normal((5, 2, 4)), rng.integers(0, 5, (5, 2)))
    return cell, batch


@pytest.mark.parametrize("backend", ["numpy", C.BACKEND])
def test_eurnn_gradients_fd(backend, rng, monkeypatch):
    monkeypatch.setattr(C, "BACKEND", backend)
    cell, batch = _toy(rng)
    res = check_gradients(cell, batch)
    assert res.worst_rel < 1e-5, res
    assert res.checked + res.skipped == 193


def test_eurnn_gradients_fd_mse(rng):
    cell = C.init_eurnn(2, 4, 3, rng, "fft")
    batch = C.SequenceBatch(rng.standard_normal((4, 2, 2)), rng.standard_normal((4, 2, 3)))
    assert check_gradients(cell, batch, "mse").worst_rel < 1e-5


def test_vanilla_gradients_fd(rng):
    cell = C.init_vanilla(4, 8, 5, rng, 0.9)
    batch = C.SequenceBatch(rng.standard_normal((5, 2, 4)), rng.integers(0, 5, (5, 2)))
    assert check_gradients(cell, batch).worst_rel < 1e-5


@pytest.mark.skipif(C.BACKEND != "fused", reason="numba unavailable")
@given(st.integers(0, 2**32 - 1), st.sampled_from([("tunable", 1), ("tunable", 6), ("fft", 2)]))
def test_fused_matches_numpy(seed, kind):
    r = make_rng(seed)
    cell = C.init_eurnn(3, 8, 4, r, kind[0], kind[1])
    cell.b[:] = r.uniform(-1, 0.2, 8)
    batch = C.SequenceBatch(r.standard_normal((6, 3, 3)), r.integers(0, 4, (6, 3)), r.integers(0, 2, (6, 3)))
    h0 = crandn(r, 8)
    la, ga = cell.forward_backward(batch, h0=h0, backend="fused")
    lb, gb = cell.forward_backward(batch, h0=h0, backend="numpy")
    assert la == pytest.approx(lb, rel=1e-13)
    for k in ga.params:
        np.testing.assert_allclose(ga.params[k], gb.params[k], rtol=1e-10, atol=1e-13)
    np.testing.assert_allclose(ga.hidden_norms, gb.hidden_norms, rtol=1e-10)
    np.testing.assert_allclose(cell.predict(batch.inputs, h0, "fused"), cell.predict(batch.inputs, h0, "numpy"))


def test_step_matches_predict(rng):
    cell, batch = _toy(rng)
    h = cell.initial_state(2)
    outs = []
    for t in range(batch.steps):
        h, _ = cell.step(batch.inputs[t], h)
        outs.append(cell.head(h))
    np.testing.assert_allclose(np.array(outs), cell.predict(batch.inputs), atol=1e-12)


def test_zero_input_keeps_norm_when_b_is_zero(rng):
    # with b = 0 modReLU is the identity, so the state just rotates
    cell = C.init_eurnn(1, 16, 2, rng)
    h = crandn(rng, 1, 16)
    n0 = np.linalg.norm(h)
    for _ in range(50):
        h, _ = cell.step(np.zeros((1, 1)), h)
    assert np.linalg.norm(h) == pytest.approx(n0, rel=1e-12)


def test_gradient_ratio_contrast(rng):
    eurnn = C.init_eurnn(1, 32, 2, rng, capacity=4)
    h0 = crandn(rng, 32)
    assert 1e-2 <= C.hidden_gradient_ratio(eurnn, 100, h0) <= 1e2
    vanilla = C.init_vanilla(1, 32, 2, rng, spectral_radius=0.8)
    assert C.hidden_gradient_ratio(vanilla, 100, rng.standard_normal(32)) < 1e-6


def test_param_counts_and_order(rng):
    cell = C.init_eurnn(3, 8, 4, rng, capacity=2)
    assert list(cell.params()) == ["u", "theta0", "phi0", "theta1", "phi1", "omega", "b", "v", "c"]
    assert cell.params()["theta1"].shape == (3,)
    assert cell.v.shape == (4, 16)


def test_bad_inputs(rng):
    cell, batch = _toy(rng)
    with pytest.raises(DimensionError):
        cell.forward_backward(C.SequenceBatch(np.zeros((5, 2, 3)), batch.targets))
    cell.v[0, 0] = np.nan
    with pytest.raises(TrainingDiverged):
        cell.forward_backward(batch)


def test_single_step_gradients_fd(rng):
    cell = C.init_eurnn(3, 8, 4, rng, capacity=2)
    cell.b[:] = -0.1
    batch = C.SequenceBatch(rng.standard_normal((1, 3, 3)), rng.integers(0, 4, (1, 3)))
    assert check_gradients(cell, batch).worst_rel < 1e-5


def test_empty_mask_gives_zero_loss_and_gradients(rng):
    cell, batch = _toy(rng)
    loss, g = cell.forward_backward(C.SequenceBatch(batch.inputs, batch.targets, np.zeros((5, 2))))
    assert loss == 0.0
    assert all(np.all(v == 0) for v in g.params.values())


def _h0_grad_norm(cell, steps, h0):
    x = np.zeros((steps, 1, cell.n_in))
    mask = np.zeros((steps, 1))
    mask[-1] = 1
    _, g = cell.forward_backward(C.SequenceBatch(x, np.zeros((steps, 1), int), mask), h0=h0)
    return g.hidden_norms[0]


def test_h0_gradient_over_long_horizon(rng):
    eurnn = C.init_eurnn(1, 16, 3, rng)
    h0 = crandn(rng, 16)
    r = _h0_grad_norm(eurnn, 50, h0) / _h0_grad_norm(eurnn, 5, h0)
    assert 1e-3 <= r <= 1e3
    vanilla = C.init_vanilla(1, 16, 3, rng, spectral_radius=0.5)
    h0 = rng.standard_normal(16)
    assert _h0_grad_norm(vanilla, 50, h0) / _h0_grad_norm(vanilla, 5, h0) < 1e-6
