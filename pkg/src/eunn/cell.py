"""Recurrent cells: the unitary EURNN cell and a dense tanh baseline.

Both cells expose the same surface: ``params()`` returns the live parameter
arrays by name (the optimizer updates them in place), ``forward_backward``
runs back-propagation through time over a ``SequenceBatch`` and
``predict`` returns output logits.
"""

from dataclasses import dataclass

import numpy as np

from . import unitary

try:
    from . import _fused
except ImportError:  # numba missing: numpy reference path only
    _fused = None
from .errors import DimensionError, TrainingDiverged
from .losses import LOSSES

BACKEND = "fused" if _fused is not None else "numpy"


@dataclass
class SequenceBatch:
    inputs: np.ndarray  # (T, B, n_in) real
    targets: np.ndarray  # (T, B) class ids, or (T, B, n_out) regression targets
    mask: np.ndarray = None  # (T, B); None means every step counts

    @property
    def steps(self):
        return self.inputs.shape[0]

    @property
    def size(self):
        return self.inputs.shape[1]


@dataclass
class CellGradients:
    params: dict
    h0: np.ndarray
    # ||dC/dh^(t)|| for t = 0..T, each including every later contribution
    hidden_norms: np.ndarray


def modrelu(z, b):
    """Rescale each |z_i| to ReLU(|z_i| + b_i), keeping its phase. 0 maps to 0."""
    z = np.asarray(z, dtype=np.complex128)
    r = np.abs(z)
    shifted = r + b
    scale = np.where(shifted > 0, shifted / np.where(r > 0, r, 1.0), 0.0)
    return z * scale


def modrelu_backward(z, b, dy):
    """Cotangents ``(dz, db)`` of modReLU; ``db`` is summed over batch axes.

    Dead coordinates (|z| + b <= 0) and z == 0 get zero gradient.
    """
    z = np.asarray(z, dtype=np.complex128)
    r = np.abs(z)
    active = (r + b > 0) & (r > 0)
    safe_r = np.where(active, r, 1.0)
    u = np.where(active, z / safe_r, 0.0)
    gu = np.conj(u) * dy
    # radial part passes through; tangential part is scaled by (|z|+b)/|z|
    dz = u * (gu.real + 1j * ((r + b) / safe_r) * gu.imag)
    db = gu.real
    if db.ndim > 1:
        db = db.sum(axis=tuple(range(db.ndim - 1)))
    return dz, db


def _check_inputs(batch, n_in):
    x = np.asarray(batch.inputs, dtype=np.float64)
    if x.ndim != 3 or x.shape[2] != n_in:
        raise DimensionError(f"inputs must be (T, B, {n_in}), got {x.shape}")
    return x


def _loss(kind, out, batch):
    loss, dout = LOSSES[kind](out, batch.targets, batch.mask)
    if not np.isfinite(loss):
        raise TrainingDiverged(f"loss is {loss}")
    return loss, dout


def _cnorm(g):
    return float(np.sqrt(np.sum(g.real ** 2) + np.sum(g.imag ** 2)))


@dataclass
class EurnnCell:
    """h_t = modReLU(U x_t + W h_{t-1}, b);  y_t = V [Re h_t; Im h_t] + c.

    W is a unitary composition whose pairing plan is ``structure``; its
    angles and diagonal phases live in ``thetas``, ``phis`` and ``omega``.
    """

    u: np.ndarray
    structure: unitary.UnitaryComposition
    thetas: list
    phis: list
    omega: np.ndarray
    b: np.ndarray
    v: np.ndarray
    c: np.ndarray

    kind = "eurnn"

    @property
    def n_in(self):
        return self.u.shape[1]

    @property
    def n_hidden(self):
        return self.u.shape[0]

    @property
    def n_out(self):
        return self.v.shape[0]

    @property
    def w(self):
        return self.structure.with_params(self.thetas, self.phis, self.omega)

    def params(self):
        p = {"u": self.u}
        for l, (t, ph) in enumerate(zip(self.thetas, self.phis)):
            p[f"theta{l}"] = t
            p[f"phi{l}"] = ph
        p.update(omega=self.omega, b=self.b, v=self.v, c=self.c)
        return p

    def initial_state(self, batch_size, h0=None):
        if h0 is None:
            return np.zeros((batch_size, self.n_hidden), dtype=np.complex128)
        h0 = np.asarray(h0, dtype=np.complex128)
        return np.broadcast_to(h0, (batch_size, self.n_hidden)).copy()

    def step(self, x_t, h_prev):
        """One recurrence step for a single time slice; returns ``(h_t, z_t)``."""
        x_t = np.asarray(x_t, dtype=np.float64)
        h_prev = np.asarray(h_prev, dtype=np.complex128)
        if x_t.shape[-1] != self.n_in or h_prev.shape[-1] != self.n_hidden:
            raise DimensionError("input or state has the wrong width")
        z = x_t @ self.u.T + unitary.apply(self.w, h_prev)
        return modrelu(z, self.b), z

    def head(self, h):
        h = np.asarray(h, dtype=np.complex128)
        return np.concatenate([h.real, h.imag], axis=-1) @ self.v.T + self.c

    def _forward(self, x, h0, backend, keep=True):
        steps, bsz, _ = x.shape
        cw = unitary.compile_composition(self.w)
        ux = x @ self.u.T
        h_init = self.initial_state(bsz, h0)
        hs = np.empty((steps, bsz, self.n_hidden), dtype=np.complex128)
        zs = np.empty_like(hs)
        acts = []
        if backend == "fused":
            v1, v2, perm, _ = _fused.stack_kernels(cw)
            _fused.forward(ux, h_init, v1, v2, perm, cw.phases, self.b, hs, zs)
            return cw, h_init, hs, zs, acts
        h = h_init
        for t in range(steps):
            wh, a = unitary.forward(cw, h)
            z = ux[t] + wh
            h = modrelu(z, self.b)
            hs[t] = h
            zs[t] = z
            if keep:
                acts.append(a)
        return cw, h_init, hs, zs, acts

    def predict(self, inputs, h0=None, backend=None):
        x = _check_inputs(SequenceBatch(inputs, None), self.n_in)
        _, _, hs, _, _ = self._forward(x, h0, backend or BACKEND, keep=False)
        return self.head(hs)

    def forward_backward(self, batch, loss="ce", h0=None, backend=None):
        backend = backend or BACKEND
        x = _check_inputs(batch, self.n_in)
        n = self.n_hidden
        cw, h_init, hs, zs, acts = self._forward(x, h0, backend)
        feats = np.concatenate([hs.real, hs.imag], axis=-1)
        out = feats @ self.v.T + self.c
        value, dout = _loss(loss, out, batch)

        k = self.n_out
        grads = {name: np.zeros_like(p) for name, p in self.params().items()}
        grads["v"] = dout.reshape(-1, k).T @ feats.reshape(-1, 2 * n)
        grads["c"] = dout.reshape(-1, k).sum(axis=0)
        dfeat = dout @ self.v

        steps = x.shape[0]
        norms = np.empty(steps + 1)
        dzs = np.empty_like(zs)
        g = np.zeros_like(h_init)
        if backend == "fused":
            n_layers = len(self.thetas)
            v1, v2, perm, inv = _fused.stack_kernels(cw)
            r_acc = np.zeros((n_layers, n), dtype=np.complex128)
            q_acc = np.zeros_like(r_acc)
            _fused.backward(h_init, hs, zs, dfeat, v1, v2, perm, inv, cw.phases, self.b,
                            g, dzs, r_acc, q_acc, grads["omega"], grads["b"], norms)
            for l, layer in enumerate(self.structure.layers):
                i, j = layer.pairs[:, 0], layer.pairs[:, 1]
                e_conj = np.exp(-1j * self.phis[l])
                grads[f"theta{l}"] = (e_conj * (r_acc[l, i] - np.conj(r_acc[l, j]))).real
                grads[f"phi{l}"] = -q_acc[l, i].imag
        else:
            dh_out = dfeat[..., :n] + 1j * dfeat[..., n:]
            for t in range(steps - 1, -1, -1):
                g = g + dh_out[t]
                norms[t + 1] = _cnorm(g)
                dz, db = modrelu_backward(zs[t], self.b, g)
                grads["b"] += db
                dzs[t] = dz
                g, cots = unitary.backward_input(cw, dz)
                pg = unitary.param_grad(cw, acts[t], cots)
                for l in range(len(self.thetas)):
                    grads[f"theta{l}"] += pg.d_theta[l]
                    grads[f"phi{l}"] += pg.d_phi[l]
                grads["omega"] += pg.d_w
            norms[0] = _cnorm(g)
        # complex @ real keeps zgemm on contiguous operands; .real views would not
        grads["u"] = (x.reshape(-1, self.n_in).T @ dzs.reshape(-1, n)).T
        return value, CellGradients(grads, g, norms)


@dataclass
class VanillaCell:
    """Dense baseline: h_t = tanh(U x_t + W h_{t-1} + b);  y_t = V h_t + c."""

    u: np.ndarray
    w: np.ndarray
    b: np.ndarray
    v: np.ndarray
    c: np.ndarray

    kind = "vanilla"

    @property
    def n_in(self):
        return self.u.shape[1]

    @property
    def n_hidden(self):
        return self.u.shape[0]

    @property
    def n_out(self):
        return self.v.shape[0]

    def params(self):
        return {"u": self.u, "w": self.w, "b": self.b, "v": self.v, "c": self.c}

    def initial_state(self, batch_size, h0=None):
        if h0 is None:
            return np.zeros((batch_size, self.n_hidden))
        h0 = np.asarray(h0, dtype=np.float64)
        return np.broadcast_to(h0, (batch_size, self.n_hidden)).copy()

    def step(self, x_t, h_prev):
        z = np.asarray(x_t) @ self.u.T + np.asarray(h_prev) @ self.w.T + self.b
        return np.tanh(z), z

    def head(self, h):
        return h @ self.v.T + self.c

    def _run(self, x, h0):
        steps, bsz, _ = x.shape
        ux = x @ self.u.T + self.b
        h = self.initial_state(bsz, h0)
        hs = np.empty((steps, bsz, self.n_hidden))
        for t in range(steps):
            h = np.tanh(ux[t] + h @ self.w.T)
            hs[t] = h
        return hs

    def predict(self, inputs, h0=None):
        x = _check_inputs(SequenceBatch(inputs, None), self.n_in)
        return self.head(self._run(x, h0))

    def forward_backward(self, batch, loss="ce", h0=None):
        x = _check_inputs(batch, self.n_in)
        h_init = self.initial_state(x.shape[1], h0)
        hs = self._run(x, h0)
        out = self.head(hs)
        value, dout = _loss(loss, out, batch)

        n, k = self.n_hidden, self.n_out
        grads = {name: np.zeros_like(p) for name, p in self.params().items()}
        grads["v"] = dout.reshape(-1, k).T @ hs.reshape(-1, n)
        grads["c"] = dout.reshape(-1, k).sum(axis=0)
        dh_out = dout @ self.v

        steps = x.shape[0]
        norms = np.empty(steps + 1)
        das = np.empty_like(hs)
        g = np.zeros_like(hs[0])
        for t in range(steps - 1, -1, -1):
            g = g + dh_out[t]
            norms[t + 1] = float(np.linalg.norm(g))
            da = g * (1.0 - hs[t] ** 2)
            das[t] = da
            h_prev = hs[t - 1] if t > 0 else h_init
            grads["w"] += da.T @ h_prev
            g = da @ self.w
        norms[0] = float(np.linalg.norm(g))
        grads["u"] = das.reshape(-1, n).T @ x.reshape(-1, self.n_in)
        grads["b"] = das.sum(axis=(0, 1))
        return value, CellGradients(grads, g, norms)


def sequence_forward_backward(cell, batch, loss="ce", h0=None):
    """Mean loss over masked steps and every parameter's gradient via BPTT."""
    return cell.forward_backward(batch, loss, h0)


def init_eurnn(n_in, n_hidden, n_out, rng, style="tunable", capacity=2):
    """Angles and phases ~ U(-pi, pi), b = 0, U and V entries ~ U(+-1/sqrt(n_hidden))."""
    structure = unitary.fft(n_hidden) if style == "fft" else unitary.tunable(n_hidden, capacity)
    scale = 1.0 / np.sqrt(n_hidden)
    u = rng.uniform(-scale, scale, (n_hidden, n_in)) + 1j * rng.uniform(-scale, scale, (n_hidden, n_in))
    thetas = [rng.uniform(-np.pi, np.pi, layer.n_pairs) for layer in structure.layers]
    phis = [rng.uniform(-np.pi, np.pi, layer.n_pairs) for layer in structure.layers]
    omega = rng.uniform(-np.pi, np.pi, n_hidden)
    v = rng.uniform(-scale, scale, (n_out, 2 * n_hidden))
    return EurnnCell(u, structure, thetas, phis, omega, np.zeros(n_hidden), v, np.zeros(n_out))


def init_vanilla(n_in, n_hidden, n_out, rng, spectral_radius=1.0):
    """W is a random orthogonal matrix scaled so every eigenvalue has modulus ``spectral_radius``."""
    q, r = np.linalg.qr(rng.standard_normal((n_hidden, n_hidden)))
    w = spectral_radius * q * np.sign(np.diagonal(r))
    scale = 1.0 / np.sqrt(n_hidden)
    u = rng.uniform(-scale, scale, (n_hidden, n_in))
    v = rng.uniform(-scale, scale, (n_out, n_hidden))
    return VanillaCell(u, w, np.zeros(n_hidden), v, np.zeros(n_out))


def hidden_gradient_ratio(cell, steps, h0, batch_size=1):
    """||dC/dh^(0)|| / ||dC/dh^(T)|| for zero input and a loss on the last step only.

    ``h0`` must be nonzero; with zero input the state would otherwise stay
    at the origin.
    """
    x = np.zeros((steps, batch_size, cell.n_in))
    targets = np.zeros((steps, batch_size), dtype=np.int64)
    mask = np.zeros((steps, batch_size))
    mask[-1] = 1.0
    _, grads = cell.forward_backward(SequenceBatch(x, targets, mask), "ce", h0=h0)
    return grads.hidden_norms[0] / grads.hidden_norms[-1]
