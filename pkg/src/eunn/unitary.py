"""Full unitary transforms built from rotation layers and a diagonal phase.

    W = D F_1 F_2 ... F_L

``F_L`` is applied first and ``D`` last. Also here: synthesis of an angle
program from an arbitrary unitary by column elimination, and the dense
Cayley-projected gradient update used as a baseline.
"""

from dataclasses import dataclass, field

import numpy as np

from . import rotation
from .errors import ConfigError, DimensionError, ValidationError

UNITARY_TOL = 1e-8


@dataclass(frozen=True)
class DiagonalPhase:
    n: int
    w: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=np.float64)
        if w.shape != (self.n,):
            raise DimensionError(f"expected {self.n} phases, got shape {w.shape}")
        object.__setattr__(self, "w", w)

    @classmethod
    def zeros(cls, n):
        return cls(n, np.zeros(n))

    def matrix(self):
        return np.diag(np.exp(1j * self.w))


@dataclass(frozen=True)
class UnitaryComposition:
    diag: DiagonalPhase
    layers: tuple
    style: str = "tunable"

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        n = self.diag.n
        if any(layer.n != n for layer in self.layers):
            raise DimensionError("all layers must share the diagonal's dimension")
        if self.style == "fft":
            if not rotation.is_power_of_two(n) or len(self.layers) != n.bit_length() - 1:
                raise ConfigError("fft style needs n a power of two and log2(n) layers")
        elif self.style == "tunable":
            if not 1 <= len(self.layers) <= n:
                raise ConfigError(f"tunable capacity must lie in [1, {n}]")
        elif self.style != "custom":
            raise ConfigError(f"unknown style {self.style!r}")

    @property
    def n(self):
        return self.diag.n

    @property
    def capacity(self):
        return len(self.layers)

    @property
    def n_rotations(self):
        return sum(layer.n_pairs for layer in self.layers)

    @property
    def n_params(self):
        return 2 * self.n_rotations + self.n

    def with_params(self, thetas, phis, w):
        layers = [layer.with_angles(t, p) for layer, t, p in zip(self.layers, thetas, phis)]
        return UnitaryComposition(DiagonalPhase(self.n, w), layers, self.style)


def tunable(n, capacity):
    return UnitaryComposition(DiagonalPhase.zeros(n), rotation.tunable_plan(n, capacity), "tunable")


def fft(n):
    return UnitaryComposition(DiagonalPhase.zeros(n), rotation.fft_plan(n), "fft")


def randomize(w, rng, low=-np.pi, high=np.pi):
    """Copy of ``w`` with every angle and phase drawn uniformly from [low, high)."""
    thetas = [rng.uniform(low, high, layer.n_pairs) for layer in w.layers]
    phis = [rng.uniform(low, high, layer.n_pairs) for layer in w.layers]
    return w.with_params(thetas, phis, rng.uniform(low, high, w.n))


@dataclass(frozen=True)
class Compiled:
    """Kernels for every layer plus the diagonal's unit phases."""

    source: UnitaryComposition
    kernels: tuple
    phases: np.ndarray


def compile_composition(w):
    return Compiled(w, tuple(rotation.compile_layer(l) for l in w.layers), np.exp(1j * w.diag.w))


@dataclass
class CompositionGrad:
    d_theta: list
    d_phi: list
    d_w: np.ndarray = field(default=None)


def forward(cw, x):
    """Apply W and return ``(y, acts)``.

    ``acts[l]`` is the input seen by layer ``l`` and ``acts[-1]`` the input
    of the diagonal, i.e. every activation the backward pass needs.
    """
    x = np.asarray(x, dtype=np.complex128)
    if x.shape[-1] != cw.source.n:
        raise DimensionError(f"composition of size {cw.source.n} applied to length {x.shape[-1]}")
    acts = [None] * (len(cw.kernels) + 1)
    for l in range(len(cw.kernels) - 1, -1, -1):
        acts[l] = x
        x = rotation.apply_layer(cw.kernels[l], x)
    acts[-1] = x
    return cw.phases * x, acts


def backward_input(cw, dy):
    """Propagate ``dy`` back to the input; returns ``(dx, cots)``.

    ``cots[l]`` is the cotangent at the output of layer ``l`` and
    ``cots[-1]`` the cotangent at the output of the diagonal (``dy``).
    """
    dy = np.asarray(dy, dtype=np.complex128)
    if dy.shape[-1] != cw.source.n:
        raise DimensionError(f"composition of size {cw.source.n} given cotangent of length {dy.shape[-1]}")
    cots = [None] * (len(cw.kernels) + 1)
    cots[-1] = dy
    g = np.conj(cw.phases) * dy
    for l, k in enumerate(cw.kernels):
        cots[l] = g
        g = rotation.backward_input(k, g)
    return g, cots


def param_grad(cw, acts, cots):
    """Angle and phase gradients from stashed activations and cotangents.

    The arrays may carry any number of leading axes (batch, time); they are
    summed over.
    """
    w = cw.source
    n_layers = len(w.layers)
    # the output of layer l is the input of layer l-1 (or of the diagonal)
    outs = [acts[l - 1] if l > 0 else acts[n_layers] for l in range(n_layers)]
    grads = [rotation.param_grad_from_output(k, layer, y, c)
             for k, layer, y, c in zip(cw.kernels, w.layers, outs, cots[:-1])]
    u, g = acts[-1], cots[-1]
    axes = tuple(range(u.ndim - 1))
    d_w = -np.sum((np.conj(g) * cw.phases * u).imag, axis=axes)
    return CompositionGrad([g_.d_theta for g_ in grads], [g_.d_phi for g_ in grads], d_w)


def apply(w, x):
    return forward(compile_composition(w), x)[0]


def backward(w, x, dy):
    """Return ``(dx, CompositionGrad)`` for ``y = W x`` with output cotangent ``dy``."""
    cw = compile_composition(w)
    _, acts = forward(cw, x)
    dx, cots = backward_input(cw, dy)
    return dx, param_grad(cw, acts, cots)


def materialize(w):
    m = w.diag.matrix()
    for layer in w.layers:
        m = m @ rotation.materialize_layer(layer)
    return m


def unitarity_error(m):
    m = np.asarray(m)
    return float(np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0]))))


def _require_unitary(m, tol=UNITARY_TOL):
    m = np.asarray(m, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {m.shape}")
    err = unitarity_error(m)
    if not err < tol:
        raise ValidationError(f"matrix is not unitary: max|M^H M - I| = {err:.3e} (tolerance {tol:g})")
    return m


@dataclass
class AngleProgram:
    """Elimination rotations in the order they were applied, plus the final diagonal.

    Each entry is ``((i, j), theta, phi)`` where ``i`` carries the phase.
    The represented matrix is ``D R_K^H ... R_2^H R_1^H``.
    """

    n: int
    rotations: list
    diag: DiagonalPhase


def _embed(n, i, j, theta, phi):
    m = np.eye(n, dtype=np.complex128)
    blk = rotation.rotation_block(theta, phi)
    m[i, i], m[i, j] = blk[0]
    m[j, i], m[j, j] = blk[1]
    return m


def decompose_unitary(m, tol=UNITARY_TOL):
    """Factor a unitary into n(n-1)/2 rotations and a diagonal phase.

    Rows are cleared from the last upwards: for row r, rotations acting on
    columns (r, j), j = r-1, ..., 0, are right-multiplied to zero ``A[r, j]``.
    Unitarity forces column r to clear with it, leaving a diagonal matrix
    once every row is done.
    """
    a = _require_unitary(m, tol).copy()
    n = a.shape[0]
    rotations = []
    for r in range(n - 1, 0, -1):
        for j in range(r - 1, -1, -1):
            p, q = a[r, r], a[r, j]
            theta = np.arctan2(abs(q), abs(p))
            phi = float(np.angle(q) - np.angle(p)) if q != 0 else 0.0
            e, c, s = np.exp(1j * phi), np.cos(theta), np.sin(theta)
            col_r, col_j = a[:, r].copy(), a[:, j]
            a[:, r] = e * c * col_r + s * col_j
            a[:, j] = -e * s * col_r + c * col_j
            a[r, j] = 0.0
            rotations.append(((r, j), float(theta), phi))
    off = a - np.diag(np.diagonal(a))
    resid = float(np.max(np.abs(off))) if n > 1 else 0.0
    if resid > tol:
        raise ValidationError(f"elimination left off-diagonal residual {resid:.3e}")
    return AngleProgram(n, rotations, DiagonalPhase(n, np.angle(np.diagonal(a))))


def reconstruct(p):
    m = p.diag.matrix()
    for (i, j), theta, phi in reversed(p.rotations):
        m = m @ _embed(p.n, i, j, theta, phi).conj().T
    return m


def projective_update(w, g, lr, tol=UNITARY_TOL):
    """One Cayley-projected gradient step on a dense unitary.

    A = G^H W - W^H G is skew-Hermitian, so
    W' = (I + lr/2 A)^{-1} (I - lr/2 A) W is exactly unitary. O(n^3).
    """
    w = _require_unitary(w, tol)
    g = np.asarray(g, dtype=np.complex128)
    if g.shape != w.shape:
        raise DimensionError(f"gradient shape {g.shape} != weight shape {w.shape}")
    a = g.conj().T @ w - w.conj().T @ g
    eye = np.eye(w.shape[0])
    try:
        return np.linalg.solve(eye + 0.5 * lr * a, (eye - 0.5 * lr * a) @ w)
    except np.linalg.LinAlgError as exc:
        raise FloatingPointError(f"Cayley system is singular: {exc}") from exc
