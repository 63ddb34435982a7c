"""Single rotation layers: a set of U(2) rotations on disjoint coordinate pairs.

A pair ``(i, j)`` with angles ``(theta, phi)`` maps

    y_i = e^{i phi} cos(theta) x_i - e^{i phi} sin(theta) x_j
    y_j =           sin(theta) x_i +           cos(theta) x_j

and leaves every other coordinate alone. Because the pairs of a layer are
disjoint, the whole layer reduces to two element-wise products and one
gather: ``y = v1 * x + v2 * x[perm]``.
"""

import contextlib
from dataclasses import dataclass, field

import numpy as np

from .complex_core import PermutationPlan
from .errors import DimensionError, InvalidPlanError, UnsupportedDimensionError, ConfigError


@dataclass(frozen=True)
class RotationLayer:
    n: int
    pairs: np.ndarray  # (P, 2) int
    theta: np.ndarray = None
    phi: np.ndarray = None

    def __post_init__(self):
        pairs = np.asarray(self.pairs, dtype=np.intp).reshape(-1, 2)
        npairs = len(pairs)
        theta = np.zeros(npairs) if self.theta is None else np.asarray(self.theta, dtype=np.float64)
        phi = np.zeros(npairs) if self.phi is None else np.asarray(self.phi, dtype=np.float64)
        if theta.shape != (npairs,) or phi.shape != (npairs,):
            raise InvalidPlanError(
                f"{npairs} pairs but theta {theta.shape}, phi {phi.shape}")
        flat = pairs.ravel()
        if flat.size and (flat.min() < 0 or flat.max() >= self.n):
            raise InvalidPlanError(f"pair index out of range [0, {self.n})")
        if len(np.unique(flat)) != flat.size:
            raise InvalidPlanError("pairs overlap: an index appears more than once")
        object.__setattr__(self, "pairs", pairs)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "phi", phi)

    @property
    def n_pairs(self):
        return len(self.pairs)

    def with_angles(self, theta, phi):
        return RotationLayer(self.n, self.pairs, theta, phi)


@dataclass(frozen=True)
class LayerKernels:
    v1: np.ndarray
    v2: np.ndarray
    perm: PermutationPlan


@dataclass
class LayerGrad:
    d_theta: np.ndarray
    d_phi: np.ndarray


@dataclass
class OpCount:
    """Tallies of complex multiplies and adds issued by ``apply_layer``."""

    mul: int = 0
    add: int = 0
    calls: int = field(default=0)


_op_count = None


@contextlib.contextmanager
def count_ops():
    """Instrument ``apply_layer`` for the duration of the block."""
    global _op_count
    prev = _op_count
    _op_count = OpCount()
    try:
        yield _op_count
    finally:
        _op_count = prev


def compile_layer(layer):
    n = layer.n
    i, j = layer.pairs[:, 0], layer.pairs[:, 1]
    c, s = np.cos(layer.theta), np.sin(layer.theta)
    e = np.exp(1j * layer.phi)

    v1 = np.ones(n, dtype=np.complex128)
    v2 = np.zeros(n, dtype=np.complex128)
    fwd = np.arange(n)
    v1[i] = e * c
    v2[i] = -e * s
    v1[j] = c
    v2[j] = s
    fwd[i] = j
    fwd[j] = i
    return LayerKernels(v1, v2, PermutationPlan.from_forward(fwd))


def _check(k, x):
    if x.shape[-1] != len(k.v1):
        raise DimensionError(f"layer of size {len(k.v1)} applied to length {x.shape[-1]}")


def apply_layer(k, x):
    x = np.asarray(x, dtype=np.complex128)
    _check(k, x)
    if _op_count is not None:
        _op_count.mul += 2 * x.size
        _op_count.add += x.size
        _op_count.calls += 1
    y = k.v1 * x
    t = x[..., k.perm.forward]
    t *= k.v2
    y += t
    return y


def backward_input(k, dy):
    """Cotangent of the layer input: the adjoint layer applied to ``dy``."""
    dy = np.asarray(dy, dtype=np.complex128)
    _check(k, dy)
    t = np.conj(k.v2) * dy
    dx = t[..., k.perm.inverse]
    np.multiply(np.conj(k.v1), dy, out=t)
    dx += t
    return dx


def param_grad_from_output(k, layer, y, dy):
    """dL/dtheta and dL/dphi given the layer *output* ``y``.

    Uses dy_i/dtheta = -e^{i phi} y_j, dy_j/dtheta = e^{-i phi} y_i and
    dy_i/dphi = 1j * y_i, so only two batch-summed products are needed:
    ``r = sum conj(dy[perm]) * y`` and ``q = sum conj(dy) * y``.
    """
    axes = tuple(range(y.ndim - 1))
    r = (np.conj(dy[..., k.perm.forward]) * y).sum(axis=axes)
    q = (np.conj(dy) * y).sum(axis=axes)
    i, j = layer.pairs[:, 0], layer.pairs[:, 1]
    e_conj = np.exp(-1j * layer.phi)
    d_theta = (e_conj * (r[i] - np.conj(r[j]))).real
    d_phi = -q[i].imag
    return LayerGrad(np.asarray(d_theta, dtype=np.float64), np.asarray(d_phi, dtype=np.float64))


def layer_param_grad(layer, x, dy, k=None):
    """dL/dtheta and dL/dphi for every pair, summed over leading batch axes.

    ``dy`` is the complex cotangent ``dL/dRe(y) + 1j*dL/dIm(y)``, so that
    dL/dtheta = sum_k Re(conj(dy_k) * dy_k/dtheta).
    """
    x = np.asarray(x, dtype=np.complex128)
    dy = np.asarray(dy, dtype=np.complex128)
    if x.shape != dy.shape or x.shape[-1] != layer.n:
        raise DimensionError(f"x {x.shape} and dy {dy.shape} for layer of size {layer.n}")
    if k is None:
        k = compile_layer(layer)
    return param_grad_from_output(k, layer, apply_layer(k, x), dy)


def backward_layer(k, layer, x, dy):
    """Return ``(dx, LayerGrad)`` for one layer in a single O(n) pass."""
    return backward_input(k, dy), layer_param_grad(layer, x, dy, k)


def tunable_plan(n, capacity):
    """Alternating adjacent-pair layers: A = (0,1),(2,3),...; B = (1,2),(3,4),...

    ``capacity`` layers are returned, starting with an A layer. With
    ``capacity == n`` the mesh holds n(n-1)/2 rotations.
    """
    if n < 2 or n % 2:
        raise UnsupportedDimensionError(f"tunable mesh needs an even n >= 2, got {n}")
    if not 1 <= capacity <= n:
        raise ConfigError(f"capacity must lie in [1, {n}], got {capacity}")
    a = np.arange(0, n, 2)
    a_pairs = np.stack([a, a + 1], axis=1)
    b = np.arange(1, n - 1, 2)
    b_pairs = np.stack([b, b + 1], axis=1)
    return [RotationLayer(n, a_pairs if l % 2 == 0 else b_pairs) for l in range(capacity)]


def is_power_of_two(n):
    return n >= 1 and (n & (n - 1)) == 0


def fft_plan(n):
    """log2(n) butterfly layers; layer i pairs coordinates a span n/2^i apart."""
    if n < 2 or not is_power_of_two(n):
        raise UnsupportedDimensionError(f"fft mesh needs a power of two n >= 2, got {n}")
    layers = []
    for i in range(1, n.bit_length()):
        p = n >> i
        k = np.arange(2 ** (i - 1))[:, None]
        j = np.arange(1, p + 1)[None, :]
        first = (2 * p * k + j).ravel() - 1
        second = (p * (2 * k + 1) + j).ravel() - 1
        layers.append(RotationLayer(n, np.stack([first, second], axis=1)))
    return layers


def rotation_block(theta, phi):
    """The 2x2 U(2) block of a single rotation."""
    e = np.exp(1j * phi)
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[e * c, -e * s], [s, c]], dtype=np.complex128)


def materialize_layer(layer):
    """Dense n x n matrix of the layer. O(n^2); for tests and baselines."""
    m = np.eye(layer.n, dtype=np.complex128)
    for (i, j), t, p in zip(layer.pairs, layer.theta, layer.phi):
        blk = rotation_block(t, p)
        m[i, i], m[i, j] = blk[0]
        m[j, i], m[j, j] = blk[1]
    return m
