"""Complex vector kernels, index permutations and random sampling.

Complex vectors are numpy ``complex128`` arrays whose last axis is the
feature axis; any leading axes are batch axes. ``planes`` and
``from_planes`` convert to and from the separate real/imaginary planes used
by the reference kernels.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError

DEFAULT_SEED = 0


def make_rng(seed=DEFAULT_SEED):
    """Return a PCG64-backed generator.

    The bit generator is pinned (rather than relying on numpy's default)
    so that streams stay reproducible if the default ever changes.
    Child streams are obtained with ``rng.spawn(k)``.
    """
    return np.random.Generator(np.random.PCG64(seed))


def as_complex(x):
    return np.asarray(x, dtype=np.complex128)


def planes(x):
    x = as_complex(x)
    return np.ascontiguousarray(x.real), np.ascontiguousarray(x.imag)


def from_planes(re, im):
    re = np.asarray(re, dtype=np.float64)
    im = np.asarray(im, dtype=np.float64)
    if re.shape != im.shape:
        raise DimensionError(f"plane shapes differ: {re.shape} vs {im.shape}")
    out = np.empty(re.shape, dtype=np.complex128)
    out.real = re
    out.imag = im
    return out


def cmul_accumulate(a, b, acc):
    """Return ``acc + a * b`` (element-wise complex product).

    Evaluated plane by plane in a fixed order: the product's real part is
    ``ar*br - ai*bi`` and its imaginary part ``ar*bi + ai*br``; the
    accumulator is added afterwards. This matches a scalar loop bit for bit,
    which numpy's fused complex multiply does not guarantee.
    """
    a = as_complex(a)
    b = as_complex(b)
    acc = as_complex(acc)
    if not (a.shape == b.shape == acc.shape):
        raise DimensionError(
            f"shape mismatch: {a.shape}, {b.shape}, {acc.shape}")
    ar, ai = a.real, a.imag
    br, bi = b.real, b.imag
    re = ar * br - ai * bi
    im = ar * bi + ai * br
    return from_planes(acc.real + re, acc.imag + im)


def norm2(x):
    """Euclidean norm over the whole array."""
    re, im = planes(x)
    return float(np.sqrt(np.sum(re * re) + np.sum(im * im)))


@dataclass(frozen=True)
class PermutationPlan:
    """Index gather ``out[i] = x[forward[i]]`` together with its inverse."""

    forward: np.ndarray
    inverse: np.ndarray

    def __len__(self):
        return len(self.forward)

    @classmethod
    def from_forward(cls, forward):
        forward = np.asarray(forward, dtype=np.intp)
        n = len(forward)
        if forward.ndim != 1 or not np.array_equal(np.sort(forward), np.arange(n)):
            raise ValueError("forward index array is not a permutation")
        inverse = np.empty(n, dtype=np.intp)
        inverse[forward] = np.arange(n)
        forward.setflags(write=False)
        inverse.setflags(write=False)
        return cls(forward, inverse)

    @classmethod
    def identity(cls, n):
        return cls.from_forward(np.arange(n))

    @property
    def inverted(self):
        return PermutationPlan(self.inverse, self.forward)


def permute(x, plan):
    x = np.asarray(x)
    if x.shape[-1] != len(plan):
        raise DimensionError(
            f"vector length {x.shape[-1]} != plan length {len(plan)}")
    return x[..., plan.forward]


def haar_unitary(n, rng):
    """Sample an n x n unitary matrix from the Haar measure.

    QR of a complex Ginibre matrix, with the phases of R's diagonal folded
    back into Q so the distribution is exactly invariant (Mezzadri 2007).
    """
    if n < 1:
        raise DimensionError("haar_unitary needs n >= 1")
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def dense_matvec(m, x):
    """Dense ``m @ x`` over the trailing axis of a (possibly batched) x."""
    m = as_complex(m)
    x = as_complex(x)
    if m.shape[1] != x.shape[-1]:
        raise DimensionError(f"matrix {m.shape} cannot act on length {x.shape[-1]}")
    return x @ m.T
