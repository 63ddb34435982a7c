import numpy as np
import pytest
from hypothesis import given, strategies as st

from eunn.complex_core import (PermutationPlan, cmul_accumulate, dense_matvec, from_planes, haar_unitary,
                               make_rng, norm2, permute, planes)
from eunn.errors import DimensionError

from conftest import crandn


def _scalar_cmul(a, b, acc):
    out = []
    for x, y, z in zip(a, b, acc):
        re = x.real * y.real - x.imag * y.imag
        im = x.real * y.imag + x.imag * y.real
        out.append(complex(z.real + re, z.imag + im))
    return np.array(out)


@given(st.integers(1, 64), st.integers(0, 2**32 - 1))
def test_cmul_accumulate_matches_scalar_loop_bitwise(n, seed):
    r = make_rng(seed)
    a, b, acc = crandn(r, n), crandn(r, n), crandn(r, n)
    out = cmul_accumulate(a, b, acc)
    ref = _scalar_cmul(a, b, acc)
    assert np.array_equal(out.view(np.float64), ref.view(np.float64))


def test_cmul_shape_mismatch():
    with pytest.raises(DimensionError):
        cmul_accumulate(np.ones(3), np.ones(4), np.ones(3))


def test_planes_roundtrip(rng):
    x = crandn(rng, 5, 7)
    re, im = planes(x)
    assert re.flags.c_contiguous and im.flags.c_contiguous
    assert np.array_equal(from_planes(re, im), x)
    with pytest.raises(DimensionError):
        from_planes(np.ones(2), np.ones(3))


def test_norm2():
    assert norm2(np.array([3 + 4j, 0j])) == 5.0
    assert norm2(np.zeros(4, complex)) == 0.0


def test_permutation_plan():
    p = PermutationPlan.from_forward([2, 0, 1])
    x = np.array([10, 20, 30])
    assert permute(x, p).tolist() == [30, 10, 20]
    assert permute(permute(x, p), p.inverted).tolist() == [10, 20, 30]
    assert permute(x, PermutationPlan.identity(3)).tolist() == [10, 20, 30]
    with pytest.raises(ValueError):
        PermutationPlan.from_forward([0, 0, 1])
    with pytest.raises(DimensionError):
        permute(np.ones(4), p)
    with pytest.raises(ValueError):
        p.forward[0] = 1


@pytest.mark.parametrize("n", [1, 2, 5, 16])
def test_haar_unitary_is_unitary(n, rng):
    m = haar_unitary(n, rng)
    np.testing.assert_allclose(m.conj().T @ m, np.eye(n), atol=1e-12)


def test_haar_unitary_rejects_empty(rng):
    with pytest.raises(DimensionError):
        haar_unitary(0, rng)


def test_haar_phase_statistics():
    # Haar measure is invariant under diagonal phases: E[M_00] = 0 and E|M_00|^2 = 1/n
    r = make_rng(7)
    n = 4
    samples = np.array([haar_unitary(n, r)[0, 0] for _ in range(4000)])
    assert abs(samples.mean()) < 4 * np.sqrt(1 / n / 4000)
    assert abs(np.mean(np.abs(samples) ** 2) - 1 / n) < 0.02


def test_rng_is_reproducible():
    assert np.array_equal(make_rng(3).standard_normal(5), make_rng(3).standard_normal(5))
    a, b = make_rng(3).spawn(2)
    assert not np.array_equal(a.standard_normal(5), b.standard_normal(5))


def test_dense_matvec(rng):
    m, x = crandn(rng, 3, 3), crandn(rng, 2, 3)
    np.testing.assert_allclose(dense_matvec(m, x), (m @ x.T).T)
    with pytest.raises(DimensionError):
        dense_matvec(m, np.ones(4))
