import math

import numpy as np
import pytest
import scipy.special

from labelfuse._kernels import _pykernels
from labelfuse.bayes import digamma

try:
    from labelfuse._kernels import _ckernels
except ImportError:
    _ckernels = None

BACKENDS = [_pykernels] + ([_ckernels] if _ckernels is not None else [])

EULER = 0.5772156649015328606


@pytest.mark.parametrize("impl", BACKENDS, ids=lambda m: m.NAME)
class TestDigamma:
    def test_known_values(self, impl):
        assert impl.digamma(1.0) == pytest.approx(-EULER, abs=1e-10)
        assert impl.digamma(2.0) == pytest.approx(1.0 - EULER, abs=1e-10)
        assert impl.digamma(0.5) == pytest.approx(-EULER - 2.0 * math.log(2.0), abs=1e-10)

    def test_recurrence_difference_is_exact(self, impl):
        # psi(x+1) = psi(x) + 1/x, so psi(3) - psi(4) = -1/3.
        assert impl.digamma(3.0) - impl.digamma(4.0) == pytest.approx(-1.0 / 3.0, abs=1e-14)

    def test_against_scipy_grid(self, impl):
        xs = np.concatenate(
            [np.linspace(1e-3, 1.0, 200), np.linspace(1.0, 50.0, 200), [1e4, 1e8]]
        )
        got = impl.digamma(xs)
        want = scipy.special.digamma(xs)
        assert np.abs(got - want).max() <= 1e-10

    def test_tiny_arguments_relative(self, impl):
        # Below ~1e-6 the magnitude of psi exceeds 1e6 and float64 cannot
        # represent an absolute 1e-10; accuracy is still ULP-level.
        xs = np.array([1e-9, 1e-7, 1e-6])
        got = impl.digamma(xs)
        want = scipy.special.digamma(xs)
        assert np.abs((got - want) / want).max() <= 1e-13

    def test_array_shape_preserved(self, impl):
        arr = np.array([[1.0, 2.0], [3.0, 4.0]])
        out = impl.digamma(arr)
        assert np.asarray(out).shape == (2, 2)

    def test_domain_errors(self, impl):
        for bad in (0.0, -1.0, float("nan"), float("inf")):
            with pytest.raises(ValueError):
                impl.digamma(bad)

    def test_scalar_returns_float(self, impl):
        assert isinstance(impl.digamma(2.5), float)


def test_backends_bitwise_close():
    if _ckernels is None:
        pytest.skip("compiled backend not built")
    xs = np.linspace(1e-4, 100.0, 5000)
    a = _pykernels.digamma(xs)
    b = _ckernels.digamma(xs)
    assert np.abs(a - b).max() <= 1e-13


def test_package_level_digamma():
    assert digamma(1.0) == pytest.approx(-EULER, abs=1e-12)
    with pytest.raises(ValueError):
        digamma(-3.0)
