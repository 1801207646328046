"""Backend parity: the compiled and NumPy kernels must agree everywhere."""

import numpy as np
import pytest

import labelfuse._kernels as kernels
from labelfuse._kernels import _pykernels

try:
    from labelfuse._kernels import _ckernels
except ImportError:
    _ckernels = None

needs_compiled = pytest.mark.skipif(_ckernels is None, reason="extension not built")


def random_problem(seed, n=200, h=6, k=5, missing=0.2):
    rng = np.random.default_rng(seed)
    y = rng.integers(0, k, size=(n, h)).astype(np.int32)
    mask = rng.random((n, h)) < missing
    # Keep at least one observation per instance.
    mask[:, 0] = False
    y[mask] = -1
    qz = rng.random((n, k))
    qz /= qz.sum(axis=1, keepdims=True)
    elog_pi = np.log(rng.dirichlet(np.ones(k)))
    elog_v = np.log(rng.dirichlet(np.ones(k), size=(h, k)))
    return y, np.ascontiguousarray(qz), elog_pi, np.ascontiguousarray(elog_v)


def naive_label_mass(qz, y):
    n, k = qz.shape
    h = y.shape[1]
    out = np.zeros((h, k, k))
    for i in range(n):
        for j in range(h):
            if y[i, j] >= 0:
                out[j, :, y[i, j]] += qz[i]
    return out


def naive_posterior_step(y, elog_pi, elog_v):
    n, h = y.shape
    k = elog_pi.shape[0]
    qz = np.zeros((n, k))
    lse_sum = 0.0
    for i in range(n):
        scores = elog_pi.copy()
        for j in range(h):
            if y[i, j] >= 0:
                scores += elog_v[j, :, y[i, j]]
        m = scores.max()
        ex = np.exp(scores - m)
        qz[i] = ex / ex.sum()
        lse_sum += m + np.log(ex.sum())
    return qz, lse_sum


@pytest.mark.parametrize("seed", range(5))
def test_pure_label_mass_matches_naive(seed):
    y, qz, _, _ = random_problem(seed)
    assert np.allclose(_pykernels.label_mass(qz, y), naive_label_mass(qz, y), atol=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_pure_posterior_step_matches_naive(seed):
    y, _, elog_pi, elog_v = random_problem(seed)
    qz_a, lse_a = _pykernels.posterior_step(y, elog_pi, elog_v)
    qz_b, lse_b = naive_posterior_step(y, elog_pi, elog_v)
    assert np.allclose(qz_a, qz_b, atol=1e-12)
    assert lse_a == pytest.approx(lse_b, abs=1e-9)


@needs_compiled
@pytest.mark.parametrize("seed", range(5))
def test_backend_parity(seed):
    y, qz, elog_pi, elog_v = random_problem(seed)
    mass_p = _pykernels.label_mass(qz, y)
    mass_c = _ckernels.label_mass(qz, y)
    assert np.abs(mass_p - mass_c).max() <= 1e-10
    qz_p, lse_p = _pykernels.posterior_step(y, elog_pi, elog_v)
    qz_c, lse_c = _ckernels.posterior_step(y, elog_pi, elog_v)
    assert np.abs(qz_p - qz_c).max() <= 1e-12
    assert lse_p == pytest.approx(lse_c, abs=1e-8)


def test_posterior_rows_normalized():
    y, _, elog_pi, elog_v = random_problem(11)
    qz, _ = kernels.posterior_step(y, elog_pi, elog_v)
    assert np.allclose(qz.sum(axis=1), 1.0, atol=1e-9)
    assert (qz >= 0).all()


def test_empty_problem():
    y = np.zeros((0, 3), dtype=np.int32)
    qz, lse = kernels.posterior_step(y, np.log([0.5, 0.5]), np.zeros((3, 2, 2)))
    assert qz.shape == (0, 2)
    assert lse == 0.0


def test_backend_name_exposed():
    assert kernels.BACKEND in ("python", "compiled")


def test_forced_python_backend(monkeypatch):
    import importlib
    import labelfuse._kernels as pkg

    monkeypatch.setenv("LABELFUSE_KERNELS", "python")
    reloaded = importlib.reload(pkg)
    try:
        assert reloaded.BACKEND == "python"
    finally:
        monkeypatch.undo()
        importlib.reload(pkg)
