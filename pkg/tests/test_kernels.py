import os
import subprocess
import sys

import numpy as np
import pytest

from ordgrade import _kernels_py
from conftest import _compiled

needs_compiled = pytest.mark.skipif(_compiled is None, reason="compiled extension not built")


@needs_compiled
@pytest.mark.parametrize("order, alpha, scale", [(2, 2, 1), (1, 1, 1), (0.6, 1.4, 1), (3, 0.5, 1), (2, 1, 5 ** -0.5)])
def test_emd_backends_agree(order, alpha, scale, rng):
    z = rng.normal(size=(300, 5)) * 3
    g = rng.integers(0, 5, 300)
    l1, g1 = _compiled.emd_loss_grad(z, g, order, alpha, scale, 1e-12, True)
    l2, g2 = _kernels_py.emd_loss_grad(z, g, order, alpha, scale, 1e-12, True)
    np.testing.assert_allclose(l1, l2, rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(g1, g2, rtol=1e-10, atol=1e-13)


@needs_compiled
def test_emd_without_gradient(rng):
    z = rng.normal(size=(10, 5))
    g = rng.integers(0, 5, 10)
    loss, grad = _compiled.emd_loss_grad(z, g, 2, 2, 1, 1e-12, False)
    assert grad is None
    np.testing.assert_allclose(loss, _kernels_py.emd_loss_grad(z, g, 2, 2, 1, 1e-12, False)[0], rtol=1e-13)


@needs_compiled
def test_kendall_backends_agree(rng):
    for n in (2, 3, 17, 250):
        x = rng.integers(1, 6, n).astype(float)
        y = x + rng.integers(-1, 2, n)
        assert _compiled.kendall_counts(x, y) == _kernels_py.kendall_counts(x, y)


@needs_compiled
def test_hash_backends_agree():
    tokens = [f"response:tok{k}".encode() for k in range(500)] + ["rubric:ünïcode".encode(), b""]
    a = np.zeros(64)
    b = np.zeros(64)
    _compiled.hash_tokens(tokens, a)
    _kernels_py.hash_tokens(tokens, b)
    np.testing.assert_array_equal(a, b)
    assert all(_compiled.fnv1a64(t) == _kernels_py.fnv1a64(t) for t in tokens)


def test_fnv_reference_vectors(kernel_module):
    # published FNV-1a 64-bit test vectors
    assert kernel_module.fnv1a64(b"") == 0xCBF29CE484222325
    assert kernel_module.fnv1a64(b"a") == 0xAF63DC4C8601EC8C
    assert kernel_module.fnv1a64(b"foobar") == 0x85944171F73967E8


def test_kendall_counts_small(kernel_module):
    # pairs: (1,2) concordant, (1,3) concordant, (2,3) discordant
    assert kernel_module.kendall_counts([1, 2, 3], [1, 3, 2]) == (1, 0, 0)
    # (0,1) tied in x, (0,2) concordant, (1,2) tied in y
    assert kernel_module.kendall_counts([1, 1, 2], [1, 2, 2]) == (1, 1, 1)


def test_pure_python_switch():
    env = dict(os.environ, ORDGRADE_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import ordgrade; print(ordgrade.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
