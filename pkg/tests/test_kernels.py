"""Parity between the jitted kernels and their plain-numpy twins."""

import os
import subprocess
import sys

import numpy as np
import pytest

from cspar import kernels

needs_numba = pytest.mark.skipif(not kernels.HAVE_NUMBA, reason="numba not installed")


def _forward_args(seed=0):
    rng = np.random.default_rng(seed)
    el = np.zeros((8, 3))
    el[:, 0] = np.arange(8.0)
    src = rng.uniform([0, 0, 5], [8, 4, 15], size=(6, 3))
    amp = rng.uniform(0.5, 2.0, 6)
    traces = np.zeros((8, 400))
    return traces, el, src, amp, 1.5, 20.41, 3.5, 0.107, 0.1


@needs_numba
@pytest.mark.parametrize("atten", [0.0, 1.0])
def test_forward_paths_agree(atten):
    a = kernels._forward_numpy(*_forward_args(), atten)
    b = kernels._forward_jit(*_forward_args(), atten)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-14)


@needs_numba
def test_backproject_paths_agree():
    rng = np.random.default_rng(1)
    sigs = rng.standard_normal((8, 300))
    el = np.zeros((8, 3))
    el[:, 0] = np.arange(8.0) * 0.5
    origin = np.array([0.0, 0.0, 2.0])
    spacing = np.array([0.5, 0.5, 0.25])
    a = kernels._backproject_numpy(np.zeros((6, 5, 7)), sigs, el, origin, spacing, 1.5, 20.41)
    b = kernels._backproject_jit(np.zeros((6, 5, 7)), sigs, el, origin, spacing, 1.5, 20.41)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-14)


@needs_numba
def test_mvm_paths_agree():
    rng = np.random.default_rng(2)
    w = rng.standard_normal((4, 16))
    x = rng.standard_normal((16, 200))
    a = kernels._mvm_numpy(w, x)
    b = kernels._mvm_jit(w, x)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-14)


def test_env_flag_selects_numpy_path():
    code = "from cspar import kernels; print(kernels.USE_NUMBA)"
    env = dict(os.environ, CSPAR_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env,
                         capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "False"


def test_mvm_wrapper_validates_and_computes():
    w = np.array([[1.0, -1.0], [0.0, 2.0]])
    x = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert np.allclose(kernels.mvm(w, x), w @ x)
