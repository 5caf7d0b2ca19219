import sys

import numpy as np
import pytest

from wafer2spike.layers import ConvSpec, Network, NetworkConfig
from wafer2spike.lif import SurrogateSpec


def naive_conv2d(x, kernel, bias, stride, padding):
    """Definitional loop convolution; independent of the library's im2col path."""
    b, d, h, w = x.shape
    c, _, kh, kw = kernel.shape
    xp = np.zeros((b, d, h + 2 * padding, w + 2 * padding), dtype=np.float64)
    xp[:, :, padding : padding + h, padding : padding + w] = x
    ho = (h + 2 * padding - kh) // stride + 1
    wo = (w + 2 * padding - kw) // stride + 1
    out = np.zeros((b, c, ho, wo))
    for n in range(b):
        for o in range(c):
            for i in range(ho):
                for j in range(wo):
                    patch = xp[n, :, i * stride : i * stride + kh, j * stride : j * stride + kw]
                    out[n, o, i, j] = np.sum(patch * kernel[o]) + (bias[o] if bias is not None else 0.0)
    return out


def central_difference(f, arr, eps=1e-6):
    """Numerical gradient of scalar ``f()`` w.r.t. every entry of ``arr`` (mutated in place, restored)."""
    grad = np.zeros_like(arr, dtype=np.float64)
    for idx in np.ndindex(arr.shape):
        old = arr[idx]
        arr[idx] = old + eps
        up = f()
        arr[idx] = old - eps
        down = f()
        arr[idx] = old
        grad[idx] = (up - down) / (2 * eps)
    return grad


def assert_grad_close(analytic, numeric, rtol=1e-4, atol=1e-6):
    err = np.abs(analytic - numeric)
    bound = atol + rtol * np.abs(numeric)
    assert np.all(err <= bound), f"max violation {np.max(err - bound):.3e}"


TINY = dict(
    input_size=6,
    encoder_channels=4,
    encoder_kernel=3,
    convs=(ConvSpec(4, 3, 1, 1),),
    fc_units=8,
    time_steps=2,
)


def tiny_network(seed, jitter=0.3, dtype=np.float64):
    """6x6 input, 3x3/4-map encoder, one spiking conv, FC 8, T=2; parameters perturbed."""
    net = Network.build(NetworkConfig(**TINY), seed=seed, dtype=dtype)
    rng = np.random.default_rng(seed + 1000)
    for _, p in net.named_parameters():
        p += rng.normal(0.0, jitter, p.shape).astype(dtype)
    return net


SMOOTH = SurrogateSpec(width_a=1.0, smooth=True)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        ok, detail = results[n]
        terminalreporter.write_line(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
