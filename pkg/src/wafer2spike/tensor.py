"""Dense tensor arithmetic with exact reverse-mode counterparts.

Tensors are plain ``numpy.ndarray`` objects. Every op preserves the floating
dtype of its operands, so the same code path runs in float32 for training and
float64 for gradient checking.
"""

import numpy as np

from .errors import DimensionError, GeometryError

DTYPE = np.float32


def conv_output_size(size, k, stride=1, padding=0):
    """Output extent of a convolution along one axis, or raise GeometryError."""
    if k < 1 or stride < 1 or padding < 0:
        raise GeometryError(f"invalid kernel {k} / stride {stride} / padding {padding}")
    out = (size + 2 * padding - k) // stride + 1
    if size + 2 * padding - k < 0 or out < 1:
        raise GeometryError(
            f"kernel {k} with stride {stride}, padding {padding} does not fit input extent {size}"
        )
    return out


def _check_conv(x, kernel, bias, stride, padding):
    if x.ndim != 4 or kernel.ndim != 4:
        raise DimensionError(f"conv2d expects 4-d input and kernel, got {x.shape} and {kernel.shape}")
    if x.shape[1] != kernel.shape[1]:
        raise DimensionError(f"input depth {x.shape[1]} != kernel depth {kernel.shape[1]}")
    if bias is not None and bias.shape != (kernel.shape[0],):
        raise DimensionError(f"bias shape {bias.shape} != ({kernel.shape[0]},)")
    if stride < 1 or padding < 0:
        raise GeometryError(f"invalid stride {stride} / padding {padding}")
    ho = conv_output_size(x.shape[2], kernel.shape[2], stride, padding)
    wo = conv_output_size(x.shape[3], kernel.shape[3], stride, padding)
    return ho, wo


def _im2col(x, kh, kw, stride, padding, ho, wo):
    """Patch matrix of shape (B*Ho*Wo, Kh*Kw*D), built in channels-last order."""
    b, d = x.shape[:2]
    xn = x.transpose(0, 2, 3, 1)
    if padding:
        xn = np.pad(xn, ((0, 0), (padding, padding), (padding, padding), (0, 0)))
    else:
        xn = np.ascontiguousarray(xn)
    cols = np.empty((b, ho, wo, kh, kw, d), dtype=x.dtype)
    for p in range(kh):
        for q in range(kw):
            cols[:, :, :, p, q, :] = xn[:, p : p + (ho - 1) * stride + 1 : stride, q : q + (wo - 1) * stride + 1 : stride]
    return cols.reshape(b * ho * wo, kh * kw * d)


def _kernel_matrix(kernel):
    return kernel.transpose(0, 2, 3, 1).reshape(kernel.shape[0], -1)


def conv2d(x, kernel, bias=None, stride=1, padding=0):
    """2-d cross-correlation.

    ``out[b, c, i, j] = sum_{d, p, q} xpad[b, d, i*stride + p, j*stride + q] * kernel[c, d, p, q] + bias[c]``

    x: (B, D, H, W); kernel: (C, D, Kh, Kw); bias: (C,) or None.
    Returns (B, C, H', W').
    """
    ho, wo = _check_conv(x, kernel, bias, stride, padding)
    c, _, kh, kw = kernel.shape
    out = _im2col(x, kh, kw, stride, padding, ho, wo) @ _kernel_matrix(kernel).T
    if bias is not None:
        out += bias
    return np.ascontiguousarray(out.reshape(x.shape[0], ho, wo, c).transpose(0, 3, 1, 2))


def conv2d_backward(grad_out, x, kernel, stride=1, padding=0, need_input=True):
    """Adjoint of :func:`conv2d`.

    Returns ``(grad_input, grad_kernel, grad_bias)``. ``grad_input`` is None
    when ``need_input`` is False (first layer of a network).
    """
    ho, wo = _check_conv(x, kernel, None, stride, padding)
    b = x.shape[0]
    c, d, kh, kw = kernel.shape
    if grad_out.shape != (b, c, ho, wo):
        raise DimensionError(f"grad_out shape {grad_out.shape} != {(b, c, ho, wo)}")

    g2 = np.ascontiguousarray(grad_out.transpose(0, 2, 3, 1)).reshape(b * ho * wo, c)
    cols = _im2col(x, kh, kw, stride, padding, ho, wo)
    grad_kernel = (g2.T @ cols).reshape(c, kh, kw, d).transpose(0, 3, 1, 2)
    grad_bias = grad_out.sum(axis=(0, 2, 3))

    grad_input = None
    if need_input:
        gcols = (g2 @ _kernel_matrix(kernel)).reshape(b, ho, wo, kh, kw, d)
        hp, wp = x.shape[2] + 2 * padding, x.shape[3] + 2 * padding
        gpad = np.zeros((b, hp, wp, d), dtype=gcols.dtype)
        for p in range(kh):
            for q in range(kw):
                gpad[:, p : p + (ho - 1) * stride + 1 : stride, q : q + (wo - 1) * stride + 1 : stride] += gcols[:, :, :, p, q]
        if padding:
            gpad = gpad[:, padding : hp - padding, padding : wp - padding]
        grad_input = np.ascontiguousarray(gpad.transpose(0, 3, 1, 2))
    return grad_input, np.ascontiguousarray(grad_kernel), grad_bias


def matmul_affine(x, weight, bias=None):
    """``out[b, u] = sum_v weight[u, v] * x[b, v] + bias[u]``."""
    if x.ndim != 2 or weight.ndim != 2 or x.shape[1] != weight.shape[1]:
        raise DimensionError(f"cannot apply weight {weight.shape} to input {x.shape}")
    if bias is not None and bias.shape != (weight.shape[0],):
        raise DimensionError(f"bias shape {bias.shape} != ({weight.shape[0]},)")
    out = x @ weight.T
    if bias is not None:
        out = out + bias
    return out


def matmul_affine_backward(grad_out, x, weight, need_input=True):
    """Adjoint of :func:`matmul_affine`: ``(grad_input, grad_weight, grad_bias)``."""
    if grad_out.shape != (x.shape[0], weight.shape[0]) or x.shape[1] != weight.shape[1]:
        raise DimensionError(
            f"inconsistent shapes grad_out {grad_out.shape}, input {x.shape}, weight {weight.shape}"
        )
    grad_input = grad_out @ weight if need_input else None
    return grad_input, grad_out.T @ x, grad_out.sum(axis=0)
