"""Current-based leaky integrate-and-fire dynamics.

One step of a layer of neurons::

    isc   = w_scd * isc_prev + psp
    v_pre = w_vd * v_prev + isc
    spk   = v_pre > v_thr
    v     = v_reset where spk else v_pre

In the backward pass the derivative of the step function is replaced by a
rectangular window of width ``width_a`` centred on the threshold. The reset is
written as ``v = v_reset*spk + v_pre*(1 - spk)`` so that it also carries the
surrogate term.

``SurrogateSpec(smooth=True)`` swaps the hard threshold for a sigmoid of slope
``4 / width_a`` (peak derivative ``1 / width_a``) and uses its exact
derivative. That mode exists for finite-difference gradient checks.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ContractError, DimensionError, InputError

DEFAULT_W_SCD = 0.7
DEFAULT_W_VD = 0.8


@dataclass(frozen=True)
class SurrogateSpec:
    width_a: float = 1.0
    smooth: bool = False

    def __post_init__(self):
        if not self.width_a > 0:
            raise InputError(f"surrogate width must be positive, got {self.width_a}")

    @property
    def slope(self):
        return 4.0 / self.width_a


@dataclass
class LifParams:
    w_scd: np.ndarray
    w_vd: np.ndarray
    v_thr: float = 1.0
    v_reset: float = 0.0

    def __post_init__(self):
        if self.w_scd.shape != self.w_vd.shape:
            raise DimensionError(f"decay shapes differ: {self.w_scd.shape} vs {self.w_vd.shape}")
        if not self.v_thr > self.v_reset:
            raise InputError(f"v_thr ({self.v_thr}) must exceed v_reset ({self.v_reset})")

    @classmethod
    def default(cls, shape, v_thr=1.0, v_reset=0.0, dtype=np.float32):
        return cls(
            np.full(shape, DEFAULT_W_SCD, dtype=dtype),
            np.full(shape, DEFAULT_W_VD, dtype=dtype),
            v_thr,
            v_reset,
        )

    @property
    def shape(self):
        return self.w_scd.shape

    def clamp_(self):
        np.clip(self.w_scd, 0.0, 1.0, out=self.w_scd)
        np.clip(self.w_vd, 0.0, 1.0, out=self.w_vd)


@dataclass
class LifState:
    isc: np.ndarray
    v: np.ndarray
    spk: np.ndarray
    # pre-reset membrane potential; only present on states produced by lif_step
    v_pre: Optional[np.ndarray] = None

    @classmethod
    def zeros(cls, batch, shape, dtype=np.float32):
        z = np.zeros((batch, *shape), dtype=dtype)
        return cls(z, z.copy(), z.copy())


def _spike(v_pre, params, spec):
    if spec is not None and spec.smooth:
        return 1.0 / (1.0 + np.exp(-spec.slope * (v_pre - params.v_thr)))
    return (v_pre > params.v_thr).astype(v_pre.dtype)


def surrogate_derivative(v_pre, params, spec=None):
    """Stand-in for d spk / d v_pre."""
    spec = spec or SurrogateSpec()
    if spec.smooth:
        s = _spike(v_pre, params, spec)
        return (spec.slope * s * (1.0 - s)).astype(v_pre.dtype, copy=False)
    inside = np.abs(v_pre - params.v_thr) < spec.width_a / 2
    return inside.astype(v_pre.dtype) / v_pre.dtype.type(spec.width_a)


def lif_step(prev, psp, params, spec=None):
    """Advance one time step. ``psp`` has shape (B, *params.shape)."""
    if psp.shape[1:] != params.shape or prev.v.shape != psp.shape or prev.isc.shape != psp.shape:
        raise DimensionError(
            f"psp {psp.shape}, state {prev.v.shape} incompatible with neuron shape {params.shape}"
        )
    isc = params.w_scd * prev.isc + psp
    v_pre = params.w_vd * prev.v + isc
    spk = _spike(v_pre, params, spec)
    if spec is not None and spec.smooth:
        v = params.v_reset * spk + v_pre * (1.0 - spk)
    else:
        v = np.where(spk > 0, v_pre.dtype.type(params.v_reset), v_pre)
    return LifState(isc, v, spk, v_pre)


def lif_step_backward(grad_spk, grad_v, grad_isc, prev, state, params, spec=None):
    """Reverse-mode counterpart of :func:`lif_step`.

    ``grad_spk``, ``grad_v`` and ``grad_isc`` are cotangents on the returned
    state's ``spk``, ``v`` and ``isc`` (``None`` means zero). Returns
    ``(grad_psp, grad_prev_isc, grad_prev_v, grad_w_scd, grad_w_vd)``; decay
    gradients are summed over the batch axis.
    """
    if state.v_pre is None:
        raise ContractError("state carries no cached pre-reset potential; was it produced by lif_step?")
    v_pre, spk = state.v_pre, state.spk
    dspk = surrogate_derivative(v_pre, params, spec)

    g_s = grad_spk if grad_spk is not None else 0.0
    if grad_v is not None:
        g_u = grad_v * (1.0 - spk) + (g_s + grad_v * (params.v_reset - v_pre)) * dspk
    else:
        g_u = g_s * dspk
    g_u = np.broadcast_to(g_u, v_pre.shape)
    g_isc = g_u if grad_isc is None else g_u + grad_isc

    grad_w_scd = (g_isc * prev.isc).sum(axis=0)
    grad_w_vd = (g_u * prev.v).sum(axis=0)
    return g_isc, g_isc * params.w_scd, g_u * params.w_vd, grad_w_scd, grad_w_vd
