"""Spiking layers and the Wafer2Spike network stack.

The stack is: convolutional spike encoder -> N spiking conv layers -> spiking
fully connected layer -> non-spiking output decoder. The encoder sees the same
static wafer tensor at every time step; only LIF state evolves.

Per-step functions (``encoder_forward``, ``spiking_conv_forward``, ...) follow
one layer through one time step. :class:`Network` evaluates the whole unrolled
graph layer-major: each layer's affine map runs once over all ``T`` steps
stacked along the batch axis, then the LIF recurrence walks through time. The
result is identical to time-major evaluation because a layer at step ``t``
depends only on the layer below at ``t`` and on its own state at ``t - 1``.
"""

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .errors import ContractError, DimensionError, InputError
from .lif import LifParams, LifState, SurrogateSpec, lif_step, lif_step_backward
from .tensor import (
    DTYPE,
    conv2d,
    conv2d_backward,
    conv_output_size,
    matmul_affine,
    matmul_affine_backward,
)

N_CLASSES = 9


# --------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class ConvSpec:
    out_channels: int
    kernel: int = 3
    stride: int = 1
    padding: int = 0


_SC_2C = (ConvSpec(128, 3, 2, 0), ConvSpec(128, 3, 2, 0))
_SC_EXTRA = ConvSpec(128, 3, 1, 1)


@dataclass
class NetworkConfig:
    input_size: int = 36
    in_channels: int = 1
    encoder_channels: int = 64
    encoder_kernel: int = 7
    convs: tuple = _SC_2C
    fc_units: int = 256
    n_classes: int = N_CLASSES
    time_steps: int = 4
    v_thr: float = 1.0
    v_reset: float = 0.0
    # weights ~ U(-b, b) with b = sqrt(init_scale / fan_in); 6 is He-uniform
    init_scale: float = 6.0

    @classmethod
    def variant(cls, name="2C", **overrides):
        """Default stacks: 2C (30->14->6), 3C and 4C add 128->128 3x3 pad-1 layers at 6x6."""
        extra = {"2C": 0, "3C": 1, "4C": 2}
        key = name.upper()
        if key not in extra:
            raise InputError(f"unknown variant {name!r}; expected 2C, 3C or 4C")
        convs = _SC_2C + (_SC_EXTRA,) * extra[key]
        overrides.setdefault("convs", convs)
        return cls(**overrides)

    def __post_init__(self):
        self.convs = tuple(c if isinstance(c, ConvSpec) else ConvSpec(*c) for c in self.convs)
        if self.time_steps < 1:
            raise InputError("time_steps must be >= 1")
        if self.fc_units < 1 or self.n_classes < 1:
            raise InputError("fc_units and n_classes must be positive")

    def shapes(self):
        """Neuron shape of every spiking layer, encoder first, FC last."""
        s = conv_output_size(self.input_size, self.encoder_kernel)
        out = [(self.encoder_channels, s, s)]
        for c in self.convs:
            s = conv_output_size(s, c.kernel, c.stride, c.padding)
            out.append((c.out_channels, s, s))
        out.append((self.fc_units,))
        return out


def _uniform(rng, shape, fan_in, dtype, scale):
    bound = np.sqrt(scale / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


# --------------------------------------------------------------------------
# layers


@dataclass
class EncoderLayer:
    kernel: np.ndarray
    bias: np.ndarray
    lif: LifParams
    stride: int = 1
    padding: int = 0

    tag = 1

    @property
    def input_hw(self):
        _, h, w = self.lif.shape
        kh, kw = self.kernel.shape[2:]
        return ((h - 1) * self.stride + kh - 2 * self.padding, (w - 1) * self.stride + kw - 2 * self.padding)

    def param_names(self):
        return ("kernel", "bias", "w_scd", "w_vd")

    def psp(self, x):
        return conv2d(x, self.kernel, self.bias, self.stride, self.padding)

    def psp_backward(self, grad_psp, x, need_input=True):
        gx, gk, gb = conv2d_backward(grad_psp, x, self.kernel, self.stride, self.padding, need_input)
        return gx, {"kernel": gk, "bias": gb}

    def descriptor(self):
        c, d, kh, kw = self.kernel.shape
        return (c, d, kh, kw, self.stride, self.padding, *self.input_hw)


@dataclass
class SpikingConvLayer(EncoderLayer):
    tag = 2


@dataclass
class SpikingFcLayer:
    weight: np.ndarray
    bias: np.ndarray
    lif: LifParams

    tag = 3

    def param_names(self):
        return ("weight", "bias", "w_scd", "w_vd")

    def psp(self, x):
        return matmul_affine(x.reshape(x.shape[0], -1), self.weight, self.bias)

    def psp_backward(self, grad_psp, x, need_input=True):
        flat = x.reshape(x.shape[0], -1)
        gx, gw, gb = matmul_affine_backward(grad_psp, flat, self.weight, need_input)
        if gx is not None:
            gx = gx.reshape(x.shape)
        return gx, {"weight": gw, "bias": gb}

    def descriptor(self):
        return self.weight.shape


@dataclass
class OutputLayer:
    weight: np.ndarray
    bias: np.ndarray
    time_weights: np.ndarray

    tag = 4

    def param_names(self):
        return ("weight", "bias", "time_weights")

    def descriptor(self):
        return (*self.weight.shape, len(self.time_weights))


def _params(layer):
    out = []
    for name in layer.param_names():
        if name in ("w_scd", "w_vd"):
            out.append((name, getattr(layer.lif, name)))
        else:
            out.append((name, getattr(layer, name)))
    return out


# --------------------------------------------------------------------------
# per-step ops


def _check_binary(spikes):
    if not np.all((spikes == 0) | (spikes == 1)):
        raise ContractError("spiking layer input is not 0/1-valued")


def encoder_forward(wafer_input, layer, prev, spec=None):
    """One encoder step. Returns ``(spikes, next_state, cache)``."""
    if wafer_input.ndim != 4 or wafer_input.shape[2:] != layer.input_hw:
        raise DimensionError(f"encoder expects (B, D, {layer.input_hw[0]}, {layer.input_hw[1]}), got {wafer_input.shape}")
    nxt = lif_step(prev, layer.psp(wafer_input), layer.lif, spec)
    return nxt.spk, nxt, (wafer_input, prev, nxt)


def spiking_conv_forward(spikes_in, layer, prev, spec=None, checked=False):
    if checked:
        _check_binary(spikes_in)
    nxt = lif_step(prev, layer.psp(spikes_in), layer.lif, spec)
    return nxt.spk, nxt, (spikes_in, prev, nxt)


def spiking_fc_forward(spikes_in, layer, prev, spec=None):
    nxt = lif_step(prev, layer.psp(spikes_in), layer.lif, spec)
    return nxt.spk, nxt, (spikes_in, prev, nxt)


def output_decode(spike_history, layer):
    """Decode ``(T, B, U)`` spikes into ``(class_scores, per_step)``.

    ``per_step[t] = weight @ spk_t + bias``; ``class_scores = sum_t time_weights[t] * per_step[t]``.
    Scores are unnormalized; softmax lives in the loss.
    """
    t, b, u = spike_history.shape
    if t != len(layer.time_weights):
        raise DimensionError(f"history has {t} steps but decoder has {len(layer.time_weights)} time weights")
    per_step = matmul_affine(spike_history.reshape(t * b, u), layer.weight, layer.bias).reshape(t, b, -1)
    scores = np.tensordot(layer.time_weights, per_step, axes=(0, 0))
    return scores, per_step


# --------------------------------------------------------------------------
# network


@dataclass
class ForwardCache:
    x: np.ndarray
    # per spiking layer: stacked (T*B, ...) input, list of T LifStates
    inputs: List[np.ndarray] = field(default_factory=list)
    states: List[List[LifState]] = field(default_factory=list)
    per_step: Optional[np.ndarray] = None
    fc_spikes: Optional[np.ndarray] = None
    spec: Optional[SurrogateSpec] = None

    def spikes(self, i):
        """Spike history ``(T, B, ...)`` of spiking layer ``i``."""
        return np.stack([s.spk for s in self.states[i]])


class Network:
    """Encoder + spiking conv stack + spiking FC + output decoder."""

    def __init__(self, encoder, convs, fc, output):
        self.encoder = encoder
        self.convs = list(convs)
        self.fc = fc
        self.output = output
        self._check_pipeline()

    @classmethod
    def build(cls, config=None, seed=0, dtype=DTYPE):
        config = config or NetworkConfig()
        rng = np.random.default_rng(seed)
        shapes = config.shapes()
        kw = dict(v_thr=config.v_thr, v_reset=config.v_reset, dtype=dtype)

        k = config.encoder_kernel
        fan = config.in_channels * k * k
        encoder = EncoderLayer(
            _uniform(rng, (config.encoder_channels, config.in_channels, k, k), fan, dtype, config.init_scale),
            np.zeros(config.encoder_channels, dtype=dtype),
            LifParams.default(shapes[0], **kw),
        )
        convs = []
        depth = config.encoder_channels
        for spec, shape in zip(config.convs, shapes[1:-1]):
            fan = depth * spec.kernel * spec.kernel
            convs.append(
                SpikingConvLayer(
                    _uniform(rng, (spec.out_channels, depth, spec.kernel, spec.kernel), fan, dtype, config.init_scale),
                    np.zeros(spec.out_channels, dtype=dtype),
                    LifParams.default(shape, **kw),
                    spec.stride,
                    spec.padding,
                )
            )
            depth = spec.out_channels
        flat = int(np.prod(shapes[-2]))
        fc = SpikingFcLayer(
            _uniform(rng, (config.fc_units, flat), flat, dtype, config.init_scale),
            np.zeros(config.fc_units, dtype=dtype),
            LifParams.default(shapes[-1], **kw),
        )
        output = OutputLayer(
            _uniform(rng, (config.n_classes, config.fc_units), config.fc_units, dtype, config.init_scale),
            np.zeros(config.n_classes, dtype=dtype),
            np.full(config.time_steps, 1.0 / config.time_steps, dtype=dtype),
        )
        return cls(encoder, convs, fc, output)

    # -- structure ---------------------------------------------------------

    @property
    def spiking_layers(self):
        return [self.encoder, *self.convs, self.fc]

    @property
    def layers(self):
        return [*self.spiking_layers, self.output]

    @property
    def time_steps(self):
        return len(self.output.time_weights)

    @property
    def n_classes(self):
        return self.output.weight.shape[0]

    @property
    def dtype(self):
        return self.encoder.kernel.dtype

    @property
    def v_thr(self):
        return self.encoder.lif.v_thr

    @property
    def v_reset(self):
        return self.encoder.lif.v_reset

    def _check_pipeline(self):
        prev_shape = self.encoder.lif.shape
        for i, layer in enumerate(self.convs):
            c, d, kh, kw = layer.kernel.shape
            if d != prev_shape[0]:
                raise DimensionError(f"conv layer {i} expects depth {d}, previous layer emits {prev_shape[0]}")
            ho = conv_output_size(prev_shape[1], kh, layer.stride, layer.padding)
            wo = conv_output_size(prev_shape[2], kw, layer.stride, layer.padding)
            if layer.lif.shape != (c, ho, wo):
                raise DimensionError(f"conv layer {i} neuron shape {layer.lif.shape} != {(c, ho, wo)}")
            prev_shape = layer.lif.shape
        flat = int(np.prod(prev_shape))
        if self.fc.weight.shape[1] != flat or self.fc.lif.shape != (self.fc.weight.shape[0],):
            raise DimensionError(f"fc weight {self.fc.weight.shape} does not fit flattened input {flat}")
        if self.output.weight.shape[1] != self.fc.weight.shape[0]:
            raise DimensionError("output layer width does not match fc units")

    def named_parameters(self):
        """Ordered ``(name, array)`` pairs; arrays are the live parameters."""
        names = ["encoder"] + [f"conv{i + 1}" for i in range(len(self.convs))] + ["fc", "output"]
        out = []
        for prefix, layer in zip(names, self.layers):
            out.extend((f"{prefix}.{n}", a) for n, a in _params(layer))
        return out

    def parameters(self):
        return dict(self.named_parameters())

    def copy(self):
        clone = Network.__new__(Network)
        clone.encoder = _clone(self.encoder)
        clone.convs = [_clone(c) for c in self.convs]
        clone.fc = _clone(self.fc)
        clone.output = _clone(self.output)
        return clone

    # -- forward / backward -------------------------------------------------

    def forward(self, x, spec=None):
        """Run ``T`` steps on a static input ``x`` of shape (B, 1, H, W).

        Returns ``(class_scores, cache)``.
        """
        if x.ndim != 4 or x.shape[2:] != self.encoder.input_hw:
            raise DimensionError(f"network expects (B, 1, {self.encoder.input_hw[0]}, {self.encoder.input_hw[1]}), got {x.shape}")
        x = x.astype(self.dtype, copy=False)
        T, B = self.time_steps, x.shape[0]
        cache = ForwardCache(x=x, spec=spec)

        psp = self.encoder.psp(x)
        states = _lif_run([psp] * T, self.encoder.lif, spec)
        cache.inputs.append(x)
        cache.states.append(states)

        for layer in [*self.convs, self.fc]:
            stacked = np.concatenate([s.spk for s in states])
            psp = layer.psp(stacked)
            states = _lif_run(np.split(psp, T), layer.lif, spec)
            cache.inputs.append(stacked)
            cache.states.append(states)

        cache.fc_spikes = np.stack([s.spk for s in states])
        scores, cache.per_step = output_decode(cache.fc_spikes, self.output)
        return scores, cache

    def backward(self, cache, grad_scores):
        """Spatio-temporal backprop. Returns ``{param_name: gradient}``."""
        T = self.time_steps
        if cache.per_step is None or len(cache.states) != len(self.spiking_layers):
            raise ContractError("forward cache does not match this network")
        if cache.per_step.shape[0] != T or any(len(s) != T for s in cache.states):
            raise ContractError("forward cache covers a different number of time steps")
        spec = cache.spec
        grads = {}
        out = self.output

        g = grad_scores.astype(self.dtype, copy=False)
        grads["output.time_weights"] = np.einsum("tbc,bc->t", cache.per_step, g)
        g_prob = out.time_weights[:, None, None] * g[None]
        u = cache.fc_spikes.shape[-1]
        g_spk, gw, gb = matmul_affine_backward(
            g_prob.reshape(-1, g.shape[1]), cache.fc_spikes.reshape(-1, u), out.weight
        )
        grads["output.weight"], grads["output.bias"] = gw, gb
        g_spk = np.split(g_spk, T)

        names = ["encoder"] + [f"conv{i + 1}" for i in range(len(self.convs))] + ["fc"]
        for idx in range(len(self.spiking_layers) - 1, -1, -1):
            layer, name = self.spiking_layers[idx], names[idx]
            g_psp, g_scd, g_vd = _lif_run_backward(g_spk, cache.states[idx], layer.lif, spec)
            grads[f"{name}.w_scd"], grads[f"{name}.w_vd"] = g_scd, g_vd
            if idx == 0:
                _, pg = layer.psp_backward(sum(g_psp), cache.inputs[0], need_input=False)
            else:
                gx, pg = layer.psp_backward(np.concatenate(g_psp), cache.inputs[idx])
                g_spk = np.split(gx, T)
            for k, v in pg.items():
                grads[f"{name}.{k}"] = v
        return grads


def network_forward(wafer_input, network, spec=None):
    return network.forward(wafer_input, spec)


def _clone(layer):
    kwargs = {}
    for name, value in vars(layer).items():
        if isinstance(value, LifParams):
            value = LifParams(value.w_scd.copy(), value.w_vd.copy(), value.v_thr, value.v_reset)
        elif isinstance(value, np.ndarray):
            value = value.copy()
        kwargs[name] = value
    return type(layer)(**kwargs)


def _lif_run(psps, params, spec):
    state = LifState.zeros(psps[0].shape[0], params.shape, psps[0].dtype)
    states = []
    for psp in psps:
        state = lif_step(state, psp, params, spec)
        states.append(state)
    return states


def _lif_run_backward(g_spk, states, params, spec):
    T = len(states)
    zero = LifState.zeros(states[0].v.shape[0], params.shape, states[0].v.dtype)
    g_psp = [None] * T
    g_isc = g_v = None
    g_scd = np.zeros_like(params.w_scd)
    g_vd = np.zeros_like(params.w_vd)
    for t in range(T - 1, -1, -1):
        prev = states[t - 1] if t else zero
        g_psp[t], g_isc, g_v, a, b = lif_step_backward(g_spk[t], g_v, g_isc, prev, states[t], params, spec)
        g_scd += a
        g_vd += b
    return g_psp, g_scd, g_vd
