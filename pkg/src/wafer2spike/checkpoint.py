"""W2S1 checkpoint container.

All integers and floats are little-endian::

    b"W2S1"
    u32  format version (1)
    f32  v_thr
    f32  v_reset
    u32  number of layers
    per layer descriptor:
        u8   type tag (1 encoder, 2 spiking conv, 3 spiking fc, 4 output)
        u8   number of ints n
        n x u32
            encoder / conv: out_ch, in_ch, kh, kw, stride, padding, in_h, in_w
            fc:             units, inputs
            output:         classes, units, time_steps
    u32  number of tensors
    per tensor: u8 ndim, ndim x u32 dims
    raw f32 data of every tensor, in declaration order:
        encoder / conv: kernel, bias, w_scd, w_vd
        fc:             weight, bias, w_scd, w_vd
        output:         weight, bias, time_weights

An optional trailer (epoch and optimizer state) follows the tensor data::

    b"OPT1"
    u32  epoch
    u32  step
    f64  current learning rate
    u8   1 if Adam moments follow, else 0
    [raw f32 first moments, then raw f32 second moments, same order and shapes]

Float32 parameters round-trip bit-exactly.
"""

import struct
from pathlib import Path

import numpy as np

from .errors import FormatError
from .layers import EncoderLayer, Network, OutputLayer, SpikingConvLayer, SpikingFcLayer
from .lif import LifParams

MAGIC = b"W2S1"
TRAILER = b"OPT1"
VERSION = 1
_F32 = np.dtype("<f4")


def _layer_record(layer):
    ints = tuple(int(i) for i in layer.descriptor())
    return struct.pack(f"<BB{len(ints)}I", layer.tag, len(ints), *ints)


def save_checkpoint(path, network, state=None, epoch=0):
    params = network.named_parameters()
    parts = [MAGIC, struct.pack("<Iff", VERSION, network.v_thr, network.v_reset)]
    parts.append(struct.pack("<I", len(network.layers)))
    parts.extend(_layer_record(layer) for layer in network.layers)
    parts.append(struct.pack("<I", len(params)))
    for _, arr in params:
        parts.append(struct.pack(f"<B{arr.ndim}I", arr.ndim, *arr.shape))
    for _, arr in params:
        parts.append(np.ascontiguousarray(arr, dtype=_F32).tobytes())
    if state is not None or epoch:
        step, lr = (state.step, state.lr or 0.0) if state is not None else (0, 0.0)
        has_moments = state is not None and bool(state.m)
        parts.append(TRAILER + struct.pack("<IIdB", epoch, step, lr, int(has_moments)))
        if has_moments:
            for store in (state.m, state.v):
                for name, arr in params:
                    parts.append(np.ascontiguousarray(store[name], dtype=_F32).tobytes())
    Path(path).write_bytes(b"".join(parts))


class _Reader:
    def __init__(self, buf, path):
        self.buf, self.off, self.path = buf, 0, path

    def take(self, fmt):
        size = struct.calcsize(fmt)
        if self.off + size > len(self.buf):
            raise FormatError(f"{self.path}: truncated checkpoint", self.off)
        out = struct.unpack_from(fmt, self.buf, self.off)
        self.off += size
        return out

    def array(self, shape):
        n = int(np.prod(shape)) if shape else 1
        if self.off + 4 * n > len(self.buf):
            raise FormatError(f"{self.path}: truncated tensor data", self.off)
        arr = np.frombuffer(self.buf, dtype=_F32, count=n, offset=self.off).reshape(shape)
        self.off += 4 * n
        return arr.astype(np.float32)


def load_checkpoint(path):
    """Returns ``(network, extras)``; ``extras`` holds epoch and optimizer state if saved."""
    from .training import OptimizerState

    buf = Path(path).read_bytes()
    r = _Reader(buf, path)
    if buf[:4] != MAGIC:
        raise FormatError(f"{path}: bad magic {buf[:4]!r}", 0)
    r.off = 4
    version, v_thr, v_reset = r.take("<Iff")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}", 4)
    (n_layers,) = r.take("<I")
    descriptors = []
    for _ in range(n_layers):
        tag, n = r.take("<BB")
        descriptors.append((tag, r.take(f"<{n}I")))
    (n_tensors,) = r.take("<I")
    shapes = []
    for _ in range(n_tensors):
        (ndim,) = r.take("<B")
        shapes.append(r.take(f"<{ndim}I"))
    arrays = [r.array(s) for s in shapes]

    it = iter(arrays)
    layers = []
    try:
        for tag, ints in descriptors:
            if tag in (1, 2):
                cls = EncoderLayer if tag == 1 else SpikingConvLayer
                kernel, bias, w_scd, w_vd = next(it), next(it), next(it), next(it)
                layers.append(cls(kernel, bias, LifParams(w_scd, w_vd, float(v_thr), float(v_reset)), ints[4], ints[5]))
            elif tag == 3:
                weight, bias, w_scd, w_vd = next(it), next(it), next(it), next(it)
                layers.append(SpikingFcLayer(weight, bias, LifParams(w_scd, w_vd, float(v_thr), float(v_reset))))
            elif tag == 4:
                layers.append(OutputLayer(next(it), next(it), next(it)))
            else:
                raise FormatError(f"{path}: unknown layer tag {tag}")
    except StopIteration:
        raise FormatError(f"{path}: fewer tensors than the layer table needs") from None
    if len(layers) < 3 or layers[0].tag != 1 or layers[-1].tag != 4 or layers[-2].tag != 3:
        raise FormatError(f"{path}: layer table is not encoder / conv* / fc / output")
    network = Network(layers[0], layers[1:-2], layers[-2], layers[-1])
    for layer, (tag, ints) in zip(network.layers, descriptors):
        if tuple(layer.descriptor()) != tuple(ints):
            raise FormatError(f"{path}: layer descriptor {ints} disagrees with tensor shapes")

    extras = {"epoch": 0, "state": None}
    if r.off < len(buf):
        if buf[r.off : r.off + 4] != TRAILER:
            raise FormatError(f"{path}: unexpected trailing data", r.off)
        r.off += 4
        epoch, step, lr, has_moments = r.take("<IIdB")
        state = OptimizerState(step=step, lr=lr)
        if has_moments:
            names = [n for n, _ in network.named_parameters()]
            for store in (state.m, state.v):
                for name, shape in zip(names, shapes):
                    store[name] = r.array(shape)
        # a trailer with no step count only records the epoch
        extras = {"epoch": epoch, "state": state if step or has_moments else None}
        if r.off != len(buf):
            raise FormatError(f"{path}: trailing bytes after optimizer state", r.off)
    return network, extras
