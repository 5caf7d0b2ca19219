"""FLOPs / SOPs accounting and inference energy estimates.

Spiking layers cost ``T * gamma * FLOPs`` synaptic operations at 77 fJ each;
conventional layers cost 12.5 pJ per FLOP. ``gamma`` is the mean density of
spikes entering a layer (spikes per input site per time step).

The encoder's input is the real-valued wafer map, not spikes, so its
convolution is costed as FLOPs at the DNN rate. It runs once per inference
because the input is static. Totals are reported with and without that line.
"""

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .errors import InputError

E_SOP_J = 77e-15
E_FLOP_J = 12.5e-12


def flops_conv(c, d, w_c, h_c, w_w, h_w):
    """Output maps x input channels x output w x output h x kernel w x kernel h x 2."""
    return int(c) * int(d) * int(w_c) * int(h_c) * int(w_w) * int(h_w) * 2


def flops_fc(u, u_prev):
    return int(u) * int(u_prev) * 2


def sops(layer_flops, gamma, T):
    if gamma < 0 or T < 1:
        raise InputError(f"need gamma >= 0 and T >= 1, got gamma={gamma}, T={T}")
    return T * gamma * layer_flops


def power_snn(total_sops):
    """Energy in mJ for ``total_sops`` synaptic operations."""
    return E_SOP_J * total_sops * 1e3


def power_dnn(total_flops):
    """Energy in mJ for ``total_flops`` floating point operations."""
    return E_FLOP_J * total_flops * 1e3


@dataclass
class FiringStats:
    layer: str
    n_spk: float  # spikes entering the layer, summed over steps and averaged over samples
    T: int
    sites: int  # input neuron sites of the layer

    @property
    def gamma(self):
        return self.n_spk / (self.T * self.sites) if self.sites else 0.0


@dataclass
class LayerCost:
    layer: str
    kind: str  # "spiking" or "dense"
    descriptor: tuple
    flops: int
    gamma: Optional[float] = None
    sops: Optional[float] = None
    mj: float = 0.0


@dataclass
class EnergyReport:
    model: str
    T: int
    layers: List[LayerCost] = field(default_factory=list)

    @property
    def total_sops(self):
        return sum(l.sops for l in self.layers if l.kind == "spiking")

    @property
    def spiking_mj(self):
        return sum(l.mj for l in self.layers if l.kind == "spiking")

    @property
    def dense_flops(self):
        return sum(l.flops for l in self.layers if l.kind == "dense")

    @property
    def dense_mj(self):
        return sum(l.mj for l in self.layers if l.kind == "dense")

    @property
    def total_mj(self):
        return self.spiking_mj + self.dense_mj


def layer_costs(network):
    """``(name, descriptor, flops, input_sites)`` for every layer, encoder first."""
    out = []
    enc = network.encoder
    c, d, kh, kw = enc.kernel.shape
    _, ho, wo = enc.lif.shape
    out.append(("encoder", (c, d, wo, ho, kw, kh), flops_conv(c, d, wo, ho, kw, kh), None))
    prev = enc.lif.shape
    for i, layer in enumerate(network.convs):
        c, d, kh, kw = layer.kernel.shape
        _, ho, wo = layer.lif.shape
        out.append((f"conv{i + 1}", (c, d, wo, ho, kw, kh), flops_conv(c, d, wo, ho, kw, kh), int(np.prod(prev))))
        prev = layer.lif.shape
    u, u_prev = network.fc.weight.shape
    out.append(("fc", (u, u_prev), flops_fc(u, u_prev), u_prev))
    k, u = network.output.weight.shape
    out.append(("output", (k, u), flops_fc(k, u), u))
    return out


def measure_firing_rates(network, x, batch_size=128):
    """Per-layer input spike density over the samples in ``x``.

    Counts are accumulated per batch and merged afterwards. Returns one
    :class:`FiringStats` per spike-consuming layer (every layer after the encoder).
    """
    x = np.asarray(x)
    if len(x) == 0:
        raise InputError("firing rates need at least one sample")
    T = network.time_steps
    names = [f"conv{i + 1}" for i in range(len(network.convs))] + ["fc", "output"]
    totals = np.zeros(len(names))
    for start in range(0, len(x), batch_size):
        _, cache = network.forward(x[start : start + batch_size])
        # spikes entering layer k are those emitted by spiking layer k
        for k in range(len(names)):
            totals[k] += float(cache.spikes(k).sum())
    sites = [int(np.prod(layer.lif.shape)) for layer in network.spiking_layers]
    return [FiringStats(name, totals[k] / len(x), T, sites[k]) for k, name in enumerate(names)]


def estimate_network_energy(network, stats, T=None, model="Wafer2Spike"):
    """Energy report for ``network`` given per-layer firing statistics.

    ``stats`` is a list of :class:`FiringStats` or a ``{layer: gamma}`` dict and
    must cover exactly the spike-consuming layers.
    """
    T = T or network.time_steps
    gammas = {s.layer: s.gamma for s in stats} if not isinstance(stats, dict) else dict(stats)
    costs = layer_costs(network)
    expected = {name for name, _, _, sites in costs if sites is not None}
    if set(gammas) != expected:
        raise InputError(f"firing stats cover {sorted(gammas)} but network has {sorted(expected)}")
    report = EnergyReport(model, T)
    for name, desc, fl, sites in costs:
        if sites is None:
            report.layers.append(LayerCost(name, "dense", desc, fl, mj=power_dnn(fl)))
        else:
            s = sops(fl, gammas[name], T)
            report.layers.append(LayerCost(name, "spiking", desc, fl, gammas[name], s, power_snn(s)))
    return report


def baseline_row(model, flops=None, sops_=None):
    """A single-line report for a published model: DNN FLOPs or SNN SOPs."""
    if (flops is None) == (sops_ is None):
        raise InputError("give exactly one of flops or sops")
    report = EnergyReport(model, 1)
    if flops is not None:
        report.layers.append(LayerCost("total", "dense", (), int(round(flops)), mj=power_dnn(flops)))
    else:
        report.layers.append(LayerCost("total", "spiking", (), 0, 1.0, float(sops_), power_snn(sops_)))
    return report


def format_energy_table(report):
    """Aligned table mirroring the published layout plus a per-layer breakdown."""
    lines = [f"{'layer':<10}{'kind':<9}{'FLOPs (1e9)':>13}{'gamma':>9}{'SOPs (1e9)':>13}{'Power (mJ)':>13}"]
    for l in report.layers:
        gamma = "" if l.gamma is None else f"{l.gamma:.4f}"
        s = "" if l.sops is None else f"{l.sops / 1e9:.4f}"
        lines.append(f"{l.layer:<10}{l.kind:<9}{l.flops / 1e9:>13.4f}{gamma:>9}{s:>13}{l.mj:>13.4f}")
    lines.append("")
    lines.append(f"{'Model':<24}{'FLOPs / SOPs (1e9)':>20}{'Power (mJ)':>13}")
    if any(l.kind == "spiking" for l in report.layers):
        lines.append(f"{report.model + ' (spiking)':<24}{report.total_sops / 1e9:>20.4f}{report.spiking_mj:>13.4f}")
    if any(l.kind == "dense" for l in report.layers):
        label = report.model + (" (encoder)" if any(l.kind == "spiking" for l in report.layers) else "")
        lines.append(f"{label:<24}{report.dense_flops / 1e9:>20.4f}{report.dense_mj:>13.4f}")
    lines.append(f"{report.model + ' (total)':<24}{'':>20}{report.total_mj:>13.4f}")
    return "\n".join(lines) + "\n"


def energy_csv(report):
    """CSV with columns model, flops, sops, mJ; one row per layer then totals."""
    rows = ["model,flops,sops,mJ"]
    for l in report.layers:
        s = "" if l.sops is None else repr(float(l.sops))
        rows.append(f"{report.model}:{l.layer},{l.flops},{s},{l.mj!r}")
    rows.append(f"{report.model}:spiking_total,{sum(l.flops for l in report.layers if l.kind == 'spiking')},{float(report.total_sops)!r},{report.spiking_mj!r}")
    rows.append(f"{report.model}:total,{sum(l.flops for l in report.layers)},{float(report.total_sops)!r},{report.total_mj!r}")
    return "\n".join(rows) + "\n"
