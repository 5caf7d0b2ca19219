import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import TINY
from wafer2spike.energy import (
    E_FLOP_J,
    E_SOP_J,
    FiringStats,
    baseline_row,
    energy_csv,
    estimate_network_energy,
    flops_conv,
    flops_fc,
    format_energy_table,
    layer_costs,
    measure_firing_rates,
    power_dnn,
    power_snn,
    sops,
)
from wafer2spike.errors import InputError
from wafer2spike.layers import Network, NetworkConfig


def test_constants():
    assert E_SOP_J == 77e-15 and E_FLOP_J == 12.5e-12


def test_flop_formulas_by_hand():
    assert flops_conv(64, 1, 30, 30, 7, 7) == 64 * 900 * 49 * 2
    assert flops_conv(128, 64, 14, 14, 3, 3) == 28901376
    assert flops_fc(256, 4608) == 2359296


def test_sops_scales_with_rate_and_steps():
    assert sops(1000, 0.25, 4) == 1000
    with pytest.raises(InputError):
        sops(10, -0.1, 4)
    with pytest.raises(InputError):
        sops(10, 0.1, 0)


@settings(max_examples=50, deadline=None)
@given(n=st.floats(0, 1e12))
def test_power_is_linear(n):
    assert power_snn(n) == pytest.approx(77e-12 * n)
    assert power_dnn(n) == pytest.approx(12.5e-9 * n)


def test_firing_stats_gamma():
    assert FiringStats("fc", n_spk=40.0, T=4, sites=100).gamma == 0.1
    assert FiringStats("fc", 0.0, 4, 0).gamma == 0.0


def test_layer_costs_default_2c():
    costs = {name: (desc, fl, sites) for name, desc, fl, sites in layer_costs(Network.build(NetworkConfig(), seed=0))}
    assert list(costs) == ["encoder", "conv1", "conv2", "fc", "output"]
    assert costs["encoder"][2] is None
    assert costs["conv1"] == ((128, 64, 14, 14, 3, 3), 28901376, 64 * 900)
    assert costs["conv2"][1] == flops_conv(128, 128, 6, 6, 3, 3)
    assert costs["fc"] == ((256, 4608), 2359296, 4608)
    assert costs["output"] == ((9, 256), 4608, 256)


def test_estimate_by_hand():
    net = Network.build(NetworkConfig(**TINY), seed=0)
    gammas = {"conv1": 0.5, "fc": 0.25, "output": 0.0}
    rep = estimate_network_energy(net, gammas)
    by = {l.layer: l for l in rep.layers}
    assert by["encoder"].kind == "dense" and by["encoder"].mj == pytest.approx(power_dnn(4 * 16 * 9 * 2))
    conv_flops = flops_conv(4, 4, 4, 4, 3, 3)
    assert by["conv1"].sops == pytest.approx(2 * 0.5 * conv_flops)
    assert rep.total_sops == pytest.approx(2 * 0.5 * conv_flops + 2 * 0.25 * flops_fc(8, 64))
    assert rep.total_mj == pytest.approx(rep.spiking_mj + rep.dense_mj)


def test_estimate_rejects_mismatched_stats():
    net = Network.build(NetworkConfig(**TINY), seed=0)
    with pytest.raises(InputError):
        estimate_network_energy(net, {"conv1": 0.1, "fc": 0.1})


def test_measured_rates_are_densities():
    net = Network.build(NetworkConfig(**TINY), seed=0)
    x = np.random.default_rng(0).uniform(0, 1, (10, 1, 6, 6)).astype(np.float32)
    stats = measure_firing_rates(net, x, batch_size=3)
    assert [s.layer for s in stats] == ["conv1", "fc", "output"]
    assert all(0.0 <= s.gamma <= 1.0 for s in stats)
    # batching does not change the totals
    again = measure_firing_rates(net, x, batch_size=10)
    assert [s.n_spk for s in stats] == pytest.approx([s.n_spk for s in again])
    with pytest.raises(InputError):
        measure_firing_rates(net, x[:0])


def test_baseline_rows():
    assert baseline_row("CNN", flops=0.2391e9).total_mj == pytest.approx(2.98875)
    assert baseline_row("SNN", sops_=1e9).total_mj == pytest.approx(0.077)
    with pytest.raises(InputError):
        baseline_row("x")
    with pytest.raises(InputError):
        baseline_row("x", flops=1, sops_=1)


def test_text_and_csv_outputs():
    net = Network.build(NetworkConfig(**TINY), seed=0)
    rep = estimate_network_energy(net, {"conv1": 0.5, "fc": 0.25, "output": 0.1}, model="M")
    csv = energy_csv(rep).splitlines()
    assert csv[0] == "model,flops,sops,mJ"
    assert csv[1].startswith("M:encoder,") and csv[-1].startswith("M:total,")
    assert float(csv[-1].split(",")[-1]) == pytest.approx(rep.total_mj)
    table = format_energy_table(rep)
    assert "M (spiking)" in table and "M (encoder)" in table
