"""Analytic multiply-accumulate counting."""

from vdeblur.complexity import (attention_core_macs, conv_macs, count_macs,
                                deconv_macs, format_report, gmacs)
from vdeblur.network import NetworkConfig


def test_single_conv_closed_form():
    # 16 -> 16 channels, 3x3 kernel, 64x64 output
    assert conv_macs(16, 16, 3, 64, 64) == 9_437_184


def test_three_hand_computed_layers():
    # entry conv: 3 -> 4 channels, 3x3, 64x64 output
    assert conv_macs(3, 4, 3, 64, 64) == 3 * 4 * 9 * 4096
    # decoder deconv: 16 -> 8 channels, 4x4 kernel, 16x16 input positions
    assert deconv_macs(16, 8, 4, 16, 16) == 16 * 8 * 16 * 256
    # attention core: Q=768, M=4, T=3, K=12, C=16
    assert attention_core_macs(768, 4, 3, 12, 16) == 768 * 4 * 3 * 12 * 5 * 4 + 768 * 256


def test_total_equals_layer_sum():
    cfg = NetworkConfig(channels=16, heads=4, points=12)
    layers, total = count_macs(cfg, (64, 64))
    assert total == sum(m for _, m in layers)
    assert all(m > 0 for _, m in layers)


def test_doubling_dims_quadruples_conv_subtotal():
    cfg = NetworkConfig(channels=16, heads=4, points=12)
    small = dict(count_macs(cfg, (64, 64))[0])
    large = dict(count_macs(cfg, (128, 128))[0])
    for name in small:
        if "attention" in name:
            continue  # projection term scales with Q too, checked separately
        assert large[name] == 4 * small[name]
    assert large["mma.attention"] == 4 * small["mma.attention"]


def test_monotone_in_pixel_count():
    cfg = NetworkConfig(channels=16, heads=4, points=12)
    totals = [count_macs(cfg, (h, h))[1] for h in (32, 64, 96, 128, 192)]
    assert all(a < b for a, b in zip(totals, totals[1:]))


def test_full_scale_config_stays_under_reference_budget():
    # the full-width configuration must land below a 2739-GMAC network
    cfg = NetworkConfig(channels=128, heads=4, points=12)
    assert gmacs(cfg, (720, 1280)) < 2739.0


def test_report_renders_total():
    cfg = NetworkConfig(channels=16, heads=4, points=12)
    report = format_report(cfg, (64, 64))
    assert "total" in report and "GMACs" in report
