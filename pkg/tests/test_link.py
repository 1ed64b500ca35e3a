import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gosnrmon import InvalidArgumentError, InvalidConfigError
from gosnrmon.link import (
    AmplifierNode,
    FiberSpan,
    LinkSpec,
    LumpedGain,
    LumpedLoss,
    NoiseStep,
    beta2_from_dispersion,
    compile_link,
    cumulative_beta2,
    link_from_config,
    link_to_config,
)

from conftest import small_link

BETA2_SSMF = -21.6826  # ps^2/km: 17 * 1550**2 / (2 pi * 299792.458 nm/ps)


def six_by_eighty(**extra):
    return small_link(spans=6, length_km=80.0, **extra)


def test_beta2_from_dispersion():
    assert beta2_from_dispersion(17.0) == pytest.approx(BETA2_SSMF, abs=5e-4)
    assert beta2_from_dispersion(0.0) == 0.0


def test_six_by_eighty_totals():
    plan = compile_link(six_by_eighty())
    assert plan.total_length_km == 480.0
    assert cumulative_beta2(plan, 480.0) == pytest.approx(480 * beta2_from_dispersion(17.0), rel=1e-14)
    assert cumulative_beta2(plan, 0.0) == 0.0


def test_mid_span_beta2():
    plan = compile_link(six_by_eighty())
    b = beta2_from_dispersion(17.0)
    assert cumulative_beta2(plan, 200.0) == pytest.approx(2 * 80 * b + 40 * b, rel=1e-14)


def test_mixed_spans_piecewise_linear():
    spec = link_from_config({"launch_power_dbm": 0.0, "spans": [
        {"length_km": 50.0}, {"length_km": 30.0, "dispersion_ps_nm_km": 4.0}],
        "amps": [{"before_span": 2}]})
    plan = compile_link(spec)
    b1, b2 = beta2_from_dispersion(17.0), beta2_from_dispersion(4.0)
    assert cumulative_beta2(plan, 50.0) == pytest.approx(50 * b1)
    assert cumulative_beta2(plan, 65.0) == pytest.approx(50 * b1 + 15 * b2)
    assert cumulative_beta2(plan, 80.0) == pytest.approx(50 * b1 + 30 * b2)


def test_beta2_outside_link_rejected():
    plan = compile_link(six_by_eighty())
    with pytest.raises(InvalidArgumentError):
        cumulative_beta2(plan, 481.0)
    with pytest.raises(InvalidArgumentError):
        cumulative_beta2(plan, -1.0)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 480), min_size=3, max_size=3))
def test_beta2_additive(zs):
    plan = compile_link(six_by_eighty())
    z1, z2, z3 = sorted(zs)
    b = [cumulative_beta2(plan, z) for z in (z1, z2, z3)]
    assert b[2] - b[0] == pytest.approx((b[2] - b[1]) + (b[1] - b[0]), abs=1e-9)


@pytest.mark.parametrize("k", range(1, 7))
def test_uniform_link_multiples(k):
    plan = compile_link(six_by_eighty())
    assert cumulative_beta2(plan, 80.0 * k) == k * cumulative_beta2(plan, 80.0)


def test_point_loss_leaves_dispersion_map_alone():
    with_loss = compile_link(six_by_eighty(point_losses=[{"after_span": 4, "loss_db": 7.0}]))
    without = compile_link(six_by_eighty())
    z = np.linspace(0, 480, 97)
    np.testing.assert_array_equal(cumulative_beta2(with_loss, z), cumulative_beta2(without, z))
    assert any(isinstance(s, LumpedLoss) and s.start_z_km == 320.0 for s in with_loss.steps)


def test_auto_gain_restores_span_and_point_loss():
    plan = compile_link(six_by_eighty(point_losses=[{"after_span": 4, "loss_db": 7.0}]))
    gains = [s.gain_db for s in plan.steps if isinstance(s, LumpedGain)]
    assert gains == pytest.approx([16.0, 16.0, 16.0, 23.0, 16.0])


def test_set_snr_resolves_to_inband_noise():
    cfg = {"launch_power_dbm": 3.0, "spans": {"count": 2, "length_km": 50},
           "amps": [{"before_span": 2, "set_snr_db": 20.0}]}
    plan = compile_link(link_from_config(cfg))
    (ns,) = plan.noise_steps
    assert ns.start_z_km == 50.0
    assert ns.signal_power_mw == pytest.approx(10**0.3)
    assert ns.snr_db == pytest.approx(20.0)
    assert ns.psd(68e9) == pytest.approx(10**0.3 / 100 / 68e9)


def test_noise_figure_mode_gives_ase_psd():
    cfg = {"launch_power_dbm": 0.0, "spans": {"count": 2, "length_km": 80},
           "amps": [{"before_span": 2, "noise_figure_db": 5.0}]}
    (ns,) = compile_link(link_from_config(cfg)).noise_steps
    h, nu = 6.62607015e-34, 299792458.0 / 1550e-9
    expected_mw = 10**0.5 * h * nu * (10**1.6 - 1) * 1e3
    assert ns.psd(None) == pytest.approx(expected_mw, rel=1e-12)


def test_noise_injection_has_no_gain():
    plan = compile_link(six_by_eighty(noise_injections=[{"before_span": 4, "set_snr_db": 20.0}]))
    (ns,) = plan.noise_steps
    assert ns.start_z_km == 240.0 and ns.snr_db == pytest.approx(20.0)
    assert len([s for s in plan.steps if isinstance(s, LumpedGain)]) == 5


def test_compile_errors():
    with pytest.raises(InvalidConfigError):
        compile_link(LinkSpec(()))
    with pytest.raises(InvalidConfigError):
        compile_link(LinkSpec((AmplifierNode(),)))
    with pytest.raises(InvalidConfigError):
        compile_link(LinkSpec((FiberSpan(80.0),), launch_power_dbm=None))
    with pytest.raises(InvalidConfigError):
        FiberSpan(-1.0)
    with pytest.raises(InvalidConfigError):
        AmplifierNode(set_snr_db=0.0)
    with pytest.raises(InvalidConfigError):
        AmplifierNode(gain_db=float("inf"))


@pytest.mark.parametrize("cfg, path", [
    ({"launch_power_dbm": 0, "spans": []}, "link.spans"),
    ({"launch_power_dbm": 0, "spans": [{"length_km": -5}]}, "link.spans[0]"),
    ({"launch_power_dbm": 0, "spans": [{"length_km": "x"}]}, "link.spans[0].length_km"),
    ({"launch_power_dbm": 0, "spans": [{"length_km": 80}], "amps": [{"before_span": 9}]},
     "link.amps[0].before_span"),
    ({"launch_power_dbm": 0, "spans": [{"length_km": 80}], "bogus": 1}, "link"),
    ({"spans": [{"length_km": 80}]}, "link.launch_power_dbm"),
])
def test_config_errors_carry_path(cfg, path):
    with pytest.raises(InvalidConfigError) as exc:
        link_from_config(cfg)
    assert exc.value.path == path


def test_config_round_trip_gives_identical_plan():
    spec = six_by_eighty(point_losses=[{"after_span": 4, "loss_db": 7.0}],
                         noise_injections=[{"before_span": 3, "set_snr_db": 18.0}],
                         wdm_neighbors=[{"offset_hz": 1e11, "power_dbm": -3.0, "seed": 2}])
    again = link_from_config(json.loads(json.dumps(link_to_config(spec))))
    assert again == spec
    a, b = compile_link(spec), compile_link(again)
    assert a.steps == b.steps
    np.testing.assert_array_equal(a.breakpoint_beta2_ps2, b.breakpoint_beta2_ps2)


def test_z_grid():
    plan = compile_link(six_by_eighty())
    g = plan.z_grid(5.0)
    assert g[0] == 0 and g[-1] == 480 and len(g) == 97
