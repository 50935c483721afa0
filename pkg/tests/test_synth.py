import math
from dataclasses import replace

import numpy as np
import pytest

from yawcorr.errors import InvalidInputError
from yawcorr.scada import TurbineConfig, wrap_angle
from yawcorr.synth import (AR1, NacelleController, SynthConfig, analytic_reference_power, generate,
                           read_truth_csv, standard_benchmark, write_truth_csv)

TURBINE = TurbineConfig()


@pytest.fixture(scope="module")
def run10():
    return generate(SynthConfig(theta_s_true=10.0, duration=3000, seed=5))


def test_deterministic_per_seed():
    a = generate(SynthConfig(duration=200, seed=3))
    b = generate(SynthConfig(duration=200, seed=3))
    c = generate(SynthConfig(duration=200, seed=4))
    assert np.array_equal(a.telemetry.power, b.telemetry.power)
    assert not np.array_equal(a.telemetry.power, c.telemetry.power)


def test_truth_matches_telemetry(run10):
    tel, truth = run10.telemetry, run10.truth
    assert np.allclose(wrap_angle(truth.theta_d - tel.dynamic_yaw), 0, atol=1e-9)
    assert np.allclose(truth.theta_ye, wrap_angle(10.0 + truth.theta_d), atol=1e-12)
    assert abs(truth.theta_ye.mean() - 10.0) < 1.0


def test_power_bounded(run10):
    assert run10.telemetry.power.max() <= TURBINE.rated_power * (1 + 3 * 0.02) + 1e-9
    assert run10.telemetry.power.min() >= 0


def test_noiseless_power_follows_cosine_law():
    res = generate(SynthConfig(theta_s_true=-8.0, duration=500, power_noise=0.0, seed=1))
    tel = res.telemetry
    p0 = np.minimum(analytic_reference_power(tel.wind_speed) * tel.air_density / 1.225, np.inf)
    expected = np.minimum(p0 * np.cos(np.deg2rad(res.truth.theta_ye)) ** 3, TURBINE.rated_power)
    assert np.allclose(tel.power, expected, rtol=1e-12)


def test_injections_are_marked():
    res = generate(SynthConfig(duration=3000, fault_rate=0.01, curtailment_rate=0.01, seed=2))
    tel, truth = res.telemetry, res.truth
    assert truth.injected_fault.any() and truth.injected_curtailment.any()
    assert np.array_equal(tel.fault_code != 0, truth.injected_fault)
    assert np.all(tel.power[truth.injected_fault] == 0)
    assert np.all(tel.power_limit[truth.injected_curtailment] < TURBINE.rated_power)
    assert not (truth.injected_fault & truth.injected_curtailment).any()


def test_controller_deadband_keeps_nacelle_still():
    cfg = SynthConfig(duration=300, seed=0, nacelle=NacelleController(deadband=1e6))
    nd = generate(cfg).telemetry.nacelle_direction
    assert np.ptp(nd) == 0


def test_config_validation_and_round_trip():
    with pytest.raises(InvalidInputError):
        SynthConfig(duration=5)
    with pytest.raises(InvalidInputError):
        AR1(0, 1.0, 1)
    with pytest.raises(InvalidInputError):
        SynthConfig.from_dict({"speed": 3})
    cfg = SynthConfig(nacelle=NacelleController(yaw_rate=math.inf), transition_alpha=(2.0, 3.0))
    assert SynthConfig.from_dict(cfg.to_dict()) == cfg


def test_truth_csv_round_trip(run10, tmp_path):
    write_truth_csv(tmp_path / "t.csv", run10.truth)
    back = read_truth_csv(tmp_path / "t.csv")
    assert np.array_equal(back.theta_ye, run10.truth.theta_ye)
    assert back.theta_s == 10.0


def test_standard_benchmark_shape():
    cases = standard_benchmark(seed=0, base=replace(SynthConfig(), duration=100), n_clean=500)
    assert [(c.case_id, c.theta_s, c.purpose) for c in cases] == [
        ("01", 5.0, "Modeling"), ("02", 10.0, "Modeling"), ("03", -8.0, "Modeling"), ("04", -10.0, "Modeling"),
        ("05", 8.0, "Transferability"), ("06", -6.0, "Transferability")]
    assert all(len(c.cleaned) == 500 for c in cases)
    assert all(np.isin(c.cleaned.timestamp, c.raw.telemetry.timestamp).all() for c in cases)
    starts = [c.raw.telemetry.timestamp[0] for c in cases]
    assert len(set(starts)) == 6
