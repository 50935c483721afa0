import numpy as np
import pytest
from hypothesis import given, strategies as st

from yawcorr.errors import FitError, InvalidInputError, OutOfRangeError
from yawcorr.power import PowerCurve, bin_average_curve, classify_region, fit_power_curve, reference_power
from yawcorr.scada import TurbineConfig

from conftest import make_tel

CFG = TurbineConfig()


def cubic_tel(n=400, rho=1.225):
    v = np.linspace(4, 11, n)
    return make_tel(n, wind_speed=v, power=0.3 * v**3, air_density=np.full(n, rho))


@pytest.fixture(scope="module")
def cubic():
    return fit_power_curve(cubic_tel())


def test_cubic_recovered(cubic):
    assert cubic.degree == 9
    assert cubic.residual_rms < 1e-6 * cubic.rated_power
    assert reference_power(cubic, 8.0, 1.225) == pytest.approx(153.6, abs=1e-9)


def test_density_normalized_before_fit():
    c = fit_power_curve(cubic_tel(rho=1.1))
    assert c(8.0) == pytest.approx(153.6 * 1.225 / 1.1, rel=1e-10)


def test_too_few_speeds():
    v = np.repeat([4.0, 5.0, 6.0, 7.0, 8.0], 10)
    with pytest.raises(FitError):
        fit_power_curve(make_tel(v.size, wind_speed=v, power=v**3))


def test_constant_power():
    c = fit_power_curve(make_tel(100, wind_speed=np.linspace(4, 11, 100), power=np.full(100, 700.0)))
    assert c.residual_rms < 1e-9
    assert np.allclose(c(np.linspace(4, 11, 7)), 700.0, atol=1e-8)


def test_yaw_filter_and_compensation():
    v = np.linspace(4, 11, 300)
    yaw = np.tile([0.0, 10.0], 150)
    p = 0.3 * v**3 * np.cos(np.deg2rad(yaw)) ** 3
    tel = make_tel(300, wind_speed=v, power=p, wind_direction=180 + yaw)
    assert fit_power_curve(tel)(8.0) == pytest.approx(153.6, rel=1e-9)  # only |yaw| < 3 kept
    assert fit_power_curve(tel, max_abs_dynamic_yaw=None, yaw_exponent=3.0)(8.0) == pytest.approx(153.6, rel=1e-9)


def test_out_of_range_is_error(cubic):
    with pytest.raises(OutOfRangeError):
        cubic(11.5)
    with pytest.raises(OutOfRangeError):
        reference_power(cubic, 3.9, 1.225)
    with pytest.raises(InvalidInputError):
        reference_power(cubic, 8.0, 0.0)


def test_curve_json_round_trip(cubic, tmp_path):
    cubic.save(tmp_path / "c.json")
    back = PowerCurve.load(tmp_path / "c.json")
    v = np.linspace(4, 11, 50)
    assert np.array_equal(back(v), cubic(v))
    assert cubic.to_dict()["affine_map"]["scale"] == pytest.approx(2 / 7)


@given(st.floats(4, 11), st.floats(0.5, 1.5), st.floats(0.1, 10))
def test_reference_power_linear_in_density(v, rho, a):
    c = _CURVE
    assert reference_power(c, v, a * rho) == pytest.approx(a * reference_power(c, v, rho), rel=1e-12)


_CURVE = fit_power_curve(cubic_tel())


@pytest.mark.parametrize("v, region", [(3.0, "I"), (4.0, "II"), (11.5, "II"), (11.6, "III"), (25.0, "III"), (30.0, "IV")])
def test_classify_region(v, region):
    assert classify_region(v, CFG) == region


@given(st.floats(0, 100))
def test_regions_partition(v):
    r = classify_region(v, CFG)
    bounds = {"I": v < 4, "II": 4 <= v <= 11.5, "III": 11.5 < v <= 25, "IV": v > 25}
    assert [k for k, ok in bounds.items() if ok] == [r]


def test_bin_examples():
    b = bin_average_curve(np.full(5, 8.1), np.full(5, 1.0))
    assert len(b) == 1 and b.bin_edges[0].tolist() == [8.0, 8.5]
    assert len(bin_average_curve(np.array([5.1, 9.9]), np.array([1.0, 2.0]))) == 2
    v = np.linspace(4, 11, 1000, endpoint=False)
    assert len(bin_average_curve(v, v)) == 14
    with pytest.raises(InvalidInputError):
        bin_average_curve(v, v, 0.0)


@given(st.lists(st.tuples(st.floats(0, 25), st.floats(0, 3000)), min_size=1, max_size=60), st.sampled_from([0.1, 0.5, 1.0]))
def test_bins_match_brute_force(pairs, width):
    v, p = map(np.array, zip(*pairs))
    b = bin_average_curve(v, p, width)
    for lo, ms, mp, n in zip(b.bin_edges[:, 0], b.bin_mean_speed, b.bin_mean_power, b.bin_count):
        sel = np.floor(v / width) * width == lo
        assert n == sel.sum() >= 1
        assert ms == pytest.approx(v[sel].mean(), rel=1e-12, abs=1e-12)
        assert mp == pytest.approx(p[sel].mean(), rel=1e-12, abs=1e-9)
    assert b.bin_count.sum() == v.size
