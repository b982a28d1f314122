import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from edtn.link_models import (
    DEFAULT_ANCHORS,
    DEFAULT_GPRS,
    DEFAULT_PHASE_TABLE,
    KB,
    MB,
    Bundle,
    DegenerateFit,
    GprsModel,
    InvalidBuffer,
    PhaseCostTable,
    Technology,
    UnknownTechnology,
    bundle_chain_cost,
    fit_gprs_curve,
    gprs_buffer_cost,
    gprs_energy_per_packet,
    optimal_gprs_buffer,
    packets_for,
    transfer_energy,
    transfer_time,
)

BT, WIFI, GPRS = Technology.BLUETOOTH, Technology.WIFI, Technology.GPRS

TABLE2 = [
    (BT, 5 * KB, 5.0),
    (BT, 1 * MB, 90.0),
    (BT, 3 * MB, 280.0),
    (WIFI, 5 * KB, 7.0),
    (WIFI, 1 * MB, 7.0),
    (WIFI, 3 * MB, 20.0),
]


@pytest.mark.parametrize("tech,size,seconds", TABLE2)
def test_transfer_time_hits_table_anchors(tech, size, seconds):
    assert transfer_time(tech, size) == seconds


def test_transfer_time_interpolates_and_clamps():
    assert transfer_time(BT, 2 * MB) == 185.0
    assert transfer_time(WIFI, 1 * KB) == 7.0
    # last segment slope continues past 3 MB: 13 s per 2 MB
    assert transfer_time(WIFI, 5 * MB) == pytest.approx(33.0)


@given(st.sampled_from([BT, WIFI]), st.floats(1, 3 * MB))
def test_transfer_time_matches_numpy_interp(tech, size):
    xs, ys = zip(*DEFAULT_ANCHORS[tech])
    assert transfer_time(tech, size) == pytest.approx(float(np.interp(size, xs, ys)), rel=1e-12)


@given(st.sampled_from([BT, WIFI]), st.floats(1, 10 * MB), st.floats(1, 10 * MB))
def test_transfer_time_non_decreasing(tech, a, b):
    lo, hi = sorted((a, b))
    assert transfer_time(tech, lo) <= transfer_time(tech, hi)


def test_gprs_has_no_latency_anchors():
    with pytest.raises(UnknownTechnology):
        transfer_time(GPRS, 100)
    with pytest.raises(UnknownTechnology):
        transfer_energy(GPRS, 100)


def test_transfer_energy_examples():
    # Wi-Fi active power is the 42 J / 13 s DTN exchange
    size_13s = 1 * MB + (13.0 - 7.0) / 13.0 * 2 * MB
    assert transfer_time(WIFI, size_13s) == pytest.approx(13.0)
    assert transfer_energy(WIFI, size_13s) == pytest.approx(42.0)
    assert transfer_energy(WIFI, 3 * MB) == pytest.approx(64.615, abs=5e-4)
    assert transfer_energy(BT, 1) == pytest.approx(1.5)


def test_energy_per_packet_examples():
    assert gprs_energy_per_packet(50) == pytest.approx(0.7, abs=1e-9)
    assert gprs_energy_per_packet(1) == pytest.approx(3.101, abs=1e-12)
    assert gprs_energy_per_packet(100) == pytest.approx(0.725, abs=1e-12)
    with pytest.raises(InvalidBuffer):
        gprs_energy_per_packet(0)


def test_energy_per_packet_rises_slowly_past_optimum():
    e50, e100 = gprs_energy_per_packet(50), gprs_energy_per_packet(100)
    assert e50 < e100 < 1.05 * e50


def test_optimal_buffer_brute_force_over_wide_range():
    values = [gprs_energy_per_packet(b) for b in range(1, 10_001)]
    assert int(np.argmin(values)) + 1 == 50
    assert optimal_gprs_buffer(1, 10_000) == 50
    assert math.isqrt(round(DEFAULT_GPRS.epp_a / DEFAULT_GPRS.epp_c)) == 50


def test_optimal_buffer_examples():
    assert optimal_gprs_buffer(1, 200) == 50
    assert optimal_gprs_buffer(60, 200) == 60
    assert optimal_gprs_buffer(50, 50) == 50
    with pytest.raises(InvalidBuffer):
        optimal_gprs_buffer(5, 4)


def test_optimal_buffer_ties_break_low():
    flat = GprsModel(epp_a=0.0, epp_b=1.0, epp_c=0.0)
    assert optimal_gprs_buffer(3, 30, flat) == 3


def test_buffer_cost_examples():
    assert gprs_buffer_cost(50) == (31.0, 35.0)
    t, e = gprs_buffer_cost(1)
    assert t == 6.5
    assert e == pytest.approx(3.101)
    with pytest.raises(InvalidBuffer):
        gprs_buffer_cost(0)


def test_flush_plan():
    assert DEFAULT_GPRS.flushes(50) == [50]
    assert DEFAULT_GPRS.flushes(100) == [50, 50]
    assert DEFAULT_GPRS.flushes(1) == [1]
    assert DEFAULT_GPRS.flushes(120) == [50, 50, 20]


def test_packets_for_uses_32_byte_packets():
    assert packets_for(1600) == 50
    assert packets_for(1601) == 51
    assert packets_for(1) == 1
    assert Bundle(1, 3200).packets == 100


def test_bundle_chain_cost_examples():
    assert DEFAULT_PHASE_TABLE.totals() == (193.0, 367.0)
    assert bundle_chain_cost(Bundle(1, 1600)) == (193.0, 367.0)
    assert bundle_chain_cost(Bundle(1, 1600), PhaseCostTable()) == (0.0, 0.0)
    assert bundle_chain_cost(Bundle(1, 3200)) == (224.0, 402.0)


def test_fit_round_trip_noiseless():
    samples = [(b, gprs_energy_per_packet(b)) for b in (1, 10, 50, 100)]
    fit = fit_gprs_curve(samples)
    assert fit.epp_a == pytest.approx(2.5, abs=1e-6)
    assert fit.epp_b == pytest.approx(0.6, abs=1e-6)
    assert fit.epp_c == pytest.approx(0.001, abs=1e-6)
    assert fit.residual < 1e-9
    assert fit.argmin(1, 10_000) == 50


def test_fit_needs_three_distinct_sizes():
    with pytest.raises(DegenerateFit):
        fit_gprs_curve([(1, 3.1), (50, 0.7)])
    with pytest.raises(DegenerateFit):
        fit_gprs_curve([(50, 0.7), (50, 0.71), (10, 0.9)])


def test_fit_noisy_argmin_close_to_truth():
    # Monte Carlo: sigma = 1 mJ, argmin compared against brute force on the true curve
    rng = np.random.default_rng(2011)
    true_argmin = optimal_gprs_buffer(1, 10_000)
    buffers = range(1, 201, 5)
    for _ in range(100):
        samples = [(b, gprs_energy_per_packet(b) + rng.normal(0.0, 1e-3)) for b in buffers]
        assert abs(fit_gprs_curve(samples).argmin(1, 10_000) - true_argmin) <= 5


def test_fit_from_anchor_and_flanks():
    samples = [(10, gprs_energy_per_packet(10)), (50, 0.7), (150, gprs_energy_per_packet(150))]
    assert abs(fit_gprs_curve(samples).argmin() - 50) <= 1
