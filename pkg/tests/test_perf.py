import pytest
from hypothesis import given
from hypothesis import strategies as st

from specdec.perf import (
    DEFAULT_LENGTH_SCALING,
    TABLE2,
    DecoderCostProfile,
    LayerCost,
    comm_cost,
    comm_rounds,
    compare_bits,
    comm_sweep_csv,
    expected_tokens_infinite,
    expected_tokens_per_step,
    length_profile_csv,
    length_ratio,
    per_token_bits,
    simulate_tokens_per_step,
    speedup,
    speedup_curve_csv,
    table2_predictions,
)
from specdec.transport import LAN, WAN, NetworkModel


def test_tokens_per_step_examples():
    assert expected_tokens_per_step(0.0, 8) == 1.0
    assert expected_tokens_per_step(0.5, 1) == 1.5
    assert expected_tokens_per_step(1.0, 8) == 9.0
    with pytest.raises(ValueError):
        expected_tokens_per_step(0.5, 0)


def test_tokens_per_step_monte_carlo(rng):
    mean, se = simulate_tokens_per_step(0.5, 8, 10**6, rng)
    assert mean == pytest.approx(1.996, abs=0.01)
    assert abs(mean - expected_tokens_per_step(0.5, 8)) < 3 * se


@pytest.mark.parametrize("alpha", [0.2, 0.6, 0.9])
@pytest.mark.parametrize("gamma", [1, 4, 8])
def test_tokens_per_step_grid(alpha, gamma, rng):
    mean, se = simulate_tokens_per_step(alpha, gamma, 10**5, rng)
    assert abs(mean - expected_tokens_per_step(alpha, gamma)) < 3 * se


@given(st.floats(0.001, 0.999), st.integers(1, 32))
def test_infinite_approximation_upper_bounds(alpha, gamma):
    assert expected_tokens_per_step(alpha, gamma) <= expected_tokens_infinite(alpha) + 1e-12


def test_monolithic_per_token_example():
    assert per_token_bits(8, 8, "optimized_monolithic") == 8 * 8 + 3 + 2 * 256 + 8 == 587


def test_naive_monolithic_expression():
    V, ell = 16, 8
    assert per_token_bits(V, ell, "naive_monolithic") == 2 * V * 2**ell + V * ell + V + 4


def test_chunked_compare_bits():
    assert compare_bits(32, 4) == 8 * (16 * 2 + 4) + 7 * 5
    with pytest.raises(ValueError):
        compare_bits(32, 5)


def test_ratio_grows_linearly_in_v():
    ratios = [comm_cost(V, 32, 4, 4, "naive_chunked") / comm_cost(V, 32, 4, 4) for V in (64, 256, 1024)]
    assert ratios[0] < ratios[1] < ratios[2]
    # per-token terms alone: naive / optimized -> compare_bits / ell as V grows
    per = [per_token_bits(V, 32, "naive_chunked") / per_token_bits(V, 32, "optimized_chunked") for V in (64, 256, 1024)]
    assert per[2] / per[1] == pytest.approx(per[1] / per[0], rel=0.35)


def test_comm_rounds():
    assert comm_rounds(32, 4, "optimized_chunked") == 2 + 16 + 1 + 2
    assert comm_rounds(32, 4, "naive_chunked") == 16 + 2 + 2


def test_speedup_examples():
    flat = DecoderCostProfile(1.0)
    assert speedup(0.0, 8, flat).speedup == pytest.approx(1 / 1.2)
    assert speedup(0.7, 8, flat).speedup == pytest.approx((1 - 0.7**9) / 0.3 / 1.2)
    prof = DecoderCostProfile.from_table2("LAN", 8)
    assert prof.base_time_at_len1 * prof.scaling(8) == pytest.approx(TABLE2[("LAN", 8)]["decoder"])
    assert prof.overhead(LAN, 8) == 1.45
    assert 2 <= speedup(0.8, 8, prof).speedup <= 6


@given(st.floats(0, 0.98), st.floats(0.001, 0.01), st.sampled_from([1, 4, 8, 16]))
def test_speedup_monotone(alpha, step, gamma):
    prof = DecoderCostProfile.from_table2("WAN", 8)
    assert speedup(alpha + step, gamma, prof, WAN).speedup > speedup(alpha, gamma, prof, WAN).speedup


def test_profile_validation():
    with pytest.raises(ValueError):
        DecoderCostProfile(1.0, {1: 1.0, 8: 0.9})
    with pytest.raises(ValueError):
        DecoderCostProfile(1.0, {2: 1.0})
    with pytest.raises(ValueError):
        DecoderCostProfile(0.0)


def test_scaling_interpolates():
    prof = DecoderCostProfile(1.0)
    assert prof.scaling(8) == DEFAULT_LENGTH_SCALING[8]
    assert prof.scaling(12) == pytest.approx(1.35)
    assert prof.scaling(32) > prof.scaling(16)


def test_length_ratio_defaults():
    assert length_ratio(LAN, 8) == pytest.approx(1.2, abs=0.15)
    assert length_ratio(LAN, 16) == pytest.approx(1.5, abs=0.15)


def test_length_ratio_constant_layers():
    layers = (LayerCost("c", "he", 3, lambda n: 1e6, lambda n: 0.1),)
    assert all(length_ratio(LAN, n, layers) == 1.0 for n in (1, 8, 16))


def test_length_ratio_infinite_bandwidth():
    fast = NetworkModel(1e30, 0.010)
    slope_only = length_ratio(fast, 16)
    assert 1.0 < slope_only < length_ratio(LAN, 16)


def test_table2_within_tolerance():
    for row in table2_predictions():
        assert abs(row["rel_error"]) <= 0.5, row


def test_csv_headers():
    assert speedup_curve_csv([]).splitlines() == ["alpha,gamma,speedup"]
    assert comm_sweep_csv([(8, 32, 4, "optimized_chunked", 10)]).splitlines()[0] == "V,ell,m,variant,bits"
    assert length_profile_csv([(1, 0.5)]).splitlines() == ["len,seconds", "1,0.500000"]
