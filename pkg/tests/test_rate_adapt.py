import math

import numpy as np
import pytest
from scipy.stats import chi2

from ratecon import rate_adapt
from ratecon.rate_adapt import (
    ConstantEfficiency,
    RateAdaptError,
    TableEfficiency,
    achievable_range,
    assemble_frame,
    benchmark_efficiency,
    binary_entropy,
    build_layout,
    demo_efficiency,
    disassemble_frame,
    effective_rate,
    split_ratios,
    split_s_p,
    target_rate,
)


class TestEffectiveRate:
    def test_puncture_two_of_eight(self):
        assert effective_rate(0.5, 0.25, 0.0) == 2 / 3

    def test_shorten_one_of_eight(self):
        assert effective_rate(0.5, 0.0, 0.125) == 3 / 7

    def test_both(self):
        assert effective_rate(0.5, 0.25, 0.125) == 3 / 5

    def test_rejects_full_removal(self):
        with pytest.raises(RateAdaptError):
            effective_rate(0.5, 0.6, 0.4)


class TestAchievableRange:
    def test_delta_tenth(self):
        lo, hi = achievable_range(0.5, 0.1)
        assert lo == pytest.approx(4 / 9)
        assert hi == pytest.approx(5 / 9)

    def test_delta_zero_degenerate(self):
        assert achievable_range(0.5, 0.0) == (0.5, 0.5)

    def test_delta_half_full_span(self):
        lo, hi = achievable_range(0.5, 0.5)
        assert lo == pytest.approx(0.0)
        assert hi == pytest.approx(1.0)

    def test_nesting_in_delta(self):
        for d1, d2 in ((0.05, 0.1), (0.1, 0.3), (0.3, 0.45)):
            lo1, hi1 = achievable_range(0.5, d1)
            lo2, hi2 = achievable_range(0.5, d2)
            assert lo2 < lo1 and hi1 < hi2


class TestTargetRate:
    def test_worked_example(self):
        # f(0.08) = 1.12, h(0.08) = 0.402179: R = 1 - 1.12 * h = 0.549559...
        rate = target_rate(0.08, demo_efficiency)
        assert demo_efficiency(0.08) == pytest.approx(1.12)
        assert rate == pytest.approx(1.0 - 1.12 * binary_entropy(0.08))
        assert round(rate, 2) == 0.55

    def test_ideal_efficiency_limits(self):
        ideal = ConstantEfficiency(1.0)
        assert target_rate(1e-6, ideal) > 0.99997
        assert target_rate(0.11, ideal) == pytest.approx(1.0 - binary_entropy(0.11))
        assert target_rate(0.11, ideal) == pytest.approx(0.500084, abs=1e-6)

    def test_domain(self):
        with pytest.raises(RateAdaptError):
            target_rate(0.0, demo_efficiency)
        with pytest.raises(RateAdaptError):
            target_rate(0.5, demo_efficiency)


class TestSplit:
    def test_worked_example_exact(self):
        s, p = split_s_p(0.5, 0.55, 500_000, 1_000_000)
        assert (s, p) == (225_000, 275_000)
        # cross-check through the integer rate form
        k = 500_000
        assert (k - s) / (1_000_000 - p - s) == 0.55

    def test_pure_puncturing_endpoint(self):
        n, d = 10_000, 1000
        _, rmax = achievable_range(0.5, d / n)
        assert split_s_p(0.5, rmax, d, n) == (0, d)

    def test_pure_shortening_endpoint(self):
        n, d = 10_000, 1000
        rmin, _ = achievable_range(0.5, d / n)
        assert split_s_p(0.5, rmin, d, n) == (d, 0)

    def test_out_of_range_rejected(self):
        with pytest.raises(RateAdaptError):
            split_s_p(0.5, 0.7, 1000, 10_000)

    def test_realized_rate_at_or_below_request(self):
        # ceiling rounding can only lower the realized rate, by < 1/(n-d)
        rng = np.random.default_rng(5)
        for _ in range(200):
            n = int(rng.integers(100, 50_000))
            k = int(rng.integers(n // 4, 3 * n // 4))
            r0 = k / n
            d = int(rng.integers(1, n // 2))
            lo, hi = achievable_range(r0, d / n)
            rate = float(rng.uniform(lo, hi))
            s, p = split_s_p(r0, rate, d, n)
            assert 0 <= s <= d and p == d - s
            realized = (k - s) / (n - p - s)
            assert realized <= rate + 1e-12
            assert rate - realized < 1.0 / (n - d) + 1e-12

    def test_split_ratios_match_integer_split(self):
        sigma, pi = split_ratios(0.5, 0.55, 0.5)
        assert sigma == pytest.approx(0.225)
        assert pi == pytest.approx(0.275)


class TestRateBudget:
    def test_from_delta_floors(self):
        budget = rate_adapt.RateBudget.from_delta(1001, 0.1, 0.5)
        assert budget.d == 100
        assert budget.payload_length == 901

    def test_split_matches_module_function(self):
        budget = rate_adapt.RateBudget(1_000_000, 500_000, 0.5)
        assert budget.split(0.55) == split_s_p(0.5, 0.55, 500_000, 1_000_000)
        assert budget.achievable_range() == achievable_range(0.5, 0.5)

    def test_clamp(self):
        budget = rate_adapt.RateBudget.from_delta(1000, 0.1, 0.5)
        rate, clamped = budget.clamp(0.9)
        assert clamped and rate == budget.achievable_range()[1]
        rate, clamped = budget.clamp(0.5)
        assert not clamped and rate == 0.5

    def test_validation(self):
        with pytest.raises(RateAdaptError):
            rate_adapt.RateBudget(10, 11, 0.5)


class TestEfficiencyModels:
    def test_demo_form(self):
        assert demo_efficiency(0.1) == 1.1
        assert demo_efficiency(0.08) == pytest.approx(1.12)

    def test_constant_validation(self):
        with pytest.raises(RateAdaptError):
            ConstantEfficiency(0.99)

    def test_table_rejects_sub_one(self):
        with pytest.raises(RateAdaptError):
            TableEfficiency((0.05, 0.1), (1.1, 0.9))

    def test_table_interpolates_and_clamps(self):
        table = TableEfficiency.from_points([(0.05, 1.2), (0.10, 1.1)])
        assert table(0.075) == pytest.approx(1.15)
        assert table(0.01) == 1.2
        assert table(0.4) == 1.1

    def test_csv_round_trip(self, tmp_path):
        table = TableEfficiency.from_points([(0.05, 1.2), (0.10, 1.1)])
        path = tmp_path / "f.csv"
        table.to_csv(path)
        again = TableEfficiency.from_csv(path)
        assert again == table

    def test_benchmark_model_hits_published_points(self):
        model = benchmark_efficiency(0.1)
        assert model(0.0945) == pytest.approx(1.0855)
        assert model(0.0834) == pytest.approx(1.0877)

    def test_benchmark_rows_nonempty_per_delta(self):
        for delta, rows in rate_adapt.BENCHMARK_OPERATING_POINTS.items():
            assert all(f >= 1.0 for _, _, f in rows)


class TestLayout:
    def test_no_reserved_positions(self):
        layout = build_layout(3, 50, 0, 0)
        assert layout.payload_positions.tolist() == list(range(50))
        assert layout.p == layout.s == 0

    def test_same_seed_identical(self):
        a = build_layout(11, 1000, 100, 40)
        b = build_layout(11, 1000, 100, 40)
        for field in ("payload_positions", "punctured_positions",
                      "shortened_positions", "shortened_values"):
            assert np.array_equal(getattr(a, field), getattr(b, field))

    def test_partition_property(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            n = int(rng.integers(10, 2000))
            d = int(rng.integers(0, n + 1))
            s = int(rng.integers(0, d + 1))
            layout = build_layout(int(rng.integers(1 << 30)), n, d, s)
            merged = np.concatenate([
                layout.payload_positions, layout.punctured_positions,
                layout.shortened_positions,
            ])
            assert len(merged) == n
            assert np.array_equal(np.sort(merged), np.arange(n))

    def test_growing_s_keeps_reserved_set(self):
        # the d-subset is drawn before the s/p split: changing s must not
        # change which positions are reserved
        base = build_layout(21, 500, 60, 10)
        more = build_layout(21, 500, 60, 35)
        reserved_a = np.sort(np.concatenate([base.punctured_positions,
                                             base.shortened_positions]))
        reserved_b = np.sort(np.concatenate([more.punctured_positions,
                                             more.shortened_positions]))
        assert np.array_equal(reserved_a, reserved_b)
        assert set(base.shortened_positions) <= set(more.shortened_positions)

    def test_uniformity_chi_square(self):
        # membership frequency of each position in the reserved set across
        # seeds, tested against the uniform expectation at 0.001 significance
        n, d, s, seeds = 10_000, 1000, 400, 1000
        counts = np.zeros(n)
        for seed in range(seeds):
            layout = build_layout(seed, n, d, s)
            counts[layout.punctured_positions] += 1
            counts[layout.shortened_positions] += 1
            assert layout.p == 600 and layout.s == 400
        expected = seeds * d / n
        stat = float(((counts - expected) ** 2 / expected).sum())
        assert stat < chi2.ppf(0.999, n - 1)

    def test_classes_and_csv(self, tmp_path):
        layout = build_layout(5, 30, 8, 3)
        classes = layout.position_classes()
        assert (classes == 0).sum() == 22
        assert (classes == 1).sum() == 5
        assert (classes == 2).sum() == 3
        path = tmp_path / "layout.csv"
        layout.to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "index,class,value"
        assert len(lines) == 31

    def test_invalid_arguments(self):
        with pytest.raises(RateAdaptError):
            build_layout(0, 10, 11, 0)
        with pytest.raises(RateAdaptError):
            build_layout(0, 10, 5, 6)


class TestFrameAssembly:
    def test_identity_with_no_reserved(self):
        layout = build_layout(1, 20, 0, 0)
        bits = np.random.default_rng(2).integers(0, 2, 20).astype(np.uint8)
        frame = assemble_frame(bits, layout, np.zeros(0, np.uint8))
        assert np.array_equal(frame, bits)

    def test_round_trip(self):
        layout = build_layout(9, 100, 30, 12)
        rng = np.random.default_rng(4)
        bits = rng.integers(0, 2, 70).astype(np.uint8)
        fill = rng.integers(0, 2, layout.p).astype(np.uint8)
        frame = assemble_frame(bits, layout, fill)
        assert np.array_equal(disassemble_frame(frame, layout), bits)

    def test_parties_agree_on_shortened_values(self):
        layout = build_layout(9, 100, 30, 12)
        rng = np.random.default_rng(4)
        alice = assemble_frame(rng.integers(0, 2, 70).astype(np.uint8), layout,
                               rng.integers(0, 2, layout.p).astype(np.uint8))
        bob = assemble_frame(rng.integers(0, 2, 70).astype(np.uint8), layout,
                             np.zeros(layout.p, np.uint8))
        assert np.array_equal(alice[layout.shortened_positions],
                              bob[layout.shortened_positions])

    def test_length_validation(self):
        layout = build_layout(9, 100, 30, 12)
        with pytest.raises(RateAdaptError):
            assemble_frame(np.zeros(71, np.uint8), layout, np.zeros(layout.p, np.uint8))
        with pytest.raises(RateAdaptError):
            assemble_frame(np.zeros(70, np.uint8), layout, np.zeros(3, np.uint8))
        with pytest.raises(RateAdaptError):
            disassemble_frame(np.zeros(99, np.uint8), layout)
