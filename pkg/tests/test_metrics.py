import csv
import math
from pathlib import Path

import numpy as np
import pytest

from leafattack import (
    ADVERSARIAL_INPUT_HEADER,
    BASELINE_HEADER,
    SUCCESSFUL_AVERAGE_LABEL,
    UNSUCCESSFUL_AVERAGE_LABEL,
    BinaryMask,
    EdgeMetrics,
    EdgeParams,
    MetricsDelta,
    RasterImage,
    UndefinedPercentError,
    canny,
    cohort_averages,
    comparison_json_dict,
    comparison_rows,
    edge_metrics,
    load_fixture_expected,
    metrics_delta,
    metrics_json_dict,
    read_adversarial_csv,
    read_metrics_csv,
    to_grayscale,
    write_comparison_csv,
    write_metrics_csv,
)

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def square_scene():
    img = np.zeros((64, 64), dtype=np.uint8)
    img[22:42, 22:42] = 255
    return RasterImage(img)


def sample_metrics(length=100, orientation=10.0, intensity=50.0, cog=(0.0, 0.0)):
    return EdgeMetrics(length, orientation, intensity, cog)


class TestEdgeMetricsDataclass:
    def test_empty_map_must_be_all_none(self):
        EdgeMetrics(0, None, None, None)
        with pytest.raises(ValueError):
            EdgeMetrics(0, 1.0, None, None)

    def test_nonempty_map_needs_all_fields(self):
        with pytest.raises(ValueError):
            EdgeMetrics(5, None, 10.0, (1.0, 1.0))

    def test_negative_length_rejected(self):
        with pytest.raises(ValueError):
            EdgeMetrics(-1, None, None, None)


class TestEdgeMetricsMeasurement:
    def test_flat_image_has_no_edges(self):
        got = edge_metrics(RasterImage(np.full((32, 32), 77, dtype=np.uint8)))
        assert got == EdgeMetrics(0, None, None, None, 0)

    def test_square_centroid_and_count(self):
        img = square_scene()
        got = edge_metrics(img)
        edges = canny(to_grayscale(img), 50.0, 150.0, 1.4)
        assert got.edge_length == edges.area > 0
        assert got.cog[0] == pytest.approx(31.5, abs=1.0)
        assert got.cog[1] == pytest.approx(31.5, abs=1.0)
        assert got.component_count == 1

    def test_region_restricts_the_count(self):
        img = square_scene()
        left = np.zeros((64, 64), dtype=bool)
        left[:, :32] = True
        got = edge_metrics(img, region=BinaryMask(left))
        edges = canny(to_grayscale(img), 50.0, 150.0, 1.4)
        assert got.edge_length == int(np.count_nonzero(edges.bits & left))
        assert 0 < got.edge_length < edges.area

    def test_full_region_equals_no_region(self):
        img = square_scene()
        free = edge_metrics(img)
        full = edge_metrics(img, region=BinaryMask(np.ones((64, 64), dtype=bool)))
        assert free == full

    def test_region_shape_mismatch(self):
        with pytest.raises(ValueError):
            edge_metrics(square_scene(), region=BinaryMask(np.ones((8, 8), dtype=bool)))

    def test_intensity_sampled_from_original_gray(self):
        # edge pixels straddle a 0/255 step, so the mean must sit well inside
        img = square_scene()
        got = edge_metrics(img)
        assert 40.0 < got.intensity < 215.0

    def test_orientation_flavors_agree_on_single_step(self):
        # one vertical step, gradient pointing +x everywhere: no wraparound,
        # so the plain mean and the circular mean coincide
        img = np.zeros((32, 32), dtype=np.uint8)
        img[:, 16:] = 255
        plain = edge_metrics(RasterImage(img))
        circular = edge_metrics(RasterImage(img), circular_orientation=True)
        assert plain.edge_length == circular.edge_length
        assert plain.orientation == pytest.approx(0.0, abs=1e-9)
        assert circular.orientation == pytest.approx(0.0, abs=1e-9)

    def test_custom_params_change_the_map(self):
        img = square_scene()
        strict = edge_metrics(img, params=EdgeParams(high=254.0))
        lax = edge_metrics(img, params=EdgeParams(high=60.0))
        assert lax.edge_length >= strict.edge_length


class TestMetricsDelta:
    def test_hand_computed_deltas(self):
        base = sample_metrics(100, 10.0, 50.0, (0.0, 0.0))
        adv = sample_metrics(140, 24.4, 40.0, (3.0, 4.0))
        d = metrics_delta(base, adv)
        assert d.edge_length_diff == 40.0
        assert d.edge_length_percent == pytest.approx(40.0)
        assert d.orientation_diff == pytest.approx(14.4)
        assert d.orientation_percent == pytest.approx(4.0)  # 14.4 out of 360
        assert d.intensity_diff == 10.0
        assert d.intensity_percent == pytest.approx(20.0)
        assert d.cog_distance == pytest.approx(5.0)

    def test_identical_metrics_give_zero(self):
        m = sample_metrics()
        d = metrics_delta(m, m)
        assert (
            d.edge_length_diff,
            d.edge_length_percent,
            d.orientation_diff,
            d.orientation_percent,
            d.intensity_diff,
            d.intensity_percent,
            d.cog_distance,
        ) == (0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)

    def test_differences_are_absolute(self):
        base = sample_metrics(100, 10.0, 50.0)
        below = sample_metrics(60, 2.0, 45.0)
        above = sample_metrics(140, 18.0, 55.0)
        assert metrics_delta(base, below).edge_length_diff == 40.0
        assert metrics_delta(base, above).edge_length_diff == 40.0
        assert metrics_delta(base, below).orientation_diff == metrics_delta(base, above).orientation_diff

    def test_percent_is_directed_at_the_baseline(self):
        small = sample_metrics(50)
        big = sample_metrics(100)
        assert metrics_delta(big, small).edge_length_percent == pytest.approx(50.0)
        assert metrics_delta(small, big).edge_length_percent == pytest.approx(100.0)

    def test_zero_baseline_edges_undefined(self):
        empty = EdgeMetrics(0, None, None, None)
        with pytest.raises(UndefinedPercentError):
            metrics_delta(empty, sample_metrics())

    def test_zero_baseline_intensity_undefined(self):
        base = sample_metrics(intensity=0.0)
        with pytest.raises(UndefinedPercentError):
            metrics_delta(base, sample_metrics())

    def test_empty_adversarial_rejected(self):
        with pytest.raises(ValueError):
            metrics_delta(sample_metrics(), EdgeMetrics(0, None, None, None))

    def test_cog_distance_is_euclidean(self):
        base = sample_metrics(cog=(1.0, 2.0))
        adv = sample_metrics(cog=(4.0, 6.0))
        assert metrics_delta(base, adv).cog_distance == pytest.approx(math.hypot(3.0, 4.0))


def build_rows(specs):
    """specs: (length, orientation, intensity, cog, success) against one base."""
    base = sample_metrics(100, 0.0, 50.0, (10.0, 10.0))
    rows = []
    for i, (length, orientation, intensity, cog, success) in enumerate(specs):
        m = sample_metrics(length, orientation, intensity, cog)
        rows.append((f"adv {i}", m, metrics_delta(base, m), success))
    return rows


class TestCohortAverages:
    def test_single_row_cohorts_echo_the_rows(self):
        rows = build_rows(
            [
                (120, 4.0, 60.0, (13.0, 14.0), True),
                (80, -2.0, 40.0, (10.0, 7.0), False),
            ]
        )
        succ, fail = cohort_averages([(m, d, s) for _, m, d, s in rows])
        assert succ.count == 1 and fail.count == 1
        assert succ.edge_length == 120.0
        assert succ.cog == (13.0, 14.0)
        assert succ.edge_length_percent == pytest.approx(20.0)
        assert fail.intensity == 40.0
        assert fail.cog_distance == pytest.approx(3.0)

    def test_empty_cohort_is_none(self):
        rows = build_rows([(120, 4.0, 60.0, (13.0, 14.0), True)])
        succ, fail = cohort_averages([(m, d, s) for _, m, d, s in rows])
        assert succ is not None and fail is None

    def test_permutation_invariant(self, rng):
        rows = build_rows(
            [
                (120, 4.0, 60.0, (13.0, 14.0), True),
                (90, 1.0, 55.0, (11.0, 12.0), True),
                (150, 9.0, 30.0, (19.0, 2.0), True),
                (70, -3.0, 45.0, (8.0, 10.0), False),
            ]
        )
        succ_a, fail_a = cohort_averages([(m, d, s) for _, m, d, s in rows])
        shuffled = list(rows)
        rng.shuffle(shuffled)
        succ_b, fail_b = cohort_averages([(m, d, s) for _, m, d, s in shuffled])
        assert succ_a.edge_length == pytest.approx(succ_b.edge_length)
        assert succ_a.cog_distance == pytest.approx(succ_b.cog_distance)
        assert fail_a == fail_b

    def test_zero_edge_rows_rejected(self):
        empty = EdgeMetrics(0, None, None, None)
        delta = MetricsDelta(0, 0, 0, 0, 0, 0, 0)
        with pytest.raises(ValueError):
            cohort_averages([(empty, delta, True)])


class TestCsvFiles:
    def test_baseline_round_trip(self, tmp_path):
        rows = [
            ("sign a", sample_metrics(250, 12.25, 99.5, (12.5, 64.25))),
            ("sign b", EdgeMetrics(0, None, None, None)),
        ]
        path = tmp_path / "baseline.csv"
        write_metrics_csv(rows, path)
        assert read_metrics_csv(path) == rows

    def test_baseline_header_enforced(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("Name,Edges\nx,1\n", encoding="utf-8")
        with pytest.raises(ValueError, match="header"):
            read_metrics_csv(path)

    def test_malformed_cog_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(BASELINE_HEADER)
            writer.writerow(["x", 10, "1.0", "2.0", "not a point"])
        with pytest.raises(ValueError, match="center-of-gravity"):
            read_metrics_csv(path)

    def test_adversarial_round_trip(self, tmp_path):
        path = tmp_path / "adv.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(ADVERSARIAL_INPUT_HEADER)
            writer.writerow(["adv 1", "sign a", 120, "4.00", "60.00", "(13.00, 14.00)", "Yes"])
            writer.writerow(["adv 2", "sign a", 80, "-2.00", "40.00", "(10.00, 7.00)", "no"])
        rows = read_adversarial_csv(path)
        assert [(r[0], r[1], r[3]) for r in rows] == [("adv 1", "sign a", True), ("adv 2", "sign a", False)]
        assert rows[0][2] == sample_metrics(120, 4.0, 60.0, (13.0, 14.0))

    def test_adversarial_flag_validated(self, tmp_path):
        path = tmp_path / "adv.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(ADVERSARIAL_INPUT_HEADER)
            writer.writerow(["adv 1", "sign a", 120, "4.00", "60.00", "(13.00, 14.00)", "maybe"])
        with pytest.raises(ValueError, match="Yes or No"):
            read_adversarial_csv(path)

    def test_comparison_csv_written_with_averages(self, tmp_path):
        rows = build_rows(
            [
                (120, 4.0, 60.0, (13.0, 14.0), True),
                (80, -2.0, 40.0, (10.0, 7.0), False),
            ]
        )
        path = tmp_path / "cmp.csv"
        write_comparison_csv(rows, path)
        parsed_rows, averages = load_fixture_expected(path)
        assert [name for name, _, _ in parsed_rows] == ["adv 0", "adv 1"]
        assert set(averages) == {SUCCESSFUL_AVERAGE_LABEL, UNSUCCESSFUL_AVERAGE_LABEL}
        assert parsed_rows[0][1].edge_length == 120

    def test_comparison_csv_without_averages(self, tmp_path):
        rows = build_rows([(120, 4.0, 60.0, (13.0, 14.0), True)])
        path = tmp_path / "cmp.csv"
        write_comparison_csv(rows, path, include_averages=False)
        _, averages = load_fixture_expected(path)
        assert averages == {}


class TestComparisonJoin:
    def test_joins_in_input_order(self):
        baselines = [("sign a", sample_metrics(100)), ("sign b", sample_metrics(200))]
        adv = [
            ("adv 1", "sign b", sample_metrics(150), True),
            ("adv 2", "sign a", sample_metrics(90), False),
        ]
        rows = comparison_rows(baselines, adv)
        assert [r[0] for r in rows] == ["adv 1", "adv 2"]
        assert rows[0][2].edge_length_percent == pytest.approx(25.0)  # 50 off a 200 base
        assert rows[1][2].edge_length_percent == pytest.approx(10.0)

    def test_unknown_baseline_rejected(self):
        baselines = [("sign a", sample_metrics(100))]
        adv = [("adv 1", "missing", sample_metrics(150), True)]
        with pytest.raises(ValueError, match="unknown baseline"):
            comparison_rows(baselines, adv)


class TestJsonMirrors:
    def test_metrics_json_shape(self):
        doc = metrics_json_dict("sign a", sample_metrics(cog=(3.0, 4.0)), EdgeParams())
        assert doc["name"] == "sign a"
        assert doc["edge_length"] == 100
        assert doc["cog"] == [3.0, 4.0]
        assert doc["parameters"]["sigma"] == 1.4

    def test_comparison_json_shape(self):
        rows = build_rows(
            [
                (120, 4.0, 60.0, (13.0, 14.0), True),
                (80, -2.0, 40.0, (10.0, 7.0), False),
            ]
        )
        doc = comparison_json_dict(rows)
        assert len(doc["rows"]) == 2
        assert doc["rows"][0]["success"] is True
        assert doc["average_successful"]["count"] == 1
        assert doc["average_unsuccessful"]["count"] == 1


class TestReferenceFixtures:
    """The full derived-column regression against the documented tables."""

    def test_all_fifteen_rows_within_tolerance(self):
        baselines = read_metrics_csv(FIXTURES / "baseline_metrics.csv")
        adversarial = read_adversarial_csv(FIXTURES / "adversarial_metrics.csv")
        got = comparison_rows(baselines, adversarial)
        want, _ = load_fixture_expected(FIXTURES / "comparison_expected.csv")
        assert len(got) == len(want) == 15
        for (name_g, m_g, d_g, _), (name_w, m_w, d_w) in zip(got, want):
            assert name_g == name_w
            assert m_g.edge_length == m_w.edge_length
            for field in (
                "edge_length_diff",
                "edge_length_percent",
                "orientation_diff",
                "orientation_percent",
                "intensity_diff",
                "intensity_percent",
                "cog_distance",
            ):
                assert getattr(d_g, field) == pytest.approx(getattr(d_w, field), abs=0.01), (
                    f"{name_g}: {field}"
                )

    def test_cohort_averages_match_documented_rows(self):
        baselines = read_metrics_csv(FIXTURES / "baseline_metrics.csv")
        adversarial = read_adversarial_csv(FIXTURES / "adversarial_metrics.csv")
        rows = comparison_rows(baselines, adversarial)
        succ, fail = cohort_averages([(m, d, s) for _, m, d, s in rows])
        _, averages = load_fixture_expected(FIXTURES / "comparison_expected.csv")
        for avg, label in ((succ, SUCCESSFUL_AVERAGE_LABEL), (fail, UNSUCCESSFUL_AVERAGE_LABEL)):
            length, orientation, intensity, cog, delta = averages[label]
            assert avg.edge_length == pytest.approx(length, abs=0.01)
            assert avg.orientation == pytest.approx(orientation, abs=0.01)
            assert avg.intensity == pytest.approx(intensity, abs=0.01)
            assert avg.cog[0] == pytest.approx(cog[0], abs=0.01)
            assert avg.cog[1] == pytest.approx(cog[1], abs=0.01)
            for field in (
                "edge_length_diff",
                "edge_length_percent",
                "orientation_diff",
                "orientation_percent",
                "intensity_diff",
                "intensity_percent",
                "cog_distance",
            ):
                assert getattr(avg, field) == pytest.approx(getattr(delta, field), abs=0.01), (
                    f"{label}: {field}"
                )
