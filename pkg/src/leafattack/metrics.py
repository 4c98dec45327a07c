"""Edge-map forensics: per-image metrics, baseline deltas, and cohort averages.

Edge pixels come from the shared Canny pipeline. Per image we report the edge
pixel count, the mean gradient orientation in degrees (from the Sobel field of
the blurred image, before non-maximum suppression), the mean grayscale
intensity sampled at the edge pixels of the original image, and the edge
center of gravity. Deltas against a clean baseline are absolute differences;
percentage columns normalize by the baseline value, except orientation, which
normalizes by a full 360-degree turn.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass

import numpy as np

from .edgeops import EdgeParams, canny, connected_components, gaussian_blur, sobel
from .errors import UndefinedPercentError
from .raster import BinaryMask, RasterImage, to_grayscale

ORIENTATION_NORM_DEGREES = 360.0

BASELINE_HEADER = ("Test Image", "Edge Length", "Orientation", "Intensity", "Center of Gravity")
COMPARISON_HEADER = (
    "Adversarial Image",
    "Edge Length",
    "Orientation",
    "Intensity",
    "Center of Gravity",
    "Edge Length Difference",
    "Edge Length Percent",
    "Orientation Difference",
    "Orientation Percent",
    "Intensity Difference",
    "Intensity Percent",
    "Center of Gravity Distance",
)
ADVERSARIAL_INPUT_HEADER = (
    "Adversarial Image",
    "Base Image",
    "Edge Length",
    "Orientation",
    "Intensity",
    "Center of Gravity",
    "Attack Success",
)
SUCCESSFUL_AVERAGE_LABEL = "Average All Successful"
UNSUCCESSFUL_AVERAGE_LABEL = "Average All Unsuccessful"


@dataclass(frozen=True)
class EdgeMetrics:
    """Summary statistics of one image's edge map."""

    edge_length: int
    orientation: float | None
    intensity: float | None
    cog: tuple | None
    component_count: int = 0

    def __post_init__(self):
        if self.edge_length < 0:
            raise ValueError("edge_length must be non-negative")
        if self.edge_length == 0:
            if not (self.orientation is None and self.intensity is None and self.cog is None):
                raise ValueError("an empty edge map has no orientation/intensity/cog")
        else:
            if self.orientation is None or self.intensity is None or self.cog is None:
                raise ValueError("a non-empty edge map needs orientation, intensity, and cog")
            object.__setattr__(self, "cog", (float(self.cog[0]), float(self.cog[1])))


@dataclass(frozen=True)
class MetricsDelta:
    """Differences between a baseline and an adversarial EdgeMetrics."""

    edge_length_diff: float
    edge_length_percent: float
    orientation_diff: float
    orientation_percent: float
    intensity_diff: float
    intensity_percent: float
    cog_distance: float


@dataclass(frozen=True)
class CohortAverages:
    """Arithmetic means of metrics and deltas over one success cohort."""

    count: int
    edge_length: float
    orientation: float
    intensity: float
    cog: tuple
    edge_length_diff: float
    edge_length_percent: float
    orientation_diff: float
    orientation_percent: float
    intensity_diff: float
    intensity_percent: float
    cog_distance: float


def edge_metrics(
    img: RasterImage,
    region: BinaryMask | None = None,
    params: EdgeParams | None = None,
    circular_orientation: bool = False,
) -> EdgeMetrics:
    """Measure the edge map of an image, optionally restricted to a region.

    Orientation defaults to the plain arithmetic mean of per-pixel gradient
    angles in degrees, which carries a known wraparound artifact near +/-180.
    Passing circular_orientation=True switches to the circular mean instead;
    it stays off by default so reported numbers match the plain-mean
    convention used by the reference tables.
    """
    params = params or EdgeParams()
    gray = to_grayscale(img)
    if region is not None and region.bits.shape != gray.data.shape:
        raise ValueError("region dimensions do not match the image")
    edges = canny(gray, params.low, params.high, params.sigma)
    bits = edges.bits & region.bits if region is not None else edges.bits
    count = int(np.count_nonzero(bits))
    if count == 0:
        return EdgeMetrics(0, None, None, None, 0)
    field = sobel(gaussian_blur(gray, params.sigma))
    ys, xs = np.nonzero(bits)
    angles = np.arctan2(field.gy[ys, xs], field.gx[ys, xs])
    if circular_orientation:
        orientation = float(np.degrees(np.arctan2(np.sin(angles).mean(), np.cos(angles).mean())))
    else:
        orientation = float(np.degrees(angles).mean())
    intensity = float(gray.data[ys, xs].mean())
    cog = (float(xs.mean()), float(ys.mean()))
    components = connected_components(BinaryMask(bits), connectivity=8).count
    return EdgeMetrics(count, orientation, intensity, cog, components)


def metrics_delta(base: EdgeMetrics, adv: EdgeMetrics) -> MetricsDelta:
    """Differences of an adversarial edge map against its clean baseline."""
    if base.edge_length == 0:
        raise UndefinedPercentError("baseline edge length is zero, percent deltas are undefined")
    if adv.edge_length == 0:
        raise ValueError("adversarial metrics have an empty edge map")
    if base.intensity == 0:
        raise UndefinedPercentError("baseline intensity is zero, percent deltas are undefined")
    edge_diff = float(abs(adv.edge_length - base.edge_length))
    orient_diff = abs(adv.orientation - base.orientation)
    intensity_diff = abs(adv.intensity - base.intensity)
    return MetricsDelta(
        edge_length_diff=edge_diff,
        edge_length_percent=100.0 * edge_diff / base.edge_length,
        orientation_diff=orient_diff,
        orientation_percent=100.0 * orient_diff / ORIENTATION_NORM_DEGREES,
        intensity_diff=intensity_diff,
        intensity_percent=100.0 * intensity_diff / base.intensity,
        cog_distance=math.hypot(adv.cog[0] - base.cog[0], adv.cog[1] - base.cog[1]),
    )


def cohort_averages(rows) -> tuple[CohortAverages | None, CohortAverages | None]:
    """Mean metrics/deltas split by attack success.

    ``rows`` holds (EdgeMetrics, MetricsDelta, success) triples; returns
    (successful, unsuccessful), each None when its cohort is empty.
    """

    def average(cohort) -> CohortAverages | None:
        if not cohort:
            return None
        n = len(cohort)

        def mean(fn):
            return sum(fn(m, d) for m, d in cohort) / n

        return CohortAverages(
            count=n,
            edge_length=mean(lambda m, d: m.edge_length),
            orientation=mean(lambda m, d: m.orientation),
            intensity=mean(lambda m, d: m.intensity),
            cog=(mean(lambda m, d: m.cog[0]), mean(lambda m, d: m.cog[1])),
            edge_length_diff=mean(lambda m, d: d.edge_length_diff),
            edge_length_percent=mean(lambda m, d: d.edge_length_percent),
            orientation_diff=mean(lambda m, d: d.orientation_diff),
            orientation_percent=mean(lambda m, d: d.orientation_percent),
            intensity_diff=mean(lambda m, d: d.intensity_diff),
            intensity_percent=mean(lambda m, d: d.intensity_percent),
            cog_distance=mean(lambda m, d: d.cog_distance),
        )

    groups = {True: [], False: []}
    for metrics, delta, success in rows:
        if metrics.edge_length == 0:
            raise ValueError("cohort rows need non-empty edge maps")
        groups[bool(success)].append((metrics, delta))
    return average(groups[True]), average(groups[False])


def _fmt(value: float) -> str:
    return f"{value:.2f}"


def _fmt_cog(cog) -> str:
    return f"({cog[0]:.2f}, {cog[1]:.2f})"


_COG_RE = re.compile(r"^\s*\(\s*(-?[\d.]+)\s*,\s*(-?[\d.]+)\s*\)\s*$")


def _parse_cog(text: str) -> tuple:
    match = _COG_RE.match(text)
    if not match:
        raise ValueError(f"malformed center-of-gravity value: {text!r}")
    return (float(match.group(1)), float(match.group(2)))


def write_metrics_csv(rows, path) -> None:
    """Write (name, EdgeMetrics) rows as a baseline-shaped CSV."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(BASELINE_HEADER)
        for name, m in rows:
            if m.edge_length == 0:
                writer.writerow([name, 0, "", "", ""])
            else:
                writer.writerow([name, m.edge_length, _fmt(m.orientation), _fmt(m.intensity), _fmt_cog(m.cog)])


def read_metrics_csv(path):
    """Parse a baseline-shaped CSV back into (name, EdgeMetrics) rows."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader, ()))
        if header != BASELINE_HEADER:
            raise ValueError(f"{path}: expected header {list(BASELINE_HEADER)}, got {list(header)}")
        for record in reader:
            if not record or not any(record):
                continue
            name, length, orientation, intensity, cog = record
            length = int(float(length))
            if length == 0:
                rows.append((name, EdgeMetrics(0, None, None, None, 0)))
            else:
                rows.append(
                    (name, EdgeMetrics(length, float(orientation), float(intensity), _parse_cog(cog)))
                )
    return rows


def read_adversarial_csv(path):
    """Parse adversarial rows: (name, base_name, EdgeMetrics, success)."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader, ()))
        if header != ADVERSARIAL_INPUT_HEADER:
            raise ValueError(f"{path}: expected header {list(ADVERSARIAL_INPUT_HEADER)}, got {list(header)}")
        for record in reader:
            if not record or not any(record):
                continue
            name, base_name, length, orientation, intensity, cog, success = record
            metrics = EdgeMetrics(int(float(length)), float(orientation), float(intensity), _parse_cog(cog))
            flag = success.strip().lower()
            if flag not in ("yes", "no"):
                raise ValueError(f"{path}: Attack Success must be Yes or No, got {success!r}")
            rows.append((name, base_name, metrics, flag == "yes"))
    return rows


def comparison_rows(baseline_rows, adversarial_rows):
    """Join adversarial rows to baselines by name and compute deltas.

    Returns (name, EdgeMetrics, MetricsDelta, success) tuples in input order.
    """
    baselines = dict(baseline_rows)
    out = []
    for name, base_name, metrics, success in adversarial_rows:
        if base_name not in baselines:
            raise ValueError(f"adversarial row {name!r} references unknown baseline {base_name!r}")
        out.append((name, metrics, metrics_delta(baselines[base_name], metrics), success))
    return out


def _comparison_record(name, m: EdgeMetrics, d: MetricsDelta) -> list:
    return [
        name,
        _fmt(float(m.edge_length)),
        _fmt(m.orientation),
        _fmt(m.intensity),
        _fmt_cog(m.cog),
        _fmt(d.edge_length_diff),
        _fmt(d.edge_length_percent),
        _fmt(d.orientation_diff),
        _fmt(d.orientation_percent),
        _fmt(d.intensity_diff),
        _fmt(d.intensity_percent),
        _fmt(d.cog_distance),
    ]


def _average_record(label: str, avg: CohortAverages) -> list:
    return [
        label,
        _fmt(avg.edge_length),
        _fmt(avg.orientation),
        _fmt(avg.intensity),
        _fmt_cog(avg.cog),
        _fmt(avg.edge_length_diff),
        _fmt(avg.edge_length_percent),
        _fmt(avg.orientation_diff),
        _fmt(avg.orientation_percent),
        _fmt(avg.intensity_diff),
        _fmt(avg.intensity_percent),
        _fmt(avg.cog_distance),
    ]


def write_comparison_csv(rows, path, include_averages: bool = True) -> None:
    """Write (name, EdgeMetrics, MetricsDelta, success) rows as a comparison CSV."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(COMPARISON_HEADER)
        for name, m, d, _success in rows:
            writer.writerow(_comparison_record(name, m, d))
        if include_averages:
            successful, unsuccessful = cohort_averages([(m, d, s) for _, m, d, s in rows])
            if successful is not None:
                writer.writerow(_average_record(SUCCESSFUL_AVERAGE_LABEL, successful))
            if unsuccessful is not None:
                writer.writerow(_average_record(UNSUCCESSFUL_AVERAGE_LABEL, unsuccessful))


def metrics_json_dict(name: str, m: EdgeMetrics, params: EdgeParams) -> dict:
    return {
        "name": name,
        "edge_length": m.edge_length,
        "orientation": m.orientation,
        "intensity": m.intensity,
        "cog": list(m.cog) if m.cog is not None else None,
        "component_count": m.component_count,
        "parameters": params.as_dict(),
    }


def comparison_json_dict(rows) -> dict:
    """JSON mirror of the comparison table, averages included."""

    def delta_dict(d: MetricsDelta) -> dict:
        return {
            "edge_length_diff": d.edge_length_diff,
            "edge_length_percent": d.edge_length_percent,
            "orientation_diff": d.orientation_diff,
            "orientation_percent": d.orientation_percent,
            "intensity_diff": d.intensity_diff,
            "intensity_percent": d.intensity_percent,
            "cog_distance": d.cog_distance,
        }

    successful, unsuccessful = cohort_averages([(m, d, s) for _, m, d, s in rows])

    def avg_dict(avg: CohortAverages | None) -> dict | None:
        if avg is None:
            return None
        return {
            "count": avg.count,
            "edge_length": avg.edge_length,
            "orientation": avg.orientation,
            "intensity": avg.intensity,
            "cog": list(avg.cog),
            "edge_length_diff": avg.edge_length_diff,
            "edge_length_percent": avg.edge_length_percent,
            "orientation_diff": avg.orientation_diff,
            "orientation_percent": avg.orientation_percent,
            "intensity_diff": avg.intensity_diff,
            "intensity_percent": avg.intensity_percent,
            "cog_distance": avg.cog_distance,
        }

    return {
        "rows": [
            {
                "name": name,
                "edge_length": m.edge_length,
                "orientation": m.orientation,
                "intensity": m.intensity,
                "cog": list(m.cog),
                "success": success,
                "delta": delta_dict(d),
            }
            for name, m, d, success in rows
        ],
        "average_successful": avg_dict(successful),
        "average_unsuccessful": avg_dict(unsuccessful),
    }


def load_fixture_expected(path):
    """Parse a comparison-shaped CSV (as written by write_comparison_csv).

    Returns (rows, averages): rows are (name, EdgeMetrics, MetricsDelta) and
    averages maps the average-row labels to MetricsDelta-like records.
    """
    rows = []
    averages = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader, ()))
        if header != COMPARISON_HEADER:
            raise ValueError(f"{path}: expected header {list(COMPARISON_HEADER)}, got {list(header)}")
        for record in reader:
            if not record or not any(record):
                continue
            name = record[0]
            length, orientation, intensity = (float(v) for v in record[1:4])
            cog = _parse_cog(record[4])
            delta = MetricsDelta(*(float(v) for v in record[5:12]))
            if name in (SUCCESSFUL_AVERAGE_LABEL, UNSUCCESSFUL_AVERAGE_LABEL):
                averages[name] = (length, orientation, intensity, cog, delta)
            else:
                metrics = EdgeMetrics(int(round(length)), orientation, intensity, cog)
                rows.append((name, metrics, delta))
    return rows, averages


__all__ = [
    "ADVERSARIAL_INPUT_HEADER",
    "CohortAverages",
    "EdgeMetrics",
    "MetricsDelta",
    "ORIENTATION_NORM_DEGREES",
    "SUCCESSFUL_AVERAGE_LABEL",
    "BASELINE_HEADER",
    "COMPARISON_HEADER",
    "UNSUCCESSFUL_AVERAGE_LABEL",
    "cohort_averages",
    "comparison_json_dict",
    "comparison_rows",
    "edge_metrics",
    "load_fixture_expected",
    "metrics_delta",
    "metrics_json_dict",
    "read_adversarial_csv",
    "read_metrics_csv",
    "write_comparison_csv",
    "write_metrics_csv",
]
