"""Per-label uncertainty estimated from multi-sweep point-cloud geometry.

A tracked box label is observed over several sensor sweeps, each sweep
contributing a pose for the box and the points seen inside it. The points
are carried rigidly into one reference sweep, the convex hull of the
accumulated cloud is compared against the label rectangle via IoU, and the
IoU is mapped to a Laplace scale through an exponential fit anchored at
IoU 0, 0.5, and 1. A sparse, ambiguous label yields a low IoU and a large
scale; a well-supported label yields a small one.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from ._util import fmt_sig
from .geometry import OrientedRect, Point2, convex_hull, iou, rect_to_polygon, rigid_transform

__all__ = [
    "LabelTrack",
    "UncertaintyMapping",
    "LabelUncertaintyRecord",
    "MIN_SCALE",
    "choose_reference_sweep",
    "aggregate_points",
    "label_iou",
    "fit_mapping",
    "map_iou",
    "iou_histogram",
    "evaluate_track",
    "evaluate_tracks",
    "tracks_from_json",
    "records_to_csv",
    "histogram_to_csv",
]

# Lower clamp for mapped scales: the divergence loss requires a strictly
# positive label scale and pathological anchors can drive gamma <= 0.
MIN_SCALE = 1e-6

RECORDS_CSV_HEADER = ("label_id", "class_name", "iou", "scale_b", "n_points", "n_sweeps")


@dataclass
class LabelTrack:
    """One object's per-sweep rectangle poses and the points observed inside it.

    Coordinates are in a shared global frame. Every sweep with points must
    also carry a pose; sweeps may have a pose but no points.
    """

    label_id: str
    class_name: str
    poses: dict[int, OrientedRect]
    points: dict[int, list[Point2]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.poses:
            raise ValueError(f"track {self.label_id!r} has no poses")
        missing = set(self.points) - set(self.poses)
        if missing:
            raise ValueError(
                f"track {self.label_id!r} has points in sweeps without poses: {sorted(missing)}"
            )
        self.points = {
            sweep: [Point2(float(p[0]), float(p[1])) for p in pts]
            for sweep, pts in self.points.items()
        }

    @property
    def n_points(self) -> int:
        return sum(len(pts) for pts in self.points.values())

    @property
    def n_sweeps(self) -> int:
        return len(self.poses)


def choose_reference_sweep(track: LabelTrack) -> int:
    """The sweep holding the most points; ties broken by smallest sweep id."""
    return max(track.poses, key=lambda sweep: (len(track.points.get(sweep, ())), -sweep))


def aggregate_points(track: LabelTrack, reference_sweep: int) -> list[Point2]:
    """Rigidly carry every sweep's points into the reference sweep's label frame."""
    if reference_sweep not in track.poses:
        raise ValueError(
            f"reference sweep {reference_sweep} not among poses of track {track.label_id!r}"
        )
    ref_pose = track.poses[reference_sweep].pose
    out: list[Point2] = []
    for sweep in sorted(track.points):
        from_pose = track.poses[sweep].pose
        for p in track.points[sweep]:
            out.append(rigid_transform(p, from_pose, ref_pose))
    return out


def label_iou(track: LabelTrack, reference_sweep: int) -> float:
    """IoU between the hull of the aggregated points and the reference rectangle.

    Fewer than three non-collinear aggregated points give a degenerate hull
    and an IoU of 0.
    """
    cloud = aggregate_points(track, reference_sweep)
    hull = convex_hull(cloud)
    label_poly = rect_to_polygon(track.poses[reference_sweep])
    return iou(hull, label_poly)


@dataclass(frozen=True)
class UncertaintyMapping:
    """IoU -> Laplace-scale mapping ``alpha * exp(-beta * x) + gamma``.

    Fit from the scales desired at IoU 0, 0.5, and 1 (``anchors``). When the
    anchors are exactly equally spaced the exponential degenerates to a
    constant, so the mapping falls back to the straight line through the
    anchors; ``linear`` marks that case and evaluation then uses the anchors
    directly (alpha/beta/gamma are stored as total drop, 0, and the final
    anchor for reference).
    """

    alpha: float
    beta: float
    gamma: float
    anchors: tuple[float, float, float]
    linear: bool = False


def fit_mapping(b_at_iou0: float, b_at_iou_half: float, b_at_iou1: float) -> UncertaintyMapping:
    """Solve the three-anchor exponential in closed form.

    With t = (b_half - b_1) / (b_0 - b_half):
    beta = -2 ln t, alpha = (b_0 - b_half) / (1 - t), gamma = b_0 - alpha.
    Anchors must be strictly decreasing and positive.
    """
    anchors = (float(b_at_iou0), float(b_at_iou_half), float(b_at_iou1))
    for a in anchors:
        if not (a > 0.0 and math.isfinite(a)):
            raise ValueError(f"anchors must be positive and finite, got {anchors}")
    b0, bh, b1 = anchors
    if not (b0 > bh > b1):
        raise ValueError(f"anchors must be strictly decreasing, got {anchors}")

    t = (bh - b1) / (b0 - bh)
    if abs(t - 1.0) <= 1e-12:
        # Equally spaced anchors: beta would be 0 and the exponential constant.
        return UncertaintyMapping(alpha=b0 - b1, beta=0.0, gamma=b1, anchors=anchors, linear=True)
    beta = -2.0 * math.log(t)
    alpha = (b0 - bh) / (1.0 - t)
    gamma = b0 - alpha
    return UncertaintyMapping(alpha=alpha, beta=beta, gamma=gamma, anchors=anchors, linear=False)


def map_iou(mapping: UncertaintyMapping, iou_value: float) -> float:
    """Evaluate the fitted mapping at an IoU in [0, 1], clamped below at MIN_SCALE."""
    if not (0.0 <= iou_value <= 1.0):
        raise ValueError(f"iou must be in [0, 1], got {iou_value}")
    if mapping.linear:
        b0, _, b1 = mapping.anchors
        value = b0 + (b1 - b0) * iou_value
    else:
        value = mapping.alpha * math.exp(-mapping.beta * iou_value) + mapping.gamma
    return max(value, MIN_SCALE)


@dataclass(frozen=True)
class LabelUncertaintyRecord:
    """One label's hull IoU and the Laplace scale assigned to it."""

    label_id: str
    class_name: str
    iou: float
    scale_b: float
    n_points: int
    n_sweeps: int


def iou_histogram(
    records: Sequence[LabelUncertaintyRecord], n_bins: int
) -> list[tuple[float, float, int]]:
    """Equal-width counts of record IoUs over [0, 1].

    Bins are right-open except the last, which is closed so an IoU of
    exactly 1 lands in the top bin.
    """
    if n_bins < 1:
        raise ValueError(f"n_bins must be >= 1, got {n_bins}")
    counts = [0] * n_bins
    for record in records:
        idx = min(int(record.iou * n_bins), n_bins - 1)
        counts[idx] += 1
    return [(i / n_bins, (i + 1) / n_bins, counts[i]) for i in range(n_bins)]


def evaluate_track(track: LabelTrack, mapping: UncertaintyMapping) -> LabelUncertaintyRecord:
    """Run the full heuristic for one track: reference sweep, hull IoU, scale."""
    reference = choose_reference_sweep(track)
    iou_value = label_iou(track, reference)
    return LabelUncertaintyRecord(
        label_id=track.label_id,
        class_name=track.class_name,
        iou=iou_value,
        scale_b=map_iou(mapping, iou_value),
        n_points=track.n_points,
        n_sweeps=track.n_sweeps,
    )


def evaluate_tracks(
    tracks: Sequence[LabelTrack],
    mapping: UncertaintyMapping | None = None,
    per_class: Mapping[str, UncertaintyMapping] | None = None,
    max_workers: int = 1,
) -> list[LabelUncertaintyRecord]:
    """Evaluate many tracks, one mapping per class with an optional default.

    Track processing is independent per label; with ``max_workers > 1`` the
    work is spread over a thread pool and the records are merged back in
    label-id order so output is identical regardless of scheduling.
    """
    per_class = dict(per_class or {})

    def pick(track: LabelTrack) -> UncertaintyMapping:
        chosen = per_class.get(track.class_name, mapping)
        if chosen is None:
            raise ValueError(
                f"no uncertainty mapping for class {track.class_name!r} and no default given"
            )
        return chosen

    if max_workers > 1 and len(tracks) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            records = list(pool.map(lambda t: evaluate_track(t, pick(t)), tracks))
    else:
        records = [evaluate_track(t, pick(t)) for t in tracks]
    return sorted(records, key=lambda r: r.label_id)


def tracks_from_json(doc: object) -> list[LabelTrack]:
    """Build tracks from the JSON document layout.

    Expected shape::

        {"tracks": [{"label_id": str, "class_name": str,
                     "poses":  [{"sweep_id": int, "center": [x, y],
                                 "theta": rad, "length": m, "width": m}, ...],
                     "points": [{"sweep_id": int, "xy": [[x, y], ...]}, ...]}]}
    """
    if not isinstance(doc, dict) or "tracks" not in doc:
        raise ValueError("track document must be an object with a 'tracks' list")
    raw_tracks = doc["tracks"]
    if not isinstance(raw_tracks, list):
        raise ValueError("'tracks' must be a list")

    tracks: list[LabelTrack] = []
    for idx, raw in enumerate(raw_tracks):
        where = f"tracks[{idx}]"
        try:
            label_id = str(raw["label_id"])
            class_name = str(raw["class_name"])
            poses: dict[int, OrientedRect] = {}
            for pose in raw["poses"]:
                sweep = int(pose["sweep_id"])
                cx, cy = pose["center"]
                poses[sweep] = OrientedRect(
                    center=Point2(float(cx), float(cy)),
                    theta=float(pose["theta"]),
                    length=float(pose["length"]),
                    width=float(pose["width"]),
                )
            points: dict[int, list[Point2]] = {}
            for entry in raw.get("points", []):
                sweep = int(entry["sweep_id"])
                points[sweep] = [Point2(float(x), float(y)) for x, y in entry["xy"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed track at {where}: {exc}") from exc
        tracks.append(LabelTrack(label_id=label_id, class_name=class_name, poses=poses, points=points))
    return tracks


def load_tracks(path: str) -> list[LabelTrack]:
    with open(path, "r", encoding="utf-8") as handle:
        return tracks_from_json(json.load(handle))


def records_to_csv(records: Sequence[LabelUncertaintyRecord]) -> str:
    """Records as CSV with 6 significant digits on the float columns."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RECORDS_CSV_HEADER)
    for r in records:
        writer.writerow(
            [r.label_id, r.class_name, fmt_sig(r.iou, 6), fmt_sig(r.scale_b, 6), r.n_points, r.n_sweeps]
        )
    return buf.getvalue()


def histogram_to_csv(bins: Sequence[tuple[float, float, int]]) -> str:
    lines = ["bin_low,bin_high,count"]
    for low, high, count in bins:
        lines.append(f"{fmt_sig(low)},{fmt_sig(high)},{count}")
    return "\n".join(lines) + "\n"
