"""Procedural benchmark shapes: outline rendering and gap cutting.

Every shape is built as a closed polyline, rasterized into an ordered
chain of unique pixels (the contour trace), and stamped onto a light
canvas. Gaps are cut by dropping windows of the trace, which makes the
removed arc length exact in pixels and keeps the degraded dark set a
strict subset of the ground truth's.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, ShapeError
from .pngio import load_image, save_image
from .scores import GapStat, gap_metric

CATEGORIES = (
    "circle",
    "kite",
    "parallelogram",
    "rectangle",
    "rhombus",
    "square",
    "trapezoid",
    "triangle",
    "overlap",
)

DATASET_NAMES = ("simple", "complex")


@dataclass(frozen=True)
class ShapeSpec:
    category: str
    center: tuple[float, float]          # (row, col)
    scale: float                         # half-extent in pixels
    rotation: float = 0.0
    stroke_width: int = 1
    jitter: float = 0.0                  # hand-drawn wobble, relative to scale
    jitter_seed: int = 0
    params: dict = field(default_factory=dict)
    parts: tuple["ShapeSpec", ...] = ()

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise ConfigError(f"unknown category {self.category!r}")
        if self.scale <= 0:
            raise ConfigError(f"scale must be positive, got {self.scale}")
        if self.stroke_width < 1:
            raise ConfigError(f"stroke_width must be >= 1, got {self.stroke_width}")
        if self.category == "overlap" and len(self.parts) != 2:
            raise ConfigError("overlap shapes need exactly two parts")


@dataclass(frozen=True)
class DegradationSpec:
    num_gaps: int
    gap_length: float                    # contour pixels removed per gap
    seed: int = 0

    def __post_init__(self):
        if self.num_gaps < 0:
            raise ConfigError(f"num_gaps must be >= 0, got {self.num_gaps}")
        if self.num_gaps and self.gap_length < 1:
            raise ConfigError(f"gap_length must be >= 1, got {self.gap_length}")


@dataclass
class DatasetSample:
    sample_id: str
    category: str
    ground_truth: np.ndarray
    degraded: np.ndarray
    gap_stat: GapStat
    shape: ShapeSpec
    degradation: DegradationSpec
    removed_segments: list[np.ndarray] = field(default_factory=list)


# ----------------------------------------------------------------------
# geometry


def _unit_vertices(spec: ShapeSpec) -> np.ndarray:
    p = spec.params
    cat = spec.category
    if cat == "square":
        v = [(-1, -1), (1, -1), (1, 1), (-1, 1)]
    elif cat == "rectangle":
        a = p.get("aspect", 0.6)
        v = [(-1, -a), (1, -a), (1, a), (-1, a)]
    elif cat == "parallelogram":
        a = p.get("aspect", 0.6)
        s = p.get("shear", 0.4)
        v = [(-1 - s, -a), (1 - s, -a), (1 + s, a), (-1 + s, a)]
    elif cat == "rhombus":
        w = p.get("width", 0.55)
        v = [(0, -1), (w, 0), (0, 1), (-w, 0)]
    elif cat == "kite":
        w = p.get("width", 0.6)
        t = p.get("tail", 0.55)
        v = [(0, -1), (w, 0), (0, t), (-w, 0)]
    elif cat == "trapezoid":
        t = p.get("top", 0.5)
        a = p.get("height", 0.7)
        v = [(-1, a), (1, a), (t, -a), (-t, -a)]
    elif cat == "triangle":
        apex = p.get("apex", 0.0)
        a = p.get("height", 0.75)
        v = [(-1, a), (1, a), (apex, -a)]
    else:
        raise ShapeError(f"no polygon for category {cat!r}")
    arr = np.asarray(v, dtype=np.float64)
    return arr / np.abs(arr).max()


def _circle_points(spec: ShapeSpec, n: int = 96) -> np.ndarray:
    theta = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    r = np.ones(n)
    if spec.jitter > 0:
        rng = np.random.default_rng(spec.jitter_seed)
        for k in range(2, 6):
            r += rng.normal(0.0, spec.jitter) * (2.0 / k) * np.sin(k * theta + rng.uniform(0, 2 * np.pi))
        r = np.clip(r, 1.0 - 3.0 * spec.jitter, 1.0 + 3.0 * spec.jitter)
    return np.stack([r * np.cos(theta), r * np.sin(theta)], axis=1)


def _jitter_polygon(verts: np.ndarray, spec: ShapeSpec) -> np.ndarray:
    if spec.jitter <= 0:
        return verts
    rng = np.random.default_rng(spec.jitter_seed)
    out = verts + rng.normal(0.0, spec.jitter, verts.shape)
    # one subdivision round: wobble edge midpoints perpendicular to the edge
    pieces = []
    n = len(out)
    for i in range(n):
        a, b = out[i], out[(i + 1) % n]
        edge = b - a
        norm = np.linalg.norm(edge)
        perp = np.array([-edge[1], edge[0]]) / (norm + 1e-12)
        mid = (a + b) / 2 + perp * rng.normal(0.0, 0.7 * spec.jitter)
        pieces.extend([a, mid])
    return np.asarray(pieces)


def _outline(spec: ShapeSpec) -> np.ndarray:
    """Closed outline in pixel coordinates, rows in column 0."""
    if spec.category == "circle":
        pts = _circle_points(spec)
    else:
        pts = _jitter_polygon(_unit_vertices(spec), spec)
    c, s = np.cos(spec.rotation), np.sin(spec.rotation)
    rot = np.array([[c, -s], [s, c]])
    return np.asarray(spec.center) + spec.scale * (pts @ rot.T)


def _segment_pixels(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    length = float(np.hypot(*(b - a)))
    n = max(2, int(length * 4) + 1)
    t = np.linspace(0.0, 1.0, n)[:, None]
    return np.rint(a + t * (b - a)).astype(np.intp)


def _polyline_trace(outline: np.ndarray) -> np.ndarray:
    """Ordered unique pixels along the closed outline."""
    chunks = []
    n = len(outline)
    for i in range(n):
        chunks.append(_segment_pixels(outline[i], outline[(i + 1) % n]))
    px = np.concatenate(chunks)
    keep = np.ones(len(px), dtype=bool)
    keep[1:] = np.any(px[1:] != px[:-1], axis=1)
    px = px[keep]
    _, first = np.unique(px, axis=0, return_index=True)
    return px[np.sort(first)]


def _traces(spec: ShapeSpec) -> list[np.ndarray]:
    if spec.category == "overlap":
        return [t for part in spec.parts for t in _traces(part)]
    return [_polyline_trace(_outline(spec))]


def _disk_offsets(stroke_width: int) -> np.ndarray:
    r = stroke_width / 2.0
    lim = int(np.ceil(r))
    offs = [
        (dr, dc)
        for dr in range(-lim, lim + 1)
        for dc in range(-lim, lim + 1)
        if dr * dr + dc * dc <= r * r
    ]
    return np.asarray(offs, dtype=np.intp)


def _stamp(pixel_chunks: list[np.ndarray], canvas: tuple[int, int], stroke_width: int) -> np.ndarray:
    img = np.ones(canvas, dtype=np.float32)
    if not pixel_chunks:
        return img
    px = np.concatenate([c for c in pixel_chunks if len(c)]) if any(len(c) for c in pixel_chunks) else None
    if px is None:
        return img
    if stroke_width == 1:
        img[px[:, 0], px[:, 1]] = 0.0
    else:
        for dr, dc in _disk_offsets(stroke_width):
            img[px[:, 0] + dr, px[:, 1] + dc] = 0.0
    return img


def _check_fits(traces: list[np.ndarray], canvas: tuple[int, int], stroke_width: int) -> None:
    margin = stroke_width
    for t in traces:
        if (
            t[:, 0].min() < margin
            or t[:, 1].min() < margin
            or t[:, 0].max() >= canvas[0] - margin
            or t[:, 1].max() >= canvas[1] - margin
        ):
            raise ShapeError("shape out of canvas")


def render_shape(spec: ShapeSpec, canvas: int | tuple[int, int]) -> np.ndarray:
    """Rasterize the closed outline: dark (0) contour on a light (1) canvas."""
    hw = (canvas, canvas) if isinstance(canvas, int) else tuple(canvas)
    traces = _traces(spec)
    _check_fits(traces, hw, spec.stroke_width)
    return _stamp(traces, hw, spec.stroke_width)


# ----------------------------------------------------------------------
# gap cutting


def _choose_windows(trace_len: int, num_gaps: int, gap_px: int, rng: np.random.Generator) -> list[int]:
    """Start offsets of non-overlapping gap windows on a circular trace.

    Windows keep at least 2 * gap_px of contour between them.
    """
    if num_gaps == 0:
        return []
    if gap_px >= trace_len or num_gaps * 3 * gap_px > trace_len:
        raise ValueError(
            f"gaps exceed contour length: {num_gaps} x {gap_px} px on {trace_len} px"
        )
    for _ in range(2000):
        starts = np.sort(rng.integers(0, trace_len, size=num_gaps))
        if num_gaps == 1:
            return [int(starts[0])]
        seps = np.diff(starts) - gap_px
        wrap = trace_len - int(starts[-1]) - gap_px + int(starts[0])
        if seps.min() >= 2 * gap_px and wrap >= 2 * gap_px:
            return [int(s) for s in starts]
    raise ValueError("could not place non-overlapping gaps; relax the degradation spec")


def _cut_trace(trace: np.ndarray, starts: list[int], gap_px: int) -> tuple[np.ndarray, list[np.ndarray]]:
    keep = np.ones(len(trace), dtype=bool)
    removed = []
    for s in starts:
        sel = (np.arange(s, s + gap_px)) % len(trace)
        keep[sel] = False
        removed.append(trace[sel])
    return trace[keep], removed


def cut_gaps(img: np.ndarray, spec: DegradationSpec) -> np.ndarray:
    """Remove gap windows from a rendered contour image.

    The dark pixels are reordered into a contour walk first, so this only
    behaves sensibly for images whose dark set is a drawable outline
    (anything produced by ``render_shape`` with stroke width 1).
    """
    arr = np.asarray(img, dtype=np.float32)
    if spec.num_gaps == 0:
        return arr.copy()
    trace = _trace_from_image(arr)
    rng = np.random.default_rng(spec.seed)
    starts = _choose_windows(len(trace), spec.num_gaps, int(round(spec.gap_length)), rng)
    _, removed = _cut_trace(trace, starts, int(round(spec.gap_length)))
    out = arr.copy()
    for seg in removed:
        out[seg[:, 0], seg[:, 1]] = 1.0
    return out


_NEIGHBOR_ORDER = ((-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1))


def _trace_from_image(img: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    """Order the dark pixels by walking 8-connected neighbors."""
    dark = np.argwhere(img < threshold)
    if not len(dark):
        raise ValueError("no contour pixels to trace")
    pending = {(int(r), int(c)) for r, c in dark}
    current = min(pending)
    order = []
    while True:
        order.append(current)
        pending.remove(current)
        if not pending:
            break
        for dr, dc in _NEIGHBOR_ORDER:
            nxt = (current[0] + dr, current[1] + dc)
            if nxt in pending:
                current = nxt
                break
        else:
            current = min(pending, key=lambda p: ((p[0] - current[0]) ** 2 + (p[1] - current[1]) ** 2, p))
    return np.asarray(order, dtype=np.intp)


# ----------------------------------------------------------------------
# dataset generation


def _random_shape(category: str, canvas: int, stroke: int, jitter: float, rng: np.random.Generator) -> ShapeSpec:
    def base(cat: str, scale_lo: float, scale_hi: float, center=None, scale=None) -> ShapeSpec:
        params = {}
        if cat == "rectangle":
            params["aspect"] = rng.uniform(0.45, 0.75)
        elif cat == "parallelogram":
            params["aspect"] = rng.uniform(0.5, 0.7)
            params["shear"] = rng.uniform(0.25, 0.5)
        elif cat == "rhombus":
            params["width"] = rng.uniform(0.45, 0.7)
        elif cat == "kite":
            params["width"] = rng.uniform(0.5, 0.7)
            params["tail"] = rng.uniform(0.4, 0.65)
        elif cat == "trapezoid":
            params["top"] = rng.uniform(0.4, 0.65)
            params["height"] = rng.uniform(0.55, 0.8)
        elif cat == "triangle":
            params["apex"] = rng.uniform(-0.3, 0.3)
            params["height"] = rng.uniform(0.6, 0.85)
        if scale is None:
            scale = canvas * rng.uniform(scale_lo, scale_hi)
        if center is None:
            center = (
                canvas / 2 + rng.uniform(-0.05, 0.05) * canvas,
                canvas / 2 + rng.uniform(-0.05, 0.05) * canvas,
            )
        return ShapeSpec(
            category=cat,
            center=center,
            scale=float(scale),
            rotation=float(rng.uniform(0.0, 2.0 * np.pi)),
            stroke_width=stroke,
            jitter=float(jitter),
            jitter_seed=int(rng.integers(2**31)),
            params=params,
        )

    if category != "overlap":
        return base(category, 0.22, 0.32)
    cats = [c for c in CATEGORIES if c != "overlap"]
    first = base(cats[int(rng.integers(len(cats)))], 0.16, 0.22)
    second_cat = cats[int(rng.integers(len(cats)))]
    offset = first.scale * rng.uniform(0.5, 0.8)
    angle = rng.uniform(0.0, 2.0 * np.pi)
    second_center = (
        first.center[0] + offset * np.sin(angle),
        first.center[1] + offset * np.cos(angle),
    )
    second = base(second_cat, 0.16, 0.22, center=second_center)
    return ShapeSpec(
        category="overlap",
        center=first.center,
        scale=max(first.scale, second.scale),
        stroke_width=stroke,
        parts=(first, second),
    )


def generate_dataset(
    name: str,
    count: int,
    canvas: int = 128,
    seed: int = 0,
    stroke_width: int = 1,
) -> list[DatasetSample]:
    """Build ``count`` ground-truth / degraded pairs, cycling the categories.

    "simple" uses regular geometry with 1-3 short gaps; "complex" uses
    jittered hand-drawn outlines with 3-8 longer gaps.
    """
    if name not in DATASET_NAMES:
        raise ConfigError(f"dataset name must be one of {DATASET_NAMES}, got {name!r}")
    if count < 1:
        raise ConfigError(f"count must be >= 1, got {count}")
    rng = np.random.default_rng(seed)
    samples = []
    for idx in range(count):
        category = CATEGORIES[idx % len(CATEGORIES)]
        for attempt in range(20):
            jitter = 0.0 if name == "simple" else float(rng.uniform(0.04, 0.09))
            spec = _random_shape(category, canvas, stroke_width, jitter, rng)
            if name == "simple":
                num_gaps = int(rng.integers(1, 4))
                gap_px = int(rng.integers(4, 11))
            else:
                num_gaps = int(rng.integers(3, 9))
                gap_px = int(rng.integers(8, 17))
            try:
                traces = _traces(spec)
                _check_fits(traces, (canvas, canvas), stroke_width)
                sample = _degrade(spec, traces, (canvas, canvas), num_gaps, gap_px, rng)
                break
            except (ValueError, ShapeError):
                continue
        else:
            raise RuntimeError(f"could not generate a feasible sample for {category}")
        sample.sample_id = f"{idx:04d}"
        samples.append(sample)
    return samples


def _degrade(
    spec: ShapeSpec,
    traces: list[np.ndarray],
    canvas: tuple[int, int],
    num_gaps: int,
    gap_px: int,
    rng: np.random.Generator,
) -> DatasetSample:
    gt = _stamp(traces, canvas, spec.stroke_width)
    # distribute gaps round-robin over parts, capped by each trace's capacity
    per_trace = [0] * len(traces)
    for g in range(num_gaps):
        per_trace[g % len(traces)] += 1
    kept_chunks = []
    removed = []
    for t, n in zip(traces, per_trace):
        cap = len(t) // (3 * gap_px) if gap_px else 0
        n = min(n, cap)
        if n == 0:
            kept_chunks.append(t)
            continue
        starts = _choose_windows(len(t), n, gap_px, rng)
        kept, segs = _cut_trace(t, starts, gap_px)
        kept_chunks.append(kept)
        removed.extend(segs)
    if not removed:
        raise ValueError("degradation removed nothing; increase trace length or reduce gap size")
    degraded = _stamp(kept_chunks, canvas, spec.stroke_width)
    degradation = DegradationSpec(
        num_gaps=len(removed), gap_length=float(gap_px), seed=int(rng.integers(2**31))
    )
    return DatasetSample(
        sample_id="",
        category=spec.category,
        ground_truth=gt,
        degraded=degraded,
        gap_stat=gap_metric(gt, degraded),
        shape=spec,
        degradation=degradation,
        removed_segments=removed,
    )


# ----------------------------------------------------------------------
# disk layout


def _spec_to_dict(spec: ShapeSpec) -> dict:
    d = dataclasses.asdict(spec)
    d["parts"] = [_spec_to_dict(p) for p in spec.parts]
    return d


def _spec_from_dict(d: dict) -> ShapeSpec:
    d = dict(d)
    d["center"] = tuple(d["center"])
    d["parts"] = tuple(_spec_from_dict(p) for p in d.get("parts", []))
    return ShapeSpec(**d)


def save_dataset(samples: list[DatasetSample], out_dir: str | Path, name: str, canvas: int, seed: int) -> Path:
    """Write <id>_gt.png / <id>_degraded.png pairs plus manifest.json."""
    root = Path(out_dir) / name
    root.mkdir(parents=True, exist_ok=True)
    rows = []
    for s in samples:
        save_image(root / f"{s.sample_id}_gt.png", s.ground_truth)
        save_image(root / f"{s.sample_id}_degraded.png", s.degraded)
        rows.append(
            {
                "id": s.sample_id,
                "category": s.category,
                "phi_gt": s.gap_stat.phi_gt,
                "phi_degraded": s.gap_stat.phi_incomplete,
                "gap": s.gap_stat.gap,
                "shape": _spec_to_dict(s.shape),
                "degradation": dataclasses.asdict(s.degradation),
            }
        )
    manifest = {
        "name": name,
        "canvas": canvas,
        "seed": seed,
        "count": len(samples),
        "samples": rows,
    }
    with open(root / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
    return root


def load_dataset(dataset_dir: str | Path) -> list[DatasetSample]:
    root = Path(dataset_dir)
    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        raise ConfigError(f"no manifest.json in {root}")
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    samples = []
    for row in manifest["samples"]:
        gt = load_image(root / f"{row['id']}_gt.png")
        degraded = load_image(root / f"{row['id']}_degraded.png")
        samples.append(
            DatasetSample(
                sample_id=row["id"],
                category=row["category"],
                ground_truth=gt,
                degraded=degraded,
                gap_stat=GapStat(row["phi_gt"], row["phi_degraded"], row["gap"]),
                shape=_spec_from_dict(row["shape"]),
                degradation=DegradationSpec(**row["degradation"]),
            )
        )
    return samples
