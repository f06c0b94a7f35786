"""
Trajectory Rendering
Pinhole projection, anti-aliased polyline rasters and expert-segment augmentation
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from segcurate.core.exceptions import ConfigurationException
from segcurate.models.demonstration import Segment
from segcurate.modules.geometry import (
    arc_fraction,
    perpendicular_unit,
    plane_normal,
    random_unit,
    spline_detour,
)
from segcurate.schemas.config import AugmentConfig
from segcurate.utils.helpers import derive_rng, parallel_map

logger = logging.getLogger(__name__)

RAMP_START = 0.2
RAMP_END = 1.0
# pixels within STROKE_CORE of the stroke are saturated; coverage then falls off over one pixel
STROKE_CORE = 0.75
STROKE_FALLOFF = 1.0
NEGATIVE_STREAM = 1
_MAX_CAMERA_DRAWS = 1000

RasterPair = Tuple["TrajRaster", "TrajRaster"]


@dataclass(frozen=True)
class Camera:
    """Right-handed pinhole camera viewing along -z of its own frame"""
    position: Tuple[float, float, float]
    look_at: Tuple[float, float, float]
    up: Tuple[float, float, float]
    focal: float
    width: int
    height: int

    def __post_init__(self):
        position = np.asarray(self.position, dtype=np.float64)
        forward = np.asarray(self.look_at, dtype=np.float64) - position
        if np.linalg.norm(forward) < 1e-12:
            raise ConfigurationException("camera look_at must differ from position")
        if not (self.focal > 0 and math.isfinite(self.focal)):
            raise ConfigurationException(f"camera focal must be positive, got {self.focal}")
        if self.width < 1 or self.height < 1:
            raise ConfigurationException("camera canvas must be at least 1x1")
        forward = forward / np.linalg.norm(forward)
        right = np.cross(forward, np.asarray(self.up, dtype=np.float64))
        if np.linalg.norm(right) < 1e-9:
            raise ConfigurationException("camera up vector is parallel to the view direction")
        right = right / np.linalg.norm(right)
        object.__setattr__(self, "_basis", np.stack([right, np.cross(right, forward), -forward]))

    @property
    def center(self) -> Tuple[float, float]:
        return self.width / 2.0, self.height / 2.0

    def to_camera_frame(self, points: np.ndarray) -> np.ndarray:
        """Rows are (x, y, z) in the camera frame; visible points have z < 0"""
        offsets = np.atleast_2d(points) - np.asarray(self.position, dtype=np.float64)
        return offsets @ self._basis.T

    def with_focal(self, focal: float) -> "Camera":
        return Camera(self.position, self.look_at, self.up, focal, self.width, self.height)

    def to_dict(self) -> dict:
        return {
            "position": [float(v) for v in self.position],
            "look_at": [float(v) for v in self.look_at],
            "up": [float(v) for v in self.up],
            "focal": float(self.focal),
            "width": self.width,
            "height": self.height,
        }


@dataclass(frozen=True, eq=False)
class TrajRaster:
    pixels: np.ndarray
    camera: Optional[Camera] = None

    def __post_init__(self):
        pixels = np.asarray(self.pixels, dtype=np.float32)
        if pixels.ndim != 2:
            raise ValueError("raster pixels must be a 2-D array")
        pixels.setflags(write=False)
        object.__setattr__(self, "pixels", pixels)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.pixels.shape

    @property
    def is_blank(self) -> bool:
        return not np.any(self.pixels)


def blank_raster(size: int) -> TrajRaster:
    """Empty start/end image of the state-based setup"""
    return TrajRaster(np.zeros((size, size), dtype=np.float32))


# Projection

def project_points(points: np.ndarray, cam: Camera) -> Tuple[np.ndarray, np.ndarray]:
    """Pixel coordinates (n, 2) and an in-front mask; masked rows are undefined"""
    cam_frame = cam.to_camera_frame(points)
    depth = -cam_frame[:, 2]
    in_front = depth > 0
    safe = np.where(in_front, depth, 1.0)
    cx, cy = cam.center
    uv = np.stack([cx + cam.focal * cam_frame[:, 0] / safe,
                   cy + cam.focal * cam_frame[:, 1] / safe], axis=1)
    return uv, in_front


def project(p: np.ndarray, cam: Camera) -> Optional[Tuple[float, float]]:
    """(u, v) for a single point, or None when it lies behind the camera"""
    uv, in_front = project_points(np.asarray(p, dtype=np.float64).reshape(1, 3), cam)
    if not in_front[0]:
        return None
    return float(uv[0, 0]), float(uv[0, 1])


# Rasterization

def _draw_stroke(canvas: np.ndarray, a: np.ndarray, b: np.ndarray,
                 intensity_a: float, intensity_b: float) -> None:
    height, width = canvas.shape
    reach = STROKE_CORE + STROKE_FALLOFF
    x0 = max(0, int(math.floor(min(a[0], b[0]) - reach)))
    x1 = min(width - 1, int(math.ceil(max(a[0], b[0]) + reach)))
    y0 = max(0, int(math.floor(min(a[1], b[1]) - reach)))
    y1 = min(height - 1, int(math.ceil(max(a[1], b[1]) + reach)))
    if x0 > x1 or y0 > y1:
        return

    ys, xs = np.mgrid[y0:y1 + 1, x0:x1 + 1].astype(np.float64)
    direction = b - a
    length_sq = float(direction @ direction)
    if length_sq < 1e-12:
        t = np.ones_like(xs)
    else:
        t = np.clip(((xs - a[0]) * direction[0] + (ys - a[1]) * direction[1]) / length_sq, 0.0, 1.0)
    distance = np.hypot(xs - (a[0] + t * direction[0]), ys - (a[1] + t * direction[1]))
    coverage = np.clip(reach - distance, 0.0, 1.0)
    value = coverage * (intensity_a + t * (intensity_b - intensity_a))

    window = canvas[y0:y1 + 1, x0:x1 + 1]
    np.maximum(window, value, out=window)


def render_points(points: np.ndarray, cam: Camera) -> TrajRaster:
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    canvas = np.zeros((cam.height, cam.width), dtype=np.float64)
    uv, in_front = project_points(points, cam)
    ramp = RAMP_START + (RAMP_END - RAMP_START) * arc_fraction(points)

    if len(points) == 1:
        if in_front[0]:
            _draw_stroke(canvas, uv[0], uv[0], RAMP_END, RAMP_END)
    for i in range(len(points) - 1):
        # strokes touching a point behind the camera are clipped away
        if in_front[i] and in_front[i + 1]:
            _draw_stroke(canvas, uv[i], uv[i + 1], ramp[i], ramp[i + 1])
    return TrajRaster(np.clip(canvas, 0.0, 1.0).astype(np.float32), cam)


def render_segment(seg: Segment, cam: Camera) -> TrajRaster:
    """Draw the end-effector polyline with an intensity ramp from start to end"""
    return render_points(seg.positions, cam)


# Camera sampling

def _view_direction(points: np.ndarray, min_elevation_deg: float,
                    rng: np.random.Generator) -> np.ndarray:
    normal = plane_normal(points)
    axis = None
    if normal is None:
        spread = points - points.mean(axis=0)
        if np.linalg.norm(spread) > 1e-9:
            axis = np.linalg.svd(spread, full_matrices=False)[2][0]
    min_sin = math.sin(math.radians(min_elevation_deg))
    max_cos = math.cos(math.radians(min_elevation_deg))

    direction = random_unit(rng)
    for _ in range(_MAX_CAMERA_DRAWS):
        if normal is not None and abs(direction @ normal) >= min_sin:
            break
        if normal is None and (axis is None or abs(direction @ axis) <= max_cos):
            break
        direction = random_unit(rng)
    return direction


def fit_focal(points: np.ndarray, cam: Camera, fill_ratio: float) -> float:
    """Focal length making the projected points span fill_ratio of the half-canvas"""
    cam_frame = cam.to_camera_frame(points)
    depth = -cam_frame[:, 2]
    visible = depth > 0
    half = min(cam.width, cam.height) / 2.0
    if not np.any(visible):
        return half
    extent = float(np.max(np.abs(cam_frame[visible, :2] / depth[visible, None])))
    if extent < 1e-9:
        return half
    return fill_ratio * half / extent


def sample_camera(points: np.ndarray, cfg: AugmentConfig, rng: np.random.Generator) -> Camera:
    """Camera on a sphere about the trajectory centroid, away from edge-on views"""
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    centroid = points.mean(axis=0)
    direction = _view_direction(points, cfg.min_elevation_deg, rng)
    low, high = cfg.camera_sphere_radius_range
    radius = float(rng.uniform(low, high))
    up = (0.0, 0.0, 1.0) if abs(direction[2]) < 0.99 else (0.0, 1.0, 0.0)

    cam = Camera(tuple(centroid + radius * direction), tuple(centroid), up,
                 1.0, cfg.canvas_size, cfg.canvas_size)
    focal = cfg.focal if cfg.focal is not None else fit_focal(points, cam, cfg.fill_ratio)
    return cam.with_focal(focal)


def camera_stream(seed: int, sample_index: int) -> np.random.Generator:
    """Per-sample camera stream; sample 0 is the canonical classification view"""
    return derive_rng(seed, sample_index)


def canonical_camera(points: np.ndarray, cfg: AugmentConfig) -> Camera:
    return sample_camera(points, cfg, camera_stream(cfg.seed, 0))


# Augmentation

def perturb_points(points: np.ndarray, cfg: AugmentConfig, rng: np.random.Generator) -> np.ndarray:
    """Gaussian jitter plus, with detour_prob, a spline detour at a random interior point"""
    points = np.asarray(points, dtype=np.float64)
    noisy = points + rng.normal(0.0, cfg.jitter_sigma, size=points.shape)
    if rng.random() < cfg.detour_prob and len(points) >= 3:
        center = int(rng.integers(1, len(points) - 1))
        direction = perpendicular_unit(points[-1] - points[0], rng)
        noisy = spline_detour(noisy, center, cfg.detour_amplitude, direction)
    return noisy


def _augment_segment(index: int, seg: Segment, cfg: AugmentConfig, ends: Sequence[TrajRaster],
                     mismatch: bool) -> Tuple[List[RasterPair], List[RasterPair]]:
    points = seg.positions
    cameras = [sample_camera(points, cfg, camera_stream(cfg.seed, i))
               for i in range(max(cfg.n_positive, cfg.n_negative))]
    end = ends[index]

    positives: List[RasterPair] = []
    clean: dict = {}
    for i in range(cfg.n_positive):
        clean[i] = render_points(points, cameras[i])
        positives.append((clean[i], end))

    negatives: List[RasterPair] = []
    for i in range(cfg.n_negative):
        rng = derive_rng(cfg.seed, i, index, NEGATIVE_STREAM)
        use_mismatch = rng.random() < 0.5
        if use_mismatch and mismatch:
            other = int(rng.integers(len(ends) - 1))
            other += other >= index
            raster = clean[i] if i in clean else render_points(points, cameras[i])
            negatives.append((raster, ends[other]))
        else:
            negatives.append((render_points(perturb_points(points, cfg, rng), cameras[i]), end))
    return positives, negatives


def augment_expert(segs: Sequence[Segment], cfg: AugmentConfig,
                   end_rasters: Optional[Sequence[TrajRaster]] = None,
                   threads: int = 1) -> Tuple[List[RasterPair], List[RasterPair]]:
    """n_positive positive and n_negative negative (start, end) raster pairs per expert segment"""
    if not segs:
        return [], []
    blank = blank_raster(cfg.canvas_size)
    ends = list(end_rasters) if end_rasters is not None else [blank] * len(segs)
    if len(ends) != len(segs):
        raise ConfigurationException("end_rasters must align with the expert segments")

    mismatch = len(segs) > 1 and not all(r.is_blank for r in ends)
    if not mismatch:
        logger.debug("All ending rasters blank; negatives use trajectory noise only")

    results = parallel_map(lambda item: _augment_segment(item[0], item[1], cfg, ends, mismatch),
                           list(enumerate(segs)), threads)
    positives = [pair for pos, _ in results for pair in pos]
    negatives = [pair for _, neg in results for pair in neg]
    logger.info(f"Augmented {len(segs)} expert segments into {len(positives)} positive "
                f"and {len(negatives)} negative pairs")
    return positives, negatives
