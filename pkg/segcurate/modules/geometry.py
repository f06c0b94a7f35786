"""
Geometry Helpers
Polyline, angle and spline utilities shared by render, optimization and synth
"""

from typing import Optional

import numpy as np
from scipy.interpolate import CubicSpline


def step_lengths(points: np.ndarray) -> np.ndarray:
    """||e_{i+1} - e_i|| for consecutive points"""
    points = np.asarray(points, dtype=np.float64)
    if len(points) < 2:
        return np.zeros(0)
    return np.linalg.norm(np.diff(points, axis=0), axis=1)


def angle_between(u: np.ndarray, v: np.ndarray, eps: float) -> Optional[float]:
    """Angle in degrees; None when either vector is shorter than eps"""
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu < eps or nv < eps:
        return None
    cosine = float(np.dot(u, v)) / (nu * nv)
    return float(np.degrees(np.arccos(np.clip(cosine, -1.0, 1.0))))


def arc_fraction(points: np.ndarray, eps: float = 1e-12) -> np.ndarray:
    """Cumulative arc-length fraction in [0, 1]; index fraction for degenerate polylines"""
    n = len(points)
    if n == 1:
        return np.ones(1)
    cumulative = np.concatenate([[0.0], np.cumsum(step_lengths(points))])
    if cumulative[-1] < eps:
        return np.linspace(0.0, 1.0, n)
    return cumulative / cumulative[-1]


def random_unit(rng: np.random.Generator, dim: int = 3) -> np.ndarray:
    while True:
        v = rng.standard_normal(dim)
        norm = np.linalg.norm(v)
        if norm > 1e-9:
            return v / norm


def perpendicular_unit(direction: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Random unit vector orthogonal to direction (any unit vector if direction vanishes)"""
    norm = np.linalg.norm(direction)
    if norm < 1e-12:
        return random_unit(rng)
    d = direction / norm
    while True:
        v = random_unit(rng)
        v = v - np.dot(v, d) * d
        vn = np.linalg.norm(v)
        if vn > 1e-6:
            return v / vn


def plane_normal(points: np.ndarray) -> Optional[np.ndarray]:
    """Normal of the best-fit plane; None when the points are (nearly) collinear"""
    centered = np.asarray(points, dtype=np.float64) - np.mean(points, axis=0)
    if len(centered) < 3:
        return None
    _, singular, vt = np.linalg.svd(centered, full_matrices=False)
    if singular.shape[0] < 3 or singular[1] < 1e-9 or singular[1] < 1e-6 * singular[0]:
        return None
    return vt[2]


def spline_detour(points: np.ndarray, center: int, amplitude: float,
                  direction: np.ndarray, half_width: Optional[int] = None) -> np.ndarray:
    """Smooth bump of the given amplitude around points[center], endpoints untouched"""
    points = np.array(points, dtype=np.float64)
    n = len(points)
    if n < 3 or amplitude == 0:
        return points
    center = int(np.clip(center, 1, n - 2))
    width = half_width if half_width is not None else max(2, n // 4)
    lo = max(0, center - width)
    hi = min(n - 1, center + width)
    bump = CubicSpline([lo, center, hi], [0.0, amplitude, 0.0], bc_type="clamped")
    index = np.arange(lo + 1, hi)
    points[index] += bump(index)[:, None] * direction[None, :]
    return points


def minimum_jerk(start: np.ndarray, goal: np.ndarray, n: int) -> np.ndarray:
    """n points at s = k/n, k = 1..n, of the minimum-jerk profile from start to goal"""
    s = np.arange(1, n + 1) / n
    profile = 10 * s**3 - 15 * s**4 + 6 * s**5
    start = np.asarray(start, dtype=np.float64)
    return start[None, :] + (np.asarray(goal) - start)[None, :] * profile[:, None]
