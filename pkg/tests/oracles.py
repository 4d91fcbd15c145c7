"""Independent numerical oracles used by the tests.

Everything here deliberately avoids the library's own code paths: the KL
value is integrated with adaptive quadrature, gradients are estimated by
central finite differences, polygon areas by Monte Carlo sampling with a
numpy-only containment test, and reference polygons come from scipy's
convex hull.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import quad
from scipy.spatial import ConvexHull


def kl_divergence_quadrature(
    label_location: float, label_scale: float, pred_location: float, pred_scale: float
) -> float:
    """KL divergence between two Laplace densities by adaptive quadrature."""

    def integrand(t: float) -> float:
        log_p = -abs(t - label_location) / label_scale - math.log(2.0 * label_scale)
        log_q = -abs(t - pred_location) / pred_scale - math.log(2.0 * pred_scale)
        return math.exp(log_p) * (log_p - log_q)

    lo = label_location - 60.0 * label_scale
    hi = label_location + 60.0 * label_scale
    kinks = sorted(p for p in (label_location, pred_location) if lo < p < hi)
    value, _ = quad(integrand, lo, hi, points=kinks, limit=300)
    return value


def central_difference(fn, x: float, step: float = 1e-6) -> float:
    return (fn(x + step) - fn(x - step)) / (2.0 * step)


def points_in_convex(points: np.ndarray, vertices: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Vectorized membership test for a CCW convex polygon."""
    inside = np.ones(len(points), dtype=bool)
    n = len(vertices)
    for i in range(n):
        ax, ay = vertices[i]
        bx, by = vertices[(i + 1) % n]
        cross = (bx - ax) * (points[:, 1] - ay) - (by - ay) * (points[:, 0] - ax)
        inside &= cross >= -tol
    return inside


def monte_carlo_intersection_area(
    verts_a: np.ndarray, verts_b: np.ndarray, n_samples: int, rng: np.random.Generator
) -> tuple[float, float]:
    """(area estimate, standard error) of the intersection of two CCW polygons.

    Samples uniformly over the bounding box of the first polygon, which
    contains the intersection.
    """
    lo = verts_a.min(axis=0)
    hi = verts_a.max(axis=0)
    box_area = float(np.prod(hi - lo))
    samples = rng.uniform(lo, hi, size=(n_samples, 2))
    hit = points_in_convex(samples, verts_a) & points_in_convex(samples, verts_b)
    p = hit.mean()
    return box_area * p, box_area * math.sqrt(p * (1.0 - p) / n_samples)


def random_convex_polygon(rng: np.random.Generator, n_points: int = 8, scale: float = 2.0) -> np.ndarray:
    """CCW vertices of a random convex polygon via scipy's hull."""
    while True:
        cloud = rng.uniform(-scale, scale, size=(n_points, 2))
        hull = ConvexHull(cloud)
        verts = cloud[hull.vertices]  # scipy returns CCW order in 2D
        if len(verts) >= 3:
            return verts
