"""Orientation grid construction and pattern dictionary building."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import forward, orientation
from .errors import DegenerateFitError


@dataclass(frozen=True)
class OrientationGrid:
    """Cubochoric grid orientations restricted to the fundamental zone."""

    N: int
    group: orientation.SymmetryGroup
    orientations: np.ndarray  # (d, 4) unit quaternions

    def __len__(self):
        return self.orientations.shape[0]


@dataclass(frozen=True)
class Dictionary:
    grid: OrientationGrid
    patterns: np.ndarray  # (d, L), unit L2 rows
    detector: forward.DetectorGeometry

    def __len__(self):
        return self.patterns.shape[0]


@dataclass(frozen=True)
class CompensatedDictionary:
    grid: OrientationGrid
    principal: np.ndarray  # (L,) unit vector
    patterns: np.ndarray   # (d, L), rows orthogonal to principal, unit norm
    detector: forward.DetectorGeometry

    def __len__(self):
        return self.patterns.shape[0]


def count_fz_orientations(N, group, chunk=400000):
    """Count grid points in the FZ without storing orientations."""
    return _sample_fz(N, group, chunk=chunk, count_only=True)


def sample_fz_orientations(N, group, chunk=400000):
    """Enumerate the (2N+1)^3 cubochoric grid and keep FZ members.

    Grid points sit at integer multiples of (half edge)/N, so the cube
    surface (180 degree rotations) is included in the enumeration but
    never in the FZ.
    """
    return _sample_fz(N, group, chunk=chunk, count_only=False)


def _sample_fz(N, group, chunk, count_only):
    if N < 1:
        raise ValueError("N must be >= 1")
    if group.name != "m-3m":
        raise ValueError(f"unsupported symmetry group {group.name!r}")
    delta = orientation.CUBE_HALF_EDGE / N
    idx = np.arange(-N, N + 1)
    side = idx.size

    kept = []
    count = 0
    plane_pts = side * side
    planes_per_chunk = max(1, chunk // plane_pts)
    for start in range(0, side, planes_per_chunk):
        block = idx[start : start + planes_per_chunk]
        pts = np.stack(
            np.meshgrid(block, idx, idx, indexing="ij"), axis=-1
        ).reshape(-1, 3) * delta
        q = orientation.cubochoric_to_quaternion(pts)
        vec, infinite = orientation.quaternion_to_rodrigues(q)
        ok = orientation.in_fundamental_zone(vec, group, infinite=infinite)
        count += int(ok.sum())
        if not count_only:
            kept.append(q[ok])
    if count_only:
        return count
    orientations_ = np.concatenate(kept, axis=0) if kept else np.zeros((0, 4))
    return OrientationGrid(N=N, group=group, orientations=orientations_)


def build_dictionary(grid: OrientationGrid, bands: forward.BandModel,
                     det: forward.DetectorGeometry):
    """Simulate and L2-normalize one pattern per grid orientation."""
    if len(grid) == 0:
        raise ValueError("empty orientation grid")
    d = len(grid)
    patterns = np.empty((d, det.n_pixels), dtype=np.float64)
    for i, q in enumerate(grid.orientations):
        patterns[i] = forward.simulate_pattern(q, bands, det).ravel()
    norms = np.linalg.norm(patterns, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise DegenerateFitError("zero-intensity pattern in dictionary")
    patterns /= norms
    return Dictionary(grid=grid, patterns=patterns, detector=det)


def principal_component(patterns, tol=1e-10, max_iter=10000):
    """Dominant right singular vector by power iteration.

    Deterministic start at the mean row (which the dominant component
    closely tracks for background-dominated dictionaries).  Convergence
    is declared when the relative Rayleigh-quotient change drops below
    ``tol`` (tighter than the spec of the caller needs); the sign is
    fixed so the mean entry is >= 0.
    """
    a = np.asarray(patterns, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] < 2:
        raise ValueError("need a (d, L) matrix with d >= 2")
    v = a.mean(axis=0)
    nv = np.linalg.norm(v)
    if nv == 0.0:
        # mean-free input: fall back to the first row
        v = a[0].copy()
        nv = np.linalg.norm(v)
        if nv == 0.0:
            raise DegenerateFitError("cannot extract principal component of zero matrix")
    v /= nv
    prev = 0.0
    for _ in range(max_iter):
        u = a @ v
        w = a.T @ u
        nw = np.linalg.norm(w)
        if nw == 0.0:
            raise DegenerateFitError("power iteration collapsed")
        v = w / nw
        rayleigh = float(u @ u)
        if prev > 0.0 and abs(rayleigh - prev) <= tol * rayleigh:
            break
        prev = rayleigh
    if v.mean() < 0.0:
        v = -v
    return v


def compensate(dictionary: Dictionary, min_residual=1e-9):
    """Project the principal (background) component out of every row."""
    principal = principal_component(dictionary.patterns)
    coeffs = dictionary.patterns @ principal
    rows = dictionary.patterns - coeffs[:, None] * principal[None, :]
    norms = np.linalg.norm(rows, axis=1)
    bad = np.flatnonzero(norms < min_residual)
    if bad.size:
        raise DegenerateFitError(
            f"dictionary row(s) {bad[:5].tolist()} parallel to the principal component"
        )
    rows /= norms[:, None]
    return CompensatedDictionary(
        grid=dictionary.grid, principal=principal, patterns=rows,
        detector=dictionary.detector,
    )


def compensate_pattern(pattern, principal, min_residual=1e-12):
    """Apply the dictionary's background compensation to a query pattern."""
    y = np.asarray(pattern, dtype=np.float64).ravel()
    resid = y - (y @ principal) * principal
    n = np.linalg.norm(resid)
    if n < min_residual:
        raise DegenerateFitError("query pattern is parallel to the principal component")
    return resid / n


def nearest_neighbor_spacing(grid: OrientationGrid, sample_size=300, rng=None):
    """Mean nearest-neighbor misorientation (degrees) of grid members."""
    qs = grid.orientations
    if len(qs) < 2:
        raise ValueError("grid too small")
    if rng is None:
        rng = np.random.default_rng(0)
    take = min(sample_size, len(qs))
    sel = rng.choice(len(qs), size=take, replace=False)
    spacings = np.empty(take)
    for i, j in enumerate(sel):
        ang = orientation.misorientation_angle(qs[j], qs, grid.group)
        ang[j] = np.inf
        spacings[i] = ang.min()
    return spacings
