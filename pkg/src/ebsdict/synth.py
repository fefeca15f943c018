"""Synthetic scan generator with known ground truth.

Builds a Voronoi grain map over the scan grid, gives each grain a random
fundamental-zone orientation, synthesizes one pattern per pixel with
additive detector noise, then corrupts a scattered subset of pixels to
mimic the two anomaly types seen in real scans: smooth background shifts
and pure-noise patterns.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import forward, orientation
from .classify import PixelClass
from .matching import SampleMap


@dataclass(frozen=True)
class GroundTruth:
    grain_id: np.ndarray      # (height, width) int32
    grain_quats: np.ndarray   # (n_grains, 4) FZ orientations
    labels: np.ndarray        # (height, width) int8, PixelClass values
    quats: np.ndarray         # (height*width, 4) true pixel orientation


def make_grain_map(width, height, n_grains, rng, return_margin=False):
    """Voronoi tessellation of the scan grid around random seed pixels.

    With ``return_margin`` also returns each pixel's distance to the
    nearest cell edge (half the gap between its two closest seeds, in
    pixel units).
    """
    if n_grains < 1 or n_grains > width * height:
        raise ValueError("n_grains out of range")
    sx = rng.uniform(0.0, width, n_grains)
    sy = rng.uniform(0.0, height, n_grains)
    xx, yy = np.meshgrid(np.arange(width) + 0.5, np.arange(height) + 0.5)
    d2 = (xx[..., None] - sx) ** 2 + (yy[..., None] - sy) ** 2
    grain_id = d2.argmin(axis=-1).astype(np.int32)
    if not return_margin:
        return grain_id
    d = np.sqrt(np.sort(d2, axis=-1))
    margin = 0.5 * (d[..., 1] - d[..., 0]) if n_grains > 1 else \
        np.full((height, width), np.inf)
    return grain_id, margin


def boundary_mask(grain_id):
    """Pixels with at least one 8-neighbor in a different grain."""
    h, w = grain_id.shape
    out = np.zeros((h, w), dtype=bool)
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if dy == 0 and dx == 0:
                continue
            ys = slice(max(0, dy), h + min(0, dy))
            xs = slice(max(0, dx), w + min(0, dx))
            ys2 = slice(max(0, -dy), h + min(0, -dy))
            xs2 = slice(max(0, -dx), w + min(0, -dx))
            out[ys2, xs2] |= grain_id[ys2, xs2] != grain_id[ys, xs]
    return out


def synthesize_sample(width=24, height=24, n_grains=8, seed=0,
                      bands=None, det=None, group=None,
                      noise_strength=0.03, anomaly_fraction=0.05,
                      shift_magnitude=None, boundary_blend=0.5):
    """Generate a scan plus its ground truth.

    ``noise_strength`` is the detector noise sigma as a fraction of the
    mean pattern intensity.  Pixels less than half a pixel away from a
    grain edge mix their own grain's pattern with the average pattern of
    the adjacent grains (weight ``boundary_blend``), mimicking a beam
    that straddles the boundary.
    Half the anomalous pixels get a smooth background wave (default
    magnitude 0.5x the mean pattern intensity, which places their
    similarity statistics between the normal and pure-noise clusters),
    the other half are replaced by uniform noise.  Returns
    ``(SampleMap, GroundTruth)``.
    """
    rng = np.random.default_rng(seed)
    if group is None:
        group = orientation.symmetry_group("m-3m")
    if det is None:
        det = forward.DetectorGeometry()
    if bands is None:
        bands = forward.default_band_model()

    grain_id, edge_margin = make_grain_map(width, height, n_grains, rng,
                                           return_margin=True)
    grain_quats = np.stack([
        orientation.to_fundamental_zone(q, group)
        for q in orientation.random_quaternions(n_grains, rng)
    ])
    base = {g: forward.simulate_pattern(grain_quats[g], bands, det)
            for g in np.unique(grain_id)}
    mean_level = float(np.mean([p.mean() for p in base.values()]))
    if shift_magnitude is None:
        shift_magnitude = 0.5 * mean_level

    n = width * height
    n_anom = int(round(anomaly_fraction * n))
    anom_pixels = rng.choice(n, size=n_anom, replace=False)
    shifted = set(anom_pixels[: n_anom // 2].tolist())
    noisy = set(anom_pixels[n_anom // 2 :].tolist())

    labels = np.where(boundary_mask(grain_id),
                      np.int8(PixelClass.GRAIN_BOUNDARY),
                      np.int8(PixelClass.GRAIN_INTERIOR))
    patterns = np.empty((n, det.n_pixels), dtype=np.float32)
    quats = np.empty((n, 4))
    for i in range(n):
        y, x = divmod(i, width)
        own = grain_id[y, x]
        pat = base[own]
        quats[i] = grain_quats[own]
        if edge_margin[y, x] < 0.5 and boundary_blend > 0.0:
            others = [grain_id[ny, nx]
                      for ny in range(max(0, y - 1), min(height, y + 2))
                      for nx in range(max(0, x - 1), min(width, x + 2))
                      if grain_id[ny, nx] != own]
            if others:
                other = np.mean([base[g] for g in others], axis=0)
                pat = (1.0 - boundary_blend) * pat + boundary_blend * other
        if i in shifted:
            pat = forward.perturb_background(pat, "shift", shift_magnitude,
                                             seed=int(rng.integers(2**31)))
            labels[y, x] = PixelClass.SHIFTED_BACKGROUND
        elif i in noisy:
            pat = forward.perturb_background(pat, "replace_noise", 0.0,
                                             seed=int(rng.integers(2**31)))
            labels[y, x] = PixelClass.NOISY_BACKGROUND
        noise = forward.NoiseModel(kind="gaussian",
                                   strength=noise_strength * mean_level,
                                   seed=int(rng.integers(2**31)))
        patterns[i] = forward.add_noise(pat, noise).ravel()

    sample = SampleMap(width=width, height=height,
                       pattern_shape=(det.rows, det.cols), patterns=patterns)
    truth = GroundTruth(grain_id=grain_id, grain_quats=grain_quats,
                        labels=labels, quats=quats)
    return sample, truth
