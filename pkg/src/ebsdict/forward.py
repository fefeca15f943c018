"""Geometric Kikuchi-band pattern synthesizer.

This is a deterministic stand-in for a full dynamical scattering model
with two ingredients:

* each lattice plane family contributes a band around its great circle
  on the sphere of detector directions, with a smooth cross section
  (Gaussian by default, squared-cosine available), and
* the diffuse background is modulated by an orientation-dependent
  channeling yield, modeled as a fixed combination of degree 4, 6 and 8
  cubic harmonics of the crystal-frame viewing direction.

Both ingredients are closed under the m-3m symmetry action, which makes
the synthesized pattern invariant under symmetry-equivalent orientations
-- the one property of the physical forward model that the rest of the
pipeline relies on.  The channeling term also breaks the near-degeneracy
between orientations related by a 60 degree rotation about <111>, whose
band geometries largely coincide.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from . import orientation
from .errors import ConfigError

# (hkl, band width in degrees, relative intensity) of the default
# families; the width is the Gaussian sigma ("gauss" profile) or the
# half width of the compact support ("cos2" profile)
DEFAULT_FAMILIES = (
    ((1, 1, 1), 6.0, 1.0),
    ((2, 0, 0), 5.0, 0.8),
    ((2, 2, 0), 4.0, 0.6),
    ((3, 1, 1), 3.0, 0.4),
)

# normalization constants of the channeling harmonics: Monte Carlo
# averages over the unit sphere (scale each component to unit standard
# deviation, shift to zero mean)
_CHAN_S4 = 0.174685
_CHAN_S6 = 0.010442
_CHAN_S8 = 0.013750
_CHAN_M8 = 0.028556
_CHAN_A8 = -0.083909
_CHAN_B8 = 0.559764
# constant added to the zero-mean field so the modulated background
# stays nonnegative for channeling strengths up to ~1.6
_CHAN_OFFSET = 2.5


def channeling_field(u):
    """Zero-mean cubic-harmonic channeling field at unit directions u.

    ``u`` holds crystal-frame viewing directions in the trailing axis.
    The field mixes the degree 4, 6 and 8 cubic harmonics, each scaled
    to unit variance over the sphere, and is invariant under the full
    m-3m action including inversion.
    """
    u = np.asarray(u, dtype=np.float64)
    k4 = (u ** 4).sum(axis=-1) - 0.6
    k6 = np.prod(u, axis=-1) ** 2 - 1.0 / 105.0
    g8 = ((u[..., 0] * u[..., 1]) ** 4 + (u[..., 1] * u[..., 2]) ** 4
          + (u[..., 2] * u[..., 0]) ** 4)
    k8 = g8 - _CHAN_M8 - _CHAN_A8 * k4 - _CHAN_B8 * k6
    return k4 / _CHAN_S4 + k6 / _CHAN_S6 + k8 / _CHAN_S8


@dataclass(frozen=True)
class DetectorGeometry:
    """Detector raster and projection geometry (fractional units)."""

    rows: int = 60
    cols: int = 80
    pattern_center: tuple = (0.5, 0.5)
    detector_distance: float = 0.6
    sample_tilt: float = 70.0

    def __post_init__(self):
        if self.rows < 8 or self.cols < 8:
            raise ValueError("detector must be at least 8x8 pixels")
        if self.detector_distance <= 0.0:
            raise ValueError("detector_distance must be positive")
        if not 0.0 < self.sample_tilt < 90.0:
            raise ValueError("sample_tilt must lie in (0, 90) degrees")

    @property
    def n_pixels(self):
        return self.rows * self.cols


@dataclass(frozen=True)
class BandModel:
    """Reflector list (unit normals, band widths in radians, intensities)
    plus the channeling-background strength."""

    reflectors: tuple  # of (normal 3-tuple, width, intensity)
    background_level: float = 1.0
    profile: str = "gauss"
    channeling: float = 1.5

    def __post_init__(self):
        if self.background_level < 0.0:
            raise ValueError("background_level must be >= 0")
        if self.profile not in ("gauss", "cos2"):
            raise ValueError(f"unknown band profile {self.profile!r}")
        if self.channeling < 0.0:
            raise ValueError("channeling strength must be >= 0")
        for normal, half_width, intensity in self.reflectors:
            if abs(np.linalg.norm(normal) - 1.0) > 1e-9:
                raise ValueError("reflector normals must be unit length")
            if half_width <= 0.0:
                raise ValueError("band half widths must be positive")
            if not 0.0 < intensity <= 1.0:
                raise ValueError("relative intensities must lie in (0, 1]")

    def arrays(self):
        if not self.reflectors:
            return (np.zeros((0, 3)), np.zeros(0), np.zeros(0))
        normals = np.array([r[0] for r in self.reflectors], dtype=np.float64)
        widths = np.array([r[1] for r in self.reflectors], dtype=np.float64)
        intens = np.array([r[2] for r in self.reflectors], dtype=np.float64)
        return normals, widths, intens


@dataclass(frozen=True)
class NoiseModel:
    kind: str = "gaussian"
    strength: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("gaussian", "poisson-like"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.strength < 0.0:
            raise ValueError("noise strength must be >= 0")


def plane_family(hkl):
    """All symmetry-equivalent unit normals of an hkl family, one per
    antipodal pair (both hemispheres trace the same band)."""
    group = orientation.symmetry_group("m-3m")
    base = np.asarray(hkl, dtype=np.float64)
    base = base / np.linalg.norm(base)
    mats = orientation.quaternion_to_matrix(group.rotations)
    cand = np.einsum("mij,j->mi", mats, base)
    cand = np.round(cand, 12)
    # canonical antipodal representative: first nonzero component positive
    sign = np.zeros(len(cand))
    for i in (2, 1, 0):
        comp = cand[:, i]
        sign = np.where(comp != 0.0, np.sign(comp), sign)
    cand = cand * sign[:, None]
    uniq = np.unique(cand, axis=0)
    return uniq / np.linalg.norm(uniq, axis=1, keepdims=True)


def default_band_model(families=DEFAULT_FAMILIES, background_level=1.0,
                       profile="gauss", channeling=1.5):
    reflectors = []
    for hkl, width_deg, intensity in families:
        for normal in plane_family(hkl):
            reflectors.append((tuple(normal), np.radians(width_deg), intensity))
    return BandModel(reflectors=tuple(reflectors),
                     background_level=background_level, profile=profile,
                     channeling=channeling)


@functools.lru_cache(maxsize=8)
def detector_directions(det: DetectorGeometry):
    """Unit viewing directions, sample frame, shape (rows*cols, 3).

    Pixel centers are back-projected gnomonically through the pattern
    center; the detector is tilted against the sample by (90 - tilt)
    degrees about the horizontal axis.
    """
    u = (np.arange(det.cols) + 0.5) / det.cols - det.pattern_center[0]
    v = (np.arange(det.rows) + 0.5) / det.rows - det.pattern_center[1]
    uu, vv = np.meshgrid(u, v)
    d = np.stack([uu, vv, np.full_like(uu, det.detector_distance)], axis=-1)
    d = d / np.linalg.norm(d, axis=-1, keepdims=True)
    theta = np.radians(90.0 - det.sample_tilt)
    c, s = np.cos(theta), np.sin(theta)
    rx = np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
    d = d.reshape(-1, 3) @ rx.T
    d.setflags(write=False)
    return d


def simulate_pattern(q, bands: BandModel, det: DetectorGeometry):
    """Synthesize the rows x cols intensity pattern for orientation q."""
    normals, widths, intens = bands.arrays()
    rot = orientation.quaternion_to_matrix(np.asarray(q, dtype=np.float64))
    dirs = detector_directions(det)
    level = float(bands.background_level)
    if bands.channeling > 0.0:
        chan = channeling_field(dirs @ rot)  # crystal-frame directions
        out = level * (1.0 + bands.channeling * (_CHAN_OFFSET + chan))
    else:
        out = np.full(det.n_pixels, level)
    if len(normals):
        dots = dirs @ (normals @ rot.T).T
        dist = np.arcsin(np.clip(np.abs(dots), 0.0, 1.0))
        u = dist / widths
        if bands.profile == "gauss":
            profile = np.exp(-0.5 * u ** 2)
        else:  # cos2: compact support of one half width
            profile = np.where(u < 1.0,
                               np.cos(np.pi * np.minimum(u, 1.0) / 2.0) ** 2, 0.0)
        out = out + profile @ intens
    return out.reshape(det.rows, det.cols)


def add_noise(pattern, noise: NoiseModel):
    """Additive detector noise, reproducible from the model's seed."""
    p = np.asarray(pattern, dtype=np.float64)
    if noise.strength == 0.0:
        return p.copy()
    rng = np.random.default_rng(noise.seed)
    if noise.kind == "gaussian":
        out = p + noise.strength * rng.standard_normal(p.shape)
    else:  # poisson-like: variance proportional to the signal
        out = p + noise.strength * np.sqrt(np.maximum(p, 0.0)) * rng.standard_normal(p.shape)
    return np.maximum(out, 0.0)


def perturb_background(pattern, mode, magnitude, seed=0):
    """Synthetic anomalies: smooth background shift or full noise replacement."""
    p = np.asarray(pattern, dtype=np.float64)
    rng = np.random.default_rng(seed)
    if mode == "shift":
        if magnitude == 0.0:
            return p.copy()
        rows, cols = p.shape
        yy, xx = np.meshgrid(np.linspace(-1.0, 1.0, rows), np.linspace(-1.0, 1.0, cols),
                             indexing="ij")
        phi = rng.uniform(0.0, 2.0 * np.pi)
        psi = rng.uniform(0.0, 2.0 * np.pi)
        # smooth zero-mean wave; a few periods across the detector keeps it
        # nearly orthogonal to both the bands and the channeling background,
        # so the anomaly signature is stable across orientations
        wave = np.sin(2.0 * np.pi * 2.5 * (np.cos(phi) * xx + np.sin(phi) * yy) + psi)
        return np.maximum(p + magnitude * wave, 0.0)
    if mode == "replace_noise":
        mean = float(p.mean())
        return rng.uniform(0.0, 2.0 * mean, p.shape)
    raise ValueError(f"unknown perturbation mode {mode!r}")


def bin_pattern(pattern, factor):
    """Block-mean binning by an integer factor."""
    p = np.asarray(pattern, dtype=np.float64)
    factor = int(factor)
    if factor < 1:
        raise ValueError("binning factor must be >= 1")
    rows, cols = p.shape
    if rows % factor or cols % factor:
        raise ValueError(f"pattern dims {rows}x{cols} not divisible by {factor}")
    return p.reshape(rows // factor, factor, cols // factor, factor).mean(axis=(1, 3))


# ---------------------------------------------------------------------------
# plain-text key/value configuration
# ---------------------------------------------------------------------------

def read_keyvalue_file(path):
    """Parse ``key = value`` lines; repeated keys accumulate into lists."""
    entries = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            entries.setdefault(key, []).append(value)
    return entries


def _single(entries, key, default=None):
    if key not in entries:
        return default
    if len(entries[key]) > 1:
        raise ConfigError(f"duplicate key {key!r}")
    return entries[key][0]


def load_detector_config(path):
    """Detector geometry from a key/value file.

    Keys: rows, cols, pc_x, pc_y, detector_distance, sample_tilt.
    """
    entries = read_keyvalue_file(path)
    try:
        return DetectorGeometry(
            rows=int(_single(entries, "rows", 60)),
            cols=int(_single(entries, "cols", 80)),
            pattern_center=(float(_single(entries, "pc_x", 0.5)),
                            float(_single(entries, "pc_y", 0.5))),
            detector_distance=float(_single(entries, "detector_distance", 1.0)),
            sample_tilt=float(_single(entries, "sample_tilt", 70.0)),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def load_band_config(path):
    """Band model from a key/value file.

    Keys: background_level, profile, channeling and one ``family = h k l
    : width_deg : intensity`` line per plane family.
    """
    entries = read_keyvalue_file(path)
    families = []
    for spec in entries.get("family", []):
        try:
            hkl_part, width_part, intensity_part = (s.strip() for s in spec.split(":"))
            hkl = tuple(int(tok) for tok in hkl_part.split())
            families.append((hkl, float(width_part), float(intensity_part)))
        except ValueError as exc:
            raise ConfigError(f"{path}: bad family line {spec!r}") from exc
    if not families:
        families = DEFAULT_FAMILIES
    try:
        return default_band_model(
            families=tuple(families),
            background_level=float(_single(entries, "background_level", 1.0)),
            profile=_single(entries, "profile", "gauss"),
            channeling=float(_single(entries, "channeling", 1.5)),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
