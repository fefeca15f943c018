"""Unsupervised decision-tree pixel classification.

Thresholds are derived from the data itself: anomaly cuts from the modes
of the mean inner-product histogram, the boundary cut from the crossing
point of a two-component Gaussian mixture fitted to the per-neighbor
kNN-overlap values.  Every cut can be overridden manually.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import DegenerateFitError, ThresholdError
from .matching import KnnTable, SimilarityMaps, similarity_maps


class PixelClass(enum.IntEnum):
    GRAIN_INTERIOR = 0
    GRAIN_BOUNDARY = 1
    NOISY_BACKGROUND = 2
    SHIFTED_BACKGROUND = 3


CLASS_COLORS = {
    PixelClass.GRAIN_INTERIOR: (255, 255, 255),
    PixelClass.GRAIN_BOUNDARY: (0, 0, 0),
    PixelClass.NOISY_BACKGROUND: (255, 0, 0),
    PixelClass.SHIFTED_BACKGROUND: (0, 0, 255),
}


@dataclass(frozen=True)
class GaussianMixture1D:
    weights: tuple
    means: tuple
    variances: tuple
    log_likelihood: float
    n_iter: int
    unimodal: bool  # components collapsed onto one cluster


@dataclass(frozen=True)
class DtThresholds:
    """Decision-tree cuts.

    ``t_anomaly`` and ``t_subclass`` act on the mean inner product,
    ``t_boundary`` on the normalized neighborhood overlap (0..1 scale).
    """

    t_anomaly: float
    t_subclass: float
    t_boundary: float

    def __post_init__(self):
        if self.t_subclass > self.t_anomaly:
            raise ValueError("t_subclass must not exceed t_anomaly")


@dataclass(frozen=True)
class ClassMap:
    width: int
    height: int
    labels: np.ndarray  # (height, width) int8 of PixelClass values

    def counts(self):
        return {cls: int(np.sum(self.labels == cls)) for cls in PixelClass}


@dataclass(frozen=True)
class ThresholdReport:
    mean_ip_modes: tuple
    overlap_mixture: GaussianMixture1D | None
    crossing_fallback: bool
    derived: dict = field(default_factory=dict)


def fit_mog_1d(values, tol=1e-10, max_iter=500):
    """Two-component 1D Gaussian mixture by EM, deterministic init.

    Means start at the 25th/75th percentiles with equal weights and the
    sample variance; iteration stops when the relative log-likelihood
    change drops below ``tol``.
    """
    x = np.asarray(values, dtype=np.float64).ravel()
    if x.size < 10:
        raise ValueError("need at least 10 values")
    spread = x.std()
    if spread < 1e-15:
        raise DegenerateFitError("all values identical; cannot fit a mixture")

    means = np.percentile(x, [25.0, 75.0])
    if means[0] == means[1]:
        means = np.array([x.min(), x.max()])
    variances = np.array([x.var(), x.var()])
    weights = np.array([0.5, 0.5])

    prev_ll = -np.inf
    ll = prev_ll
    # keep components from collapsing onto near-duplicate values; inactive
    # for components wider than 6% of the data range
    var_floor = max(1e-12, (0.06 * np.ptp(x)) ** 2)
    for it in range(1, max_iter + 1):
        log_pdf = (
            np.log(weights)[None, :]
            - 0.5 * np.log(2.0 * np.pi * variances)[None, :]
            - 0.5 * (x[:, None] - means[None, :]) ** 2 / variances[None, :]
        )
        mx = log_pdf.max(axis=1, keepdims=True)
        lse = mx[:, 0] + np.log(np.exp(log_pdf - mx).sum(axis=1))
        ll = float(lse.sum())
        if np.isfinite(prev_ll) and ll - prev_ll < tol * abs(ll):
            break
        prev_ll = ll
        resp = np.exp(log_pdf - lse[:, None])
        nk = resp.sum(axis=0)
        nk = np.maximum(nk, 1e-300)
        weights = nk / x.size
        means = (resp * x[:, None]).sum(axis=0) / nk
        variances = (resp * (x[:, None] - means[None, :]) ** 2).sum(axis=0) / nk
        variances = np.maximum(variances, var_floor)

    gap = abs(means[1] - means[0])
    unimodal = gap < 0.5 * (np.sqrt(variances[0]) + np.sqrt(variances[1]))
    order = np.argsort(means)
    return GaussianMixture1D(
        weights=tuple(weights[order]), means=tuple(means[order]),
        variances=tuple(variances[order]), log_likelihood=ll, n_iter=it,
        unimodal=bool(unimodal),
    )


def mixture_crossing_threshold(mixture: GaussianMixture1D):
    """Point between the two means where the weighted densities cross.

    Returns ``(threshold, fallback)``; ``fallback`` is True when no root
    lies between the means and the midpoint was used instead.
    """
    (w1, w2) = mixture.weights
    (m1, m2) = mixture.means
    (v1, v2) = mixture.variances
    if m1 == m2:
        raise ValueError("component means coincide")
    # w1 N(x; m1, v1) = w2 N(x; m2, v2) -> quadratic in x
    a = 0.5 * (1.0 / v2 - 1.0 / v1)
    b = m1 / v1 - m2 / v2
    c = (
        0.5 * (m2 * m2 / v2 - m1 * m1 / v1)
        + np.log(w1 / np.sqrt(v1))
        - np.log(w2 / np.sqrt(v2))
    )
    lo, hi = min(m1, m2), max(m1, m2)
    roots = []
    if abs(a) < 1e-300:
        if b != 0.0:
            roots = [-c / b]
    else:
        disc = b * b - 4.0 * a * c
        if disc >= 0.0:
            sq = np.sqrt(disc)
            roots = [(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)]
    inside = [r for r in roots if lo < r < hi]
    if inside:
        return float(inside[0]), False
    return float(0.5 * (m1 + m2)), True


def find_modes(values, grid_size=2048, min_height=0.0):
    """Locations of local maxima of a Silverman-bandwidth KDE, ascending."""
    x = np.asarray(values, dtype=np.float64).ravel()
    if x.std() < 1e-15:
        return [(float(x[0]), 1.0)]
    kde = stats.gaussian_kde(x, bw_method="silverman")
    pad = 3.0 * np.sqrt(kde.covariance[0, 0])
    grid = np.linspace(x.min() - pad, x.max() + pad, grid_size)
    dens = kde(grid)
    interior = (dens[1:-1] > dens[:-2]) & (dens[1:-1] >= dens[2:])
    peaks = np.flatnonzero(interior) + 1
    peaks = peaks[dens[peaks] > min_height * dens.max()]
    return [(float(grid[p]), float(dens[p])) for p in peaks]


def derive_thresholds(mean_ip, overlap_norm, overrides=None,
                      min_mode_height=0.01):
    """Derive the three decision-tree cuts from the similarity statistics.

    ``overlap_norm`` holds normalized (0..1) neighborhood overlaps and
    should cover only pixels already believed normal (anomalies bias the
    boundary fit).  A single mean-ip mode means no anomaly cluster and
    yields cuts below the data; a constant overlap distribution likewise
    yields a boundary cut below the data.  Manual values in ``overrides``
    (keys t_anomaly, t_subclass, t_boundary) win over the derived ones;
    cuts that cannot be derived raise ThresholdError unless overridden.
    """
    overrides = dict(overrides or {})
    mean_ip = np.asarray(mean_ip, dtype=np.float64).ravel()
    modes = find_modes(mean_ip, min_height=min_mode_height)
    derived = {}
    missing = []

    locs = [m[0] for m in modes]
    if len(locs) >= 2:
        derived["t_anomaly"] = 0.5 * (locs[-1] + locs[-2])
    else:
        derived["t_anomaly"] = mean_ip.min() - 1.0
    if len(locs) >= 3:
        derived["t_subclass"] = 0.5 * (locs[-3] + locs[-2])
    else:
        # no third cluster: every anomaly keeps the milder subclass
        derived["t_subclass"] = min(derived["t_anomaly"], mean_ip.min()) - 1.0

    overlap_norm = np.asarray(overlap_norm, dtype=np.float64).ravel()
    mixture = None
    fallback = False
    try:
        if overlap_norm.size < 10:
            raise ValueError("need at least 10 normal-pixel overlap values")
        ov_modes = [m[0] for m in find_modes(overlap_norm,
                                             min_height=min_mode_height)]
        if len(ov_modes) < 2 or ov_modes[-1] - ov_modes[0] < 0.15:
            # one overlap cluster (or jitter within one): no boundary evidence
            derived["t_boundary"] = overlap_norm.min() - 1.0
        else:
            mixture = fit_mog_1d(overlap_norm)
            cut, fallback = mixture_crossing_threshold(mixture)
            derived["t_boundary"] = cut
    except DegenerateFitError:
        derived["t_boundary"] = overlap_norm.min() - 1.0
    except ValueError as exc:
        missing.append(f"t_boundary ({exc})")

    values = {}
    for key in ("t_anomaly", "t_subclass", "t_boundary"):
        if key in overrides and overrides[key] is not None:
            values[key] = float(overrides[key])
        elif key in derived:
            values[key] = derived[key]
    unresolved = [m for m in missing if m.split(" ")[0] not in values]
    if unresolved:
        raise ThresholdError(
            "could not derive threshold(s): " + "; ".join(unresolved)
            + " -- supply manual overrides"
        )
    report = ThresholdReport(mean_ip_modes=tuple(modes), overlap_mixture=mixture,
                             crossing_fallback=fallback, derived=derived)
    return DtThresholds(**values), report


def classify_pixels(sim: SimilarityMaps, thresholds: DtThresholds):
    """Apply the decision tree to the per-pixel similarity statistics."""
    mean_ip = sim.mean_ip
    labels = np.full(mean_ip.shape, PixelClass.GRAIN_INTERIOR, dtype=np.int8)
    anomalous = mean_ip < thresholds.t_anomaly
    labels[anomalous & (mean_ip < thresholds.t_subclass)] = PixelClass.NOISY_BACKGROUND
    labels[anomalous & (mean_ip >= thresholds.t_subclass)] = PixelClass.SHIFTED_BACKGROUND
    labels[~anomalous & (sim.overlap_norm < thresholds.t_boundary)] = PixelClass.GRAIN_BOUNDARY
    return ClassMap(width=sim.width, height=sim.height,
                    labels=labels.reshape(sim.height, sim.width))


def classify_sample(table: KnnTable, mean_ip, overrides=None):
    """Full classification pass over one sample.

    Anomalies are detected first from the mean inner products; the
    neighborhood-overlap statistic is then recomputed with anomalous
    pixels masked out of their neighbors' sums, so isolated anomalies do
    not bleed into the boundary class.  Returns
    ``(ClassMap, SimilarityMaps, DtThresholds, ThresholdReport)``.
    """
    mean_ip = np.asarray(mean_ip, dtype=np.float64)
    overrides = dict(overrides or {})

    t_anomaly = overrides.get("t_anomaly")
    if t_anomaly is None:
        modes = find_modes(mean_ip, min_height=0.01)
        if len(modes) < 2:
            # no anomalous mode: nothing to mask
            t_anomaly_guess = -np.inf
        else:
            locs = [m[0] for m in modes]
            t_anomaly_guess = 0.5 * (locs[-1] + locs[-2])
    else:
        t_anomaly_guess = float(t_anomaly)
    normal_guess = mean_ip >= t_anomaly_guess

    sim = similarity_maps(table, mean_ip, valid=normal_guess)
    thresholds, report = derive_thresholds(
        mean_ip, sim.overlap_norm[normal_guess], overrides=overrides
    )
    cmap = classify_pixels(sim, thresholds)
    return cmap, sim, thresholds, report
