"""Symmetrized von Mises-Fisher mixtures on the quaternion sphere.

A crystal orientation with cubic symmetry maps to 24 equivalent unit
quaternions (48 counting antipodes), so a noisy cloud of best-match
orientations is modeled as a mixture of vMF components on S3, one per
symmetry operator, all sharing the same mean direction and concentration.
The fitted concentration doubles as a per-pixel confidence: it converts
to the half angle of the cone holding about 68 percent of the density.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from . import orientation
from .errors import DegenerateFitError

KAPPA_MAX = 1e7


def log_c4(kappa):
    """Log normalization constant of the vMF density on S3.

    c4(k) = k / (4 pi^2 I1(k)); evaluated with exponentially scaled
    Bessel functions so large concentrations do not overflow.
    """
    k = np.asarray(kappa, dtype=np.float64)
    if np.any(k <= 0.0):
        raise ValueError("kappa must be positive")
    return np.log(k) - 2.0 * np.log(2.0 * np.pi) - (np.log(special.ive(1, k)) + k)


def bessel_ratio_a4(kappa):
    """Mean resultant length A4(k) = I2(k)/I1(k) of a vMF on S3."""
    k = np.asarray(kappa, dtype=np.float64)
    if np.any(k <= 0.0):
        raise ValueError("kappa must be positive")
    return special.ive(2, k) / special.ive(1, k)


def solve_kappa(rbar, tol=1e-10, max_iter=200):
    """Concentration with mean resultant length ``rbar``: A4(kappa) = rbar.

    Newton iteration using A4'(k) = 1 - A4^2 - 3 A4 / k, started from the
    standard Banerjee-style approximation r (p - r^2) / (1 - r^2), p = 4.
    """
    r = float(rbar)
    if not 0.0 < r < 1.0:
        raise ValueError(f"mean resultant length must lie in (0, 1), got {r}")
    k = r * (4.0 - r * r) / (1.0 - r * r)
    k = min(max(k, 1e-8), KAPPA_MAX)
    for _ in range(max_iter):
        a = float(bessel_ratio_a4(k))
        da = 1.0 - a * a - 3.0 * a / k
        if da <= 0.0:
            break
        step = (a - r) / da
        k_new = k - step
        if k_new <= 0.0:
            k_new = k / 2.0
        if k_new > KAPPA_MAX:
            return KAPPA_MAX
        if abs(k_new - k) <= tol * max(1.0, k):
            return k_new
        k = k_new
    return k


def confidence_cone_deg(kappa):
    """Half angle (degrees) of the cone cos(theta) >= 1 - 1/kappa.

    For kappa below 0.5 the expression leaves the valid cosine range and
    NaN is returned (the fit carries no directional information).
    """
    k = np.asarray(kappa, dtype=np.float64)
    with np.errstate(invalid="ignore"):
        return np.degrees(np.arccos(np.where(k >= 0.5, 1.0 - 1.0 / k, np.nan)))


@dataclass(frozen=True)
class VmfFit:
    mu: np.ndarray          # (4,) shared mean quaternion, fundamental zone
    kappa: float
    log_likelihood: float
    ll_history: tuple       # log-likelihood after each E step
    n_iter: int
    converged: bool


def vmf_mixture_log_pdf(samples, mu, kappa, group: orientation.SymmetryGroup):
    """Log density of the symmetrized mixture at each sample quaternion."""
    x = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    ops = group.operators  # (2M, 4), includes antipodes
    means = orientation.quat_multiply(mu[None, :], ops)
    dots = x @ means.T
    logs = kappa * dots + log_c4(kappa) - np.log(ops.shape[0])
    mx = logs.max(axis=1, keepdims=True)
    return (mx[:, 0] + np.log(np.exp(logs - mx).sum(axis=1)))


def fit_vmf_mixture(samples, group: orientation.SymmetryGroup, init_mu=None,
                    init_kappa=100.0, tol=1e-10, max_iter=200):
    """EM fit of the shared (mu, kappa) of a symmetrized vMF mixture.

    ``init_mu`` defaults to the first sample.  Components are the
    symmetry translates of mu with equal fixed weights; only mu and kappa
    are free.  Raises DegenerateFitError when the resultant collapses.
    """
    x = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    n = x.shape[0]
    if n < 2:
        raise ValueError("need at least 2 sample quaternions")
    norms = np.linalg.norm(x, axis=1)
    if np.any(np.abs(norms - 1.0) > 1e-6):
        raise ValueError("samples must be unit quaternions")
    x = x / norms[:, None]

    ops = group.operators
    mu = np.asarray(init_mu if init_mu is not None else x[0], dtype=np.float64)
    mu = mu / np.linalg.norm(mu)
    kappa = float(init_kappa)

    prev_ll = -np.inf
    ll = prev_ll
    converged = False
    history = []
    for it in range(1, max_iter + 1):
        means = orientation.quat_multiply(mu[None, :], ops)
        logs = kappa * (x @ means.T) + log_c4(kappa) - np.log(ops.shape[0])
        mx = logs.max(axis=1, keepdims=True)
        lse = mx[:, 0] + np.log(np.exp(logs - mx).sum(axis=1))
        ll = float(lse.sum())
        history.append(ll)
        if np.isfinite(prev_ll) and abs(ll - prev_ll) <= tol * max(1.0, abs(ll)):
            converged = True
            break
        prev_ll = ll
        gamma = np.exp(logs - lse[:, None])  # (n, 2M)
        # rotate each component's weighted sample resultant back onto mu
        weighted = gamma.T @ x               # (2M, 4)
        back = orientation.quat_multiply(weighted, orientation.quat_conjugate(ops))
        resultant = back.sum(axis=0)
        rnorm = np.linalg.norm(resultant)
        if rnorm < 1e-12 * n:
            raise DegenerateFitError("vMF resultant collapsed to zero")
        mu = resultant / rnorm
        rbar = min(rnorm / n, 1.0 - 1e-12)
        kappa = solve_kappa(rbar)
    mu = orientation.to_fundamental_zone(mu, group)
    return VmfFit(mu=mu, kappa=kappa, log_likelihood=ll,
                  ll_history=tuple(history), n_iter=it, converged=converged)


def index_orientations(indices, grid_orientations, group, k_ml=4,
                       init_kappa=100.0):
    """Refine per-pixel orientations from kNN dictionary matches.

    For each row of ``indices`` (best matches first) the top ``k_ml``
    dictionary orientations are pooled and a symmetrized vMF fit yields
    the mean orientation and its concentration.  ``k_ml=1`` degenerates
    to the best-match orientation with infinite concentration.  A pixel
    whose fit collapses keeps its best-match orientation and is flagged
    with a NaN concentration rather than aborting the map.  Returns
    ``(quaternions (n, 4), kappa (n,), cone half angles in degrees (n,))``.
    """
    idx = np.atleast_2d(np.asarray(indices))
    if k_ml < 1 or k_ml > idx.shape[1]:
        raise ValueError(f"k_ml={k_ml} out of range for k={idx.shape[1]}")
    n = idx.shape[0]
    quats = np.empty((n, 4))
    kappas = np.empty(n)
    for i in range(n):
        samples = np.atleast_2d(grid_orientations[idx[i, :k_ml]])
        if k_ml == 1:
            quats[i] = orientation.to_fundamental_zone(samples[0], group)
            kappas[i] = np.inf
            continue
        try:
            fit = fit_vmf_mixture(samples, group, init_mu=samples[0],
                                  init_kappa=init_kappa)
            quats[i] = fit.mu
            kappas[i] = fit.kappa
        except DegenerateFitError:
            quats[i] = orientation.to_fundamental_zone(samples[0], group)
            kappas[i] = np.nan
    return quats, kappas, confidence_cone_deg(kappas)
