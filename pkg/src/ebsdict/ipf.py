"""Inverse pole figure coloring for cubic symmetry."""

from __future__ import annotations

import numpy as np

from . import orientation


def ipf_color(quats, group=None, ref=(0.0, 0.0, 1.0)):
    """RGB in [0, 1] for the inverse pole figure along ``ref``.

    The sample direction is carried into the crystal frame, folded into
    the standard triangle z >= x >= y >= 0 (equivalent under m-3m), and
    mapped to the usual red/green/blue barycentric shading of the
    001/101/111 corners.
    """
    if group is None:
        group = orientation.symmetry_group("m-3m")
    q = np.atleast_2d(np.asarray(quats, dtype=np.float64))
    r = np.asarray(ref, dtype=np.float64)
    r = r / np.linalg.norm(r)
    mats = orientation.quaternion_to_matrix(q)
    v = np.einsum("nji,j->ni", mats, r)  # crystal-frame direction
    v = np.sort(np.abs(v), axis=1)       # fold: y <= x <= z, all >= 0
    y, x, z = v[:, 0], v[:, 1], v[:, 2]
    # barycentric weights sum to z, so normalizing by z keeps the map
    # smooth across the triangle (max-normalizing kinks at color ridges)
    rgb = np.stack([z - x, x - y, y], axis=1) / z[:, None]
    return rgb if np.asarray(quats).ndim > 1 else rgb[0]
