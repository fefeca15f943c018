"""Rotation representations and the octahedral (m-3m) symmetry group.

Conventions used throughout the package:

* Quaternions are numpy arrays of shape ``(..., 4)`` in ``(w, x, y, z)``
  order (scalar part first), Hamilton product, unit norm.  Public
  functions return quaternions canonicalized to the northern hemisphere
  (``w >= 0``).
* Euler angles are Bunge ZXZ triplets ``(phi1, Phi, phi2)`` in radians,
  ``phi1, phi2 in [0, 2*pi)``, ``Phi in [0, pi]``.  The associated
  rotation is ``Rz(phi1) @ Rx(Phi) @ Rz(phi2)``.
* Rodrigues vectors are ``tan(omega/2) * axis``; rotations by pi have no
  finite Rodrigues vector and are reported through a separate flag with
  the unit axis stored in place of the vector.
* Cubochoric points live in the cube of edge length ``pi**(2/3)``
  centered at the origin.  The cube maps equal-volume onto the rotation
  group through the homochoric ball of radius ``(3*pi/4)**(1/3)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Cubochoric cube half edge, homochoric ball radius, Rodrigues FZ cut.
CUBE_HALF_EDGE = np.pi ** (2.0 / 3.0) / 2.0
BALL_RADIUS = (3.0 * np.pi / 4.0) ** (1.0 / 3.0)
FZ_CUT = np.sqrt(2.0) - 1.0  # tan(pi/8)

# Scaling constants of the cube -> ball sextant map.
_SC = (np.pi / 6.0) ** (1.0 / 6.0)
_PREF = np.sqrt(6.0 / np.pi)
_BETA = np.pi ** (5.0 / 6.0) / 6.0 ** (1.0 / 6.0) / 2.0
_PREK = BALL_RADIUS * 2.0 ** 0.25 / _BETA

_SQRT2 = np.sqrt(2.0)


# ---------------------------------------------------------------------------
# basic quaternion algebra
# ---------------------------------------------------------------------------

def normalize_quaternion(q):
    q = np.asarray(q, dtype=np.float64)
    n = np.linalg.norm(q, axis=-1, keepdims=True)
    if np.any(n == 0.0):
        raise ValueError("cannot normalize a zero quaternion")
    return q / n


def canonicalize(q):
    """Flip signs so w >= 0 (w == 0: first nonzero of x, y, z positive)."""
    q = np.asarray(q, dtype=np.float64)
    w = q[..., :1]
    flip = w < 0.0
    # resolve w == 0 deterministically through the vector part
    zero_w = w == 0.0
    if np.any(zero_w):
        v = q[..., 1:]
        first = np.zeros(q.shape[:-1] + (1,))
        for i in (2, 1, 0):
            comp = v[..., i : i + 1]
            first = np.where(comp != 0.0, comp, first)
        flip = flip | (zero_w & (first < 0.0))
    return np.where(flip, -q, q)


def quat_multiply(a, b):
    """Hamilton product a * b, broadcasting over leading dimensions."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    aw, av = a[..., :1], a[..., 1:]
    bw, bv = b[..., :1], b[..., 1:]
    w = aw * bw - np.sum(av * bv, axis=-1, keepdims=True)
    v = aw * bv + bw * av + np.cross(av, bv)
    return np.concatenate([w, v], axis=-1)


def quat_conjugate(q):
    q = np.asarray(q, dtype=np.float64)
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def quaternion_to_matrix(q):
    """3x3 rotation matrix R such that R @ v rotates v by q."""
    w, x, y, z = np.moveaxis(np.asarray(q, dtype=np.float64), -1, 0)
    m = np.empty(np.shape(w) + (3, 3))
    m[..., 0, 0] = 1.0 - 2.0 * (y * y + z * z)
    m[..., 0, 1] = 2.0 * (x * y - w * z)
    m[..., 0, 2] = 2.0 * (x * z + w * y)
    m[..., 1, 0] = 2.0 * (x * y + w * z)
    m[..., 1, 1] = 1.0 - 2.0 * (x * x + z * z)
    m[..., 1, 2] = 2.0 * (y * z - w * x)
    m[..., 2, 0] = 2.0 * (x * z - w * y)
    m[..., 2, 1] = 2.0 * (y * z + w * x)
    m[..., 2, 2] = 1.0 - 2.0 * (x * x + y * y)
    return m


def rotate_vector(q, v):
    return np.einsum("...ij,...j->...i", quaternion_to_matrix(q), np.asarray(v, dtype=np.float64))


def axis_angle_to_quaternion(axis, omega):
    axis = np.asarray(axis, dtype=np.float64)
    omega = np.asarray(omega, dtype=np.float64)
    half = omega / 2.0
    w = np.cos(half)[..., None]
    v = axis * np.sin(half)[..., None]
    return canonicalize(np.concatenate([w, v], axis=-1))


def quaternion_to_axis_angle(q):
    """Return (unit axis, omega in [0, pi]); identity gives axis (0, 0, 1)."""
    q = canonicalize(normalize_quaternion(q))
    w = q[..., 0]
    v = q[..., 1:]
    vn = np.linalg.norm(v, axis=-1)
    omega = 2.0 * np.arctan2(vn, w)
    axis = np.where(vn[..., None] > 0.0, v / np.where(vn[..., None] == 0.0, 1.0, vn[..., None]),
                    np.array([0.0, 0.0, 1.0]))
    return axis, omega


# ---------------------------------------------------------------------------
# Euler angles (Bunge ZXZ)
# ---------------------------------------------------------------------------

def euler_to_quaternion(e):
    """Bunge ZXZ (phi1, Phi, phi2) in radians -> unit quaternion, w >= 0."""
    e = np.asarray(e, dtype=np.float64)
    phi1, big_phi, phi2 = e[..., 0], e[..., 1], e[..., 2]
    sigma = (phi1 + phi2) / 2.0
    delta = (phi1 - phi2) / 2.0
    c = np.cos(big_phi / 2.0)
    s = np.sin(big_phi / 2.0)
    q = np.stack(
        [c * np.cos(sigma), s * np.cos(delta), s * np.sin(delta), c * np.sin(sigma)],
        axis=-1,
    )
    return canonicalize(q)


def quaternion_to_euler(q):
    """Inverse of :func:`euler_to_quaternion`; gimbal cases set phi2 = 0."""
    q = normalize_quaternion(q)
    w, x, y, z = np.moveaxis(q, -1, 0)
    q03 = w * w + z * z
    q12 = x * x + y * y
    chi = np.sqrt(q03 * q12)

    big_phi = 2.0 * np.arctan2(np.sqrt(q12), np.sqrt(q03))
    alpha = np.arctan2(z, w)  # (phi1 + phi2) / 2
    beta = np.arctan2(y, x)   # (phi1 - phi2) / 2
    phi1 = alpha + beta
    phi2 = alpha - beta

    # gimbal branches: Phi == 0 or pi leaves only phi1 + phi2 (or phi1 - phi2)
    top = q12 <= 1e-24
    bottom = q03 <= 1e-24
    phi1 = np.where(top, 2.0 * np.arctan2(z, w), phi1)
    phi2 = np.where(top, 0.0, phi2)
    phi1 = np.where(bottom, 2.0 * np.arctan2(y, x), phi1)
    phi2 = np.where(bottom, 0.0, phi2)
    del chi

    two_pi = 2.0 * np.pi
    phi1 = np.mod(phi1, two_pi)
    phi2 = np.mod(phi2, two_pi)
    return np.stack([phi1, np.clip(big_phi, 0.0, np.pi), phi2], axis=-1)


# ---------------------------------------------------------------------------
# Rodrigues vectors
# ---------------------------------------------------------------------------

def quaternion_to_rodrigues(q, eps=1e-12):
    """Return ``(vec, infinite)``.

    ``vec`` holds tan(omega/2) * axis; where ``infinite`` is set (rotation
    angle pi within ``eps``) it holds the unit rotation axis instead.
    """
    q = canonicalize(normalize_quaternion(q))
    w = q[..., 0]
    v = q[..., 1:]
    infinite = w <= eps
    safe_w = np.where(infinite, 1.0, w)
    vec = v / safe_w[..., None]
    if np.any(infinite):
        vn = np.linalg.norm(v, axis=-1, keepdims=True)
        axis = v / np.where(vn == 0.0, 1.0, vn)
        vec = np.where(infinite[..., None], axis, vec)
    return vec, infinite


def rodrigues_to_quaternion(vec):
    vec = np.asarray(vec, dtype=np.float64)
    t = np.linalg.norm(vec, axis=-1)
    omega = 2.0 * np.arctan(t)
    axis = np.where(t[..., None] > 0.0, vec / np.where(t[..., None] == 0.0, 1.0, t[..., None]),
                    np.array([0.0, 0.0, 1.0]))
    return axis_angle_to_quaternion(axis, omega)


# ---------------------------------------------------------------------------
# homochoric ball
# ---------------------------------------------------------------------------

def axis_angle_to_homochoric(axis, omega):
    axis = np.asarray(axis, dtype=np.float64)
    omega = np.asarray(omega, dtype=np.float64)
    r = (0.75 * (omega - np.sin(omega))) ** (1.0 / 3.0)
    return axis * r[..., None]


def homochoric_to_axis_angle(h, tol=1e-12, max_iter=60):
    """Invert the homochoric radial map.

    Solves ``(3*(omega - sin(omega))/4)**(1/3) = |h|`` for omega in
    [0, pi] by Newton iteration with a bisection safeguard; the residual
    on |h| is driven below ``tol``.
    """
    h = np.asarray(h, dtype=np.float64)
    hn = np.linalg.norm(h, axis=-1)
    if np.any(hn > BALL_RADIUS + 1e-12):
        raise ValueError("homochoric vector outside the ball of radius (3*pi/4)**(1/3)")
    hn_c = np.minimum(hn, BALL_RADIUS)
    t = (4.0 / 3.0) * hn_c ** 3  # target of omega - sin(omega)

    omega = np.clip((6.0 * t) ** (1.0 / 3.0), 0.0, np.pi)
    lo = np.zeros_like(omega)
    hi = np.full_like(omega, np.pi)
    for _ in range(max_iter):
        g = omega - np.sin(omega) - t
        lo = np.where(g < 0.0, omega, lo)
        hi = np.where(g > 0.0, omega, hi)
        gp = 1.0 - np.cos(omega)
        step = np.divide(g, gp, out=np.zeros_like(g), where=gp > 1e-300)
        nxt = omega - step
        bad = (nxt <= lo) | (nxt >= hi) | ~np.isfinite(nxt)
        nxt = np.where(bad, 0.5 * (lo + hi), nxt)
        resid = np.abs((0.75 * (omega - np.sin(omega))) ** (1.0 / 3.0) - hn_c)
        omega = np.where(resid > tol, nxt, omega)
        if np.all(resid <= tol):
            break

    axis = np.where(hn[..., None] > 0.0, h / np.where(hn[..., None] == 0.0, 1.0, hn[..., None]),
                    np.array([0.0, 0.0, 1.0]))
    return axis, np.where(hn == 0.0, 0.0, omega)


# ---------------------------------------------------------------------------
# cubochoric cube <-> homochoric ball (sextant construction)
# ---------------------------------------------------------------------------

def _to_major_z(v):
    a = np.abs(v)
    ax = np.argmax(a, axis=-1)
    out = np.empty_like(v)
    for axis, perm in ((0, (1, 2, 0)), (1, (2, 0, 1)), (2, (0, 1, 2))):
        m = ax == axis
        out[m] = v[m][:, perm]
    return out, ax


def _from_major_z(v, ax):
    out = np.empty_like(v)
    for axis, perm in ((0, (2, 0, 1)), (1, (1, 2, 0)), (2, (0, 1, 2))):
        m = ax == axis
        out[m] = v[m][:, perm]
    return out


def cubochoric_to_homochoric(c):
    """Equal-volume map from the cubochoric cube onto the homochoric ball."""
    c = np.asarray(c, dtype=np.float64)
    if np.any(np.abs(c) > CUBE_HALF_EDGE + 1e-12):
        raise ValueError("cubochoric point outside the cube of edge pi**(2/3)")
    shape = c.shape
    flat = c.reshape(-1, 3)
    p, ax = _to_major_z(flat)
    s = p * _SC
    x, y, z = s[:, 0], s[:, 1], s[:, 2]

    swap = np.abs(y) > np.abs(x)
    u = np.where(swap, y, x)
    v = np.where(swap, x, y)
    q = (np.pi / 12.0) * np.divide(v, u, out=np.zeros_like(u), where=u != 0.0)
    cq = np.cos(q)
    sq = np.sin(q)
    big_q = _PREK * u / np.sqrt(_SQRT2 - cq)
    t_major = (_SQRT2 * cq - 1.0) * big_q
    t_minor = _SQRT2 * sq * big_q
    t1 = np.where(swap, t_minor, t_major)
    t2 = np.where(swap, t_major, t_minor)

    cc = t1 * t1 + t2 * t2
    z_safe = np.where(z == 0.0, 1.0, z)
    shrink = np.pi * cc / (24.0 * z_safe * z_safe)
    corr = np.sqrt(np.pi) * cc / (np.sqrt(24.0) * z_safe)
    f = np.sqrt(np.maximum(1.0 - shrink, 0.0))
    ho = np.stack([t1 * f, t2 * f, _PREF * z - corr], axis=-1)
    ho[z == 0.0] = 0.0  # z is the major axis: z == 0 means the cube center
    return _from_major_z(ho, ax).reshape(shape)


def homochoric_to_cubochoric(h):
    """Inverse of :func:`cubochoric_to_homochoric`."""
    h = np.asarray(h, dtype=np.float64)
    shape = h.shape
    flat = h.reshape(-1, 3)
    rs = np.linalg.norm(flat, axis=-1)
    if np.any(rs > BALL_RADIUS + 1e-9):
        raise ValueError("homochoric vector outside the ball")
    p, ax = _to_major_z(flat)
    x, y, z = p[:, 0], p[:, 1], p[:, 2]

    zc = np.sign(z) * rs / _PREF
    denom = np.where(rs == 0.0, 1.0, rs + np.abs(z))
    stretch = np.sqrt(2.0 * rs / denom)
    t1 = x * stretch
    t2 = y * stretch

    swap = np.abs(t2) > np.abs(t1)
    u = np.where(swap, t2, t1)
    v = np.where(swap, t1, t2)
    tot = u * u + v * v + u * u  # r^2 + T_major^2
    b2 = (_SQRT2 * tot + np.abs(u) * np.sqrt(2.0 * tot)) / 2.0
    b2_safe = np.where(b2 == 0.0, 1.0, b2)
    a = np.sign(u) * np.sqrt(b2_safe) / _PREK
    a = np.where(u == 0.0, 0.0, a)
    w = tot / (2.0 * b2_safe)
    acos = np.arccos(np.clip(_SQRT2 - w, -1.0, 1.0))
    sec = (12.0 / np.pi) * acos * np.sign(v) * np.abs(a)
    xs = np.where(swap, sec, a)
    ys = np.where(swap, a, sec)

    cu = np.stack([xs, ys, zc], axis=-1) / _SC
    cu[rs == 0.0] = 0.0
    return _from_major_z(cu, ax).reshape(shape)


def cubochoric_to_quaternion(c):
    """Composite cube -> ball -> axis-angle -> unit quaternion (w >= 0)."""
    axis, omega = homochoric_to_axis_angle(cubochoric_to_homochoric(c))
    return axis_angle_to_quaternion(axis, omega)


def quaternion_to_cubochoric(q):
    axis, omega = quaternion_to_axis_angle(q)
    return homochoric_to_cubochoric(axis_angle_to_homochoric(axis, omega))


# ---------------------------------------------------------------------------
# the m-3m point group
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SymmetryGroup:
    """Proper rotation quaternions of a point group plus sign extension."""

    name: str
    rotations: np.ndarray = field(repr=False)  # (M, 4)

    @property
    def order(self):
        return self.rotations.shape[0]

    @property
    def operators(self):
        """The 2M sign-extended quaternion actions."""
        return np.concatenate([self.rotations, -self.rotations], axis=0)


def _octahedral_rotations():
    quats = [np.array([1.0, 0.0, 0.0, 0.0])]
    eye = np.eye(3)
    for axis in eye:
        for ang in (np.pi / 2.0, np.pi, 3.0 * np.pi / 2.0):
            quats.append(axis_angle_to_quaternion(axis, ang))
    for sx in (1.0, -1.0):
        for sy in (1.0, -1.0):
            axis = np.array([sx, sy, 1.0]) / np.sqrt(3.0)
            for ang in (2.0 * np.pi / 3.0, 4.0 * np.pi / 3.0):
                quats.append(axis_angle_to_quaternion(axis, ang))
    for axis in ([1.0, 1.0, 0.0], [1.0, -1.0, 0.0], [1.0, 0.0, 1.0],
                 [1.0, 0.0, -1.0], [0.0, 1.0, 1.0], [0.0, 1.0, -1.0]):
        quats.append(axis_angle_to_quaternion(np.asarray(axis) / np.sqrt(2.0), np.pi))
    return canonicalize(np.array(quats))


_M3M = SymmetryGroup(name="m-3m", rotations=_octahedral_rotations())


def symmetry_group(name):
    if name != "m-3m":
        raise ValueError(f"unsupported symmetry group {name!r} (only m-3m)")
    return _M3M


def symmetry_equivalents(q, group):
    """All 2M quaternions representing the same physical orientation.

    The crystal symmetry acts in the crystal frame, i.e. by right
    multiplication: equivalents are ``q * s_m`` and their negatives.
    """
    q = np.asarray(q, dtype=np.float64)
    eq = quat_multiply(q[..., None, :], group.rotations)
    return np.concatenate([eq, -eq], axis=-2)


def in_fundamental_zone(vec, group, infinite=None, tol=1e-12):
    """Truncated-cube Rodrigues FZ membership for m-3m.

    Points strictly inside pass; points on a boundary plane (within
    ``tol``) pass iff the first nonzero component of the Rodrigues vector
    is positive, which makes the 24 symmetry copies a partition.
    """
    if group.name != "m-3m":
        raise ValueError(f"unsupported symmetry group {group.name!r}")
    vec = np.asarray(vec, dtype=np.float64)
    a = np.abs(vec)
    mx = np.max(a, axis=-1)
    sm = np.sum(a, axis=-1)
    inside = (mx < FZ_CUT - tol) & (sm < 1.0 - tol)
    outside = (mx > FZ_CUT + tol) | (sm > 1.0 + tol)
    boundary = ~inside & ~outside

    result = inside.copy()
    if np.any(boundary):
        first = np.zeros(vec.shape[:-1])
        for i in (2, 1, 0):
            comp = vec[..., i]
            first = np.where(np.abs(comp) > tol, comp, first)
        result = result | (boundary & (first > 0.0))
    if infinite is not None:
        result = result & ~np.asarray(infinite)
    return result


def to_fundamental_zone(q, group):
    """Canonical FZ representative of the orientation of q."""
    q = np.asarray(q, dtype=np.float64)
    cands = canonicalize(quat_multiply(q[..., None, :], group.rotations))
    vec, infinite = quaternion_to_rodrigues(cands)
    ok = in_fundamental_zone(vec, group, infinite=infinite)
    # exactly one candidate passes up to float ties; fall back to max w
    w = cands[..., 0]
    score = np.where(ok, w + 2.0, w)
    best = np.argmax(score, axis=-1)
    return np.take_along_axis(cands, best[..., None, None], axis=-2)[..., 0, :]


def misorientation_angle(q1, q2, group):
    """Minimal rotation angle between orientations, in degrees."""
    q1 = np.asarray(q1, dtype=np.float64)
    eq = quat_multiply(np.asarray(q2, dtype=np.float64)[..., None, :], group.rotations)
    dots = np.abs(np.sum(q1[..., None, :] * eq, axis=-1))
    best = np.clip(np.max(dots, axis=-1), -1.0, 1.0)
    return np.degrees(2.0 * np.arccos(best))


def random_quaternions(n, rng):
    """Uniform random orientations (normalized 4D Gaussians, w >= 0)."""
    q = rng.standard_normal((n, 4))
    return canonicalize(normalize_quaternion(q))
