import numpy as np

from ebsdict import orientation
from ebsdict.ipf import ipf_color


def test_identity_is_red(group):
    # reference direction 001 lands on the 001 corner
    rgb = ipf_color(np.array([1.0, 0.0, 0.0, 0.0]), group)
    assert np.allclose(rgb, [1.0, 0.0, 0.0], atol=1e-12)


def test_known_corners(group):
    # rotation carrying 101 onto 001 colors green, 111 onto 001 blue
    q101 = orientation.axis_angle_to_quaternion(np.array([0.0, 1.0, 0.0]),
                                                np.radians(45.0))
    rgb = ipf_color(q101, group)
    assert rgb.argmax() == 1 and rgb[0] < 1e-9
    ang = np.arccos(1.0 / np.sqrt(3.0))
    q111 = orientation.axis_angle_to_quaternion(np.array([-1.0, 1.0, 0.0])
                                                / np.sqrt(2.0), ang)
    rgb = ipf_color(q111, group)
    assert rgb.argmax() == 2


def test_symmetry_equivalents_same_color(group):
    rng = np.random.default_rng(0)
    q = orientation.random_quaternions(1, rng)[0]
    base = ipf_color(q, group)
    for s in group.operators[::7]:
        rgb = ipf_color(orientation.quat_multiply(q, s), group)
        assert np.allclose(rgb, base, atol=1e-9)


def test_continuity_away_from_edges(group):
    rng = np.random.default_rng(1)
    checked = 0
    for q in orientation.random_quaternions(200, rng):
        rgb = ipf_color(q, group)
        # skip orientations near the triangle edges where folding kinks
        if rgb.min() < 0.1:
            continue
        axis = rng.standard_normal(3)
        axis /= np.linalg.norm(axis)
        dq = orientation.axis_angle_to_quaternion(axis, np.radians(1.0))
        rgb2 = ipf_color(orientation.quat_multiply(dq, q), group)
        assert np.max(np.abs(rgb2 - rgb)) < 10.0 / 255.0
        checked += 1
    assert checked > 20


def test_batch_shape(group):
    rng = np.random.default_rng(2)
    q = orientation.random_quaternions(7, rng)
    rgb = ipf_color(q, group)
    assert rgb.shape == (7, 3)
    assert rgb.min() >= 0.0 and rgb.max() <= 1.0
