import numpy as np
import pytest

from ebsdict import dictionary, forward, orientation


def sample_vmf_s3(mu, kappa, n, rng):
    """Draw n points from a vMF on S3 by rejection (Wood's method)."""
    p = 4
    b = (-2.0 * kappa + np.sqrt(4.0 * kappa**2 + (p - 1) ** 2)) / (p - 1)
    x0 = (1.0 - b) / (1.0 + b)
    c = kappa * x0 + (p - 1) * np.log(1.0 - x0**2)
    ws = []
    while len(ws) < n:
        z = rng.beta((p - 1) / 2.0, (p - 1) / 2.0, size=n)
        u = rng.uniform(size=n)
        w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z)
        ok = kappa * w + (p - 1) * np.log(1.0 - x0 * w) - c >= np.log(u)
        ws.extend(w[ok][: n - len(ws)])
    w = np.array(ws)
    v = rng.standard_normal((n, p - 1))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    x = np.concatenate([w[:, None], np.sqrt(1.0 - w**2)[:, None] * v], axis=1)
    # reflect e1 onto mu
    e1 = np.zeros(p)
    e1[0] = 1.0
    u_ = e1 - np.asarray(mu, dtype=np.float64)
    nu = np.linalg.norm(u_)
    if nu > 1e-12:
        u_ = u_ / nu
        x = x - 2.0 * np.outer(x @ u_, u_)
    return x


def sample_vmfm(mu, kappa, n, group, rng):
    """vMF samples scattered over the symmetry copies of mu."""
    x = sample_vmf_s3(mu, kappa, n, rng)
    ops = group.operators
    pick = rng.integers(0, len(ops), n)
    return orientation.quat_multiply(x, ops[pick])


@pytest.fixture(scope="session")
def group():
    return orientation.symmetry_group("m-3m")


@pytest.fixture(scope="session")
def small_detector():
    return forward.DetectorGeometry(rows=30, cols=40)


@pytest.fixture(scope="session")
def bands():
    return forward.default_band_model()


@pytest.fixture(scope="session")
def grid12(group):
    return dictionary.sample_fz_orientations(12, group)


@pytest.fixture(scope="session")
def raw_dict(grid12, bands, small_detector):
    return dictionary.build_dictionary(grid12, bands, small_detector)


@pytest.fixture(scope="session")
def comp_dict(raw_dict):
    return dictionary.compensate(raw_dict)
