import numpy as np
import pytest

from ebsdict import dictionary, forward, orientation
from ebsdict.errors import DegenerateFitError


def test_fz_counts_small_grids(group):
    # frozen counts from exhaustive enumeration
    assert dictionary.count_fz_orientations(1, group) == 1
    assert dictionary.count_fz_orientations(3, group) == 21
    assert dictionary.count_fz_orientations(6, group) == 71
    assert dictionary.count_fz_orientations(12, group) == 579


def test_count_matches_sampling(group):
    n = dictionary.count_fz_orientations(8, group)
    grid = dictionary.sample_fz_orientations(8, group)
    assert len(grid) == n


def test_grid_members_are_in_fz(grid12, group):
    vec, infinite = orientation.quaternion_to_rodrigues(grid12.orientations)
    assert orientation.in_fundamental_zone(vec, group, infinite=infinite).all()
    assert np.allclose(np.linalg.norm(grid12.orientations, axis=1), 1.0,
                       atol=1e-12)


def test_grid_chunking_invariant(group):
    a = dictionary.sample_fz_orientations(6, group, chunk=100)
    b = dictionary.sample_fz_orientations(6, group, chunk=10**6)
    assert np.array_equal(a.orientations, b.orientations)


def test_grid_spacing_roughly_uniform(grid12):
    spac = dictionary.nearest_neighbor_spacing(grid12, sample_size=120)
    cov = spac.std() / spac.mean()
    assert cov < 0.25


def test_dictionary_rows_normalized(raw_dict):
    norms = np.linalg.norm(raw_dict.patterns, axis=1)
    assert np.allclose(norms, 1.0, atol=1e-9)
    assert raw_dict.patterns.shape == (len(raw_dict.grid),
                                       raw_dict.detector.n_pixels)


def test_principal_component_against_svd(raw_dict):
    v = dictionary.principal_component(raw_dict.patterns)
    _, _, vt = np.linalg.svd(raw_dict.patterns, full_matrices=False)
    ref = vt[0] if vt[0].mean() >= 0 else -vt[0]
    assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-12)
    assert np.abs(v @ ref) == pytest.approx(1.0, abs=1e-9)


def test_compensated_rows_orthogonal_and_unit(comp_dict):
    dots = comp_dict.patterns @ comp_dict.principal
    assert np.max(np.abs(dots)) < 1e-6
    assert np.allclose(np.linalg.norm(comp_dict.patterns, axis=1), 1.0,
                       atol=1e-6)


def test_compensate_pattern_matches_rows(raw_dict, comp_dict):
    row = raw_dict.patterns[37]
    out = dictionary.compensate_pattern(row, comp_dict.principal)
    assert np.allclose(out, comp_dict.patterns[37], atol=1e-6)


def test_compensate_pattern_rejects_parallel(comp_dict):
    with pytest.raises(DegenerateFitError):
        dictionary.compensate_pattern(comp_dict.principal, comp_dict.principal)


def test_build_rejects_empty_grid(group, bands, small_detector):
    empty = dictionary.OrientationGrid(N=1, group=group,
                                       orientations=np.zeros((0, 4)))
    with pytest.raises(ValueError):
        dictionary.build_dictionary(empty, bands, small_detector)
