import numpy as np
import pytest

from ebsdict import forward, matching, synth
from ebsdict.matching import SampleMap


def test_normalized_inner_product_basics():
    a = np.array([1.0, 0.0, 1.0])
    assert matching.normalized_inner_product(a, 3.0 * a) == pytest.approx(1.0)
    assert matching.normalized_inner_product(a, [0.0, 1.0, 0.0]) == pytest.approx(0.0)
    with pytest.raises(ValueError):
        matching.normalized_inner_product(a, [1.0, 0.0])
    with pytest.raises(ValueError):
        matching.normalized_inner_product(a, np.zeros(3))


def test_top_k_against_full_sort(comp_dict):
    rng = np.random.default_rng(0)
    for _ in range(20):
        y = rng.standard_normal(comp_dict.patterns.shape[1])
        for k in (1, 5, 40):
            got = matching.top_k_matches(y, comp_dict, k)
            from ebsdict.dictionary import compensate_pattern
            yc = compensate_pattern(y, comp_dict.principal)
            sims = comp_dict.patterns.astype(np.float32) @ yc.astype(np.float32)
            order = np.lexsort((np.arange(len(sims)),
                                -sims.astype(np.float64)))[:k]
            assert [i for i, _ in got] == order.tolist()


def test_top_k_tie_break_by_index():
    # duplicated rows force exact ties; lower index must win
    rows = np.tile(np.array([[0.6, 0.8], [0.8, 0.6]], dtype=np.float32), (3, 1))

    class Plain:
        patterns = rows

        def __len__(self):
            return len(rows)

    got = matching.top_k_matches(np.array([0.6, 0.8]), Plain(), 4)
    assert [i for i, _ in got] == [0, 2, 4, 1]


def test_self_match_rho_one(raw_dict, comp_dict):
    rng = np.random.default_rng(1)
    for i in rng.choice(len(raw_dict), 10, replace=False):
        got = matching.top_k_matches(raw_dict.patterns[i], comp_dict, 1)
        assert got[0][0] == i
        assert got[0][1] == pytest.approx(1.0, abs=1e-5)


def test_mean_dictionary_similarity_matches_loop(raw_dict):
    rng = np.random.default_rng(2)
    y = np.abs(rng.standard_normal(raw_dict.patterns.shape[1]))
    fast = matching.mean_dictionary_similarity(y, raw_dict)
    slow = np.mean([matching.normalized_inner_product(y, row)
                    for row in raw_dict.patterns])
    assert fast == pytest.approx(slow, abs=1e-12)


@pytest.fixture(scope="module")
def matched(raw_dict, comp_dict, small_detector):
    sample, truth = synth.synthesize_sample(width=12, height=10, n_grains=4,
                                            seed=5, det=small_detector)
    table, mean_ip = matching.match_sample(sample, raw_dict, comp_dict, k=10)
    return sample, truth, table, mean_ip


def test_match_sample_agrees_with_single_queries(matched, raw_dict, comp_dict):
    sample, _, table, mean_ip = matched
    for i in (0, 17, 63, 119):
        single = matching.top_k_matches(sample.patterns[i], comp_dict, 10)
        assert table.indices[i].tolist() == [j for j, _ in single]
        assert mean_ip[i] == pytest.approx(
            matching.mean_dictionary_similarity(sample.patterns[i], raw_dict),
            abs=1e-9)


def test_match_sample_worker_invariance(matched, raw_dict, comp_dict):
    sample, _, table, mean_ip = matched
    for workers in (2, 5):
        t2, m2 = matching.match_sample(sample, raw_dict, comp_dict, k=10,
                                       workers=workers)
        assert np.array_equal(t2.indices, table.indices)
        assert np.array_equal(t2.scores, table.scores)
        assert np.array_equal(m2, mean_ip)


def test_match_sample_shape_mismatch(raw_dict, comp_dict):
    bad = SampleMap(width=2, height=2, pattern_shape=(8, 8),
                    patterns=np.ones((4, 64), dtype=np.float32))
    with pytest.raises(ValueError, match="do not match"):
        matching.match_sample(bad, raw_dict, comp_dict, k=5)


def test_scores_sorted_descending(matched):
    _, _, table, _ = matched
    diffs = np.diff(table.scores.astype(np.float64), axis=1)
    assert np.all(diffs <= 0.0)


def test_neighborhood_similarity_counts(matched):
    _, _, table, mean_ip = matched
    raw, norm = matching.neighborhood_similarity(table, (0, 0))
    assert 0 <= raw <= 3 * table.k
    assert 0.0 <= norm <= 1.0
    maps = matching.similarity_maps(table, mean_ip)
    assert maps.neighbor_count[0] == 3
    assert maps.neighbor_count[table.width + 1] == 8
    i = 1 * table.width + 1
    r2, n2 = matching.neighborhood_similarity(table, (1, 1))
    assert maps.overlap_raw[i] == r2
    assert maps.overlap_norm[i] == pytest.approx(n2)


def test_similarity_maps_mask_excludes_pixels(matched):
    _, _, table, mean_ip = matched
    valid = np.ones(table.width * table.height, dtype=bool)
    valid[0] = False
    masked = matching.similarity_maps(table, mean_ip, valid=valid)
    full = matching.similarity_maps(table, mean_ip)
    j = 1  # neighbor of pixel 0
    assert masked.neighbor_count[j] == full.neighbor_count[j] - 1


def test_interior_overlap_exceeds_boundary(matched):
    _, truth, table, mean_ip = matched
    maps = matching.similarity_maps(table, mean_ip)
    labels = truth.labels.ravel()
    interior = maps.overlap_norm[labels == 0].mean()
    boundary = maps.overlap_norm[labels == 1].mean()
    assert interior > boundary
