"""Normalized inner-product matching and the two similarity statistics.

The matching kernel evaluates sample-against-dictionary inner products in
float32 GEMM panels of a fixed size.  Pixel tasks are cut into blocks of a
fixed length regardless of the worker count and results are assembled by
pixel index, so serial and parallel runs produce bit-identical tables.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dictionary import CompensatedDictionary, Dictionary, compensate_pattern
from .errors import DegenerateFitError

PIXEL_BLOCK = 256      # pixels per matching task (fixed: determinism contract)
DICT_PANEL = 8192      # dictionary rows per GEMM panel


@dataclass(frozen=True)
class SampleMap:
    """Scan-grid of measured patterns, one per pixel, row-major."""

    width: int
    height: int
    pattern_shape: tuple  # (rows, cols)
    patterns: np.ndarray  # (n, L) float32

    def __post_init__(self):
        n, ell = self.patterns.shape
        if n != self.width * self.height or n < 1:
            raise ValueError("pattern count does not match scan dimensions")
        if ell != self.pattern_shape[0] * self.pattern_shape[1]:
            raise ValueError("pattern length does not match pattern shape")

    @property
    def n_pixels(self):
        return self.patterns.shape[0]


@dataclass(frozen=True)
class KnnTable:
    """Per pixel, the k best dictionary matches, rho descending."""

    k: int
    width: int
    height: int
    indices: np.ndarray  # (n, k) int32
    scores: np.ndarray   # (n, k) float32


@dataclass(frozen=True)
class SimilarityMaps:
    width: int
    height: int
    k: int
    mean_ip: np.ndarray        # (n,) mean inner product vs the raw dictionary
    overlap_raw: np.ndarray    # (n,) int32, summed kNN overlap over neighbors
    overlap_norm: np.ndarray   # (n,) raw / (k * #in-image neighbors)
    neighbor_count: np.ndarray  # (n,) int32, in-image (and unmasked) neighbors


def normalized_inner_product(a, b):
    """Cosine similarity of two patterns of identical shape."""
    x = np.asarray(a, dtype=np.float64).ravel()
    y = np.asarray(b, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {np.shape(a)} vs {np.shape(b)}")
    nx = np.linalg.norm(x)
    ny = np.linalg.norm(y)
    if nx == 0.0 or ny == 0.0:
        raise ValueError("zero-norm pattern")
    return float(np.clip(x @ y / (nx * ny), -1.0, 1.0))


def _exact_top_k(sims, k):
    """Exact top-k indices: rho descending, ties by ascending index."""
    d = sims.shape[0]
    if k > d:
        raise ValueError(f"k={k} exceeds dictionary size {d}")
    if k == d:
        idx = np.arange(d)
    else:
        thresh = np.partition(sims, d - k)[d - k]
        above = np.flatnonzero(sims > thresh)
        equal = np.flatnonzero(sims == thresh)
        idx = np.concatenate([above, equal[: k - above.size]])
    order = np.lexsort((idx, -sims[idx].astype(np.float64)))
    return idx[order]


def _as_unit_rows(patterns):
    p = np.asarray(patterns, dtype=np.float32)
    norms = np.linalg.norm(p.astype(np.float64), axis=-1)
    if np.any(norms == 0.0):
        raise ValueError("zero-norm pattern")
    return (p.astype(np.float64) / norms[..., None]).astype(np.float32)


def top_k_matches(pattern, dct, k):
    """Exact top-k (index, rho) pairs of one pattern against a dictionary.

    Against a :class:`CompensatedDictionary` the query is compensated
    with the dictionary's principal component first.
    """
    y = np.asarray(pattern, dtype=np.float64).ravel()
    if isinstance(dct, CompensatedDictionary):
        y = compensate_pattern(y, dct.principal)
    else:
        n = np.linalg.norm(y)
        if n == 0.0:
            raise ValueError("zero-norm pattern")
        y = y / n
    sims = dct.patterns.astype(np.float32) @ y.astype(np.float32)
    idx = _exact_top_k(sims, k)
    return [(int(i), float(sims[i])) for i in idx]


def mean_dictionary_similarity(pattern, dct: Dictionary):
    """Average normalized inner product against the whole raw dictionary."""
    y = np.asarray(pattern, dtype=np.float64).ravel()
    n = np.linalg.norm(y)
    if n == 0.0:
        raise ValueError("zero-norm pattern")
    rows = np.asarray(dct.patterns, dtype=np.float64)
    mean_row = rows / np.linalg.norm(rows, axis=1, keepdims=True)
    return float((y / n) @ mean_row.mean(axis=0))


def match_sample(sample: SampleMap, raw: Dictionary, comp: CompensatedDictionary,
                 k, workers=1):
    """Match every sample pixel: compensated kNN table plus raw mean-ip map.

    Returns ``(KnnTable, mean_ip array)``.  Results are bit-identical for
    any worker count.
    """
    if sample.pattern_shape != (raw.detector.rows, raw.detector.cols):
        raise ValueError(
            f"sample patterns {sample.pattern_shape} do not match dictionary "
            f"patterns {(raw.detector.rows, raw.detector.cols)}"
        )
    d = len(comp)
    if not 1 <= k <= d:
        raise ValueError(f"k={k} out of range for dictionary size {d}")

    comp_rows = np.asarray(comp.patterns, dtype=np.float32)
    principal = comp.principal
    raw_unit_mean = (
        np.asarray(raw.patterns, dtype=np.float64)
        / np.linalg.norm(raw.patterns, axis=1, keepdims=True).astype(np.float64)
    ).mean(axis=0)

    n = sample.n_pixels
    indices = np.empty((n, k), dtype=np.int32)
    scores = np.empty((n, k), dtype=np.float32)
    mean_ip = np.empty(n, dtype=np.float64)

    def run_block(start):
        stop = min(start + PIXEL_BLOCK, n)
        block = sample.patterns[start:stop].astype(np.float64)
        norms = np.linalg.norm(block, axis=1)
        if np.any(norms == 0.0):
            raise DegenerateFitError(
                f"zero-norm sample pattern in pixels {start}..{stop}")
        unit = block / norms[:, None]
        mean_ip[start:stop] = unit @ raw_unit_mean

        proj = unit - (unit @ principal)[:, None] * principal[None, :]
        pn = np.linalg.norm(proj, axis=1)
        if np.any(pn < 1e-6):
            raise DegenerateFitError(
                f"pattern parallel to the principal component in pixels "
                f"{start}..{stop}")
        queries = (proj / pn[:, None]).astype(np.float32)

        best_idx = None
        best_sim = None
        for p0 in range(0, d, DICT_PANEL):
            panel = comp_rows[p0 : p0 + DICT_PANEL]
            sims = queries @ panel.T
            ids = np.arange(p0, p0 + panel.shape[0], dtype=np.int64)
            if best_idx is None:
                cand_sim = sims
                cand_idx = np.broadcast_to(ids, sims.shape)
            else:
                cand_sim = np.concatenate([best_sim, sims], axis=1)
                cand_idx = np.concatenate(
                    [best_idx, np.broadcast_to(ids, sims.shape)], axis=1
                )
            keep = min(k, cand_sim.shape[1])
            new_idx = np.empty((cand_sim.shape[0], keep), dtype=np.int64)
            new_sim = np.empty((cand_sim.shape[0], keep), dtype=np.float32)
            for r in range(cand_sim.shape[0]):
                local = _exact_top_k_pairs(cand_sim[r], cand_idx[r], keep)
                new_sim[r] = cand_sim[r][local]
                new_idx[r] = cand_idx[r][local]
            best_sim, best_idx = new_sim, new_idx
        indices[start:stop] = best_idx
        scores[start:stop] = best_sim

    starts = range(0, n, PIXEL_BLOCK)
    if workers <= 1:
        for s in starts:
            run_block(s)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run_block, starts))

    table = KnnTable(k=k, width=sample.width, height=sample.height,
                     indices=indices, scores=scores)
    return table, mean_ip


def _exact_top_k_pairs(sims, ids, k):
    """Positions of the top-k entries, ties broken by ascending dictionary id."""
    if k == sims.shape[0]:
        pos = np.arange(k)
    else:
        thresh = np.partition(sims, sims.shape[0] - k)[sims.shape[0] - k]
        above = np.flatnonzero(sims > thresh)
        equal = np.flatnonzero(sims == thresh)
        if above.size < k:
            eq_order = equal[np.argsort(ids[equal], kind="stable")]
            pos = np.concatenate([above, eq_order[: k - above.size]])
        else:
            pos = above
    order = np.lexsort((ids[pos], -sims[pos].astype(np.float64)))
    return pos[order]


_NEIGHBOR_OFFSETS = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]


def neighborhood_similarity(table: KnnTable, pixel, valid=None):
    """kNN-set overlap of one pixel with its 3x3 neighbors.

    Returns ``(raw, normalized)`` with ``normalized = raw / (k * m)`` and
    ``m`` the number of in-image (and unmasked) neighbors.
    """
    x, y = pixel
    if not (0 <= x < table.width and 0 <= y < table.height):
        raise ValueError(f"pixel {pixel} outside {table.width}x{table.height} grid")
    own = np.sort(table.indices[y * table.width + x])
    raw = 0
    m = 0
    for dy, dx in _NEIGHBOR_OFFSETS:
        nx, ny = x + dx, y + dy
        if not (0 <= nx < table.width and 0 <= ny < table.height):
            continue
        j = ny * table.width + nx
        if valid is not None and not valid[j]:
            continue
        m += 1
        raw += np.intersect1d(own, table.indices[j], assume_unique=False).size
    norm = raw / (table.k * m) if m else 0.0
    return raw, norm


def similarity_maps(table: KnnTable, mean_ip, valid=None):
    """Bulk neighborhood-overlap statistics for every pixel.

    ``valid`` optionally masks pixels (e.g. detected anomalies) out of
    their neighbors' overlap sums.
    """
    w, h = table.width, table.height
    n = w * h
    sorted_rows = np.sort(table.indices, axis=1)
    raw = np.zeros(n, dtype=np.int32)
    counts = np.zeros(n, dtype=np.int32)
    for y in range(h):
        for x in range(w):
            i = y * w + x
            own = sorted_rows[i]
            for dy, dx in _NEIGHBOR_OFFSETS:
                nx, ny = x + dx, y + dy
                if not (0 <= nx < w and 0 <= ny < h):
                    continue
                j = ny * w + nx
                if valid is not None and not valid[j]:
                    continue
                counts[i] += 1
                raw[i] += np.intersect1d(own, sorted_rows[j]).size
    denom = np.maximum(counts, 1) * table.k
    norm = raw / denom
    norm[counts == 0] = 0.0
    return SimilarityMaps(width=w, height=h, k=table.k,
                          mean_ip=np.asarray(mean_ip, dtype=np.float64),
                          overlap_raw=raw, overlap_norm=norm,
                          neighbor_count=counts)
