"""Binary containers and delimited output.

Two little-endian formats:

scan container (.ebsp)
    magic ``EBSP``, u32 version, u32 scan height, u32 scan width,
    u32 pattern rows, u32 pattern cols, then height*width*rows*cols
    float32 intensities in row-major scan order.

dictionary container (.ebsd)
    magic ``EBSD``, u32 version, u64 entry count d, u32 pattern rows,
    u32 pattern cols, u32 grid half resolution N, f64 pc_x, pc_y,
    detector_distance, sample_tilt, u32 group-name length + UTF-8 bytes,
    d*4 float64 quaternions, d*L float32 pattern rows.  A compensated
    dictionary appends L float32 principal-component entries; presence
    is inferred from the remaining payload size.
"""

from __future__ import annotations

import csv
import struct

import numpy as np

from . import orientation
from .dictionary import CompensatedDictionary, Dictionary, OrientationGrid
from .errors import ContainerFormatError
from .forward import DetectorGeometry
from .matching import SampleMap

_EBSP_MAGIC = b"EBSP"
_EBSD_MAGIC = b"EBSD"
_VERSION = 1


def write_sample_map(path, sample: SampleMap):
    with open(path, "wb") as fh:
        fh.write(_EBSP_MAGIC)
        fh.write(struct.pack("<5I", _VERSION, sample.height, sample.width,
                             sample.pattern_shape[0], sample.pattern_shape[1]))
        fh.write(np.ascontiguousarray(sample.patterns, dtype="<f4").tobytes())


def read_sample_map(path):
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _EBSP_MAGIC:
            raise ContainerFormatError(f"{path}: not a scan container")
        header = fh.read(20)
        if len(header) != 20:
            raise ContainerFormatError(f"{path}: truncated header")
        version, height, width, rows, cols = struct.unpack("<5I", header)
        if version != _VERSION:
            raise ContainerFormatError(f"{path}: unsupported version {version}")
        n = height * width
        ell = rows * cols
        payload = fh.read()
    expected = n * ell * 4
    if len(payload) != expected:
        raise ContainerFormatError(
            f"{path}: payload is {len(payload)} bytes, expected {expected}"
        )
    patterns = np.frombuffer(payload, dtype="<f4").reshape(n, ell).copy()
    return SampleMap(width=width, height=height, pattern_shape=(rows, cols),
                     patterns=patterns)


def write_dictionary(path, dct):
    """Write a Dictionary or CompensatedDictionary (patterns as float32)."""
    det = dct.detector
    name = dct.grid.group.name.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_EBSD_MAGIC)
        fh.write(struct.pack("<I", _VERSION))
        fh.write(struct.pack("<Q", len(dct)))
        fh.write(struct.pack("<3I", det.rows, det.cols, dct.grid.N))
        fh.write(struct.pack("<4d", det.pattern_center[0], det.pattern_center[1],
                             det.detector_distance, det.sample_tilt))
        fh.write(struct.pack("<I", len(name)))
        fh.write(name)
        fh.write(np.ascontiguousarray(dct.grid.orientations, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(dct.patterns, dtype="<f4").tobytes())
        if isinstance(dct, CompensatedDictionary):
            fh.write(np.ascontiguousarray(dct.principal, dtype="<f4").tobytes())


def read_dictionary(path):
    """Read a dictionary container; the type follows the stored payload."""
    with open(path, "rb") as fh:
        if fh.read(4) != _EBSD_MAGIC:
            raise ContainerFormatError(f"{path}: not a dictionary container")
        try:
            (version,) = struct.unpack("<I", fh.read(4))
            if version != _VERSION:
                raise ContainerFormatError(f"{path}: unsupported version {version}")
            (d,) = struct.unpack("<Q", fh.read(8))
            rows, cols, n_res = struct.unpack("<3I", fh.read(12))
            pc_x, pc_y, dist, tilt = struct.unpack("<4d", fh.read(32))
            (name_len,) = struct.unpack("<I", fh.read(4))
            name = fh.read(name_len).decode("utf-8")
            quats = np.frombuffer(fh.read(d * 4 * 8), dtype="<f8").reshape(d, 4)
            ell = rows * cols
            patterns = np.frombuffer(fh.read(d * ell * 4), dtype="<f4").reshape(d, ell)
            rest = fh.read()
        except (struct.error, ValueError) as exc:
            raise ContainerFormatError(f"{path}: truncated container") from exc
    norms = np.linalg.norm(quats, axis=1)
    if quats.shape[0] and np.max(np.abs(norms - 1.0)) > 1e-9:
        raise ContainerFormatError(f"{path}: non-unit quaternion in payload")
    det = DetectorGeometry(rows=rows, cols=cols, pattern_center=(pc_x, pc_y),
                           detector_distance=dist, sample_tilt=tilt)
    grid = OrientationGrid(N=n_res, group=orientation.symmetry_group(name),
                           orientations=quats.copy())
    if len(rest) == 0:
        return Dictionary(grid=grid, patterns=patterns.copy(), detector=det)
    if len(rest) == ell * 4:
        principal = np.frombuffer(rest, dtype="<f4").astype(np.float64)
        return CompensatedDictionary(grid=grid, principal=principal,
                                     patterns=patterns.copy(), detector=det)
    raise ContainerFormatError(f"{path}: {len(rest)} unexpected trailing bytes")


def write_class_csv(path, class_map):
    """Per-pixel class labels as ``x,y,class`` rows."""
    labels = class_map.labels
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(("x", "y", "class"))
        for y in range(class_map.height):
            for x in range(class_map.width):
                writer.writerow([x, y, int(labels[y, x])])


def write_ground_truth_csv(path, width, height, truth):
    """Synthetic ground truth: grain id, class label, true orientation."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(("x", "y", "grain_id", "class",
                         "qw", "qx", "qy", "qz"))
        for i in range(width * height):
            y, x = divmod(i, width)
            q = truth.quats[i]
            writer.writerow([x, y, int(truth.grain_id[y, x]),
                             int(truth.labels[y, x]),
                             f"{q[0]:.9f}", f"{q[1]:.9f}",
                             f"{q[2]:.9f}", f"{q[3]:.9f}"])


ORIENTATION_CSV_COLUMNS = (
    "x", "y", "phi1", "Phi", "phi2", "qw", "qx", "qy", "qz",
    "kappa", "delta_theta_deg", "class",
)


def write_orientation_csv(path, width, height, quats, kappas, cone_deg,
                          labels, delta_theta_cap=0.25):
    """Per-pixel orientation table; Euler angles in degrees, Bunge order.

    ``cone_deg`` values are clipped at ``delta_theta_cap`` for display
    (NaN stays NaN); the raw concentration column is untouched.
    """
    labels = np.asarray(labels).ravel()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(ORIENTATION_CSV_COLUMNS)
        for i in range(width * height):
            y, x = divmod(i, width)
            phi1, big_phi, phi2 = np.degrees(
                orientation.quaternion_to_euler(quats[i])
            )
            cone = cone_deg[i]
            if np.isfinite(cone):
                cone = min(cone, delta_theta_cap)
            writer.writerow([
                x, y,
                f"{phi1:.6f}", f"{big_phi:.6f}", f"{phi2:.6f}",
                f"{quats[i][0]:.9f}", f"{quats[i][1]:.9f}",
                f"{quats[i][2]:.9f}", f"{quats[i][3]:.9f}",
                f"{kappas[i]:.4f}",
                "nan" if not np.isfinite(cone) else f"{cone:.6f}",
                int(labels[i]),
            ])
