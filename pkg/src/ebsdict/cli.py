"""Command line interface.

Exit codes: 0 success, 2 configuration or usage error, 3 I/O or container
error, 4 numerical failure (degenerate fit, underivable threshold).
"""

from __future__ import annotations

import os
import sys

import click
import numpy as np

from . import classify as classify_mod
from . import containers, dictionary, forward, orientation, report, synth, vmf
from .config import RunConfig, load_run_config
from .errors import (ConfigError, ContainerFormatError, DegenerateFitError,
                     ThresholdError)
from .matching import match_sample


@click.group()
def main():
    """Dictionary-based indexing of diffraction pattern scans."""


def _fail(exc, code):
    click.echo(f"error: {exc}", err=True)
    sys.exit(code)


def _guard(fn):
    import functools

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as exc:
            _fail(exc, 2)
        except (ContainerFormatError, OSError) as exc:
            _fail(exc, 3)
        except (DegenerateFitError, ThresholdError) as exc:
            _fail(exc, 4)

    return wrapper


def _load_config(path, **overrides):
    cfg = load_run_config(path) if path else RunConfig()
    fields = {k: v for k, v in overrides.items() if v is not None}
    if fields:
        from dataclasses import replace
        cfg = replace(cfg, **fields)
    return cfg


_config_option = click.option(
    "--config", "config_path", type=click.Path(exists=True, dir_okay=False),
    default=None, help="run configuration file (key = value lines)")


@main.command("build-dict")
@click.option("-N", "--resolution", type=int, default=None,
              help="cubochoric grid half resolution (default 40)")
@click.option("--detector-config", type=click.Path(exists=True, dir_okay=False),
              default=None, help="detector geometry file")
@click.option("--bands-config", type=click.Path(exists=True, dir_okay=False),
              default=None, help="band model file")
@click.option("--count-only", is_flag=True,
              help="only count the grid orientations, build nothing")
@click.option("-o", "--output", default=None, type=click.Path(dir_okay=False))
@_config_option
@_guard
def build_dict(resolution, detector_config, bands_config, count_only, output,
               config_path):
    """Build a pattern dictionary over the cubic fundamental zone."""
    import time

    cfg = _load_config(config_path, N=resolution)
    group = orientation.symmetry_group("m-3m")
    if count_only:
        t0 = time.perf_counter()
        d = dictionary.count_fz_orientations(cfg.N, group)
        click.echo(f"grid: {d} orientations (N={cfg.N}, "
                   f"{time.perf_counter() - t0:.1f} s)")
        return
    if not output:
        raise ConfigError("--output is required unless --count-only is set")
    det = (forward.load_detector_config(detector_config)
           if detector_config else forward.DetectorGeometry())
    bands = (forward.load_band_config(bands_config)
             if bands_config else forward.default_band_model())
    t0 = time.perf_counter()
    grid = dictionary.sample_fz_orientations(cfg.N, group)
    click.echo(f"grid: {len(grid)} orientations (N={cfg.N})")
    raw = dictionary.build_dictionary(grid, bands, det)
    containers.write_dictionary(output, raw)
    click.echo(f"wrote {output} ({time.perf_counter() - t0:.1f} s)")


@main.command("synth")
@click.option("--width", type=int, default=24, show_default=True)
@click.option("--height", type=int, default=24, show_default=True)
@click.option("--grains", type=int, default=8, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--noise", type=float, default=0.03, show_default=True,
              help="additive gaussian noise level")
@click.option("--anomaly-fraction", type=float, default=0.04, show_default=True)
@click.option("--detector-config", type=click.Path(exists=True, dir_okay=False),
              default=None)
@click.option("-o", "--output", required=True, type=click.Path(dir_okay=False))
@click.option("--truth", type=click.Path(dir_okay=False), default=None,
              help="also write the ground truth as CSV")
@_guard
def synth_cmd(width, height, grains, seed, noise, anomaly_fraction,
              detector_config, output, truth):
    """Generate a synthetic scan with known grain structure."""
    det = (forward.load_detector_config(detector_config)
           if detector_config else forward.DetectorGeometry())
    try:
        sample, gt = synth.synthesize_sample(
            width=width, height=height, n_grains=grains, seed=seed, det=det,
            noise_strength=noise, anomaly_fraction=anomaly_fraction)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    containers.write_sample_map(output, sample)
    click.echo(f"wrote {output}")
    if truth:
        containers.write_ground_truth_csv(truth, width, height, gt)
        click.echo(f"wrote {truth}")


@main.command("match")
@click.argument("dict_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("scan_path", type=click.Path(exists=True, dir_okay=False))
@click.option("-k", type=int, default=None, help="matches per pixel (default 40)")
@click.option("--workers", type=int, default=None, envvar="EBSDICT_WORKERS",
              help="matching threads (env EBSDICT_WORKERS)")
@click.option("-o", "--output", required=True, type=click.Path(dir_okay=False),
              help="kNN table (.npz)")
@_config_option
@_guard
def match_cmd(dict_path, scan_path, k, workers, output, config_path):
    """Match every scan pixel against a dictionary."""
    cfg = _load_config(config_path, k_classifier=k, workers=workers)
    raw = containers.read_dictionary(dict_path)
    if isinstance(raw, dictionary.CompensatedDictionary):
        raise ConfigError(
            f"{dict_path} is background compensated; matching needs the raw "
            "dictionary to evaluate mean inner products")
    sample = containers.read_sample_map(scan_path)
    try:
        comp = dictionary.compensate(raw)
        table, mean_ip = match_sample(sample, raw, comp, k=cfg.k_classifier,
                                      workers=cfg.workers)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    np.savez(output, indices=table.indices, scores=table.scores,
             mean_ip=mean_ip, width=table.width, height=table.height,
             k=table.k)
    click.echo(f"wrote {output} ({table.width}x{table.height}, k={table.k})")


def _read_knn(path):
    try:
        data = np.load(path)
        from .matching import KnnTable
        table = KnnTable(k=int(data["k"]), width=int(data["width"]),
                         height=int(data["height"]), indices=data["indices"],
                         scores=data["scores"])
        return table, data["mean_ip"]
    except (KeyError, ValueError) as exc:
        raise ContainerFormatError(f"{path}: not a kNN table ({exc})") from exc


@main.command("classify")
@click.argument("knn_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--t-anomaly", type=float, default=None)
@click.option("--t-subclass", type=float, default=None)
@click.option("--t-boundary", type=float, default=None)
@click.option("-o", "--output", required=True, type=click.Path(dir_okay=False),
              help="class map CSV; a PNG rendering is written next to it")
@_config_option
@_guard
def classify_cmd(knn_path, t_anomaly, t_subclass, t_boundary, output,
                 config_path):
    """Classify pixels from a kNN table."""
    cfg = _load_config(config_path, t_anomaly=t_anomaly,
                       t_subclass=t_subclass, t_boundary=t_boundary)
    table, mean_ip = _read_knn(knn_path)
    cmap, sim, thresholds, _ = classify_mod.classify_sample(
        table, mean_ip, overrides=cfg.threshold_overrides())
    containers.write_class_csv(output, cmap)
    png_path = os.path.splitext(output)[0] + ".png"
    report.plot_class_map(png_path, cmap)
    click.echo(f"thresholds: anomaly={thresholds.t_anomaly:.6f} "
               f"subclass={thresholds.t_subclass:.6f} "
               f"boundary={thresholds.t_boundary:.6f}")
    for cls, count in cmap.counts().items():
        click.echo(f"{cls.name.lower()}: {count}")
    click.echo(f"wrote {output} and {png_path}")


def _index_pixels(table, mean_ip, dct, cfg):
    cmap, sim, thresholds, rep = classify_mod.classify_sample(
        table, mean_ip, overrides=cfg.threshold_overrides())
    quats, kappas, cones = vmf.index_orientations(
        table.indices, dct.grid.orientations, dct.grid.group, k_ml=cfg.k_ml)
    return cmap, sim, thresholds, rep, quats, kappas, cones


@main.command("index")
@click.argument("knn_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("dict_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--k-ml", type=int, default=None,
              help="matches pooled per orientation fit (default 4)")
@click.option("-o", "--output", required=True, type=click.Path(dir_okay=False),
              help="orientation table (.csv); IPF and confidence PNGs are "
                   "written next to it")
@_config_option
@_guard
def index_cmd(knn_path, dict_path, k_ml, output, config_path):
    """Refine per-pixel orientations and write the orientation table."""
    cfg = _load_config(config_path, k_ml=k_ml)
    table, mean_ip = _read_knn(knn_path)
    dct = containers.read_dictionary(dict_path)
    try:
        cmap, _, _, _, quats, kappas, cones = _index_pixels(
            table, mean_ip, dct, cfg)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    containers.write_orientation_csv(output, table.width, table.height,
                                     quats, kappas, cones, cmap.labels,
                                     delta_theta_cap=cfg.delta_theta_cap)
    stem = os.path.splitext(output)[0]
    report.plot_ipf_map(stem + "_ipf.png", quats, table.width, table.height,
                        dct.grid.group)
    report.plot_confidence_map(stem + "_confidence.png", cones, table.width,
                               table.height, cap=cfg.delta_theta_cap)
    click.echo(f"wrote {output}, {stem}_ipf.png, {stem}_confidence.png")


@main.command("report")
@click.argument("knn_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("dict_path", type=click.Path(exists=True, dir_okay=False))
@click.option("-o", "--outdir", required=True, type=click.Path(file_okay=False))
@_config_option
@_guard
def report_cmd(knn_path, dict_path, outdir, config_path):
    """Full report: orientation table plus diagnostic figures."""
    cfg = _load_config(config_path)
    table, mean_ip = _read_knn(knn_path)
    dct = containers.read_dictionary(dict_path)
    try:
        cmap, sim, thresholds, rep, quats, kappas, cones = _index_pixels(
            table, mean_ip, dct, cfg)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    os.makedirs(outdir, exist_ok=True)
    csv_path = os.path.join(outdir, "orientations.csv")
    containers.write_orientation_csv(csv_path, table.width, table.height,
                                     quats, kappas, cones, cmap.labels,
                                     delta_theta_cap=cfg.delta_theta_cap)
    figures = {
        "mean_ip_hist.png": lambda p: report.plot_mean_ip_histogram(
            p, mean_ip, thresholds=thresholds, modes=rep.mean_ip_modes),
        "overlap_hist.png": lambda p: report.plot_overlap_histogram(
            p, sim.overlap_norm, mixture=rep.overlap_mixture,
            threshold=thresholds.t_boundary),
        "rank_curve.png": lambda p: report.plot_rank_curve(p, table.scores),
        "class_map.png": lambda p: report.plot_class_map(p, cmap),
        "ipf_map.png": lambda p: report.plot_ipf_map(
            p, quats, table.width, table.height, dct.grid.group),
        "confidence_map.png": lambda p: report.plot_confidence_map(
            p, cones, table.width, table.height, cap=cfg.delta_theta_cap),
    }
    for name, render in figures.items():
        render(os.path.join(outdir, name))
    click.echo(f"wrote {csv_path} and {len(figures)} figures to {outdir}")


if __name__ == "__main__":
    main()
