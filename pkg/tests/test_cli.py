import numpy as np
import pytest
from click.testing import CliRunner

from ebsdict.cli import main


@pytest.fixture(scope="module")
def runner():
    return CliRunner()


@pytest.fixture(scope="module")
def workdir(tmp_path_factory, runner):
    """Small end-to-end pipeline artifacts shared by the CLI tests."""
    d = tmp_path_factory.mktemp("cli")
    (d / "det.cfg").write_text("rows = 30\ncols = 40\n")
    args = {
        "dict": ["build-dict", "-N", "10", "--detector-config",
                 str(d / "det.cfg"), "-o", str(d / "dict.ebsd")],
        "synth": ["synth", "--width", "12", "--height", "12", "--grains", "4",
                  "--seed", "1", "--detector-config", str(d / "det.cfg"),
                  "-o", str(d / "scan.ebsp"), "--truth", str(d / "truth.csv")],
        "match": ["match", str(d / "dict.ebsd"), str(d / "scan.ebsp"),
                  "-k", "40", "-o", str(d / "knn.npz")],
    }
    for key in ("dict", "synth", "match"):
        res = runner.invoke(main, args[key], catch_exceptions=False)
        assert res.exit_code == 0, res.output
    return d


def test_build_dict_count_only(runner):
    res = runner.invoke(main, ["build-dict", "--count-only", "-N", "6"])
    assert res.exit_code == 0
    assert "71 orientations" in res.output


def test_match_reports_grid(workdir):
    data = np.load(workdir / "knn.npz")
    assert data["indices"].shape == (144, 40)
    assert int(data["k"]) == 40


def test_match_worker_invariance(runner, workdir):
    out2 = workdir / "knn2.npz"
    res = runner.invoke(main, ["match", str(workdir / "dict.ebsd"),
                               str(workdir / "scan.ebsp"), "-k", "40",
                               "--workers", "4", "-o", str(out2)])
    assert res.exit_code == 0, res.output
    assert out2.read_bytes() == (workdir / "knn.npz").read_bytes()


def test_classify_writes_csv_and_png(runner, workdir):
    res = runner.invoke(main, ["classify", str(workdir / "knn.npz"),
                               "-o", str(workdir / "classes.csv")])
    assert res.exit_code == 0, res.output
    assert "thresholds:" in res.output
    assert (workdir / "classes.csv").exists()
    assert (workdir / "classes.png").exists()


def test_classify_with_paper_style_overrides(runner, workdir):
    res = runner.invoke(main, ["classify", str(workdir / "knn.npz"),
                               "--t-anomaly", "0.98", "--t-subclass", "0.9",
                               "--t-boundary", "0.8",
                               "-o", str(workdir / "classes2.csv")])
    assert res.exit_code == 0, res.output
    assert "anomaly=0.980000" in res.output


def test_index_writes_csv_and_maps(runner, workdir):
    res = runner.invoke(main, ["index", str(workdir / "knn.npz"),
                               str(workdir / "dict.ebsd"),
                               "-o", str(workdir / "orient.csv")])
    assert res.exit_code == 0, res.output
    assert (workdir / "orient.csv").exists()
    assert (workdir / "orient_ipf.png").exists()
    assert (workdir / "orient_confidence.png").exists()
    header = (workdir / "orient.csv").read_text().splitlines()[0]
    assert header == "x,y,phi1,Phi,phi2,qw,qx,qy,qz,kappa,delta_theta_deg,class"


def test_report_renders_figures(runner, workdir):
    outdir = workdir / "report"
    res = runner.invoke(main, ["report", str(workdir / "knn.npz"),
                               str(workdir / "dict.ebsd"), "-o", str(outdir)])
    assert res.exit_code == 0, res.output
    for name in ("orientations.csv", "mean_ip_hist.png", "overlap_hist.png",
                 "rank_curve.png", "class_map.png", "ipf_map.png",
                 "confidence_map.png"):
        assert (outdir / name).exists(), name


def test_pipeline_reproducible_from_seed(runner, workdir, tmp_path):
    # re-running synth and match from the same seed gives identical bytes
    scan2 = tmp_path / "scan2.ebsp"
    res = runner.invoke(main, ["synth", "--width", "12", "--height", "12",
                               "--grains", "4", "--seed", "1",
                               "--detector-config", str(workdir / "det.cfg"),
                               "-o", str(scan2)])
    assert res.exit_code == 0
    assert scan2.read_bytes() == (workdir / "scan.ebsp").read_bytes()


def test_config_file_sets_defaults(runner, workdir, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("k_classifier = 10\nworkers = 2\n")
    out = tmp_path / "knn10.npz"
    res = runner.invoke(main, ["match", str(workdir / "dict.ebsd"),
                               str(workdir / "scan.ebsp"),
                               "--config", str(cfg), "-o", str(out)])
    assert res.exit_code == 0, res.output
    assert np.load(out)["indices"].shape == (144, 10)


def test_exit_code_config_error(runner, workdir, tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("k_ml = 0\n")
    res = runner.invoke(main, ["match", str(workdir / "dict.ebsd"),
                               str(workdir / "scan.ebsp"),
                               "--config", str(cfg), "-o", str(tmp_path / "x.npz")])
    assert res.exit_code == 2
    cfg.write_text("no_such_key = 1\n")
    res = runner.invoke(main, ["index", str(workdir / "knn.npz"),
                               str(workdir / "dict.ebsd"),
                               "--config", str(cfg), "-o", str(tmp_path / "y.csv")])
    assert res.exit_code == 2


def test_exit_code_io_error(runner, workdir, tmp_path):
    bogus = tmp_path / "bogus.ebsd"
    bogus.write_bytes(b"JUNKJUNKJUNK")
    res = runner.invoke(main, ["match", str(bogus), str(workdir / "scan.ebsp"),
                               "-o", str(tmp_path / "x.npz")])
    assert res.exit_code == 3
    assert "error:" in res.output


def test_exit_code_numerical_error(runner, tmp_path, workdir):
    # patterns equal to the dictionary's principal component have no
    # residual after compensation
    from ebsdict import containers, dictionary
    from ebsdict.matching import SampleMap
    comp = dictionary.compensate(containers.read_dictionary(workdir / "dict.ebsd"))
    flat = SampleMap(width=2, height=2, pattern_shape=(30, 40),
                     patterns=np.tile(comp.principal.astype(np.float32), (4, 1)))
    path = tmp_path / "flat.ebsp"
    containers.write_sample_map(path, flat)
    res = CliRunner().invoke(main, ["match", str(workdir / "dict.ebsd"),
                                    str(path), "-o", str(tmp_path / "x.npz")])
    assert res.exit_code == 4


def test_shape_mismatch_names_both_shapes(runner, workdir, tmp_path):
    from ebsdict import containers, synth, forward
    other, _ = synth.synthesize_sample(width=4, height=4, n_grains=2, seed=0,
                                       det=forward.DetectorGeometry(rows=16,
                                                                    cols=16))
    path = tmp_path / "other.ebsp"
    containers.write_sample_map(path, other)
    res = runner.invoke(main, ["match", str(workdir / "dict.ebsd"), str(path),
                               "-o", str(tmp_path / "x.npz")])
    assert res.exit_code == 2
    assert "(16, 16)" in res.output and "(30, 40)" in res.output
