import json

import numpy as np
import pytest

from ctxflux.cli import main
from ctxflux.evaluation import match_with_tolerance
from ctxflux.raster import read_binary_map, read_flux, write_binary_map, write_flux, write_gray
from ctxflux.synth import ShapeSpec, make_shape


def _run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def skeleton_file(tmp_path):
    _, skel = make_shape(ShapeSpec("polyline", 120, 90, points=((15, 20), (100, 30), (60, 75))))
    path = tmp_path / "skel.pgm"
    write_binary_map(skel, path)
    return path, skel


def test_gen_flux_round_trip(capsys, tmp_path, skeleton_file):
    src, skel = skeleton_file
    out = tmp_path / "f.flx"
    code, stdout, _ = _run(capsys, "gen-flux", src, out, "--r", 5)
    assert code == 0
    counts = json.loads(stdout)["regions"]
    assert counts["skeleton"] == skel.sum()
    assert sum(counts.values()) == skel.size
    flux = read_flux(out)
    assert flux.shape == (90, 120, 2)
    norm = np.hypot(flux[..., 0], flux[..., 1])
    assert np.allclose(norm[norm > 0], 1.0, atol=1e-6)
    assert np.count_nonzero(norm) == counts["context"]


def test_gen_flux_bad_radius_and_missing_file(capsys, tmp_path, skeleton_file):
    src, _ = skeleton_file
    code, _, err = _run(capsys, "gen-flux", src, tmp_path / "f.flx", "--r", 0)
    assert code == 2 and err
    code, out, err = _run(capsys, "gen-flux", tmp_path / "nope.pgm", tmp_path / "f.flx")
    assert code == 2 and "nope.pgm" in err and out == ""


def test_gen_flux_empty_skeleton(capsys, tmp_path):
    src = tmp_path / "empty.pgm"
    write_binary_map(np.zeros((10, 10), bool), src)
    code, _, err = _run(capsys, "gen-flux", src, tmp_path / "f.flx")
    assert code == 2 and "no skeleton pixels" in err


def test_recover_round_trip(capsys, tmp_path, skeleton_file):
    src, skel = skeleton_file
    flx, pgm = tmp_path / "f.flx", tmp_path / "rec.pgm"
    assert _run(capsys, "gen-flux", src, flx)[0] == 0
    code, stdout, _ = _run(capsys, "recover", flx, pgm)
    assert code == 0
    info = json.loads(stdout)
    recovered = read_binary_map(pgm)
    assert info["pixels"] == recovered.sum() and info["recover_ms"] >= 0
    assert match_with_tolerance(recovered, skel).f >= 0.9


def test_recover_zero_flux(capsys, tmp_path):
    flx, pgm = tmp_path / "z.flx", tmp_path / "z.pgm"
    write_flux(np.zeros((12, 16, 2)), flx)
    code, stdout, _ = _run(capsys, "recover", flx, pgm)
    assert code == 0 and json.loads(stdout)["pixels"] == 0
    assert not read_binary_map(pgm).any()


def test_recover_corrupt_flux(capsys, tmp_path):
    flx = tmp_path / "bad.flx"
    flx.write_bytes(b"FLX2" + bytes(16))
    code, _, err = _run(capsys, "recover", flx, tmp_path / "o.pgm")
    assert code == 2 and "bad magic" in err
    flx.write_bytes(b"FLX1" + (4).to_bytes(4, "little") * 2 + bytes(8) + bytes(10))
    code, _, err = _run(capsys, "recover", flx, tmp_path / "o.pgm")
    assert code == 2


def test_recover_bad_flags(capsys, tmp_path):
    flx = tmp_path / "z.flx"
    write_flux(np.zeros((4, 4, 2)), flx)
    assert _run(capsys, "recover", flx, tmp_path / "o.pgm", "--lambda", -1)[0] == 2
    assert _run(capsys, "recover", flx, tmp_path / "o.pgm", "--k1", "x")[0] == 2


def test_eval_identical_and_shifted(capsys, tmp_path):
    gt = np.zeros((200, 300), bool)
    gt[100, 40:260] = True
    pred = np.roll(gt, 1, axis=0)
    gt_path, pred_path = tmp_path / "gt.pgm", tmp_path / "pred.pgm"
    write_binary_map(gt, gt_path)
    write_binary_map(pred, pred_path)
    code, stdout, _ = _run(capsys, "eval", gt_path, gt_path)
    assert code == 0 and json.loads(stdout)["best"]["f"] == 1.0
    code, stdout, _ = _run(capsys, "eval", pred_path, gt_path)
    report = json.loads(stdout)
    assert code == 0 and report["best"]["f"] == 1.0
    assert report["tolerance_px"] == pytest.approx(0.0075 * np.hypot(300, 200))


def test_eval_empty_gt(capsys, tmp_path):
    gt_path = tmp_path / "gt.pgm"
    write_binary_map(np.zeros((8, 8), bool), gt_path)
    code, _, err = _run(capsys, "eval", gt_path, gt_path)
    assert code == 2 and "empty ground truth" in err


def test_eval_dimension_mismatch(capsys, tmp_path):
    a, b = tmp_path / "a.pgm", tmp_path / "b.pgm"
    write_binary_map(np.ones((8, 8), bool), a)
    write_binary_map(np.ones((8, 9), bool), b)
    code, _, err = _run(capsys, "eval", a, b)
    assert code == 2 and "dimension mismatch" in err


def test_eval_pr_from_flux_and_confidence(capsys, tmp_path, skeleton_file):
    src, skel = skeleton_file
    flx, rec = tmp_path / "f.flx", tmp_path / "rec.pgm"
    _run(capsys, "gen-flux", src, flx)
    _run(capsys, "recover", flx, rec)
    code, stdout, _ = _run(capsys, "eval", rec, src, "--flux", flx, "--thresholds", 9)
    report = json.loads(stdout)
    assert code == 0 and len(report["pr"]) == 9
    conf = tmp_path / "conf.pgm"
    write_gray(np.full(skel.shape, 255, np.uint8), conf)
    csv_out = tmp_path / "pr.csv"
    code, _, _ = _run(capsys, "eval", rec, src, "--confidence", conf, "--format", "csv", "--out", csv_out)
    lines = csv_out.read_text().splitlines()
    assert code == 0 and lines[0] == "threshold,precision,recall" and len(lines) == 100


def test_skeletonize(capsys, tmp_path):
    mask = np.zeros((40, 64), bool)
    mask[14:26, 12:52] = True
    src, out = tmp_path / "m.pgm", tmp_path / "s.pgm"
    write_binary_map(mask, src)
    code, stdout, _ = _run(capsys, "skeletonize", src, out)
    skel = read_binary_map(out)
    assert code == 0 and json.loads(stdout)["pixels"] == skel.sum() > 0
    assert np.all(skel <= mask)
    assert _run(capsys, "skeletonize", src, out, "--tau", 0.2)[0] == 2


def test_perturb_deterministic(capsys, tmp_path, skeleton_file):
    src, _ = skeleton_file
    flx = tmp_path / "f.flx"
    _run(capsys, "gen-flux", src, flx)
    a, b = tmp_path / "a.flx", tmp_path / "b.flx"
    args = ["--sigma", 0.2, "--angle-jitter", 10, "--patches", 3, "--seed", 11]
    assert _run(capsys, "perturb", flx, a, *args)[0] == 0
    assert _run(capsys, "perturb", flx, b, *args)[0] == 0
    assert a.read_bytes() == b.read_bytes()
    assert a.read_bytes() != flx.read_bytes()


def test_sweep_formats(capsys, tmp_path, skeleton_file):
    src, _ = skeleton_file
    code, stdout, _ = _run(capsys, "sweep", src, "--radii", "3,7")
    rows = json.loads(stdout)["sweep"]
    assert code == 0 and [r["r"] for r in rows] == [3, 7]
    out = tmp_path / "s.csv"
    code, _, _ = _run(capsys, "sweep", src, "--format", "csv", "--out", out)
    lines = out.read_text().splitlines()
    assert lines[0] == "r,f_measure" and len(lines) == 6
    assert _run(capsys, "sweep", src, "--radii", "")[0] == 2
    assert _run(capsys, "sweep", src, "--radii", "3,0")[0] == 2


def test_demo_defaults(capsys):
    code, stdout, _ = _run(capsys, "demo", "--repeat", 2)
    report = json.loads(stdout)
    assert code == 0
    assert (report["width"], report["height"]) == (300, 200)
    assert report["f"] >= 0.9
    assert len(report["recover_ms_runs"]) == 2


def test_demo_heavy_noise_still_reports(capsys):
    code, stdout, _ = _run(capsys, "demo", "--sigma", 2.0, "--repeat", 1)
    assert code == 0 and 0.0 <= json.loads(stdout)["f"] <= 1.0


def test_demo_errors(capsys):
    assert _run(capsys, "demo", "--shape", "spiral")[0] == 2
    assert _run(capsys, "demo", "--dims", "300by200")[0] == 2
    assert _run(capsys, "demo", "--dims", "8x8", "--shape", "line")[0] == 2


def test_demo_deterministic(capsys):
    a = json.loads(_run(capsys, "demo", "--sigma", 0.3, "--seed", 4, "--repeat", 1)[1])
    b = json.loads(_run(capsys, "demo", "--sigma", 0.3, "--seed", 4, "--repeat", 1)[1])
    for key in ("recover_ms", "recover_ms_runs"):
        a.pop(key), b.pop(key)
    assert a == b


def test_batch_directory_continues_past_bad_file(capsys, tmp_path, skeleton_file):
    _, skel = skeleton_file
    src_dir, out_dir = tmp_path / "in", tmp_path / "out"
    src_dir.mkdir()
    write_binary_map(skel, src_dir / "a.pgm")
    write_binary_map(np.rot90(skel), src_dir / "b.pgm")
    (src_dir / "c.pgm").write_bytes(b"P5 garbage")
    (src_dir / "notes.txt").write_text("ignored")
    code, stdout, _ = _run(capsys, "gen-flux", src_dir, out_dir, "--threads", 2)
    summary = json.loads(stdout)
    assert code == 2
    assert (summary["processed"], summary["succeeded"], summary["failed"]) == (3, 2, 1)
    assert [f["file"] for f in summary["files"]] == ["a.pgm", "b.pgm", "c.pgm"]
    assert [f["ok"] for f in summary["files"]] == [True, True, False]
    assert (out_dir / "a.flx").is_file() and (out_dir / "b.flx").is_file()
    assert not (out_dir / "c.flx").exists()


def test_batch_threads_from_env(capsys, tmp_path, skeleton_file, monkeypatch):
    _, skel = skeleton_file
    src_dir = tmp_path / "in"
    src_dir.mkdir()
    for i in range(3):
        write_binary_map(np.roll(skel, i, axis=1), src_dir / f"s{i}.pgm")
    monkeypatch.setenv("CTXFLUX_THREADS", "3")
    code, stdout, _ = _run(capsys, "gen-flux", src_dir, tmp_path / "out")
    assert code == 0 and json.loads(stdout)["succeeded"] == 3
    # a malformed value falls back to one thread with a warning
    monkeypatch.setenv("CTXFLUX_THREADS", "zero")
    assert _run(capsys, "gen-flux", src_dir, tmp_path / "out")[0] == 0


def test_no_command_is_usage_error(capsys):
    assert _run(capsys)[0] == 2
