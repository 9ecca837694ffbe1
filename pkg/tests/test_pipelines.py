import logging
import math

import numpy as np
import pytest

from mpcc.errors import BadArgs, BadImage, BasisMissing, DatasetMissing, DimensionMismatch, ParseError
from mpcc.keyschedule import MasterKey
from mpcc.pipelines.config import read_config
from mpcc.pipelines.image import (ImageConfig, ImageJob, assemble, bundled_image, image_blocks,
                                  run_image, run_image_rate, sensitive_blocks, synthetic_scene,
                                  train_klt)
from mpcc.pipelines.imageio import read_pgm, stretch, write_pgm
from mpcc.pipelines.meter import (SmartMeterConfig, ingest_meter_csv, run_smartmeter,
                                  synthetic_meter_frames)
from mpcc.pipelines.metrics import PSNR_CAP, capped, psnr, psnr_from_mse
from mpcc.recovery import SolverOptions

KEY = MasterKey(bytes(range(32)))


def test_psnr_closed_forms():
    a = np.zeros((4, 4))
    assert psnr(a, a) == math.inf and capped(psnr(a, a)) == PSNR_CAP
    assert psnr(a, a + 1) == pytest.approx(48.1308036, abs=1e-6)
    assert psnr(a, a + 255) == pytest.approx(0.0, abs=1e-12)
    assert psnr_from_mse(1.0) == pytest.approx(20 * math.log10(255))
    with pytest.raises(DimensionMismatch):
        psnr(a, np.zeros((4, 5)))


def test_pgm_round_trip(tmp_path, rng):
    img = rng.integers(0, 256, (5, 7)).astype(float)
    write_pgm(tmp_path / "a.pgm", img)
    assert np.array_equal(read_pgm(tmp_path / "a.pgm"), img)
    assert (tmp_path / "a.pgm").read_bytes().startswith(b"P5\n7 5\n255\n")
    (tmp_path / "bad.pgm").write_bytes(b"P2\n1 1\n255\n0")
    with pytest.raises(BadImage):
        read_pgm(tmp_path / "bad.pgm")


def test_stretch_range():
    out = stretch(np.array([[-3.0, 0.0], [1.0, 5.0]]))
    assert out.min() == 0 and out.max() == 255


def test_bundled_images_match_generator():
    assert np.array_equal(bundled_image(), synthetic_scene(texture_seed=11))
    assert np.array_equal(bundled_image("train_scene.pgm"), synthetic_scene(texture_seed=12))


def test_blocks_and_assembly(rng):
    img = rng.integers(0, 256, (64, 96)).astype(float)
    blocks = image_blocks(img, 32)
    assert blocks.shape == (6, 1024)
    assert np.array_equal(blocks[4], img[32:64, 32:64].reshape(-1))
    assert np.array_equal(assemble(blocks, img.shape, 32), img)
    with pytest.raises(BadImage):
        image_blocks(img[:50], 32)


def test_sensitive_blocks():
    assert sensitive_blocks((128, 128), [(32, 32, 64, 64)], 32) == [5]
    assert sensitive_blocks((128, 128), [(30, 30, 34, 34)], 32) == [0, 1, 4, 5]
    with pytest.raises(BadArgs):
        sensitive_blocks((128, 128), [(0, 0, 200, 10)], 32)


def test_image_job_checks(rng):
    img = rng.integers(0, 256, (32, 32)).astype(float)
    with pytest.raises(BasisMissing):
        ImageJob(img, None, [])
    with pytest.raises(BadImage):
        ImageJob(img[:20], None, [])


def _small_job():
    img = synthetic_scene(64)
    train = synthetic_scene(64, texture_seed=12)
    basis = train_klt(train, 8, 4)
    return ImageJob(img, basis, sensitive_blocks(img.shape, [(16, 16, 40, 40)], 8), 8)


def test_full_rate_reconstructs_exactly():
    job = _small_job()
    out = run_image_rate(job, ImageConfig(KEY), 1.0)
    assert out.super_complete > 90
    assert out.semi_sensitive < 20


def test_small_image_run_writes_artifacts(tmp_path):
    job = _small_job()
    cfg = ImageConfig(KEY, rates=(0.4, 0.7), out_dir=tmp_path / "out")
    outs, report = run_image(job, cfg)
    assert outs[1].super_complete > outs[0].super_complete
    assert (tmp_path / "out" / "psnr.csv").read_text().count("\n") == 3
    assert (tmp_path / "out" / "super_0.70.pgm").exists()
    assert "semi_sens" in report.as_table()


def test_meter_csv_ingest(tmp_path, caplog):
    header = "timestamp," + ",".join(f"apt{j}" for j in range(72))
    rows = [f"2016-01-0{r + 1} 00:00," + ",".join(str(0.1 * (j + r)) for j in range(72))
            for r in range(4)]
    rows[2] = rows[2].replace(",0.5,", ",NA,", 1)
    (tmp_path / "m.csv").write_text("\n".join([header] + rows) + "\n")
    with caplog.at_level(logging.WARNING):
        frames = ingest_meter_csv(tmp_path / "m.csv")
    assert len(frames) == 4
    assert all(np.count_nonzero(f.readings) <= 70 for f in frames)
    assert frames[1].readings[3] == pytest.approx(0.4)
    assert "missing value" in caplog.text


def test_meter_csv_parse_error(tmp_path):
    (tmp_path / "m.csv").write_text("1.0,2.0\n3.0,abc\n")
    with pytest.raises(ParseError) as info:
        ingest_meter_csv(tmp_path / "m.csv")
    assert (info.value.row, info.value.column) == (2, 2)
    with pytest.raises(DatasetMissing):
        ingest_meter_csv(tmp_path / "nope.csv")


def test_synthetic_frames_reproducible():
    a = synthetic_meter_frames(5)
    b = synthetic_meter_frames(5)
    assert all(np.array_equal(x.readings, y.readings) for x, y in zip(a, b))
    assert np.count_nonzero(a[0].readings) == 70
    assert np.all(a[0].readings[:70] > 0)


def test_smartmeter_run_is_reproducible(tmp_path):
    frames = synthetic_meter_frames(4, n=128, apartments=12)
    outs = []
    for tag in ("a", "b"):
        cfg = SmartMeterConfig(KEY, frames, m=64, n=128, out_dir=tmp_path / tag, plots=True)
        res = run_smartmeter(cfg)
        assert res.not_converged == 0
        assert all(o.relative_error < 1e-6 for o in res.outcomes)
        outs.append((tmp_path / tag / "meter_stats.csv").read_bytes())
    assert outs[0] == outs[1]
    assert (tmp_path / "a" / "meter_frame0.pgm").exists()


def test_config_file(tmp_path):
    (tmp_path / "c.conf").write_text("# comment\nrate = 0.3\nphi-seed=4\n\n")
    assert read_config(tmp_path / "c.conf") == {"rate": "0.3", "phi_seed": "4"}
    (tmp_path / "bad.conf").write_text("novalue\n")
    with pytest.raises(ParseError):
        read_config(tmp_path / "bad.conf")


def test_empty_frames_rejected():
    with pytest.raises(DatasetMissing):
        run_smartmeter(SmartMeterConfig(KEY, []))


def test_solver_option_override_propagates(tmp_path):
    frames = synthetic_meter_frames(2, n=64, apartments=6)
    res = run_smartmeter(SmartMeterConfig(KEY, frames, m=32, n=64,
                                          solver=SolverOptions(max_iters=4000)))
    assert res.not_converged == 0
