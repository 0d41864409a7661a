import json

import numpy as np
import pytest

from kitti_fixture import write_sequence
from fovmap.cli import main
from fovmap.mapio import import_map


def test_presets_listing(capsys):
    assert main(["presets"]) == 0
    out = capsys.readouterr().out
    assert "E0:" in out and "E11:" in out
    assert "icp.variant=standard" in out


def test_synth_run_with_export_and_report(tmp_path, capsys):
    export = tmp_path / "map.ply"
    report = tmp_path / "metrics.txt"
    rc = main(
        [
            "synth",
            "--scene",
            "corridor",
            "--frames",
            "2",
            "--icp-variant",
            "standard",
            "--upsample-rate",
            "0",
            "--export",
            str(export),
            "--report",
            str(report),
        ]
    )
    assert rc == 0
    out = capsys.readouterr().out
    assert "map points:" in out
    assert "mu_me_m" in out
    assert export.exists()
    assert report.exists()
    payload = json.loads((tmp_path / "metrics.txt.jsonl").read_text().splitlines()[0])
    assert payload["n_scans"] == 2


def test_run_on_kitti_fixture(tmp_path, capsys):
    seq = tmp_path / "seq"
    seq.mkdir()
    write_sequence(seq, n_frames=2)
    rc = main(
        [
            "run",
            str(seq),
            "--icp-variant",
            "standard",
            "--set",
            "icp.max_corr_dist_m=3.0",
            "--set",
            "foveal.h_half_angle_deg=20.0",
            "--set",
            "foveal.v_half_angle_deg=20.0",
        ]
    )
    assert rc == 0
    assert "frames processed: 2" in capsys.readouterr().out


def test_run_missing_dataset_fails(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["run", str(tmp_path / "missing")])
    assert exc.value.code == 1
    assert "error (404)" in capsys.readouterr().err


def test_export_conversion(tmp_path, capsys):
    export = tmp_path / "map.ply"
    main(["synth", "--frames", "1", "--icp-variant", "standard", "--export", str(export)])
    out = tmp_path / "map.xyz"
    rc = main(["export", str(export), str(out), "--format", "xyzrgb"])
    assert rc == 0
    a = import_map(export)
    b = import_map(out)
    np.testing.assert_array_equal(a[0], b[0])


def test_eval_against_synthetic(tmp_path, capsys):
    export = tmp_path / "map.ply"
    main(
        [
            "synth",
            "--scene",
            "corridor",
            "--frames",
            "2",
            "--icp-variant",
            "standard",
            "--export",
            str(export),
        ]
    )
    capsys.readouterr()
    rc = main(["eval", str(export), "--scene", "corridor", "--frames", "2"])
    assert rc == 0
    assert "mu_me_m" in capsys.readouterr().out


def test_config_file_plus_overrides(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"icp.variant": "standard", "upsample.rate": 3}))
    rc = main(
        ["synth", "--frames", "1", "--config", str(cfg), "--upsample-rate", "0"]
    )
    assert rc == 0


def test_bad_set_syntax(tmp_path):
    with pytest.raises(SystemExit):
        main(["synth", "--frames", "1", "--set", "novalue"])
