import json
import math

import pytest

from fovmap.config import (
    PipelineConfig,
    config_from_flat,
    get_preset,
    load_config_file,
    parse_variant,
    preset_names,
)
from fovmap.registration import IcpVariant


def test_defaults_round_trip():
    cfg = PipelineConfig()
    back = config_from_flat(cfg.to_flat())
    assert back.to_flat() == cfg.to_flat()


def test_unknown_key_rejected():
    with pytest.raises(ValueError, match="unknown config keys"):
        config_from_flat({"upsampler.rate": 1})


def test_partial_override():
    cfg = config_from_flat({"upsample.rate": 2, "icp.variant": "p2p"})
    assert cfg.upsample_registration.rate == 2
    assert cfg.upsample_registration.constrained
    assert not cfg.upsample_texture.constrained
    assert cfg.icp.variant is IcpVariant.POINT_TO_PLANE
    assert cfg.ground_z_threshold == -1.55


def test_variant_aliases():
    assert parse_variant("GEN-ICP") is IcpVariant.GENERALIZED
    assert parse_variant("std") is IcpVariant.STANDARD
    assert parse_variant("point_to_plane") is IcpVariant.POINT_TO_PLANE
    with pytest.raises(ValueError):
        parse_variant("super-icp")


def test_angles_are_degrees_in_flat_keys():
    cfg = config_from_flat({"foveal.h_half_angle_deg": 10.0})
    assert cfg.foveal.horizontal_slice_half_angle == pytest.approx(math.radians(10.0))


def test_invalid_values_propagate():
    with pytest.raises(ValueError):
        config_from_flat({"rayfilter.window_M": 4})  # must be odd
    with pytest.raises(ValueError):
        config_from_flat({"foveal.near_m": 20.0})  # near >= far


def test_preset_grid():
    names = preset_names()
    assert names == [f"E{i}" for i in range(12)]
    variants = {
        "E0": IcpVariant.GENERALIZED,
        "E4": IcpVariant.STANDARD,
        "E8": IcpVariant.POINT_TO_PLANE,
    }
    for name, variant in variants.items():
        assert get_preset(name).icp.variant is variant
    for i in range(12):
        cfg = get_preset(f"E{i}")
        assert cfg.upsample_registration.rate == i % 4
        assert cfg.upsample_texture.rate == i % 4
        assert cfg.experiment_label == f"E{i}"
        # zone defaults
        assert cfg.foveal.near_blind_radius == 3.0
        assert cfg.foveal.white_zone_outer_radius == 15.0


def test_unknown_preset():
    with pytest.raises(ValueError, match="E0..E11"):
        get_preset("E12")


def test_preset_used_as_base():
    cfg = config_from_flat({"rayfilter.c": 0.5}, base=get_preset("E6"))
    assert cfg.icp.variant is IcpVariant.STANDARD
    assert cfg.upsample_registration.rate == 2
    assert cfg.rayfilter.outlier_rate == 0.5


def test_load_config_file(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"upsample.rate": 3, "rayfilter.enabled": False}))
    cfg = load_config_file(str(path))
    assert cfg.upsample_registration.rate == 3
    assert not cfg.rayfilter_enabled

    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps([1, 2, 3]))
    with pytest.raises(ValueError, match="JSON object"):
        load_config_file(str(bad))
