"""Config round-trips, dotted-key overrides, validation, and hashing."""

import dataclasses

import pytest

from cgru.config import (RunConfig, apply_overrides, config_hash, load_config,
                         parse_config, render_config, save_config, validate)
from cgru.errors import ConfigError


def test_defaults_are_valid():
    cfg = RunConfig()
    assert validate(cfg) is cfg
    assert cfg.diffusion.T == 50
    assert cfg.data.n_classes == 8
    assert cfg.reward.target_class == 0


def test_render_parse_roundtrip():
    cfg = apply_overrides(RunConfig(), ["policy.lr=0.0003", "seed=9",
                                        "reward.kind=mode_distance",
                                        "eval.use_penultimate_features=true"])
    text = render_config(cfg)
    back = parse_config(text)
    assert back == cfg
    # rendering is stable
    assert render_config(back) == text


def test_parse_skips_blanks_and_comments():
    cfg = parse_config("# a comment\n\nseed = 4\n  # another\npolicy.lr = 1e-4\n")
    assert cfg.seed == 4
    assert cfg.policy.lr == 1e-4


def test_override_type_conversions():
    cfg = apply_overrides(RunConfig(), [
        "policy.iterations=7",
        "policy.lr=2.5e-4",
        "eval.use_penultimate_features=true",
        "reward.kind=mode_distance",
        "out_dir=/somewhere/else",
    ])
    assert cfg.policy.iterations == 7
    assert isinstance(cfg.policy.iterations, int)
    assert cfg.policy.lr == 2.5e-4
    assert cfg.eval.use_penultimate_features is True
    assert cfg.reward.kind == "mode_distance"
    assert cfg.out_dir == "/somewhere/else"
    # original untouched (dataclass replace semantics)
    assert RunConfig().policy.iterations == 50


def test_override_rejects_unknown_key():
    with pytest.raises(ConfigError, match="unknown config key"):
        apply_overrides(RunConfig(), ["policy.does_not_exist=1"])
    with pytest.raises(ConfigError, match="unknown config key"):
        apply_overrides(RunConfig(), ["bogus_section.lr=1"])


def test_override_rejects_bad_value_naming_key():
    with pytest.raises(ConfigError, match="policy.iterations"):
        apply_overrides(RunConfig(), ["policy.iterations=banana"])
    with pytest.raises(ConfigError, match="policy.lr"):
        apply_overrides(RunConfig(), ["policy.lr=fast"])
    with pytest.raises(ConfigError, match="use_penultimate_features"):
        apply_overrides(RunConfig(), ["eval.use_penultimate_features=probably"])
    with pytest.raises(ConfigError, match="="):
        apply_overrides(RunConfig(), ["policy.iterations"])


def test_validate_catches_bad_ranges():
    bad = [
        ["diffusion.T=0"],
        ["diffusion.beta_start=0.0"],
        ["diffusion.beta_end=1.5"],
        ["diffusion.discount=0.9"],
        ["reward.target_class=8"],
        ["reward.forget_fraction=1.5"],
        ["reward.kind=mode_distance", "reward.scale=-1"],
        ["data.holdout=8000"],
        ["policy.lr=0"],
        ["policy.lr_decay_frac=0"],
        ["pretrain.target_acc=0"],
        ["eps_net.t_embed_dim=7"],
    ]
    for overrides in bad:
        with pytest.raises(ConfigError):
            validate(apply_overrides(RunConfig(), overrides))


def test_save_load_roundtrip(tmp_path):
    cfg = apply_overrides(RunConfig(), ["seed=11", "policy.n_traj=4"])
    path = tmp_path / "run.cfg"
    save_config(path, cfg)
    loaded = load_config(path)
    assert loaded == cfg
    tweaked = load_config(path, overrides=["seed=12"])
    assert tweaked.seed == 12
    assert tweaked == dataclasses.replace(cfg, seed=12)


def test_load_config_validates(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("diffusion.discount = 0.5\n")
    with pytest.raises(ConfigError):
        load_config(path)


def test_config_hash_ignores_out_dir_only():
    base = RunConfig()
    assert config_hash(base) == config_hash(
        apply_overrides(base, ["out_dir=/tmp/elsewhere"]))
    assert len(config_hash(base)) == 64
    assert int(config_hash(base), 16) >= 0
    for override in ("seed=1", "policy.lr=1e-5", "reward.target_class=3"):
        assert config_hash(apply_overrides(base, [override])) != config_hash(base)
