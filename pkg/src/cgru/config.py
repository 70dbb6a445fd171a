"""Run configuration for the full pipeline.

A RunConfig is a tree of small dataclasses, one per phase. On disk it is a
flat text file of dotted keys ("policy.iterations = 50"), which is also the
syntax the CLI's --set overrides use. config_hash() gives a content hash
that is stable under reordering of lines in the file and ignores the output
directory, so two runs of the same experiment in different places share a
run id.
"""

from __future__ import annotations

import dataclasses
import hashlib
import typing
from dataclasses import dataclass, field

from .errors import ConfigError
from .policy_grad import EstimatorConfig


@dataclass
class DataConfig:
    n_samples: int = 8000
    n_classes: int = 8
    radius: float = 4.0
    stddev: float = 0.3
    holdout: int = 1000


@dataclass
class DiffusionConfig:
    T: int = 50
    beta_start: float = 1e-4
    beta_end: float = 0.02
    # terminal-reward MDP: any other value would silently change nothing,
    # so we validate it instead of threading it through the estimators
    discount: float = 1.0


@dataclass
class EpsNetConfig:
    hidden: int = 128
    t_embed_dim: int = 32


@dataclass
class ClassifierConfig:
    hidden: int = 64
    steps: int = 3000
    batch_size: int = 128
    lr: float = 1e-3
    target_acc: float = 0.95


@dataclass
class PretrainConfig:
    max_steps: int = 4000
    eval_every: int = 500
    batch_size: int = 128
    lr: float = 1e-3
    target_acc: float = 0.9
    eval_per_class: int = 100


@dataclass
class RewardConfig:
    kind: str = "classifier_complement"
    target_class: int = 0
    scale: float = 10.0
    forget_fraction: float = 0.5


@dataclass
class CriticConfig:
    hidden: int = 64
    t_embed_dim: int = 32
    n_traj: int = 1024
    epochs: int = 8
    batch_size: int = 256
    lr: float = 3e-3


@dataclass
class PolicyConfig:
    iterations: int = 50
    n_traj: int = 16
    grad_accum: int = 2
    inner_epochs: int = 1
    lr: float = 3e-5
    # linear decay to lr*lr_end_frac over the first lr_decay_frac of the run;
    # freezing the step size once unlearning has converged is what keeps the
    # retain classes intact through the full budget
    lr_end_frac: float = 0.1
    lr_decay_frac: float = 0.7
    # periodic critic re-fit on trajectories from the current policy; 0 turns
    # it off and keeps the phase-2 critic fixed throughout
    refresh_every: int = 3
    refresh_traj: int = 256
    refresh_epochs: int = 4
    eval_forget: int = 100
    eval_per_class: int = 20


@dataclass
class EvalConfig:
    forget_samples: int = 200
    retain_per_class: int = 100
    use_penultimate_features: bool = False


@dataclass
class RunConfig:
    seed: int = 0
    out_dir: str = "runs/default"
    data: DataConfig = field(default_factory=DataConfig)
    diffusion: DiffusionConfig = field(default_factory=DiffusionConfig)
    eps_net: EpsNetConfig = field(default_factory=EpsNetConfig)
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    pretrain: PretrainConfig = field(default_factory=PretrainConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    critic: CriticConfig = field(default_factory=CriticConfig)
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)


_COUNT_FIELDS = {
    "data.n_samples", "data.n_classes", "data.holdout",
    "diffusion.T",
    "eps_net.hidden", "eps_net.t_embed_dim",
    "classifier.hidden", "classifier.steps", "classifier.batch_size",
    "pretrain.max_steps", "pretrain.eval_every", "pretrain.batch_size",
    "pretrain.eval_per_class",
    "critic.hidden", "critic.t_embed_dim", "critic.n_traj", "critic.epochs",
    "critic.batch_size",
    "policy.n_traj", "policy.grad_accum", "policy.inner_epochs",
    "policy.refresh_traj", "policy.refresh_epochs", "policy.eval_forget",
    "policy.eval_per_class",
    "eval.forget_samples", "eval.retain_per_class",
}


def validate(cfg: RunConfig) -> RunConfig:
    flat = dict(_walk(cfg))
    for key in _COUNT_FIELDS:
        if flat[key] < 1:
            raise ConfigError(f"{key} must be >= 1, got {flat[key]}")
    if cfg.policy.iterations < 0:
        raise ConfigError("policy.iterations must be >= 0")
    if not 0 < cfg.diffusion.beta_start <= cfg.diffusion.beta_end < 1:
        raise ConfigError("need 0 < diffusion.beta_start <= beta_end < 1")
    if cfg.diffusion.discount != 1.0:
        raise ConfigError("diffusion.discount is fixed to 1 (terminal reward)")
    if not 0 <= cfg.reward.target_class < cfg.data.n_classes:
        raise ConfigError(
            f"reward.target_class {cfg.reward.target_class} out of range "
            f"for {cfg.data.n_classes} classes")
    if cfg.reward.kind not in ("classifier_complement", "mode_distance"):
        raise ConfigError(f"unknown reward.kind {cfg.reward.kind!r}")
    if cfg.reward.scale <= 0:
        raise ConfigError("reward.scale must be > 0")
    if not 0.0 <= cfg.reward.forget_fraction <= 1.0:
        raise ConfigError("reward.forget_fraction must lie in [0, 1]")
    if cfg.data.holdout >= cfg.data.n_samples:
        raise ConfigError("data.holdout must be smaller than data.n_samples")
    if cfg.eps_net.t_embed_dim % 2 or cfg.critic.t_embed_dim % 2:
        raise ConfigError("timestep embedding dims must be even")
    if not 0.0 < cfg.policy.lr_decay_frac <= 1.0:
        raise ConfigError("policy.lr_decay_frac must lie in (0, 1]")
    if not 0.0 < cfg.policy.lr_end_frac <= 1.0:
        raise ConfigError("policy.lr_end_frac must lie in (0, 1]")
    if cfg.policy.refresh_every < 0:
        raise ConfigError("policy.refresh_every must be >= 0")
    for key in ("classifier.lr", "pretrain.lr", "critic.lr", "policy.lr"):
        if flat[key] <= 0:
            raise ConfigError(f"{key} must be > 0")
    if not 0.0 < cfg.pretrain.target_acc <= 1.0:
        raise ConfigError("pretrain.target_acc must lie in (0, 1]")
    if not 0.0 < cfg.classifier.target_acc <= 1.0:
        raise ConfigError("classifier.target_acc must lie in (0, 1]")
    return cfg


def _section_types() -> dict:
    return {f.name: f for f in dataclasses.fields(RunConfig)}


def _walk(cfg: RunConfig):
    """Yield (dotted_key, value) for every leaf field."""
    for f in dataclasses.fields(cfg):
        val = getattr(cfg, f.name)
        if dataclasses.is_dataclass(val):
            for sub in dataclasses.fields(val):
                yield f"{f.name}.{sub.name}", getattr(val, sub.name)
        else:
            yield f.name, val


def _render_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse_value(text: str, typ: type, key: str):
    text = text.strip()
    try:
        if typ is bool:
            if text.lower() in ("true", "1", "yes"):
                return True
            if text.lower() in ("false", "0", "no"):
                return False
            raise ValueError(text)
        if typ is int:
            return int(text)
        if typ is float:
            return float(text)
        if typ is str:
            return text
    except ValueError:
        raise ConfigError(f"cannot parse {text!r} as {typ.__name__} for key {key}")
    raise ConfigError(f"unsupported field type {typ} for key {key}")


def _leaf_type(key: str) -> type:
    """Resolve the annotated type of a dotted key, or raise ConfigError."""
    parts = key.split(".")
    hints = typing.get_type_hints(RunConfig)
    if parts[0] not in hints:
        raise ConfigError(f"unknown config key {key!r}")
    if len(parts) == 1:
        typ = hints[parts[0]]
        if dataclasses.is_dataclass(typ):
            raise ConfigError(f"{key!r} is a section, not a value")
        return typ
    if len(parts) != 2:
        raise ConfigError(f"unknown config key {key!r}")
    section = hints[parts[0]]
    if not dataclasses.is_dataclass(section):
        raise ConfigError(f"unknown config key {key!r}")
    sub_hints = typing.get_type_hints(section)
    if parts[1] not in sub_hints:
        raise ConfigError(f"unknown config key {key!r}")
    return sub_hints[parts[1]]


def _set_key(cfg: RunConfig, key: str, raw: str) -> RunConfig:
    typ = _leaf_type(key)
    value = _parse_value(raw, typ, key)
    parts = key.split(".")
    if len(parts) == 1:
        return dataclasses.replace(cfg, **{key: value})
    section = getattr(cfg, parts[0])
    new_section = dataclasses.replace(section, **{parts[1]: value})
    return dataclasses.replace(cfg, **{parts[0]: new_section})


def apply_overrides(cfg: RunConfig, overrides) -> RunConfig:
    """Apply "dotted.key=value" strings in order; returns a new RunConfig."""
    for ov in overrides:
        if "=" not in ov:
            raise ConfigError(f"override {ov!r} is not of the form key=value")
        key, _, raw = ov.partition("=")
        cfg = _set_key(cfg, key.strip(), raw)
    return cfg


def render_config(cfg: RunConfig) -> str:
    """File-format rendering, grouped by section in declaration order."""
    lines = []
    prev_section = None
    for key, val in _walk(cfg):
        section = key.split(".")[0] if "." in key else None
        if section != prev_section and lines:
            lines.append("")
        prev_section = section
        lines.append(f"{key} = {_render_value(val)}")
    return "\n".join(lines) + "\n"


def parse_config(text: str, base: RunConfig | None = None) -> RunConfig:
    cfg = base if base is not None else RunConfig()
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, raw = stripped.partition("=")
        cfg = _set_key(cfg, key.strip(), raw)
    return cfg


def load_config(path: str, overrides=()) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        cfg = parse_config(fh.read())
    cfg = apply_overrides(cfg, overrides)
    return validate(cfg)


def save_config(path: str, cfg: RunConfig) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(render_config(cfg))


def config_hash(cfg: RunConfig) -> str:
    """sha256 over the sorted leaf assignments, excluding out_dir.

    Sorting makes the hash independent of file layout; excluding out_dir
    makes it a hash of the experiment rather than of where it ran.
    """
    lines = sorted(f"{k} = {_render_value(v)}" for k, v in _walk(cfg)
                   if k != "out_dir")
    return hashlib.sha256("\n".join(lines).encode("utf-8")).hexdigest()
