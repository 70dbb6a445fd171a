import pytest

from cgru import pipeline
from cgru.config import RunConfig, apply_overrides

# Small budgets that still exercise every phase: the classifier separates
# the (well-spread) modes easily, the pretrain gate is set low enough to
# pass within budget, and the policy loop runs long enough to hit the
# critic-refresh branch.
TINY_OVERRIDES = [
    "data.n_samples=600", "data.holdout=100",
    "classifier.steps=400", "classifier.target_acc=0.8",
    "pretrain.max_steps=400", "pretrain.eval_every=200",
    "pretrain.target_acc=0.05", "pretrain.eval_per_class=20",
    "critic.n_traj=32", "critic.epochs=2",
    "policy.iterations=3", "policy.n_traj=8", "policy.refresh_every=2",
    "policy.refresh_traj=16", "policy.refresh_epochs=1",
    "policy.eval_forget=20", "policy.eval_per_class=5",
    "eval.forget_samples=40", "eval.retain_per_class=10",
]


def tiny_config(out_dir, extra=()):
    cfg = apply_overrides(RunConfig(), TINY_OVERRIDES + list(extra))
    return apply_overrides(cfg, [f"out_dir={out_dir}"])


@pytest.fixture
def tiny_cfg(tmp_path):
    return tiny_config(tmp_path / "run")


@pytest.fixture(scope="session")
def tiny_run(tmp_path_factory):
    """One completed tiny-budget pipeline run, shared read-mostly."""
    out = tmp_path_factory.mktemp("tiny_run")
    cfg = tiny_config(out)
    manifest = pipeline.run_full(cfg)
    return cfg, manifest
