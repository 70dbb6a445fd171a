"""Per-timestep value function V(x_t, c, t) trained by Monte-Carlo regression.

The critic is a small MLP over (x_t, one-hot class) whose hidden features
are modulated, twice, by film blocks conditioned on a sinusoidal embedding
of the timestep. Targets are the terminal rewards of sampled trajectories,
so the trained critic approximates E[r(x_0, c) | x_t, c, t].
"""

from dataclasses import dataclass

import numpy as np

from . import rng as rngmod
from .diffusion import NoiseSchedule, sample_trajectories
from .errors import ShapeMismatch
from .nets import (Act, Dense, Film, Network, adam_init, adam_step, backward,
                   forward, init_network, sinusoidal_embed)
from .rewards import RewardSpec, assign_rewards

Array = np.ndarray


def film_modulate(features, scale, shift) -> Array:
    """Elementwise scale * features + shift; shapes must agree exactly."""
    features = np.asarray(features, dtype=np.float64)
    scale = np.asarray(scale, dtype=np.float64)
    shift = np.asarray(shift, dtype=np.float64)
    if scale.shape != features.shape or shift.shape != features.shape:
        raise ShapeMismatch(
            f"film shapes differ: x {features.shape}, scale {scale.shape}, "
            f"shift {shift.shape}")
    return scale * features + shift


@dataclass
class CriticSample:
    x_t: Array
    class_id: int
    t: int
    r_final: float


class Critic:
    """Value net plus the bookkeeping needed to embed (x_t, c, t)."""

    def __init__(self, net: Network, T: int, n_classes: int, t_embed_dim: int = 32,
                 timestep_aware: bool = True):
        self.net = net
        self.T = T
        self.n_classes = n_classes
        self.t_embed_dim = t_embed_dim
        # When False the conditioning is frozen at the t=0 embedding, giving
        # an identically sized value net that cannot see the timestep.
        self.timestep_aware = timestep_aware

    def cond(self, ts, n: int) -> Array:
        if not self.timestep_aware:
            ts = np.zeros(n, dtype=np.int64)
        emb = sinusoidal_embed(ts, self.t_embed_dim, self.T)
        if emb.ndim == 1:
            emb = np.broadcast_to(emb, (n, self.t_embed_dim))
        return emb

    def inputs(self, x: Array, onehot: Array) -> Array:
        return np.concatenate([x, onehot], axis=1)


def build_critic(d: int, n_classes: int, T: int, hidden: int = 64,
                 t_embed_dim: int = 32, rng: np.random.Generator | None = None,
                 timestep_aware: bool = True) -> Critic:
    if rng is None:
        rng = rngmod.stream(0, rngmod.PHASE_INIT, 1)
    arch = [
        Dense(d + n_classes, hidden), Film(hidden, t_embed_dim), Act("tanh"),
        Dense(hidden, hidden), Film(hidden, t_embed_dim), Act("tanh"),
        Dense(hidden, 1),
    ]
    return Critic(init_network(arch, rng), T=T, n_classes=n_classes,
                  t_embed_dim=t_embed_dim, timestep_aware=timestep_aware)


def critic_values(critic: Critic, x: Array, onehot: Array, ts) -> Array:
    """Batched V(x_t, c, t); ts may be a scalar or one step per row."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    n = x.shape[0]
    out = forward(critic.net, critic.inputs(x, onehot), critic.cond(ts, n))
    return out[:, 0]


def critic_forward(critic: Critic, x_t, ctx_or_class, t: int) -> float:
    """Scalar value of one state. Accepts a Context or a raw class id."""
    class_id = getattr(ctx_or_class, "class_id", ctx_or_class)
    if not 0 <= t <= critic.T:
        raise ValueError(f"timestep {t} outside [0, {critic.T}]")
    onehot = np.zeros((1, critic.n_classes))
    onehot[0, class_id] = 1.0
    return float(critic_values(critic, np.atleast_2d(x_t), onehot, t)[0])


def build_critic_buffer(model, ctxs: list, spec: RewardSpec, clf,
                        sched: NoiseSchedule, seed: int,
                        phase: int = rngmod.PHASE_CRITIC_BUFFER,
                        first_index: int = 0) -> list:
    """Roll out one trajectory per context and flatten to critic samples.

    Every state x_t with t in [1, T] becomes one sample labeled with the
    trajectory's terminal reward; x_0 itself is excluded because no value
    estimate is ever queried there. The returned list is shuffled.
    first_index offsets the per-trajectory noise streams so repeated buffer
    builds (e.g. mid-run critic refreshes) draw fresh randomness.
    """
    trajs = sample_trajectories(model, ctxs, sched, seed, phase,
                                first_index=first_index)
    assign_rewards(trajs, spec, clf)
    samples = []
    for tr in trajs:
        for t in range(1, sched.T + 1):
            samples.append(CriticSample(x_t=tr.x(t), class_id=tr.ctx.class_id,
                                        t=t, r_final=tr.reward))
    shuffle = rngmod.stream(seed, phase, first_index + len(trajs))
    return [samples[i] for i in shuffle.permutation(len(samples))]


def _buffer_arrays(critic: Critic, buffer: list):
    X = np.stack([s.x_t for s in buffer]).astype(np.float64)
    onehot = np.zeros((len(buffer), critic.n_classes))
    onehot[np.arange(len(buffer)), [s.class_id for s in buffer]] = 1.0
    ts = np.array([s.t for s in buffer], dtype=np.int64)
    r = np.array([s.r_final for s in buffer], dtype=np.float64)
    return X, onehot, ts, r


def critic_train(critic: Critic, buffer: list, epochs: int, batch_size: int,
                 rng: np.random.Generator, lr: float = 3e-4) -> list:
    """Minimize mean squared error against terminal rewards.

    The buffer is reshuffled every epoch from `rng`. Returns the mean
    training loss of each epoch.
    """
    if not buffer:
        raise ValueError("empty critic buffer")
    if epochs < 1 or batch_size < 1:
        raise ValueError("epochs and batch_size must be >= 1")
    X, onehot, ts, r = _buffer_arrays(critic, buffer)
    inputs = critic.inputs(X, onehot)
    cond = critic.cond(ts, len(buffer))
    opt = adam_init(critic.net, lr=lr)
    history = []
    n = len(buffer)
    for _ in range(epochs):
        perm = rng.permutation(n)
        total = 0.0
        for lo in range(0, n, batch_size):
            idx = perm[lo:lo + batch_size]
            pred = forward(critic.net, inputs[idx], cond[idx])[:, 0]
            err = pred - r[idx]
            total += float(err @ err)
            out_grad = (2.0 * err / len(idx))[:, None]
            grads, _ = backward(critic.net, inputs[idx], cond[idx], out_grad)
            adam_step(opt, critic.net.params, grads)
        history.append(total / n)
    return history


def critic_mse(critic: Critic, buffer: list) -> float:
    X, onehot, ts, r = _buffer_arrays(critic, buffer)
    pred = critic_values(critic, X, onehot, ts)
    return float(((pred - r) ** 2).mean())


def ablation_compare(buffer: list, seed: int, T: int, n_classes: int,
                     hidden: int = 64, t_embed_dim: int = 32, epochs: int = 4,
                     batch_size: int = 256, lr: float = 3e-3,
                     holdout_frac: float = 0.2) -> tuple:
    """Train matched critics with and without timestep conditioning.

    Both start from identical parameters and see identical batches; the
    only difference is whether the film conditioning carries t. Returns
    (mse_timestep_aware, mse_timestep_blind) on the held-out split.
    """
    ts_seen = {s.t for s in buffer}
    if len(ts_seen) < 2:
        raise ValueError("ablation needs a buffer spanning several timesteps")
    d = len(buffer[0].x_t)
    n_hold = max(1, int(len(buffer) * holdout_frac))
    order = rngmod.stream(seed, rngmod.PHASE_DIAG, 0).permutation(len(buffer))
    hold = [buffer[i] for i in order[:n_hold]]
    train = [buffer[i] for i in order[n_hold:]]
    results = []
    for aware in (True, False):
        critic = build_critic(d, n_classes, T, hidden, t_embed_dim,
                              rng=rngmod.stream(seed, rngmod.PHASE_DIAG, 1),
                              timestep_aware=aware)
        critic_train(critic, train, epochs, batch_size,
                     rng=rngmod.stream(seed, rngmod.PHASE_DIAG, 2), lr=lr)
        results.append(critic_mse(critic, hold))
    return results[0], results[1]
