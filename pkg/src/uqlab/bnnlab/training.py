"""Stochastic-gradient training for every posterior family.

The minimised per-datum objective is

    class-weighted CE(batch) + (l2 + kl_weight(step) * KL) / n_train

averaged over ``n_train_mc_samples`` weight draws. For MAP and dropout the
KL is absent and ``l2 = lambda * ||theta||^2``; for the variational families
the l2 term is absent (rank1 has both, on different parameters).

Alongside the stochastic loss every step records an ELBO per datum on the
full training set, evaluated with a fixed set of weight draws so that the
trace only moves when the parameters do.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mlp import MlpArchitecture, backward, forward
from .objectives import ConstantKL, KLSchedule, kl_anneal_weight, mean_ce_from_logits, weighted_ce_from_logits
from .posteriors import (
    Params,
    PosteriorSpec,
    PriorConfig,
    canonical_kind,
    draw_noise,
    flatten,
    init_posterior,
    param_grads,
    penalties,
    unflatten,
    weights_from_noise,
)


class TrainingDiverged(RuntimeError):
    def __init__(self, step: int, loss: float):
        self.step = step
        self.loss = loss
        super().__init__(f"non-finite loss {loss!r} at step {step}")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.05
    steps: int = 1000
    batch_size: int = 64
    prior_precision: float = 0.01
    kl_schedule: KLSchedule = ConstantKL(1.0)
    n_train_mc_samples: int = 1
    seed: int = 0
    momentum: float = 0.9
    dropout_rate: float = 0.2
    prior_std: float | None = None
    tied_prior_mean: bool = True
    init_rho: float = -5.0
    n_eval_mc_samples: int = 4

    def __post_init__(self):
        if self.prior_precision < 0:
            raise ValueError("prior precision must be >= 0")
        if self.learning_rate < 0:
            raise ValueError("learning rate must be >= 0")
        if self.steps < 0 or self.batch_size < 1:
            raise ValueError("steps must be >= 0 and batch_size >= 1")
        if self.n_train_mc_samples < 1 or self.n_eval_mc_samples < 1:
            raise ValueError("MC sample counts must be >= 1")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")

    @property
    def prior(self) -> PriorConfig:
        return PriorConfig(self.prior_precision, self.prior_std, self.tied_prior_mean)


@dataclass(frozen=True)
class TraceRow:
    step: int
    loss: float
    kl_weight: float
    elbo: float


@dataclass
class TrainedModel:
    method: str
    posterior: PosteriorSpec
    config: TrainConfig
    trace: list[TraceRow] = field(default_factory=list)

    @property
    def arch(self) -> MlpArchitecture:
        return self.posterior.arch


def _zeros_like(params: Params) -> Params:
    return {k: [np.zeros_like(a) for a in v] for k, v in params.items()}


def _axpy(acc: Params, grads: Params, scale: float) -> None:
    for k, v in grads.items():
        for i, g in enumerate(v):
            acc[k][i] += scale * g


def data_term(spec: PosteriorSpec, x, y, noises: list[Params]) -> tuple[float, Params]:
    """Class-weighted CE averaged over ``noises`` and its parameter gradient."""
    grads = _zeros_like(spec.params)
    total = 0.0
    for noise in noises:
        layers = weights_from_noise(spec, noise)
        z, cache = forward(spec.arch, layers, x)
        ce, dz = weighted_ce_from_logits(z, y)
        total += ce
        _axpy(grads, param_grads(spec, noise, backward(spec.arch, layers, cache, dz)), 1.0 / len(noises))
    return total / len(noises), grads


def objective(
    spec: PosteriorSpec,
    x: np.ndarray,
    y: np.ndarray,
    noises: list[Params],
    prior: PriorConfig,
    n_train: int,
    kl_weight: float = 1.0,
) -> tuple[float, Params]:
    """Training objective at fixed weight draws, with its exact gradient."""
    ce, grads = data_term(spec, x, y, noises)
    l2, l2_grads, kl, kl_grads = penalties(spec, prior)
    _axpy(grads, l2_grads, 1.0 / n_train)
    _axpy(grads, kl_grads, kl_weight / n_train)
    return ce + (l2 + kl_weight * kl) / n_train, grads


def elbo_per_datum(spec: PosteriorSpec, x, y, noises: list[Params], prior: PriorConfig) -> float:
    """Mean log-likelihood minus (l2 + KL) / n over the full data; for the
    point-estimate families this is the log joint per datum."""
    n = len(y)
    ll = -np.mean([mean_ce_from_logits(forward(spec.arch, weights_from_noise(spec, e), x)[0], y) for e in noises])
    l2, _, kl, _ = penalties(spec, prior)
    return float(ll - (l2 + kl) / n)


def train(
    method: str,
    arch: MlpArchitecture,
    x: np.ndarray,
    y: np.ndarray,
    config: TrainConfig = TrainConfig(),
    init: PosteriorSpec | None = None,
) -> TrainedModel:
    """Fit one posterior to ``(x, y)`` with SGD (optionally with momentum).

    Deterministic given ``config.seed``. Raises :class:`TrainingDiverged`
    with the step index when the loss stops being finite.
    """
    kind = canonical_kind(method)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=int)
    n = len(y)
    if n == 0 or x.shape != (n, arch.layer_sizes[0]):
        raise ValueError(f"inputs must have shape (n, {arch.layer_sizes[0]}) with n >= 1 matching labels")
    init_ss, batch_ss, noise_ss, eval_ss = np.random.SeedSequence(config.seed).spawn(4)
    spec = init.copy() if init is not None else init_posterior(
        kind, arch, np.random.default_rng(init_ss), config.dropout_rate, config.init_rho
    )
    if spec.kind != kind:
        raise ValueError(f"initial posterior is {spec.kind}, expected {kind}")
    batch_rng = np.random.default_rng(batch_ss)
    noise_rng = np.random.default_rng(noise_ss)
    eval_rng = np.random.default_rng(eval_ss)
    eval_noises = [draw_noise(spec, eval_rng) for _ in range(config.n_eval_mc_samples)]
    prior = config.prior

    flat = flatten(spec)
    velocity = np.zeros_like(flat)
    trace: list[TraceRow] = []
    order = np.arange(n)
    cursor = n
    for step in range(config.steps):
        if config.batch_size >= n:
            idx = order
        else:
            if cursor + config.batch_size > n:
                order = batch_rng.permutation(n)
                cursor = 0
            idx = order[cursor:cursor + config.batch_size]
            cursor += config.batch_size
        kl_w = kl_anneal_weight(step, config.kl_schedule)
        noises = [draw_noise(spec, noise_rng) for _ in range(config.n_train_mc_samples)]
        loss, grads = objective(spec, x[idx], y[idx], noises, prior, n, kl_w)
        if not np.isfinite(loss):
            raise TrainingDiverged(step, loss)
        elbo = elbo_per_datum(spec, x, y, eval_noises, prior)
        trace.append(TraceRow(step, loss, kl_w, elbo))
        g = flatten(grads, spec.kind)
        if not np.all(np.isfinite(g)):
            raise TrainingDiverged(step, float("nan"))
        velocity = config.momentum * velocity - config.learning_rate * g
        flat = flat + velocity
        spec = unflatten(spec, flat)
    return TrainedModel(kind, spec, config, trace)
