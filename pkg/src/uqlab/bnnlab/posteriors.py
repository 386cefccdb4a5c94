"""Approximate posteriors over MLP weights and their samplers.

Every family is expressed as variational parameters plus a noise draw; a
noise draw maps deterministically to one concrete weight realisation, and
:func:`param_grads` pulls weight gradients back to the variational
parameters for that same draw.

Families and their weight realisation:

* ``map``                 -- point weights ``theta``
* ``dropout``             -- ``theta * mask / (1 - rate)``, mask ~ Bernoulli(1 - rate) per weight
* ``mean_field_gaussian`` -- ``mu + sigma * eps``, eps ~ N(0, I)
* ``radial``              -- ``mu + sigma * eps / ||eps|| * |r|`` per tensor, r ~ N(0, 1)
* ``rank1``               -- ``W * outer(r, s)`` with Gaussian r, s per layer

``sigma = softplus(rho)`` throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .mlp import Layer, MlpArchitecture, he_std, init_layers

POSTERIOR_KINDS = ("map", "mean_field_gaussian", "radial", "dropout", "rank1")
METHOD_ALIASES = {"mfvi": "mean_field_gaussian", "radial_mfvi": "radial", "mc_dropout": "dropout"}

PARAM_KEYS = {
    "map": ("W", "b"),
    "dropout": ("W", "b"),
    "mean_field_gaussian": ("W_mu", "W_rho", "b_mu", "b_rho"),
    "radial": ("W_mu", "W_rho", "b_mu", "b_rho"),
    "rank1": ("W", "b", "r_mu", "r_rho", "s_mu", "s_rho"),
}

Params = dict[str, list[np.ndarray]]


def canonical_kind(kind: str) -> str:
    kind = METHOD_ALIASES.get(kind, kind)
    if kind not in POSTERIOR_KINDS:
        raise ValueError(f"unknown posterior kind {kind!r}; expected one of {POSTERIOR_KINDS}")
    return kind


def softplus(rho):
    return np.logaddexp(0.0, rho)


def inverse_softplus(sigma):
    sigma = np.asarray(sigma, dtype=float)
    return sigma + np.log(-np.expm1(-sigma))


@dataclass
class PosteriorSpec:
    kind: str
    arch: MlpArchitecture
    params: Params
    dropout_rate: float | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.kind = canonical_kind(self.kind)
        expected = PARAM_KEYS[self.kind]
        if set(self.params) != set(expected):
            raise ValueError(f"{self.kind} posterior needs parameters {expected}, got {sorted(self.params)}")
        for key in expected:
            if len(self.params[key]) != self.arch.n_layers:
                raise ValueError(f"parameter {key!r} must have one array per layer")
        if self.kind == "dropout":
            if self.dropout_rate is None or not 0.0 < self.dropout_rate < 1.0:
                raise ValueError("dropout rate must lie in (0, 1)")

    def copy(self) -> "PosteriorSpec":
        return PosteriorSpec(
            self.kind,
            self.arch,
            {k: [a.copy() for a in v] for k, v in self.params.items()},
            self.dropout_rate,
            dict(self.meta),
        )

    def sigmas(self, key: str) -> list[np.ndarray]:
        return [softplus(r) for r in self.params[key]]


def init_posterior(
    kind: str,
    arch: MlpArchitecture,
    rng: np.random.Generator,
    dropout_rate: float = 0.2,
    init_rho: float = -5.0,
) -> PosteriorSpec:
    kind = canonical_kind(kind)
    layers = init_layers(arch, rng)
    W = [w for w, _ in layers]
    b = [bb for _, bb in layers]
    if kind in ("map", "dropout"):
        params = {"W": W, "b": b}
    elif kind in ("mean_field_gaussian", "radial"):
        params = {
            "W_mu": W,
            "W_rho": [np.full_like(w, init_rho) for w in W],
            "b_mu": b,
            "b_rho": [np.full_like(bb, init_rho) for bb in b],
        }
    else:
        params = {
            "W": W,
            "b": b,
            "r_mu": [1.0 + 0.1 * rng.standard_normal(i) for i, _ in arch.shapes],
            "r_rho": [np.full(i, init_rho) for i, _ in arch.shapes],
            "s_mu": [1.0 + 0.1 * rng.standard_normal(o) for _, o in arch.shapes],
            "s_rho": [np.full(o, init_rho) for _, o in arch.shapes],
        }
    return PosteriorSpec(kind, arch, params, dropout_rate if kind == "dropout" else None)


# -- noise --------------------------------------------------------------------

def radial_perturbation(shape, rng: np.random.Generator) -> np.ndarray:
    """``eps / ||eps||_2 * |r|``: uniform direction, half-normal radius."""
    eps = rng.standard_normal(shape)
    norm = np.linalg.norm(eps)
    return eps / norm * abs(rng.standard_normal())


def dropout_keep_mask(shape, rate: float, rng: np.random.Generator) -> np.ndarray:
    return (rng.random(shape) >= rate).astype(float)


def draw_noise(spec: PosteriorSpec, rng: np.random.Generator) -> Params:
    p = spec.params
    if spec.kind == "map":
        return {}
    if spec.kind == "dropout":
        return {"keep": [dropout_keep_mask(w.shape, spec.dropout_rate, rng) for w in p["W"]]}
    if spec.kind == "mean_field_gaussian":
        return {
            "W_eps": [rng.standard_normal(w.shape) for w in p["W_mu"]],
            "b_eps": [rng.standard_normal(b.shape) for b in p["b_mu"]],
        }
    if spec.kind == "radial":
        return {
            "W_eps": [radial_perturbation(w.shape, rng) for w in p["W_mu"]],
            "b_eps": [radial_perturbation(b.shape, rng) for b in p["b_mu"]],
        }
    return {
        "r_eps": [rng.standard_normal(r.shape) for r in p["r_mu"]],
        "s_eps": [rng.standard_normal(s.shape) for s in p["s_mu"]],
    }


def _rank1_vectors(spec: PosteriorSpec, noise: Params):
    p = spec.params
    r = [m + softplus(rho) * e for m, rho, e in zip(p["r_mu"], p["r_rho"], noise["r_eps"])]
    s = [m + softplus(rho) * e for m, rho, e in zip(p["s_mu"], p["s_rho"], noise["s_eps"])]
    return r, s


def weights_from_noise(spec: PosteriorSpec, noise: Params) -> list[Layer]:
    p = spec.params
    if spec.kind == "map":
        return list(zip(p["W"], p["b"]))
    if spec.kind == "dropout":
        scale = 1.0 / (1.0 - spec.dropout_rate)
        return [(w * m * scale, b) for w, m, b in zip(p["W"], noise["keep"], p["b"])]
    if spec.kind in ("mean_field_gaussian", "radial"):
        Ws = [mu + softplus(rho) * e for mu, rho, e in zip(p["W_mu"], p["W_rho"], noise["W_eps"])]
        bs = [mu + softplus(rho) * e for mu, rho, e in zip(p["b_mu"], p["b_rho"], noise["b_eps"])]
        return list(zip(Ws, bs))
    r, s = _rank1_vectors(spec, noise)
    return [(w * np.outer(rk, sk), b) for w, rk, sk, b in zip(p["W"], r, s, p["b"])]


def sample_weights(spec: PosteriorSpec, rng: np.random.Generator) -> list[Layer]:
    return weights_from_noise(spec, draw_noise(spec, rng))


def param_grads(spec: PosteriorSpec, noise: Params, layer_grads: list[Layer]) -> Params:
    """Chain rule from ``dL/d(W, b)`` of a realisation to ``dL/dparams``."""
    p = spec.params
    dW = [g for g, _ in layer_grads]
    db = [g for _, g in layer_grads]
    if spec.kind == "map":
        return {"W": dW, "b": db}
    if spec.kind == "dropout":
        scale = 1.0 / (1.0 - spec.dropout_rate)
        return {"W": [g * m * scale for g, m in zip(dW, noise["keep"])], "b": db}
    if spec.kind in ("mean_field_gaussian", "radial"):
        return {
            "W_mu": dW,
            "W_rho": [g * e * expit(rho) for g, e, rho in zip(dW, noise["W_eps"], p["W_rho"])],
            "b_mu": db,
            "b_rho": [g * e * expit(rho) for g, e, rho in zip(db, noise["b_eps"], p["b_rho"])],
        }
    r, s = _rank1_vectors(spec, noise)
    gw = [g * w for g, w in zip(dW, p["W"])]  # dL/d(outer(r, s))
    dr = [a @ sk for a, sk in zip(gw, s)]
    ds = [rk @ a for a, rk in zip(gw, r)]
    return {
        "W": [g * np.outer(rk, sk) for g, rk, sk in zip(dW, r, s)],
        "b": db,
        "r_mu": dr,
        "r_rho": [g * e * expit(rho) for g, e, rho in zip(dr, noise["r_eps"], p["r_rho"])],
        "s_mu": ds,
        "s_rho": [g * e * expit(rho) for g, e, rho in zip(ds, noise["s_eps"], p["s_rho"])],
    }


# -- KL -----------------------------------------------------------------------

def kl_mean_field(q, p, tied_mean: bool = False) -> float:
    """KL(q || p) between diagonal Gaussians given as ``(mean, std)`` pairs.

    With ``tied_mean`` the prior mean is set to the posterior mean, leaving
    only the scale mismatch.
    """
    mu_q, sigma_q = (np.asarray(a, dtype=float) for a in q)
    mu_p, sigma_p = (np.asarray(a, dtype=float) for a in p)
    if np.any(sigma_q <= 0) or np.any(sigma_p <= 0):
        raise ValueError("standard deviations must be positive")
    sq_diff = 0.0 if tied_mean else (mu_q - mu_p) ** 2
    terms = np.log(sigma_p / sigma_q) + (sigma_q**2 + sq_diff) / (2.0 * sigma_p**2) - 0.5
    return float(np.sum(terms))


def _kl_terms(mu, rho, prior_mean, prior_std, tied):
    """KL value and gradients wrt (mu, rho) for one tensor."""
    sigma = softplus(rho)
    var_p = prior_std**2
    diff = np.zeros_like(mu) if tied else mu - prior_mean
    value = np.sum(np.log(prior_std / sigma) + (sigma**2 + diff**2) / (2.0 * var_p) - 0.5)
    d_mu = diff / var_p
    d_rho = (-1.0 / sigma + sigma / var_p) * expit(rho)
    return float(value), d_mu, d_rho


@dataclass(frozen=True)
class PriorConfig:
    precision: float = 1.0  # lambda; also sets the Gaussian prior std 1/sqrt(lambda)
    std: float | None = None
    tied_mean: bool = True

    def std_for(self, spec: PosteriorSpec, layer: int) -> float:
        if self.std is not None:
            return float(self.std)
        if spec.kind == "radial":
            return he_std(spec.arch.shapes[layer][0])
        if self.precision <= 0:
            raise ValueError("a Gaussian prior needs positive precision or an explicit std")
        return float(1.0 / np.sqrt(self.precision))


def penalties(spec: PosteriorSpec, prior: PriorConfig):
    """Return ``(l2, l2_grads, kl, kl_grads)``; absent terms are zero.

    ``l2 = lambda * ||theta||^2`` over point-estimated weights (map, dropout,
    and the deterministic W, b of rank1). ``kl`` is KL(q || prior) over the
    stochastic parameters; rank1 vectors use a prior centred at 1.
    """
    p = spec.params
    zeros = {k: [np.zeros_like(a) for a in v] for k, v in p.items()}
    l2_grads = {k: [a.copy() for a in v] for k, v in zeros.items()}
    kl_grads = zeros
    l2 = kl = 0.0
    if spec.kind in ("map", "dropout", "rank1"):
        lam = prior.precision
        for key in ("W", "b"):
            for i, a in enumerate(p[key]):
                l2 += lam * float(np.sum(a * a))
                l2_grads[key][i] = 2.0 * lam * a
    if spec.kind in ("mean_field_gaussian", "radial"):
        pairs, centre = (("W_mu", "W_rho"), ("b_mu", "b_rho")), 0.0
    elif spec.kind == "rank1":
        pairs, centre = (("r_mu", "r_rho"), ("s_mu", "s_rho")), 1.0
    else:
        pairs = ()
    for mu_key, rho_key in pairs:
        for i, (mu, rho) in enumerate(zip(p[mu_key], p[rho_key])):
            value, d_mu, d_rho = _kl_terms(mu, rho, centre, prior.std_for(spec, i), prior.tied_mean)
            kl += value
            kl_grads[mu_key][i] = d_mu
            kl_grads[rho_key][i] = d_rho
    return l2, l2_grads, kl, kl_grads


# -- flat views ---------------------------------------------------------------

def flatten(spec_or_params, kind: str | None = None) -> np.ndarray:
    if isinstance(spec_or_params, PosteriorSpec):
        params, kind = spec_or_params.params, spec_or_params.kind
    else:
        params = spec_or_params
    return np.concatenate([a.ravel() for key in PARAM_KEYS[kind] for a in params[key]])


def unflatten(spec: PosteriorSpec, flat: np.ndarray) -> PosteriorSpec:
    out = spec.copy()
    pos = 0
    for key in PARAM_KEYS[spec.kind]:
        for i, a in enumerate(out.params[key]):
            out.params[key][i] = np.asarray(flat[pos:pos + a.size], dtype=float).reshape(a.shape).copy()
            pos += a.size
    return out
