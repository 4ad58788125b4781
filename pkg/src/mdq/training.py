"""Joint per-image optimization of the synthesis MLP, the two context
models and the two latent pyramids.

Each iteration relaxes quantization with fresh uniform noise, renders the
two side reconstructions plus the interleaved central one through the
shared synthesis MLP, adds the resolution-weighted rate of both latent
sets, and takes one Adam step on every parameter group.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import arm, autodiff as ad, latents, synthesis
from .arm import DEFAULT_CONTEXT, LOG_B_MAX, LOG_B_MIN, P_MIN, ContextSpec
from .synthesis import HIDDEN_WIDTH

DEFAULT_LAMBDA = 2e-9


@dataclass
class TrainConfig:
    """Optimization settings; every field has a usable default."""

    alpha: float = 0.1
    lambda1: float = DEFAULT_LAMBDA
    lambda2: float = DEFAULT_LAMBDA
    iterations: int = 10000
    lr: float = 0.1
    levels: int = 6
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.lambda1 <= 0 or self.lambda2 <= 0:
            raise ValueError("rate multipliers must be positive")
        if self.iterations <= 0 or self.levels <= 0:
            raise ValueError("iterations and levels must be positive")
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")


_CONFIG_PARSERS = {
    "alpha": float,
    "lambda1": float,
    "lambda2": float,
    "iterations": int,
    "lr": float,
    "levels": int,
    "seed": int,
}


def parse_config(text: str) -> TrainConfig:
    """Parse `key = value` lines (# comments allowed) into a TrainConfig."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        if key not in _CONFIG_PARSERS:
            raise ValueError(f"line {lineno}: unknown setting {key!r}")
        values[key] = _CONFIG_PARSERS[key](val.strip())
    return TrainConfig(**values)


@dataclass
class TrainedModel:
    """Overfit parameters for one image (latents kept continuous)."""

    theta: synthesis.SynthesisParams
    psi1: arm.ArmParams
    psi2: arm.ArmParams
    y1: latents.LatentPyramid
    y2: latents.LatentPyramid
    loss_history: list = field(default_factory=list)


@dataclass
class SdcModel:
    """Single-description ablation: one latent set, one context model."""

    theta: synthesis.SynthesisParams
    psi: arm.ArmParams
    y: latents.LatentPyramid
    loss_history: list = field(default_factory=list)


@dataclass
class MdcLoss:
    """Loss graph with its terms and the parameter tensors that feed it."""

    total: ad.Tensor
    d0: ad.Tensor
    d1: ad.Tensor
    d2: ad.Tensor
    rate1: ad.Tensor
    rate2: ad.Tensor
    params: dict


def distortion(reference: np.ndarray, reconstruction: np.ndarray) -> float:
    """Mean squared error over all channels and pixels."""
    if reference.shape != reconstruction.shape:
        raise ValueError(
            f"image shapes differ: {reference.shape} vs {reconstruction.shape}"
        )
    diff = reference - reconstruction
    return float(np.mean(diff * diff))


def _check_image(image: np.ndarray) -> np.ndarray:
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3 or image.shape[2] not in (1, 3):
        raise ValueError("expected an (H, W, C) image with 1 or 3 channels")
    if image.min() < 0.0 or image.max() > 1.0:
        raise ValueError("image values must lie in [0, 1]")
    return image


class _Workspace:
    """Constant pieces of the loss graph for one image geometry."""

    def __init__(self, image: np.ndarray, levels: int, spec: ContextSpec):
        self.image = _check_image(image)
        self.h, self.w, self.c = self.image.shape
        self.spec = spec
        self.shapes = latents.level_shapes(self.h, self.w, levels)
        self.up_rows = [
            ad.Tensor(synthesis.upsample_matrix(hk, self.h)) for hk, _ in self.shapes
        ]
        self.up_cols_t = [
            ad.Tensor(np.ascontiguousarray(synthesis.upsample_matrix(wk, self.w).T))
            for _, wk in self.shapes
        ]
        self.ctx_idx = [arm.context_indices(s, spec) for s in self.shapes]
        self.beta_vec = np.concatenate(
            [
                np.full(hk * wk, arm.beta_weight((hk, wk), k))
                for k, (hk, wk) in enumerate(self.shapes)
            ]
        )
        npix = self.h * self.w
        self.target = self.image.reshape(npix, self.c)
        self.mse_weights = np.full((npix, 1), 1.0 / (npix * self.c))
        self.target3 = np.concatenate([self.target] * 3, axis=0)

    def mix_weights(self, alpha: float) -> np.ndarray:
        """Row weights folding central + alpha-weighted side errors into one op."""
        npix = self.h * self.w
        w = np.empty((3 * npix, 1))
        w[:npix] = 1.0 / (npix * self.c)
        w[npix:] = alpha / (npix * self.c)
        return w

    def upsampled_planes(self, noisy, steps):
        planes = []
        for k, (ny, (hk, wk)) in enumerate(zip(noisy, self.shapes)):
            if (hk, wk) == (self.h, self.w):  # factor-1 upsampling is the identity
                up = ny
            else:
                up = ad.matmul(ad.matmul(self.up_rows[k], ny), self.up_cols_t[k])
            plane = ad.reshape(up, (self.h * self.w,))
            if steps[k] != 1.0:
                plane = ad.mul(plane, float(steps[k]))
            planes.append(plane)
        return planes

    def reconstruction_mse(self, theta, planes) -> ad.Tensor:
        x = ad.stack_columns(planes)
        h = ad.relu(ad.affine_forward(x, theta[0], theta[1]))
        h = ad.relu(ad.affine_forward(h, theta[2], theta[3]))
        out = ad.affine_forward(h, theta[4], theta[5])
        return ad.weighted_sq_error(out, self.target, self.mse_weights)

    def weighted_rate(self, psi, noisy) -> ad.Tensor:
        contexts = ad.concat_rows(
            [ad.gather(ny, self.ctx_idx[k]) for k, ny in enumerate(noisy)]
        )
        symbols = ad.concat_rows(
            [ad.reshape(ny, (ny.data.size,)) for ny in noisy]
        )
        h = ad.relu(ad.affine_forward(contexts, psi[0], psi[1]))
        h = ad.relu(ad.affine_forward(h, psi[2], psi[3]))
        out = ad.affine_forward(h, psi[4], psi[5])
        bits = ad.laplace_rate_pair(out, symbols, P_MIN, LOG_B_MIN, LOG_B_MAX)
        return ad.weighted_sum(bits, self.beta_vec)


def _mlp_tensors(params) -> list:
    out = []
    for w, b in zip(params.weights, params.biases):
        out.append(ad.Tensor(w, requires_grad=True))
        out.append(ad.Tensor(b, requires_grad=True))
    return out


def _tensors_to_mlp(tensors, cls):
    weights = [t.data for t in tensors[0::2]]
    biases = [t.data for t in tensors[1::2]]
    return cls(weights=weights, biases=biases)


def _draw_noise(shapes, seed_parts) -> list:
    rng = np.random.default_rng(np.random.SeedSequence(seed_parts))
    return [rng.random(s) - 0.5 for s in shapes]


def _build_mdc_loss(ws: _Workspace, tensors: dict, noise1, noise2, cfg: TrainConfig) -> MdcLoss:
    steps1 = tensors["y1_steps"]
    steps2 = tensors["y2_steps"]
    noisy1 = [ad.add(y, ad.Tensor(n)) for y, n in zip(tensors["y1"], noise1)]
    noisy2 = [ad.add(y, ad.Tensor(n)) for y, n in zip(tensors["y2"], noise2)]
    planes1 = ws.upsampled_planes(noisy1, steps1)
    planes2 = ws.upsampled_planes(noisy2, steps2)
    planes0 = [planes1[k] if k % 2 == 0 else planes2[k] for k in range(len(planes1))]
    d0 = ws.reconstruction_mse(tensors["theta"], planes0)
    d1 = ws.reconstruction_mse(tensors["theta"], planes1)
    d2 = ws.reconstruction_mse(tensors["theta"], planes2)
    rate1 = ws.weighted_rate(tensors["psi1"], noisy1)
    rate2 = ws.weighted_rate(tensors["psi2"], noisy2)
    total = ad.add(
        ad.add(d0, ad.mul(ad.add(d1, d2), cfg.alpha)),
        ad.add(ad.mul(rate1, cfg.lambda1), ad.mul(rate2, cfg.lambda2)),
    )
    return MdcLoss(total=total, d0=d0, d1=d1, d2=d2, rate1=rate1, rate2=rate2, params=tensors)


def _build_mdc_loss_fast(ws: _Workspace, tensors: dict, noise1, noise2, cfg: TrainConfig, mix_w: np.ndarray) -> ad.Tensor:
    """Same total as _build_mdc_loss with the three reconstructions batched
    through one MLP pass (equivalence is pinned by a test)."""
    noisy1 = [ad.add(y, ad.Tensor(n)) for y, n in zip(tensors["y1"], noise1)]
    noisy2 = [ad.add(y, ad.Tensor(n)) for y, n in zip(tensors["y2"], noise2)]
    planes1 = ws.upsampled_planes(noisy1, tensors["y1_steps"])
    planes2 = ws.upsampled_planes(noisy2, tensors["y2_steps"])
    planes0 = [planes1[k] if k % 2 == 0 else planes2[k] for k in range(len(planes1))]
    theta = tensors["theta"]
    x = ad.concat_rows(
        [ad.stack_columns(p) for p in (planes0, planes1, planes2)]
    )
    h = ad.relu(ad.affine_forward(x, theta[0], theta[1]))
    h = ad.relu(ad.affine_forward(h, theta[2], theta[3]))
    out = ad.affine_forward(h, theta[4], theta[5])
    d_mix = ad.weighted_sq_error(out, ws.target3, mix_w)
    rate1 = ws.weighted_rate(tensors["psi1"], noisy1)
    rate2 = ws.weighted_rate(tensors["psi2"], noisy2)
    return ad.add(
        d_mix, ad.add(ad.mul(rate1, cfg.lambda1), ad.mul(rate2, cfg.lambda2))
    )


def mdc_loss(model: TrainedModel, image: np.ndarray, cfg: TrainConfig, rng_seed: int) -> MdcLoss:
    """Differentiable training cost for one noise realization.

    Noise for description j is drawn from seed (rng_seed, j), matching
    latents.add_uniform_noise on the same derived seed.
    """
    ws = _Workspace(image, model.y1.num_levels, DEFAULT_CONTEXT)
    tensors = {
        "theta": _mlp_tensors(model.theta),
        "psi1": _mlp_tensors(model.psi1),
        "psi2": _mlp_tensors(model.psi2),
        "y1": [ad.Tensor(lv, requires_grad=True) for lv in model.y1.levels],
        "y2": [ad.Tensor(lv, requires_grad=True) for lv in model.y2.levels],
        "y1_steps": list(model.y1.steps),
        "y2_steps": list(model.y2.steps),
    }
    noise1 = _draw_noise(ws.shapes, (rng_seed, 1))
    noise2 = _draw_noise(ws.shapes, (rng_seed, 2))
    return _build_mdc_loss(ws, tensors, noise1, noise2, cfg)


def _init_tensors(image: np.ndarray, cfg: TrainConfig, descriptions: int):
    """Seeded initialization; draw order is fixed: synthesis MLP first,
    then one context MLP per description."""
    h, w, c = image.shape
    rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, 0)))
    theta = synthesis.SynthesisParams.init_random(cfg.levels, c, rng)
    psis = [arm.ArmParams.init_random(DEFAULT_CONTEXT.size, rng) for _ in range(descriptions)]
    ys = [
        latents.LatentPyramid.zeros(h, w, cfg.levels, description_id=j + 1)
        for j in range(descriptions)
    ]
    tensors = {
        "theta": _mlp_tensors(theta),
    }
    for j, (psi, y) in enumerate(zip(psis, ys), start=1):
        tensors[f"psi{j}"] = _mlp_tensors(psi)
        tensors[f"y{j}"] = [ad.Tensor(lv, requires_grad=True) for lv in y.levels]
        tensors[f"y{j}_steps"] = list(y.steps)
    return tensors


def _all_params(tensors: dict) -> list:
    out = []
    for key in sorted(tensors):
        if key.endswith("_steps"):
            continue
        out.extend(tensors[key])
    return out


def _run_loop(build_loss, params, cfg: TrainConfig) -> list:
    states = [ad.AdamState.for_param(p, lr=cfg.lr) for p in params]
    decay_at = int(0.9 * cfg.iterations)
    history = []
    for it in range(cfg.iterations):
        if it == decay_at and decay_at > 0:
            for st in states:
                st.lr = cfg.lr / 10.0
        loss = build_loss(it)
        value = loss.item()
        if not np.isfinite(value):
            raise RuntimeError(f"training diverged: non-finite loss at iteration {it}")
        ad.backward(loss)
        for p, st in zip(params, states):
            if p.grad is None:
                p.grad = np.zeros_like(p.data)
            ad.adam_step(p, st)
        history.append(value)
    return history


def train(image: np.ndarray, cfg: TrainConfig) -> TrainedModel:
    """Overfit all parameter groups to one image; deterministic per seed."""
    image = _check_image(image)
    ws = _Workspace(image, cfg.levels, DEFAULT_CONTEXT)
    tensors = _init_tensors(image, cfg, descriptions=2)
    params = _all_params(tensors)
    mix_w = ws.mix_weights(cfg.alpha)

    def build(it):
        noise1 = _draw_noise(ws.shapes, (cfg.seed, 1, it, 1))
        noise2 = _draw_noise(ws.shapes, (cfg.seed, 1, it, 2))
        return _build_mdc_loss_fast(ws, tensors, noise1, noise2, cfg, mix_w)

    history = _run_loop(build, params, cfg)
    return TrainedModel(
        theta=_tensors_to_mlp(tensors["theta"], synthesis.SynthesisParams),
        psi1=_tensors_to_mlp(tensors["psi1"], arm.ArmParams),
        psi2=_tensors_to_mlp(tensors["psi2"], arm.ArmParams),
        y1=latents.LatentPyramid(
            levels=[t.data for t in tensors["y1"]],
            steps=tensors["y1_steps"],
            description_id=1,
        ),
        y2=latents.LatentPyramid(
            levels=[t.data for t in tensors["y2"]],
            steps=tensors["y2_steps"],
            description_id=2,
        ),
        loss_history=history,
    )


def train_single(image: np.ndarray, cfg: TrainConfig) -> SdcModel:
    """Non-redundant baseline: one latent set, one context model.

    Loss is distortion plus lambda1 times the weighted rate; alpha and
    lambda2 are ignored.
    """
    image = _check_image(image)
    ws = _Workspace(image, cfg.levels, DEFAULT_CONTEXT)
    tensors = _init_tensors(image, cfg, descriptions=1)
    params = _all_params(tensors)

    def build(it):
        noise = _draw_noise(ws.shapes, (cfg.seed, 1, it, 1))
        noisy = [ad.add(y, ad.Tensor(n)) for y, n in zip(tensors["y1"], noise)]
        planes = ws.upsampled_planes(noisy, tensors["y1_steps"])
        d = ws.reconstruction_mse(tensors["theta"], planes)
        rate = ws.weighted_rate(tensors["psi1"], noisy)
        return ad.add(d, ad.mul(rate, cfg.lambda1))

    history = _run_loop(build, params, cfg)
    return SdcModel(
        theta=_tensors_to_mlp(tensors["theta"], synthesis.SynthesisParams),
        psi=_tensors_to_mlp(tensors["psi1"], arm.ArmParams),
        y=latents.LatentPyramid(
            levels=[t.data for t in tensors["y1"]],
            steps=tensors["y1_steps"],
            description_id=1,
        ),
        loss_history=history,
    )
