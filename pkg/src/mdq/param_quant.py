"""Post-training quantization of the MLP weights.

Each of the three parameter groups (synthesis, context model 1, context
model 2) shares one uniform step, found by a sequential linear search
over a logarithmic grid: synthesis first, then each context model, each
stage freezing the groups already chosen. Symbols are modeled by a
zero-mean Laplace whose scale derives from the group's measured standard
deviation; steps and sigmas are rounded to float32 because that is how
they travel in the header.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _dist, arm, latents, synthesis
from .arm import DEFAULT_CONTEXT, P_MIN, ContextSpec
from .reconstruct import clamp_pyramid, synthesize_central, synthesize_pyramid
from .synthesis import HIDDEN_WIDTH
from .training import distortion

# Symbol alphabet for coded parameters, fixed by the stream format.
PARAM_SYMBOL_MIN = -2048
PARAM_SYMBOL_MAX = 2047

SIGMA_FLOOR = 1e-6


def default_step_grid():
    """21 float32 candidates, 5 per decade over [1e-5, 1e-1]."""
    return [float(np.float32(s)) for s in np.logspace(-5.0, -1.0, 21)]


@dataclass
class QuantizedParams:
    """Integer symbols plus the step and sigma of every parameter group."""

    theta_symbols: np.ndarray
    psi1_symbols: np.ndarray
    psi2_symbols: np.ndarray
    theta_step: float
    psi1_step: float
    psi2_step: float
    theta_sigma: float
    psi1_sigma: float
    psi2_sigma: float

    def theta_values(self) -> np.ndarray:
        return self.theta_symbols * self.theta_step

    def psi_values(self, j: int) -> np.ndarray:
        if j == 1:
            return self.psi1_symbols * self.psi1_step
        if j == 2:
            return self.psi2_symbols * self.psi2_step
        raise ValueError(f"description index must be 1 or 2, got {j}")


def quantize_group(values: np.ndarray, step: float):
    """Symbols = round(values / step) with ties away from zero, plus the
    population std of the dequantized values (floored for all-zero groups)."""
    if step <= 0:
        raise ValueError(f"quantization step must be positive, got {step}")
    values = np.asarray(values, dtype=np.float64)
    symbols = latents.round_half_away(values / step).astype(np.int64)
    sigma = float(np.std(symbols * step))
    return symbols, max(sigma, SIGMA_FLOOR)


def param_rate(symbols: np.ndarray, step: float, sigma: float) -> float:
    """Codelength of a symbol array under Laplace(0, sigma/(step*sqrt(2)))."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    b = sigma / (step * np.sqrt(2.0))
    p = np.clip(_dist.interval_prob(symbols.astype(np.float64), 0.0, b), P_MIN, 1.0)
    return float(-np.sum(np.log2(p)))


def _feasible(symbols: np.ndarray) -> bool:
    return bool(
        symbols.min(initial=0) >= PARAM_SYMBOL_MIN
        and symbols.max(initial=0) <= PARAM_SYMBOL_MAX
    )


def synthesis_dims(num_latents: int, channels: int):
    return (num_latents, HIDDEN_WIDTH, HIDDEN_WIDTH, channels)


def arm_dims(context_size: int):
    return (context_size, HIDDEN_WIDTH, HIDDEN_WIDTH, 2)


def param_count(dims) -> int:
    return sum(i * o + o for i, o in zip(dims[:-1], dims[1:]))


def rebuild_synthesis(flat, num_latents, channels) -> synthesis.SynthesisParams:
    w, b = synthesis.unflatten_params(flat, synthesis_dims(num_latents, channels))
    return synthesis.SynthesisParams(weights=w, biases=b)


def rebuild_arm(flat, context_size) -> arm.ArmParams:
    w, b = synthesis.unflatten_params(flat, arm_dims(context_size))
    return arm.ArmParams(weights=w, biases=b)


class _SearchState:
    """Shared pieces of the search cost: fixed quantized latents and image."""

    def __init__(self, model, image, cfg, spec: ContextSpec):
        self.image = image
        self.cfg = cfg
        self.spec = spec
        self.p1 = clamp_pyramid(latents.quantize_pyramid(model.y1))
        self.p2 = clamp_pyramid(latents.quantize_pyramid(model.y2))
        self.central = latents.interleave(self.p1, self.p2)

    def distortion_mix(self, theta) -> float:
        d0 = distortion(self.image, synthesize_central(theta, self.central))
        d1 = distortion(self.image, synthesize_pyramid(theta, self.p1))
        d2 = distortion(self.image, synthesize_pyramid(theta, self.p2))
        return d0 + self.cfg.alpha * (d1 + d2)

    def latent_rates(self, psi1, psi2):
        r1 = arm.rate_pyramid(psi1, self.p1, self.spec, weighted=True)
        r2 = arm.rate_pyramid(psi2, self.p2, self.spec, weighted=True)
        return r1, r2


def search_steps(model, image: np.ndarray, cfg, spec: ContextSpec = DEFAULT_CONTEXT, grid=None) -> QuantizedParams:
    """Pick the per-group steps minimizing the post-training cost.

    Stage order is synthesis, then context model 1, then context model 2;
    at each stage the candidate minimizing distortion + rate cost (with
    earlier groups frozen at their quantized values) wins. Candidates
    whose symbols overflow the parameter alphabet are skipped.
    """
    grid = default_step_grid() if grid is None else [float(np.float32(s)) for s in grid]
    if not grid:
        raise ValueError("candidate step grid is empty")
    state = _SearchState(model, image, cfg, spec)
    lam_sum = cfg.lambda1 + cfg.lambda2

    theta_flat = model.theta.flatten()
    psi1_flat = model.psi1.flatten()
    psi2_flat = model.psi2.flatten()
    n_latents = model.theta.num_latents
    channels = model.theta.channels
    ctx = model.psi1.context_size

    # Stage 1: synthesis parameters. Only the distortions and the synthesis
    # rate depend on this step, but the full cost is evaluated for clarity.
    base_r1, base_r2 = state.latent_rates(model.psi1, model.psi2)

    def theta_cost(step):
        symbols, sigma = quantize_group(theta_flat, step)
        if not _feasible(symbols):
            return None
        sigma = float(np.float32(sigma))
        theta_hat = rebuild_synthesis(symbols * step, n_latents, channels)
        cost = (
            state.distortion_mix(theta_hat)
            + cfg.lambda1 * base_r1
            + cfg.lambda2 * base_r2
            + lam_sum * param_rate(symbols, step, sigma)
        )
        return cost, symbols, sigma

    theta_step, theta_sym, theta_sigma = _best(grid, theta_cost, "synthesis")
    theta_hat = rebuild_synthesis(theta_sym * theta_step, n_latents, channels)
    d_mix = state.distortion_mix(theta_hat)
    theta_bits = param_rate(theta_sym, theta_step, theta_sigma)

    # Stage 2 and 3: context models. Distortion no longer varies; each
    # stage trades its own payload against the latent rate it induces.
    def psi_cost_fn(flat, lam, pyramid):
        def cost(step):
            symbols, sigma = quantize_group(flat, step)
            if not _feasible(symbols):
                return None
            sigma = float(np.float32(sigma))
            psi_hat = rebuild_arm(symbols * step, ctx)
            latent_bits = arm.rate_pyramid(psi_hat, pyramid, spec, weighted=True)
            total = (
                d_mix
                + lam * (latent_bits + param_rate(symbols, step, sigma))
                + lam_sum * theta_bits
            )
            return total, symbols, sigma

        return cost

    psi1_step, psi1_sym, psi1_sigma = _best(
        grid, psi_cost_fn(psi1_flat, cfg.lambda1, state.p1), "context model 1"
    )
    psi2_step, psi2_sym, psi2_sigma = _best(
        grid, psi_cost_fn(psi2_flat, cfg.lambda2, state.p2), "context model 2"
    )

    return QuantizedParams(
        theta_symbols=theta_sym,
        psi1_symbols=psi1_sym,
        psi2_symbols=psi2_sym,
        theta_step=theta_step,
        psi1_step=psi1_step,
        psi2_step=psi2_step,
        theta_sigma=theta_sigma,
        psi1_sigma=psi1_sigma,
        psi2_sigma=psi2_sigma,
    )


def _best(grid, cost_fn, label):
    best = None
    for step in grid:
        result = cost_fn(step)
        if result is None:
            continue
        cost, symbols, sigma = result
        if best is None or cost < best[0]:
            best = (cost, step, symbols, sigma)
    if best is None:
        raise ValueError(f"no feasible quantization step for {label}")
    return best[1], best[2], best[3]
