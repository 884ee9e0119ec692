"""Differentiable SVBRDF rendering and the training losses built on it.

The shading model is Cook-Torrance with a GGX distribution (alpha equals
roughness squared), Schlick Fresnel and separable Smith masking. Lights are
directional, radiance is computed in linear light and clamped to [0, 1].

The tensor-level functions operate on torch tensors and are differentiable;
the array-level wrappers take/return the value types of :mod:`.materials`.
"""
from __future__ import annotations

import numpy as np
import torch

from .errors import InvalidInputError, ShapeError
from .materials import LightingConfig, LossWeights, MaterialMaps, RenderedImage

EPS_DENOM = 1e-4


def _to_t(arr: np.ndarray, dtype=torch.float32) -> torch.Tensor:
    return torch.as_tensor(np.ascontiguousarray(arr), dtype=dtype)


def shade(
    albedo: torch.Tensor,
    normals: torch.Tensor,
    roughness: torch.Tensor,
    cfg: LightingConfig,
    clamp: bool = True,
) -> torch.Tensor:
    """Evaluate the BRDF for every pixel under one light/view configuration.

    Accepts ...xHxWxC layouts (albedo ...x3, normals ...x3, roughness ...x1)
    and broadcasts over leading batch dimensions.
    """
    dtype = albedo.dtype
    l = torch.as_tensor(cfg.light_dir, dtype=dtype, device=albedo.device)
    v = torch.as_tensor(cfg.view_dir, dtype=dtype, device=albedo.device)
    h = l + v
    h = h / torch.linalg.norm(h)

    ndl = (normals * l).sum(-1, keepdim=True).clamp_min(0.0)
    ndv = (normals * v).sum(-1, keepdim=True).clamp_min(0.0)
    ndh = (normals * h).sum(-1, keepdim=True).clamp_min(0.0)
    vdh = (v * h).sum().clamp_min(0.0)

    alpha = roughness * roughness
    a2 = alpha * alpha
    denom_d = ndh * ndh * (a2 - 1.0) + 1.0
    dist = a2 / (np.pi * denom_d * denom_d)

    fresnel = cfg.f0 + (1.0 - cfg.f0) * (1.0 - vdh) ** 5

    def g1(ndx):
        return 2.0 * ndx / (ndx + torch.sqrt(a2 + (1.0 - a2) * ndx * ndx))

    geom = g1(ndl) * g1(ndv)

    spec = dist * fresnel * geom / (4.0 * ndl.clamp_min(EPS_DENOM) * ndv.clamp_min(EPS_DENOM))
    radiance = (albedo / np.pi + spec) * cfg.intensity * ndl
    return radiance.clamp(0.0, 1.0) if clamp else radiance


def render(m: MaterialMaps, cfg: LightingConfig) -> RenderedImage:
    """Render a material under one lighting configuration."""
    out = shade(_to_t(m.albedo), _to_t(m.normals), _to_t(m.roughness), cfg)
    return RenderedImage(out.numpy())


def sample_lighting(seed: int, intensity: float = np.pi, f0: float = 0.04) -> list[LightingConfig]:
    """Draw the 9 training configurations: 6 mirror-symmetric light/view pairs
    (light = view reflected about the z-axis, so flat normals specularly
    align) plus 3 with light and view drawn independently, all cosine-uniform
    on the upper hemisphere. Deterministic given the seed.
    """
    rng = np.random.default_rng(seed)

    def hemi():
        u1 = rng.uniform(0.0, 0.98)
        u2 = rng.uniform()
        r = np.sqrt(u1)
        z = np.sqrt(1.0 - u1)
        d = np.array([r * np.cos(2 * np.pi * u2), r * np.sin(2 * np.pi * u2), z])
        return tuple((d / np.linalg.norm(d)).tolist())

    configs = []
    for _ in range(6):
        view = hemi()
        light = (-view[0], -view[1], view[2])
        configs.append(LightingConfig(light, view, intensity, f0))
    for _ in range(3):
        configs.append(LightingConfig(hemi(), hemi(), intensity, f0))
    return configs


# --- losses -------------------------------------------------------------

def stack_channels_t(albedo: torch.Tensor, normals: torch.Tensor, roughness: torch.Tensor) -> torch.Tensor:
    """Concatenate {A, encoded N, R} into 7 channels (the L1 loss domain)."""
    return torch.cat([albedo, (normals + 1.0) * 0.5, roughness], dim=-1)


def loss_reg_t(pred: tuple, target: tuple) -> torch.Tensor:
    return (stack_channels_t(*pred) - stack_channels_t(*target)).abs().mean()


def loss_ren_t(pred: tuple, target: tuple, cfgs: list[LightingConfig]) -> torch.Tensor:
    if not cfgs:
        raise InvalidInputError("cfgs must be nonempty")
    total = 0.0
    for cfg in cfgs:
        total = total + (shade(*pred, cfg) - shade(*target, cfg)).abs().mean()
    return total / len(cfgs)


def total_loss_t(pred: tuple, target: tuple, cfgs: list[LightingConfig], w: LossWeights) -> torch.Tensor:
    return w.lambda_reg * loss_reg_t(pred, target) + loss_ren_t(pred, target, cfgs)


def _pair(m: MaterialMaps, target: MaterialMaps, dtype=torch.float32):
    if m.resolution != target.resolution:
        raise ShapeError("materials must share resolution")
    return (
        (_to_t(m.albedo, dtype), _to_t(m.normals, dtype), _to_t(m.roughness, dtype)),
        (_to_t(target.albedo, dtype), _to_t(target.normals, dtype), _to_t(target.roughness, dtype)),
    )


def loss_reg(m: MaterialMaps, target: MaterialMaps) -> float:
    """Mean absolute difference over the 7 stacked channels {A, N, R}."""
    a, b = _pair(m, target, torch.float64)
    return float(loss_reg_t(a, b))


def loss_ren(m: MaterialMaps, target: MaterialMaps, cfgs: list[LightingConfig]) -> float:
    """Mean over views of the mean absolute rendered-pixel difference."""
    a, b = _pair(m, target, torch.float64)
    return float(loss_ren_t(a, b, cfgs))


def total_loss(m: MaterialMaps, target: MaterialMaps, cfgs: list[LightingConfig], w: LossWeights) -> float:
    a, b = _pair(m, target, torch.float64)
    return float(total_loss_t(a, b, cfgs, w))
