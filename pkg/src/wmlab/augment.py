"""Structure-guided style augmentation.

Appearance moves toward a fully restyled image computed from the frame's
own segmentation and depth channels; the structure channels themselves are
copied through untouched.  Intensity 0 is the bit-exact identity, intensity
1 reproduces a fresh render under the target style.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .env import Episode, Frame
from .errors import UsageError
from .styles import AugmentConfig, StyleSpec, compose_rgb, quantize_rgb, sample_style


def augment_rgb(
    rgb: np.ndarray,
    seg: np.ndarray,
    depth: np.ndarray,
    target: StyleSpec,
    intensity: float,
) -> np.ndarray:
    """Blend pixels toward the target restyle; works on frame batches too."""
    if seg is None or depth is None:
        raise UsageError("augment requires segmentation and depth channels")
    if seg.shape != rgb.shape[:-1] or depth.shape != rgb.shape[:-1]:
        raise UsageError(
            f"structure channels {seg.shape}/{depth.shape} do not match rgb {rgb.shape}"
        )
    if intensity == 0.0:
        return rgb.copy()
    restyled = compose_rgb(seg, depth, target)
    eta = np.float32(intensity)
    mixed = (np.float32(1.0) - eta) * rgb.astype(np.float32) + eta * restyled
    return quantize_rgb(mixed)


def augment_frame(frame: Frame, target: StyleSpec, intensity: float) -> Frame:
    rgb = augment_rgb(frame.rgb, frame.seg, frame.depth, target, intensity)
    return Frame(rgb=rgb, seg=frame.seg.copy(), depth=frame.depth.copy())


def augment_episode(ep: Episode, config: AugmentConfig, rng: np.random.Generator) -> Episode:
    """One style per episode, applied to every frame.

    Actions, initial state, and the success flag pass through unchanged;
    only appearance moves.
    """
    target = sample_style(config, rng)
    rgb = augment_rgb(ep.rgb, ep.seg, ep.depth, target, config.intensity)
    return replace(
        ep,
        style=target if config.intensity == 1.0 else ep.style,
        rgb=rgb,
        seg=ep.seg.copy(),
        depth=ep.depth.copy(),
    )
