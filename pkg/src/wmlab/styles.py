"""Style specifications, style pools, and appearance composition.

A StyleSpec fixes the visual appearance of a rendered scene: one RGB color
per segmentation class, global brightness and saturation gains, and a light
direction driving a linear shading ramp.  The same composition routine
turns (seg, depth, style) into pixels for both the simulator's renderer and
the structure-guided augmenter, which is what makes full-intensity
augmentation equal a fresh render.

Pools of StyleSpecs drive training-time augmentation; a disjoint held-out
pool defines the OOD evaluation styles.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .errors import ConfigError

CLASS_NAMES = ("background", "table", "goal", "block", "arm")
N_CLASSES = len(CLASS_NAMES)

BRIGHTNESS_RANGE = (0.5, 1.5)
SATURATION_RANGE = (0.5, 1.5)

# eta-scaled perturbation half-widths used by sample_style
_COLOR_JITTER = 40.0
_GAIN_JITTER = 0.25
_ANGLE_JITTER = np.pi / 2

# shading ramp coefficients (position along light direction, depth layer)
SHADE_POS_AMP = 0.30
SHADE_DEPTH_AMP = 0.15


@dataclass(frozen=True)
class StyleSpec:
    """Appearance parameters; colors are per-class (background..arm)."""

    colors: tuple[tuple[int, int, int], ...]
    brightness: float
    saturation: float
    light_angle: float
    task_label: str = ""

    def __post_init__(self):
        if len(self.colors) != N_CLASSES:
            raise ConfigError(f"StyleSpec needs {N_CLASSES} class colors, got {len(self.colors)}")
        for c in self.colors:
            if len(c) != 3 or any(not (0 <= v <= 255) for v in c):
                raise ConfigError(f"invalid class color {c!r}")
        if not (BRIGHTNESS_RANGE[0] <= self.brightness <= BRIGHTNESS_RANGE[1]):
            raise ConfigError(f"brightness {self.brightness} outside {BRIGHTNESS_RANGE}")
        if not (SATURATION_RANGE[0] <= self.saturation <= SATURATION_RANGE[1]):
            raise ConfigError(f"saturation {self.saturation} outside {SATURATION_RANGE}")

    def to_dict(self) -> dict:
        return {
            "colors": [list(c) for c in self.colors],
            "brightness": self.brightness,
            "saturation": self.saturation,
            "light_angle": self.light_angle,
            "task_label": self.task_label,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StyleSpec":
        return cls(
            colors=tuple(tuple(int(v) for v in c) for c in d["colors"]),
            brightness=float(d["brightness"]),
            saturation=float(d["saturation"]),
            light_angle=float(d["light_angle"]),
            task_label=str(d.get("task_label", "")),
        )


@dataclass(frozen=True)
class AugmentConfig:
    """Augmentation intensity plus the training / held-out style pools."""

    intensity: float
    train_pool: tuple[StyleSpec, ...]
    heldout_pool: tuple[StyleSpec, ...]
    p_aug: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.intensity <= 1.0):
            raise ConfigError(f"intensity must be in [0, 1], got {self.intensity}")
        if not (0.0 <= self.p_aug <= 1.0):
            raise ConfigError(f"p_aug must be in [0, 1], got {self.p_aug}")
        overlap = set(self.train_pool) & set(self.heldout_pool)
        if overlap:
            raise ConfigError(f"style pools overlap in {len(overlap)} entries")


def random_style(rng: np.random.Generator, task_label: str = "") -> StyleSpec:
    colors = tuple(tuple(int(v) for v in rng.integers(50, 236, size=3)) for _ in range(N_CLASSES))
    return StyleSpec(
        colors=colors,
        brightness=float(rng.uniform(0.6, 1.4)),
        saturation=float(rng.uniform(0.6, 1.4)),
        light_angle=float(rng.uniform(0.0, 2.0 * np.pi)),
        task_label=task_label,
    )


def make_style_pools(n_train: int, n_heldout: int, seed: int) -> tuple[tuple[StyleSpec, ...], tuple[StyleSpec, ...]]:
    """Disjoint train/held-out pools, fully determined by the seed."""
    rng = np.random.default_rng([seed, 0x57])
    styles = []
    while len(styles) < n_train + n_heldout:
        s = random_style(rng)
        if s not in styles:
            styles.append(s)
    return tuple(styles[:n_train]), tuple(styles[n_train:])


def sample_style(config: AugmentConfig, rng: np.random.Generator, pool=None) -> StyleSpec:
    """Draw a pool entry and perturb each continuous field by intensity.

    At intensity 0 the returned style equals the pool entry exactly; the
    perturbation draws are still consumed, so the rng stream advances the
    same way at every intensity.
    """
    pool = config.train_pool if pool is None else pool
    if not pool:
        raise ConfigError("sample_style: empty style pool")
    eta = config.intensity
    base = pool[int(rng.integers(len(pool)))]
    color_jit = rng.uniform(-_COLOR_JITTER, _COLOR_JITTER, size=(N_CLASSES, 3))
    gain_jit = rng.uniform(-_GAIN_JITTER, _GAIN_JITTER, size=2)
    angle_jit = rng.uniform(-_ANGLE_JITTER, _ANGLE_JITTER)
    colors = tuple(
        tuple(int(np.clip(np.rint(v + eta * j), 0, 255)) for v, j in zip(col, jit))
        for col, jit in zip(base.colors, color_jit)
    )
    return replace(
        base,
        colors=colors,
        brightness=float(np.clip(base.brightness + eta * gain_jit[0], *BRIGHTNESS_RANGE)),
        saturation=float(np.clip(base.saturation + eta * gain_jit[1], *SATURATION_RANGE)),
        light_angle=float((base.light_angle + eta * angle_jit) % (2.0 * np.pi)),
    )


# ---------------------------------------------------------------------------
# appearance composition (shared by renderer and augmenter)
# ---------------------------------------------------------------------------

@lru_cache(maxsize=8)
def _pixel_grids(height: int, width: int) -> tuple[np.ndarray, np.ndarray]:
    xs = ((np.arange(width, dtype=np.float32) + 0.5) / width).reshape(1, width)
    ys = ((np.arange(height, dtype=np.float32) + 0.5) / height).reshape(height, 1)
    x = np.broadcast_to(xs, (height, width)).copy()
    y = np.broadcast_to(ys, (height, width)).copy()
    x.setflags(write=False)
    y.setflags(write=False)
    return x, y


def styled_palette(style: StyleSpec) -> np.ndarray:
    """Per-class colors after saturation and brightness, unclipped float32."""
    col = np.array(style.colors, dtype=np.float32)
    gray = col.mean(axis=1, keepdims=True)
    col = gray + np.float32(style.saturation) * (col - gray)
    return col * np.float32(style.brightness)


def compose_rgb(seg: np.ndarray, depth: np.ndarray, style: StyleSpec) -> np.ndarray:
    """Float RGB image(s) from structure channels and a style.

    seg and depth may carry leading batch axes; the last two axes are H, W.
    The shading ramp is linear in the pixel's projection onto the light
    direction and in its depth layer, so it is recomputable from the depth
    channel alone.
    """
    h, w = seg.shape[-2], seg.shape[-1]
    x, y = _pixel_grids(h, w)
    pal = styled_palette(style)
    base = pal[seg]
    proj = (x - np.float32(0.5)) * np.float32(np.cos(style.light_angle)) + (
        y - np.float32(0.5)
    ) * np.float32(np.sin(style.light_angle))
    shade = (
        np.float32(1.0)
        + np.float32(SHADE_POS_AMP) * proj
        + np.float32(SHADE_DEPTH_AMP) * (depth.astype(np.float32) / np.float32(255.0) - np.float32(0.5))
    )
    return base * shade[..., None]


def quantize_rgb(rgb_float: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(rgb_float), 0, 255).astype(np.uint8)
