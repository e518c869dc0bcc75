"""Synthetic video generation with exact ground-truth masks.

Scenes render a moving flat-color shape (disk, square, or ring) over a
static smooth-textured background, with optional flat-color distractor
shapes and an optional low-contrast high-frequency checkerboard band
("noise band"). Shape coverage
is rasterized with exact per-pixel area overlap for squares and a
distance-based anti-aliased edge for disks and rings; the ground-truth
mask is coverage >= 0.5. Everything is deterministic in the seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

# The noise band is deliberately faint: ambiguous low-salience texture, in
# contrast to the saturated flat-color shapes.
NOISE_BAND_AMPLITUDE = 0.05
NOISE_CHECKER_PX = 4

PALETTE = {
    "red": (0.85, 0.15, 0.12),
    "green": (0.15, 0.75, 0.20),
    "blue": (0.15, 0.25, 0.85),
    "yellow": (0.90, 0.85, 0.10),
    "magenta": (0.85, 0.15, 0.80),
    "cyan": (0.10, 0.80, 0.85),
}


@dataclass(frozen=True)
class SceneConfig:
    n_frames: int = 90
    height: int = 224
    width: int = 224
    shape: str = "disk"  # disk | square | ring
    size: float = 40.0  # radius, or half-side for squares
    ring_inner: float = 16.0
    motion: str = "linear"  # linear | circular | step
    velocity: tuple[float, float] = (1.0, 0.5)
    orbit_radius: float = 24.0
    angular_speed: float = 0.05
    step_px: int = 16
    hold_frames: int = 10
    start: tuple[float, float] | None = None  # center (x, y)
    distractors: int = 0
    noise_band: bool = False
    color_name: str = "red"
    seed: int = 0

    def __post_init__(self):
        if self.shape not in ("disk", "square", "ring"):
            raise DataError(f"unknown shape {self.shape!r}")
        if self.motion not in ("linear", "circular", "step"):
            raise DataError(f"unknown motion {self.motion!r}")
        if self.color_name not in PALETTE:
            raise DataError(f"unknown color {self.color_name!r}")


@dataclass
class VideoSequence:
    frames: list[np.ndarray]  # each (H, W, 3) float64 in [0, 1]
    gt_masks: list[np.ndarray | None]  # each (H, W) bool
    config: SceneConfig | None = None
    prompt: str = ""

    def __len__(self) -> int:
        return len(self.frames)


def _centers(cfg: SceneConfig) -> np.ndarray:
    w, h = cfg.width, cfg.height
    if cfg.start is not None:
        x0, y0 = cfg.start
    else:
        x0, y0 = w / 2.0, h / 2.0
    t = np.arange(cfg.n_frames, dtype=np.float64)
    if cfg.motion == "linear":
        xs = x0 + cfg.velocity[0] * t
        ys = y0 + cfg.velocity[1] * t
    elif cfg.motion == "circular":
        theta = cfg.angular_speed * t
        xs = x0 + cfg.orbit_radius * (np.cos(theta) - 1.0)
        ys = y0 + cfg.orbit_radius * np.sin(theta)
    else:  # step: horizontal zigzag in step_px strides, held between moves
        xs = np.empty(cfg.n_frames)
        ys = np.full(cfg.n_frames, y0)
        x, direction = x0, 1
        margin = cfg.size + cfg.step_px
        for i in range(cfg.n_frames):
            xs[i] = x
            if (i + 1) % cfg.hold_frames == 0:
                nxt = x + direction * cfg.step_px
                if nxt + margin > w or nxt - margin < 0:
                    direction = -direction
                    nxt = x + direction * cfg.step_px
                x = nxt
    return np.stack([xs, ys], axis=1)


def _square_alpha(h, w, cx, cy, half) -> np.ndarray:
    """Exact pixel-coverage rasterization of an axis-aligned square."""
    cols = np.arange(w, dtype=np.float64)
    rows = np.arange(h, dtype=np.float64)
    ax = np.clip(np.minimum(cols + 1, cx + half) - np.maximum(cols, cx - half), 0, 1)
    ay = np.clip(np.minimum(rows + 1, cy + half) - np.maximum(rows, cy - half), 0, 1)
    return np.outer(ay, ax)


def _disk_alpha(h, w, cx, cy, r) -> np.ndarray:
    cols = np.arange(w, dtype=np.float64) + 0.5
    rows = np.arange(h, dtype=np.float64) + 0.5
    dist = np.hypot(rows[:, None] - cy, cols[None, :] - cx)
    return np.clip(r + 0.5 - dist, 0.0, 1.0)


def _shape_alpha(cfg: SceneConfig, cx: float, cy: float) -> np.ndarray:
    if cfg.shape == "square":
        return _square_alpha(cfg.height, cfg.width, cx, cy, cfg.size)
    if cfg.shape == "disk":
        return _disk_alpha(cfg.height, cfg.width, cx, cy, cfg.size)
    outer = _disk_alpha(cfg.height, cfg.width, cx, cy, cfg.size)
    inner = _disk_alpha(cfg.height, cfg.width, cx, cy, cfg.ring_inner)
    return np.clip(outer - inner, 0.0, 1.0)


def _background(cfg: SceneConfig, rng: np.random.Generator) -> np.ndarray:
    """Static smooth texture from a bilinearly upsampled coarse grid."""
    step = 16
    gh, gw = cfg.height // step + 2, cfg.width // step + 2
    coarse = rng.uniform(0.30, 0.70, size=(gh, gw, 3))
    ys = np.arange(cfg.height) / step
    xs = np.arange(cfg.width) / step
    y0 = ys.astype(int)
    x0 = xs.astype(int)
    fy = (ys - y0)[:, None, None]
    fx = (xs - x0)[None, :, None]
    c00 = coarse[y0][:, x0]
    c01 = coarse[y0][:, x0 + 1]
    c10 = coarse[y0 + 1][:, x0]
    c11 = coarse[y0 + 1][:, x0 + 1]
    return (
        c00 * (1 - fy) * (1 - fx)
        + c01 * (1 - fy) * fx
        + c10 * fy * (1 - fx)
        + c11 * fy * fx
    )


def generate_scene(cfg: SceneConfig) -> VideoSequence:
    """Render the configured sequence; emits frames plus exact masks."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(cfg.seed)))
    bg = _background(cfg, rng)

    if cfg.noise_band:
        # One cell-row of faint high-frequency checkerboard near the bottom:
        # visually ambiguous (barely above mid-gray) rather than salient.
        band_h = 16
        y1 = cfg.height - 2 * band_h
        ys, xs = np.mgrid[0:band_h, 0 : cfg.width]
        checker = ((ys // NOISE_CHECKER_PX + xs // NOISE_CHECKER_PX) % 2).astype(
            np.float64
        )
        bg = bg.copy()
        bg[y1 : y1 + band_h] = 0.5 + NOISE_BAND_AMPLITUDE * (2.0 * checker[..., None] - 1.0)

    color = np.array(PALETTE[cfg.color_name])
    others = [np.array(v) for k, v in PALETTE.items() if k != cfg.color_name]
    distractor_alpha = np.zeros((cfg.height, cfg.width))
    distractor_layer = np.zeros((cfg.height, cfg.width, 3))
    for i in range(cfg.distractors):
        half = float(rng.uniform(12, 20))
        dx = float(rng.uniform(half + 1, cfg.width - half - 1))
        dy = float(rng.uniform(half + 1, cfg.height / 3))
        a = _square_alpha(cfg.height, cfg.width, dx, dy, half)
        c = others[int(rng.integers(len(others)))]
        distractor_layer = distractor_layer * (1 - a[..., None]) + c * a[..., None]
        distractor_alpha = np.maximum(distractor_alpha, a)

    centers = _centers(cfg)
    extent = cfg.size + 1.0
    if (
        centers[:, 0].min() < extent
        or centers[:, 0].max() > cfg.width - extent
        or centers[:, 1].min() < extent
        or centers[:, 1].max() > cfg.height - extent
    ):
        raise DataError("object leaves the frame under this motion config")

    base = bg * (1 - distractor_alpha[..., None]) + distractor_layer * distractor_alpha[..., None]
    frames, masks = [], []
    for cx, cy in centers:
        alpha = _shape_alpha(cfg, cx, cy)
        frame = base * (1 - alpha[..., None]) + color * alpha[..., None]
        frames.append(np.clip(frame, 0.0, 1.0))
        masks.append(alpha >= 0.5)
    return VideoSequence(frames=frames, gt_masks=masks, config=cfg,
                         prompt=f"{cfg.color_name} {cfg.shape}")


def easy_suite(n_scenes: int = 20, base_seed: int = 1000) -> list[SceneConfig]:
    """Cell-aligned square scenes at 112x112: edges land exactly on token
    cell boundaries at every frame, so token-resolution masks can reach
    J&F = 1 and refinement stays quiet."""
    colors = list(PALETTE)
    configs = []
    for i in range(n_scenes):
        side_cells = 2 + (i % 2)  # 32 px or 48 px squares
        half = side_cells * 16 / 2.0
        # Center on a cell boundary: for even cell counts that is a multiple
        # of 16; for odd counts offset by 8 so edges stay aligned.
        cx = 48.0 + (8.0 if side_cells % 2 else 0.0)
        cy = 48.0 + (8.0 if side_cells % 2 else 0.0)
        configs.append(
            SceneConfig(
                n_frames=90,
                height=112,
                width=112,
                shape="square",
                size=half,
                motion="step",
                step_px=16,
                hold_frames=12,
                start=(cx, cy),
                distractors=0,
                noise_band=False,
                color_name=colors[i % len(colors)],
                seed=base_seed + i,
            )
        )
    return configs
