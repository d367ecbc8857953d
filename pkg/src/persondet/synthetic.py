"""Synthetic multi-style dataset generator.

Renders articulated "blob people" (head circle, torso, four limb strokes
with randomized pose angles) onto varied backgrounds in several depiction
styles, plus non-person distractor shapes sharing the person palette. Each
person's ground-truth box is the exact extent of its rendered mask.
Everything is driven by a single seed: the same config produces
byte-identical images and manifests.

Styles: filled (solid colour), outline (contour strokes only), textured
(striped fill), inverted (bright figure on a dark scene), noisy (solid fill
under heavy pixel noise).
"""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw
from scipy import ndimage

from .data import Annotation, DatasetManifest, ImageEntry, save_manifest
from .errors import ConfigError

STYLES = ("filled", "outline", "textured", "inverted", "noisy")

# saturated figure palette vs muted scene palette
PERSON_COLORS = [(220, 40, 40), (40, 70, 220), (30, 160, 60), (200, 40, 180),
                 (230, 130, 20), (20, 170, 170)]
BACKGROUND_COLORS = [(190, 185, 170), (160, 170, 180), (185, 170, 150),
                     (170, 180, 160), (200, 195, 190), (150, 155, 165)]


@dataclass(frozen=True)
class SynthConfig:
    count: int = 100
    image_size: int = 128
    people_min: int = 1
    people_max: int = 3
    styles: tuple = STYLES
    occlusion_prob: float = 0.1
    difficult_prob: float = 0.05
    distractors_max: int = 3
    seed: int = 0
    prefix: str = "img"

    def __post_init__(self):
        for p in (self.occlusion_prob, self.difficult_prob):
            if not (0.0 <= p <= 1.0):
                raise ConfigError("probabilities must lie in [0, 1]")
        if self.people_min < 0 or self.people_max < self.people_min:
            raise ConfigError("need 0 <= people_min <= people_max")
        if self.count < 0 or self.image_size < 32:
            raise ConfigError("count must be >= 0 and image_size >= 32")
        unknown = set(self.styles) - set(STYLES)
        if unknown:
            raise ConfigError(f"unknown styles {sorted(unknown)}; choose from {STYLES}")


def _draw_person_mask(size, cx, cy, height, rng):
    """Binary mask of one articulated figure centred near (cx, cy)."""
    mask = Image.new("L", (size, size), 0)
    d = ImageDraw.Draw(mask)
    head_r = 0.16 * height
    torso_w = 0.34 * height
    torso_h = 0.42 * height
    torso_top = cy - 0.5 * torso_h
    torso_bot = cy + 0.5 * torso_h

    d.ellipse([cx - torso_w / 2, torso_top, cx + torso_w / 2, torso_bot], fill=255)
    head_cy = torso_top - head_r * 0.9
    d.ellipse([cx - head_r, head_cy - head_r, cx + head_r, head_cy + head_r], fill=255)

    limb_w = max(2, int(0.09 * height))
    arm_len = 0.34 * height
    leg_len = 0.40 * height
    for side in (-1, 1):
        # arms from the shoulders
        ang = rng.uniform(0.15 * np.pi, 0.65 * np.pi)
        x0, y0 = cx + side * torso_w * 0.42, torso_top + 0.12 * torso_h
        d.line([x0, y0, x0 + side * arm_len * np.sin(ang), y0 + arm_len * np.cos(ang)],
               fill=255, width=limb_w)
        # legs from the hips
        ang = rng.uniform(-0.22 * np.pi, 0.22 * np.pi)
        x0, y0 = cx + side * torso_w * 0.25, torso_bot - 0.05 * torso_h
        d.line([x0, y0, x0 + leg_len * np.sin(ang) + side * 0.05 * height,
                y0 + leg_len * np.cos(ang)], fill=255, width=limb_w)
    return np.asarray(mask) > 0


def _mask_bbox(mask):
    rows = np.any(mask, axis=1)
    cols = np.any(mask, axis=0)
    r = np.flatnonzero(rows)
    c = np.flatnonzero(cols)
    return np.array([c[0], r[0], c[-1] + 1, r[-1] + 1], dtype=np.float64)


def _background(size, rng, dark=False):
    base = np.array(BACKGROUND_COLORS[rng.integers(len(BACKGROUND_COLORS))], dtype=np.float64)
    if dark:
        base = 255.0 - base
    img = np.tile(base, (size, size, 1))
    # soft vertical gradient plus low-amplitude grain
    ramp = rng.uniform(-25, 25) * np.linspace(-0.5, 0.5, size)[:, None, None]
    img = img + ramp + rng.normal(0, 4, size=(size, size, 3))
    return np.clip(img, 0, 255)


def _draw_distractors(img, size, rng, dark=False):
    """Non-person shapes sharing the person palette (hard negatives)."""
    canvas = Image.fromarray(img.astype(np.uint8))
    d = ImageDraw.Draw(canvas)
    n = int(rng.integers(0, 4))
    for _ in range(n):
        color = PERSON_COLORS[rng.integers(len(PERSON_COLORS))]
        if dark:
            color = tuple(255 - v for v in color)
        kind = rng.integers(3)
        x = rng.uniform(0, size - 20)
        y = rng.uniform(0, size - 20)
        s = rng.uniform(10, 0.3 * size)
        if kind == 0:  # blob
            d.ellipse([x, y, x + s, y + s * rng.uniform(0.7, 1.4)], fill=color)
        elif kind == 1:  # bar
            if rng.random() < 0.5:
                d.rectangle([x, y, x + s, y + s * 0.25], fill=color)
            else:
                d.rectangle([x, y, x + s * 0.25, y + s], fill=color)
        else:  # ring
            w = max(2, int(s * 0.12))
            d.ellipse([x, y, x + s, y + s], outline=color, width=w)
    return np.asarray(canvas, dtype=np.float64)


def _paint_person(img, mask, style, color, rng):
    color = np.asarray(color, dtype=np.float64)
    if style == "outline":
        interior = ndimage.binary_erosion(mask, iterations=2)
        img[mask & ~interior] = color
    elif style == "textured":
        yy, xx = np.indices(mask.shape)
        stripes = ((yy + xx) // 3) % 2 == 0
        img[mask & stripes] = color
        img[mask & ~stripes] = np.clip(color * 0.45, 0, 255)
    else:  # filled / inverted / noisy share a solid fill
        img[mask] = color
    if style == "noisy":
        img[mask] += rng.normal(0, 30, size=(int(mask.sum()), 3))
    return img


def render_image(cfg, index, rng=None):
    """Render one image; returns (uint8 array, annotations, person masks, style)."""
    if rng is None:
        rng = np.random.default_rng([cfg.seed, index])
    size = cfg.image_size
    style = cfg.styles[int(rng.integers(len(cfg.styles)))]
    dark = style == "inverted"

    img = _background(size, rng, dark=dark)
    img = _draw_distractors(img, size, rng, dark=dark)

    n_people = int(rng.integers(cfg.people_min, cfg.people_max + 1))
    annotations = []
    masks = []
    for _ in range(n_people):
        force_tiny = rng.random() < cfg.difficult_prob
        if force_tiny:
            height = rng.uniform(9, 14)
        else:
            height = rng.uniform(0.30, 0.62) * size
        cx = rng.uniform(0.18 * size, 0.82 * size)
        cy = rng.uniform(0.25 * size, 0.75 * size)
        mask = _draw_person_mask(size, cx, cy, height, rng)
        if not mask.any():
            continue
        color = PERSON_COLORS[int(rng.integers(len(PERSON_COLORS)))]
        if dark:
            color = tuple(min(255, v + 120) for v in color)
        img = _paint_person(img, mask, style, color, rng)
        box = _mask_bbox(mask)

        occluded_frac = 0.0
        if rng.random() < cfg.occlusion_prob:
            # background-coloured bar across the torso band, kept off the extremes
            x1, y1, x2, y2 = box
            bar_h = 0.22 * (y2 - y1)
            bar_y = rng.uniform(y1 + 0.3 * (y2 - y1), y2 - 0.3 * (y2 - y1) - bar_h)
            bar = np.zeros_like(mask)
            bar[int(bar_y):int(bar_y + bar_h), int(x1):int(x2)] = True
            img[bar] = _background(size, rng, dark=dark)[bar]
            occluded_frac = float((bar & mask).sum() / mask.sum())

        difficult = bool((box[3] - box[1]) < 15 or occluded_frac > 0.5)
        annotations.append(Annotation(box=box, difficult=difficult, style=style))
        masks.append(mask)

    if style == "noisy":
        img = img + rng.normal(0, 18, size=img.shape)
    return np.clip(img, 0, 255).astype(np.uint8), annotations, masks, style


def generate_dataset(cfg, out_dir, split="train"):
    """Render cfg.count images plus a manifest; returns the manifest.

    Layout: <out_dir>/images/<prefix>_<i>.png and <out_dir>/<split>.jsonl.
    Deterministic for a fixed config (including byte-identical PNGs).
    """
    out_dir = Path(out_dir)
    image_dir = out_dir / "images"
    image_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for i in range(cfg.count):
        arr, annotations, _, _ = render_image(cfg, i)
        image_id = f"{cfg.prefix}_{i:05d}"
        rel = f"images/{image_id}.png"
        Image.fromarray(arr).save(image_dir / f"{image_id}.png")
        entries.append(ImageEntry(id=image_id, path=rel, width=cfg.image_size,
                                  height=cfg.image_size, annotations=annotations))
    manifest = DatasetManifest(entries=entries, split=split)
    save_manifest(manifest, out_dir / f"{split}.jsonl")
    return manifest


def load_image(path):
    """PNG -> float RGB array in [0, 1], shape (H, W, 3)."""
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
