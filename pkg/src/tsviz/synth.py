"""Synthetic "leaf with lesions" images on a black background.

Every image is a randomly posed green ellipse (the leaf) with mild per-pixel
noise.  Class 0 is healthy; class ``k >= 1`` adds 2-4 round spots whose colour
and radius are fixed per class while their positions vary per sample.  Each
sample carries pixel-exact lesion and leaf masks.
"""
import colorsys
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

MIN_IMAGE_SIZE = 16
LEAF_FLOOR = 0.12  # lowest channel value on the leaf; keeps leaf pixels nonzero after 8-bit quantization


@dataclass
class SyntheticSample:
    image: np.ndarray
    label: int
    lesion_mask: np.ndarray
    leaf_mask: np.ndarray
    id: str = ""


@dataclass
class DatasetSplit:
    train: list
    validation: list
    num_classes: int
    seed: int = 0

    @property
    def samples(self):
        return self.train + self.validation


def class_name(k):
    return "healthy" if k == 0 else f"disease{k}"


LESION_COLORS = [
    (0.45, 0.25, 0.08),   # brown
    (0.90, 0.85, 0.20),   # yellow
    (0.85, 0.85, 0.80),   # pale grey
    (0.60, 0.15, 0.50),   # purple
    (0.95, 0.50, 0.10),   # orange
    (0.30, 0.20, 0.15),   # dark brown
]


def lesion_style(k):
    """(rgb colour, radius as a fraction of image size) for class ``k >= 1``."""
    color = np.array(LESION_COLORS[(k - 1) % len(LESION_COLORS)])
    radius = 0.07 + 0.015 * ((k - 1) % 3)
    return color, radius


def _leaf(rng, size):
    yy, xx = np.mgrid[0:size, 0:size] + 0.5
    cy, cx = size / 2 + rng.uniform(-0.08, 0.08, size=2) * size
    a = rng.uniform(0.30, 0.40) * size
    b = rng.uniform(0.20, 0.30) * size
    theta = rng.uniform(0, np.pi)
    dy, dx = yy - cy, xx - cx
    u = dx * np.cos(theta) + dy * np.sin(theta)
    v = -dx * np.sin(theta) + dy * np.cos(theta)
    r2 = (u / a) ** 2 + (v / b) ** 2
    return r2 <= 1.0, (cy, cx, a, b, theta)


def render_sample(rng, label, size):
    """Draw one sample of class ``label``."""
    leaf, (cy, cx, a, b, theta) = _leaf(rng, size)
    green = np.array(colorsys.hls_to_rgb(rng.uniform(0.27, 0.36), rng.uniform(0.3, 0.42), 0.6))
    img = green + rng.normal(0.0, 0.03, size=(size, size, 3))
    lesion = np.zeros((size, size), dtype=bool)
    if label > 0:
        color, rfrac = lesion_style(label)
        radius = max(rfrac * size, 1.0)
        yy, xx = np.mgrid[0:size, 0:size] + 0.5
        for _ in range(rng.integers(2, 5)):
            # spot centres sit well inside the leaf
            rho = np.sqrt(rng.uniform(0, 1)) * 0.6
            phi = rng.uniform(0, 2 * np.pi)
            u, v = rho * a * np.cos(phi), rho * b * np.sin(phi)
            sy = cy + u * np.sin(theta) + v * np.cos(theta)
            sx = cx + u * np.cos(theta) - v * np.sin(theta)
            lesion |= (yy - sy) ** 2 + (xx - sx) ** 2 <= radius ** 2
        lesion &= leaf
        img[lesion] = color + rng.normal(0.0, 0.03, size=(int(lesion.sum()), 3))
    img = np.clip(img, LEAF_FLOOR, 1.0)
    img[~leaf] = 0.0
    return SyntheticSample(img, int(label), lesion, leaf)


def generate(num_classes=4, per_class=128, image_size=32, seed=0, train_fraction=0.6):
    """Deterministic dataset with a seeded train/validation split."""
    if num_classes < 2:
        raise ParameterError(f"num_classes must be >= 2, got {num_classes}")
    if image_size < MIN_IMAGE_SIZE:
        raise ParameterError(f"image_size must be >= {MIN_IMAGE_SIZE} to place lesion motifs")
    if per_class < 1:
        raise ParameterError("per_class must be >= 1")
    ss = np.random.SeedSequence(seed)
    child = ss.spawn(num_classes * per_class + 1)
    samples = []
    for k in range(num_classes):
        for i in range(per_class):
            rng = np.random.default_rng(child[k * per_class + i])
            s = render_sample(rng, k, image_size)
            s.id = f"{class_name(k)}_{i:05d}"
            samples.append(s)
    order = np.random.default_rng(child[-1]).permutation(len(samples))
    n_train = int(round(train_fraction * len(samples)))
    train = [samples[i] for i in order[:n_train]]
    val = [samples[i] for i in order[n_train:]]
    return DatasetSplit(train, val, num_classes, seed)
