"""Datasets: checkerboard, symmetric donuts, MNIST pixel coordinates.

All generators are deterministic functions of their seed.
"""

from __future__ import annotations

import csv
import gzip
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from ._validation import check_labels
from .exceptions import Undecided

CHECKERBOARD_SIZE = 30
DONUTS_SIZE = 60
DONUT_RADIUS = math.sqrt(2) / 2
DONUT_INNER = 0.5


@dataclass
class LabeledDataset:
    X: np.ndarray
    y: np.ndarray
    split: str = "train"
    dataset_id: str = ""
    seed: int | None = None
    source_ids: np.ndarray | None = None

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        self.y = check_labels(self.y)
        if len(self.X) != len(self.y):
            raise ValueError("X and y lengths differ")
        if self.split not in ("train", "test"):
            raise ValueError(f"split must be 'train' or 'test', got {self.split!r}")

    def __len__(self):
        return len(self.y)

    def subset(self, idx) -> "LabeledDataset":
        idx = np.asarray(idx)
        src = None if self.source_ids is None else self.source_ids[idx]
        return LabeledDataset(self.X[idx], self.y[idx], self.split, self.dataset_id, self.seed, src)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x1", "x2", "label"])
            for (x1, x2), label in zip(self.X, self.y):
                w.writerow([repr(float(x1)), repr(float(x2)), int(label)])

    @classmethod
    def from_csv(cls, path, split: str = "train", dataset_id: str = "") -> "LabeledDataset":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        if not rows:
            raise ValueError(f"{path}: no data rows")
        X = [[float(r["x1"]), float(r["x2"])] for r in rows]
        y = [int(r["label"]) for r in rows]
        return cls(np.array(X), np.array(y), split, dataset_id or Path(path).stem)


# --------------------------------------------------------------------------
# checkerboard


def checkerboard_centroid(i: int, j: int) -> tuple[float, float]:
    return ((2 * i + 1) / 8, (2 * j + 1) / 8)


def checkerboard_label(i: int, j: int) -> int:
    return 1 if (i + j) % 2 == 0 else -1


def _checkerboard_split(rng, size: int) -> tuple[np.ndarray, np.ndarray]:
    sites = [(i, j) for i in range(4) for j in range(4)]
    X, y = [], []
    for label in (1, -1):
        own = [s for s in sites if checkerboard_label(*s) == label]
        order = rng.permutation(len(own))
        for k in range(size // 2):
            i, j = own[order[k % len(own)]]
            cx, cy = checkerboard_centroid(i, j)
            X.append([cx + rng.uniform(-1 / 8, 1 / 8), cy + rng.uniform(-1 / 8, 1 / 8)])
            y.append(label)
    perm = rng.permutation(len(y))
    return np.array(X)[perm], np.array(y)[perm]


def gen_checkerboard(seed: int = 0, size: int = CHECKERBOARD_SIZE):
    """4x4 checkerboard in the unit square; returns ``(train, test)``.

    Each split holds ``size`` points, half per class, spread round-robin
    over the class's 8 tiles and drawn uniformly within each tile.
    """
    if size % 2:
        raise ValueError("size must be even for class balance")
    rng = np.random.default_rng(seed)
    out = []
    for split in ("train", "test"):
        X, y = _checkerboard_split(rng, size)
        out.append(LabeledDataset(X, y, split, "checkerboard", seed))
    return tuple(out)


# --------------------------------------------------------------------------
# symmetric donuts


def donut_label(point) -> int:
    x, y = point
    if x >= 0:
        center, inner_label = (1.0, 0.0), 1
    else:
        center, inner_label = (-1.0, 0.0), -1
    r = math.hypot(x - center[0], y - center[1])
    return inner_label if r < DONUT_INNER else -inner_label


def _ring_points(rng, k, r_lo, r_hi, center):
    # area-uniform radius on the annulus r_lo <= r < r_hi
    u = rng.uniform(size=k)
    r = np.sqrt(r_lo**2 + u * (r_hi**2 - r_lo**2))
    phi = rng.uniform(0, 2 * np.pi, k)
    return np.column_stack([center[0] + r * np.cos(phi), center[1] + r * np.sin(phi)])


def gen_symmetric_donuts(seed: int = 0, size: int = DONUTS_SIZE):
    """Two disks centered at ``(+-1, 0)`` with swapped inner/outer labels.

    Inside each disk of radius sqrt(2)/2 the inner disk of radius 1/2
    carries exactly half the area, so each split draws ``size / 4`` points
    from each of the four regions; this is uniform disk sampling
    conditioned on exact class balance.
    """
    if size % 4:
        raise ValueError("size must be divisible by 4")
    rng = np.random.default_rng(seed)
    out = []
    k = size // 4
    for split in ("train", "test"):
        parts, labels = [], []
        for center, inner_label in (((1.0, 0.0), 1), ((-1.0, 0.0), -1)):
            parts.append(_ring_points(rng, k, 0.0, DONUT_INNER, center))
            labels += [inner_label] * k
            parts.append(_ring_points(rng, k, DONUT_INNER, DONUT_RADIUS, center))
            labels += [-inner_label] * k
        X = np.vstack(parts)
        y = np.array(labels)
        perm = rng.permutation(len(y))
        out.append(LabeledDataset(X[perm], y[perm], split, "donuts", seed))
    return tuple(out)


# --------------------------------------------------------------------------
# MNIST


def _open(path):
    path = Path(path)
    if path.suffix == ".gz":
        return gzip.open(path, "rb")
    return open(path, "rb")


def read_idx_images(path) -> np.ndarray:
    """IDX image file (magic 0x00000803) as float array scaled to [0, 1]."""
    with _open(path) as fh:
        header = fh.read(16)
        if len(header) < 16:
            raise ValueError(f"{path}: truncated IDX header")
        magic, count, rows, cols = struct.unpack(">IIII", header)
        if magic != 0x00000803:
            raise ValueError(f"{path}: bad magic 0x{magic:08x} for an image file")
        raw = fh.read()
    if len(raw) != count * rows * cols:
        raise ValueError(f"{path}: expected {count * rows * cols} pixel bytes, got {len(raw)}")
    return np.frombuffer(raw, dtype=np.uint8).reshape(count, rows, cols) / 255.0


def read_idx_labels(path) -> np.ndarray:
    """IDX label file (magic 0x00000801)."""
    with _open(path) as fh:
        header = fh.read(8)
        if len(header) < 8:
            raise ValueError(f"{path}: truncated IDX header")
        magic, count = struct.unpack(">II", header)
        if magic != 0x00000801:
            raise ValueError(f"{path}: bad magic 0x{magic:08x} for a label file")
        raw = fh.read()
    if len(raw) != count:
        raise ValueError(f"{path}: expected {count} labels, got {len(raw)}")
    return np.frombuffer(raw, dtype=np.uint8).copy()


def write_idx(images_path, labels_path, images, labels):
    """Write uint8 images (count, rows, cols) and labels in IDX format."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">IIII", 0x00000803, *images.shape))
        fh.write(images.tobytes())
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">II", 0x00000801, len(labels)))
        fh.write(labels.tobytes())


PIXEL_THRESHOLD = 0.95


def _bright_pixels(image: np.ndarray) -> np.ndarray:
    return np.argwhere(image > PIXEL_THRESHOLD)


def sample_bright_pixels(image, k: int, rng) -> np.ndarray:
    """``k`` distinct normalized coordinates of pixels brighter than 0.95."""
    image = np.asarray(image, dtype=float)
    bright = _bright_pixels(image)
    if len(bright) < k:
        raise ValueError(f"image has only {len(bright)} pixels above {PIXEL_THRESHOLD}, need {k}")
    pick = bright[rng.choice(len(bright), k, replace=False)]
    h, w = image.shape
    return np.column_stack([pick[:, 0] / (h - 1), pick[:, 1] / (w - 1)])


@dataclass
class PixelPools:
    zero_base: np.ndarray
    one_base: np.ndarray
    zero: np.ndarray
    one: np.ndarray
    not_zero: np.ndarray
    not_one: np.ndarray
    source_ids: dict = field(default_factory=dict)


def _set_difference(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    excluded = {tuple(row) for row in b}
    keep = [k for k, row in enumerate(a) if tuple(row) not in excluded]
    return a[keep]


def load_mnist_pixels(images_path, labels_path, seed: int = 0, n_images: int = 500,
                      pixels_per_image: int = 3) -> PixelPools:
    """Build the zero/one coordinate pools from MNIST IDX files.

    ``n_images`` random images of each digit contribute
    ``pixels_per_image`` bright-pixel coordinates to the zero-base and
    one-base pools. ``zero`` keeps the zero-base coordinates absent from
    one-base (and symmetrically for ``one``); ``not_zero`` copies
    one-base and ``not_one`` copies zero-base.
    """
    images = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if len(images) != len(labels):
        raise ValueError("image and label counts differ")
    rng = np.random.default_rng(seed)
    pools, ids = {}, {}
    for digit in (0, 1):
        candidates = rng.permutation(np.flatnonzero(labels == digit))
        coords, used = [], []
        for idx in candidates:
            if len(used) == n_images:
                break
            if len(_bright_pixels(images[idx])) < pixels_per_image:
                continue   # too few qualifying pixels: draw another image
            coords.append(sample_bright_pixels(images[idx], pixels_per_image, rng))
            used.append(int(idx))
        if len(used) < n_images:
            raise ValueError(f"only {len(used)} usable images of digit {digit}, need {n_images}")
        pools[digit] = np.vstack(coords)
        ids[digit] = np.repeat(used, pixels_per_image)
    zero_base, one_base = pools[0], pools[1]
    return PixelPools(
        zero_base=zero_base,
        one_base=one_base,
        zero=_set_difference(zero_base, one_base),
        one=_set_difference(one_base, zero_base),
        not_zero=one_base.copy(),
        not_one=zero_base.copy(),
        source_ids={"zero_base": ids[0], "one_base": ids[1]},
    )


def mnist_task(pools: PixelPools, task: str, size: int, seed: int = 0, split: str = "train"):
    """Balanced "zero vs not-zero" or "one vs not-one" dataset drawn from the pools."""
    if task == "zero":
        pos, neg = pools.zero, pools.not_zero
    elif task == "one":
        pos, neg = pools.one, pools.not_one
    else:
        raise ValueError(f"task must be 'zero' or 'one', got {task!r}")
    rng = np.random.default_rng(seed)
    k = size // 2
    if len(pos) < k or len(neg) < size - k:
        raise ValueError("pools too small for the requested dataset size")
    X = np.vstack([pos[rng.choice(len(pos), k, replace=False)],
                   neg[rng.choice(len(neg), size - k, replace=False)]])
    y = np.array([1] * k + [-1] * (size - k))
    perm = rng.permutation(size)
    return LabeledDataset(X[perm], y[perm], split, f"mnist-{task}", seed)


# --------------------------------------------------------------------------
# ensemble


ENSEMBLE_PIXELS = 15
VOTE_MARGIN = 2


def pixel_votes(coords, zero_classifier: Callable, one_classifier: Callable) -> np.ndarray:
    """Per-pixel votes: 0, 1, or -1 for abstain.

    A pixel votes 0 when the zero model says "zero" and the one model says
    "not one"; it votes 1 in the mirrored case; otherwise it abstains.
    """
    z = np.asarray(zero_classifier(coords))
    o = np.asarray(one_classifier(coords))
    votes = np.full(len(coords), -1)
    votes[(z == 1) & (o == -1)] = 0
    votes[(o == 1) & (z == -1)] = 1
    return votes


def majority_vote(votes) -> int | None:
    """Winning class, or None when it leads by fewer than two votes."""
    votes = np.asarray(votes)
    n0, n1 = int(np.sum(votes == 0)), int(np.sum(votes == 1))
    if abs(n0 - n1) < VOTE_MARGIN:
        return None
    return 0 if n0 > n1 else 1


def ensemble_classify(image, zero_classifier: Callable, one_classifier: Callable,
                      seed: int = 0, max_retries: int = 10) -> int:
    """Classify an image as digit 0 or 1 by a majority vote over bright pixels.

    ``zero_classifier`` and ``one_classifier`` map an (k, 2) coordinate
    array to +-1 labels ("zero"/"not zero" and "one"/"not one"). Votes
    with a margin below two trigger a resample of the pixels.
    """
    image = np.asarray(image, dtype=float)
    if image.max() > 1.0:
        image = image / 255.0
    rng = np.random.default_rng(seed)
    for _ in range(max_retries + 1):
        coords = sample_bright_pixels(image, ENSEMBLE_PIXELS, rng)
        decision = majority_vote(pixel_votes(coords, zero_classifier, one_classifier))
        if decision is not None:
            return decision
    raise Undecided(f"vote margin stayed below {VOTE_MARGIN} after {max_retries} resamples")
