"""Perceptual hashes and Hamming-distance DBSCAN for near-duplicate images.

pHash procedure (bit-exact, so hashes are stable across runs):

1. convert to 8-bit grayscale (``PIL`` mode ``"L"``);
2. resize to 32x32 with Lanczos resampling;
3. 2-D type-II DCT (unnormalized) over rows then columns;
4. keep the top-left 8x8 block of low frequencies;
5. bit ``i`` (row-major, most significant first) is 1 iff coefficient
   ``i`` exceeds the median of the 64 block coefficients.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from PIL import Image, UnidentifiedImageError
from scipy.fft import dct

HASH_BITS = 64
DBSCAN_EPS = 10
DBSCAN_MIN_POINTS = 2


class ImageDecodeError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class ImageHash64:
    bits: int
    source_image: str = ""

    def __post_init__(self):
        if not 0 <= self.bits < 1 << HASH_BITS:
            raise ValueError("hash must fit in 64 bits")

    @property
    def hex(self) -> str:
        return f"{self.bits:016x}"

    @classmethod
    def from_hex(cls, text: str, source_image: str = "") -> "ImageHash64":
        return cls(int(text, 16), source_image)

    def __sub__(self, other: "ImageHash64") -> int:
        return hamming(self.bits, other.bits)


def hamming(a: int, b: int) -> int:
    return bin(a ^ b).count("1")


def _open(image) -> Image.Image:
    if isinstance(image, Image.Image):
        return image
    if isinstance(image, np.ndarray):
        return Image.fromarray(image)
    try:
        with Image.open(image) as im:
            im.load()
            return im.copy()
    except (UnidentifiedImageError, OSError) as exc:
        raise ImageDecodeError(f"cannot decode image {image!r}: {exc}") from exc


def phash64(image, source_image: str = "") -> ImageHash64:
    """64-bit perceptual hash of a PIL image, pixel array or image file."""
    im = _open(image).convert("L").resize((32, 32), Image.Resampling.LANCZOS)
    pixels = np.asarray(im, dtype=np.float64)
    coeffs = dct(dct(pixels, axis=0), axis=1)
    block = coeffs[:8, :8]
    bits = (block > np.median(block)).ravel()
    value = 0
    for b in bits:
        value = (value << 1) | int(b)
    return ImageHash64(value, source_image or (str(image) if isinstance(image, (str, Path)) else ""))


def hamming_matrix(values: Sequence[int]) -> np.ndarray:
    """Pairwise Hamming distances of 64-bit integers as an (n, n) int matrix."""
    arr = np.asarray([int(v) for v in values], dtype=np.uint64)
    x = arr[:, None] ^ arr[None, :]
    as_bytes = x.view(np.uint8).reshape(len(arr), len(arr), 8)
    return np.unpackbits(as_bytes, axis=2).sum(axis=2).astype(np.int64)


@dataclass
class ImageCluster:
    members: list[ImageHash64]
    medoid: ImageHash64


def medoid(members: Sequence[ImageHash64]) -> ImageHash64:
    """Member with the least mean Hamming distance to the others; ties -> smallest hash."""
    if not members:
        raise ValueError("empty cluster")
    D = hamming_matrix([m.bits for m in members])
    totals = D.sum(axis=1)
    best = totals.min()
    return min(m for m, t in zip(members, totals) if t == best)


def dbscan_hamming(
    values: Sequence[int],
    eps: int = DBSCAN_EPS,
    min_points: int = DBSCAN_MIN_POINTS,
) -> np.ndarray:
    """DBSCAN labels (-1 for noise) under the Hamming metric.

    Two hashes are neighbours iff their distance is strictly below ``eps``.
    A point is core when it has at least ``min_points`` neighbours counting
    itself.  Clusters are connected components of core points; a border point
    joins the cluster of its closest core neighbour (ties: smallest hash), so
    the clustering does not depend on input order.  Clusters are numbered by
    their smallest hash.
    """
    n = len(values)
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    D = hamming_matrix(values)
    nbr = D < eps
    core = nbr.sum(axis=1) >= min_points
    comp = np.full(n, -1, dtype=np.int64)
    cid = 0
    for start in np.flatnonzero(core):
        if comp[start] >= 0:
            continue
        stack = [start]
        comp[start] = cid
        while stack:
            i = stack.pop()
            for j in np.flatnonzero(nbr[i] & core):
                if comp[j] < 0:
                    comp[j] = cid
                    stack.append(j)
        cid += 1
    vals = np.asarray([int(v) for v in values], dtype=object)
    for i in np.flatnonzero(~core):
        cands = np.flatnonzero(nbr[i] & core)
        if len(cands):
            best = min(cands, key=lambda j: (D[i, j], vals[j]))
            comp[i] = comp[best]
    # renumber by the smallest member hash
    order = sorted(range(cid), key=lambda c: min(vals[comp == c]))
    remap = {old: new for new, old in enumerate(order)}
    return np.asarray([remap.get(c, -1) for c in comp], dtype=np.int64)


def cluster_images(
    hashes: Sequence[ImageHash64],
    eps: int = DBSCAN_EPS,
    min_points: int = DBSCAN_MIN_POINTS,
) -> tuple[list[ImageCluster], list[ImageHash64]]:
    """Group hashes into near-duplicate clusters; returns (clusters, noise)."""
    labels = dbscan_hamming([h.bits for h in hashes], eps, min_points)
    groups: dict[int, list[ImageHash64]] = {}
    noise = []
    for h, lab in zip(hashes, labels):
        if lab < 0:
            noise.append(h)
        else:
            groups.setdefault(int(lab), []).append(h)
    clusters = []
    for lab in sorted(groups):
        members = sorted(groups[lab])
        clusters.append(ImageCluster(members, medoid(members)))
    return clusters, sorted(noise)


def assign_image(h: ImageHash64, clusters: Sequence[ImageCluster]) -> tuple[int, int]:
    """(cluster id, distance) of the nearest medoid; ties go to the lower id."""
    if not clusters:
        raise ValueError("no clusters to assign to")
    dists = [h - c.medoid for c in clusters]
    best = min(range(len(clusters)), key=lambda i: (dists[i], i))
    return best, dists[best]


IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".gif", ".webp"}


def hash_directory(directory: str | Path) -> list[ImageHash64]:
    """pHash of every image file under ``directory``, keyed by relative path."""
    root = Path(directory)
    out = []
    for p in sorted(root.rglob("*")):
        if p.suffix.lower() in IMAGE_SUFFIXES and p.is_file():
            out.append(phash64(p, p.relative_to(root).as_posix()))
    return out


def write_hash_cache(path: str | Path, hashes: Iterable[ImageHash64]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["content_id", "hex_hash"])
        for h in hashes:
            w.writerow([h.source_image, h.hex])


def read_hash_cache(path: str | Path) -> list[ImageHash64]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [ImageHash64.from_hex(r["hex_hash"], r["content_id"]) for r in csv.DictReader(fh)]


def write_clusters_csv(path: str | Path, clusters: Sequence[ImageCluster], noise: Sequence[ImageHash64]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["content_id", "hex_hash", "cluster", "is_medoid"])
        for cid, c in enumerate(clusters):
            for m in c.members:
                w.writerow([m.source_image, m.hex, cid, int(m == c.medoid)])
        for m in noise:
            w.writerow([m.source_image, m.hex, -1, 0])
