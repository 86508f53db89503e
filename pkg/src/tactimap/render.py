"""Back-projection of labelled activations onto the neuron grid, plus PPM output.

Summing each neuron's activation over all points that ended up with a given
word shows which words drive which neurons; painting the per-neuron dominant
word on the 7x24 grid gives a crude map of the learned body representation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .homunculus import GRID_SHAPE
from .skin import CANONICAL_LABELS, BodyPartLabel

DEFAULT_PALETTE: dict[BodyPartLabel, tuple[int, int, int]] = {
    BodyPartLabel.TORSO: (204, 51, 51),
    BodyPartLabel.UPPER_ARM: (230, 138, 46),
    BodyPartLabel.FOREARM: (230, 211, 46),
    BodyPartLabel.PALM: (77, 184, 77),
    BodyPartLabel.LITTLE_FINGER: (46, 184, 184),
    BodyPartLabel.RING_FINGER: (51, 119, 230),
    BodyPartLabel.MIDDLE_FINGER: (128, 77, 230),
    BodyPartLabel.INDEX_FINGER: (217, 84, 217),
    BodyPartLabel.THUMB: (153, 153, 153),
}


@dataclass
class BackProjection:
    """Per-neuron activation mass accumulated under each word."""

    strengths: np.ndarray
    labels: tuple[BodyPartLabel, ...] = CANONICAL_LABELS
    grid_shape: tuple[int, int] = GRID_SHAPE

    def __post_init__(self) -> None:
        s = np.asarray(self.strengths, dtype=float)
        if s.ndim != 2 or s.shape[1] != len(self.labels):
            raise ValueError("strengths must be neurons x labels")
        if s.shape[0] != self.grid_shape[0] * self.grid_shape[1]:
            raise ValueError("strengths do not fill the neuron grid")
        if np.any(s < 0):
            raise ValueError("activation mass must be >= 0")
        self.strengths = s

    def dominant(self) -> list[BodyPartLabel | None]:
        """Strongest word per neuron; None where no mass arrived."""
        out: list[BodyPartLabel | None] = []
        for row in self.strengths:
            out.append(self.labels[int(np.argmax(row))] if row.max() > 0 else None)
        return out


def back_project(
    activations: np.ndarray,
    predicted: Sequence[BodyPartLabel | None],
    labels: tuple[BodyPartLabel, ...] = CANONICAL_LABELS,
    grid_shape: tuple[int, int] = GRID_SHAPE,
) -> BackProjection:
    """Accumulate each point's neuron activations under its predicted word."""
    x = np.asarray(activations, dtype=float)
    if x.ndim != 2:
        raise ValueError("activations must be a 2-D array")
    if len(x) != len(predicted):
        raise ValueError("activations and predictions must align")
    index = {label: k for k, label in enumerate(labels)}
    strengths = np.zeros((x.shape[1], len(labels)))
    for k, label in enumerate(labels):
        mask = [p is label for p in predicted]
        if any(mask):
            strengths[:, k] = x[mask].sum(axis=0)
    # Complain about predictions outside the label set instead of dropping
    # mass silently (None is allowed and contributes nothing).
    for p in predicted:
        if p is not None and p not in index:
            raise ValueError(f"prediction {p!r} is not in the label set")
    return BackProjection(strengths, labels, grid_shape)


def render_heatmap(
    projection: BackProjection,
    palette: dict[BodyPartLabel, tuple[int, int, int]] | None = None,
    scale: int = 16,
) -> np.ndarray:
    """Paint the dominant word per neuron; brightness follows total mass.

    Neurons fill the grid column by column, mirroring the body axis from
    torso to thumb along the sheet.  Returns an RGB byte image.
    """
    if scale < 1:
        raise ValueError("scale must be >= 1")
    if palette is None:
        palette = DEFAULT_PALETTE
    rows, cols = projection.grid_shape
    totals = projection.strengths.sum(axis=1)
    top = totals.max()
    image = np.zeros((rows, cols, 3), dtype=np.uint8)
    for neuron, label in enumerate(projection.dominant()):
        r, c = neuron % rows, neuron // rows
        if label is None or top <= 0:
            continue
        color = np.array(palette[label], dtype=float)
        level = 0.25 + 0.75 * (totals[neuron] / top)
        image[r, c] = np.clip(color * level, 0, 255).astype(np.uint8)
    return np.kron(image, np.ones((scale, scale, 1), dtype=np.uint8))


def write_ppm(path: str, image: np.ndarray) -> None:
    """Write an RGB byte image as binary PPM (P6)."""
    img = np.asarray(image)
    if img.ndim != 3 or img.shape[2] != 3 or img.dtype != np.uint8:
        raise ValueError("image must be an RGB uint8 array")
    height, width = img.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{width} {height}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def save_backprojection(path: str, projection: BackProjection) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# neurons {projection.strengths.shape[0]}\n")
        fh.write(f"# grid {projection.grid_shape[0]}x{projection.grid_shape[1]}\n")
        fh.write("# labels " + "|".join(l.value for l in projection.labels) + "\n")
        for row in projection.strengths:
            fh.write(" ".join(format(v, ".17g") for v in row) + "\n")


def load_backprojection(path: str) -> BackProjection:
    header: dict[str, str] = {}
    rows: list[list[float]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition(" ")
                header[key] = value
            else:
                rows.append([float(v) for v in line.split()])
    if not rows:
        raise ValueError("back-projection file holds no matrix")
    labels = CANONICAL_LABELS
    if "labels" in header:
        from .skin import label_from_string

        labels = tuple(label_from_string(v) for v in header["labels"].split("|"))
    grid = GRID_SHAPE
    if "grid" in header:
        r, _, c = header["grid"].partition("x")
        grid = (int(r), int(c))
    return BackProjection(np.array(rows), labels, grid)
