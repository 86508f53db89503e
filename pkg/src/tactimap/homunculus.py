"""Projection of skin activations onto a small topographic neuron sheet.

Each neuron owns a receptive field of taxels with uniform weights; the
response to a binary skin snapshot is the weighted sum of active taxels.
A surrogate weight generator lays the neurons out along the body surface
with the per-part proportions of a somatotopic map: every neuron covers a
contiguous window of taxels inside its body part, windows of neighbouring
neurons overlap, and an ``overlap`` knob lets windows leak across part
boundaries to blur the map.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .skin import BodyPartLabel, SkinLayout, TaxelSample, default_layout

N_NEURONS = 168
GRID_SHAPE = (7, 24)

# Receptive-field geometry.  Windows span half their region on either side
# of the neuron's slice, so every touch inside a region drives most of that
# region's neurons and regions form tight activation clusters.  Overlap
# lets windows cross region boundaries by an absolute taxel reach: small
# regions (fingertips) blur into each other long before large ones do.
# Within a part, regions split its neurons by a sub-linear power of their
# taxel counts, so every fingertip keeps at least two neurons.
PEDESTAL_FRAC = 0.55
OVERLAP_REACH = 40.0
MAGNIFICATION_EXP = 0.75


@dataclass(frozen=True)
class HomunculusWeights:
    """Non-negative weight matrix, one row per neuron on a fixed grid."""

    weights: np.ndarray
    grid_shape: tuple[int, int] = GRID_SHAPE

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 2:
            raise ValueError("weights must be a 2-D matrix")
        rows, cols = w.shape
        if rows != self.grid_shape[0] * self.grid_shape[1]:
            raise ValueError(
                f"{rows} rows do not fill a {self.grid_shape[0]}x{self.grid_shape[1]} grid"
            )
        if cols < 1:
            raise ValueError("weights must cover at least one taxel")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        if np.any(w < 0):
            raise ValueError("weights must be non-negative")
        object.__setattr__(self, "weights", w)

    @property
    def n_neurons(self) -> int:
        return self.weights.shape[0]

    @property
    def n_taxels(self) -> int:
        return self.weights.shape[1]

    def grid_position(self, neuron: int) -> tuple[int, int]:
        """(row, column) of a neuron; neurons fill the grid column by column."""
        rows = self.grid_shape[0]
        return neuron % rows, neuron // rows


def largest_remainder_counts(weights: Sequence[float], total: int) -> list[int]:
    """Split ``total`` into integer counts proportional to ``weights``."""
    if total < 0:
        raise ValueError("total must be >= 0")
    weights = [float(w) for w in weights]
    if any(w < 0 for w in weights) or sum(weights) <= 0:
        raise ValueError("weights must be non-negative with positive sum")
    quotas = [total * w / sum(weights) for w in weights]
    counts = [int(q) for q in quotas]
    order = sorted(range(len(weights)), key=lambda i: (counts[i] - quotas[i], i))
    for i in order[: total - sum(counts)]:
        counts[i] += 1
    return counts


def default_allocation(layout: SkinLayout, n_neurons: int = N_NEURONS) -> dict[str, int]:
    """Neurons per part, proportional to taxel counts (largest remainder)."""
    sizes = [len(taxel_range) for _, taxel_range in layout.parts]
    counts = largest_remainder_counts(sizes, n_neurons)
    return {name: count for (name, _), count in zip(layout.parts, counts)}


def _balanced_slices(taxel_range: range, n_slices: int) -> list[range]:
    size = len(taxel_range)
    if n_slices > size:
        raise ValueError(f"{n_slices} neurons cannot tile {size} taxels")
    base, extra = divmod(size, n_slices)
    slices = []
    start = taxel_range.start
    for i in range(n_slices):
        width = base + (1 if i < extra else 0)
        slices.append(range(start, start + width))
        start += width
    return slices


def surrogate_weights(
    layout: SkinLayout | None = None,
    allocation: dict[str, int] | None = None,
    overlap: float = 0.0,
    rng: np.random.Generator | None = None,
    n_neurons: int = N_NEURONS,
    grid_shape: tuple[int, int] = GRID_SHAPE,
) -> HomunculusWeights:
    """Build topographic receptive fields over the skin.

    Each nameable region's neurons tile its taxel range with contiguous
    slices; a neuron's field is its slice grown on both sides by half the
    region width (randomly jittered), so any touch in the region drives
    most of the region's neurons.  With ``overlap`` = 0 fields never leave
    their region and parts have disjoint supports; larger values let
    windows cross up to ``overlap * OVERLAP_REACH`` taxels into the
    neighbouring regions along the body.
    """
    if layout is None:
        layout = default_layout()
    if not 0.0 <= overlap < 1.0:
        raise ValueError("overlap must be in [0, 1)")
    if rng is None:
        rng = np.random.default_rng()
    if allocation is None:
        allocation = default_allocation(layout, n_neurons)
    if set(allocation) != set(layout.part_names):
        raise ValueError("allocation must name exactly the layout parts")
    if sum(allocation.values()) != n_neurons:
        raise ValueError(f"allocation must sum to {n_neurons}")
    if any(count < 1 for count in allocation.values()):
        raise ValueError("every part needs at least one neuron")

    # Neurons are assigned to nameable regions (pools): whole parts for the
    # trunk and arm, palm plus individual fingertips inside the hand.
    pools = layout.label_pools()
    pool_alloc: list[tuple[range, int]] = []
    for part_name, part_range in layout.parts:
        part_pools = [r for _, r in pools if r.start >= part_range.start and r.stop <= part_range.stop]
        # Sub-linear magnification: small dense regions (fingertips) claim
        # more neurons than their raw taxel share, as in cortical maps.
        magnified = [len(r) ** MAGNIFICATION_EXP for r in part_pools]
        counts = largest_remainder_counts(magnified, allocation[part_name])
        if 0 in counts:
            raise ValueError(
                f"part {part_name!r} needs at least {len(part_pools)} neurons to cover its regions"
            )
        pool_alloc.extend(zip(part_pools, counts))

    n_taxels = layout.n_taxels
    cross = int(round(overlap * OVERLAP_REACH))
    rows: list[np.ndarray] = []
    for pool_range, count in pool_alloc:
        slices = _balanced_slices(pool_range, count)
        slice_w = len(pool_range) / count
        ext = int(round(len(pool_range) * PEDESTAL_FRAC + overlap * OVERLAP_REACH))
        jmax = max(1, int(round(slice_w / 2)))
        lo_clip = max(0, pool_range.start - cross)
        hi_clip = min(n_taxels, pool_range.stop + cross)
        for sl in slices:
            ext_lo = max(0, ext - int(rng.integers(0, jmax + 1)))
            ext_hi = max(0, ext - int(rng.integers(0, jmax + 1)))
            lo = max(lo_clip, sl.start - ext_lo)
            hi = min(hi_clip, sl.stop + ext_hi)
            row = np.zeros(n_taxels)
            row[lo:hi] = 1.0 / (hi - lo)
            rows.append(row)

    return HomunculusWeights(np.vstack(rows), grid_shape)


def project(weights: HomunculusWeights, sample: TaxelSample) -> np.ndarray:
    """Neuron response vector for one skin snapshot."""
    if sample.n_taxels != weights.n_taxels:
        raise ValueError(
            f"sample has {sample.n_taxels} taxels, weights expect {weights.n_taxels}"
        )
    return weights.weights[:, list(sample.active)].sum(axis=1)


def batch_project(
    weights: HomunculusWeights, data: Iterable[TaxelSample]
) -> list[tuple[np.ndarray, BodyPartLabel]]:
    """Project a sample stream; repeated snapshots share one computed vector."""
    cache: dict[tuple[int, ...], np.ndarray] = {}
    out: list[tuple[np.ndarray, BodyPartLabel]] = []
    for sample in data:
        x = cache.get(sample.active)
        if x is None:
            x = project(weights, sample)
            cache[sample.active] = x
        out.append((x, sample.label))
    return out


def activation_matrix(
    weights: HomunculusWeights, data: Sequence[TaxelSample]
) -> np.ndarray:
    """Stacked neuron responses, one row per sample."""
    projected = batch_project(weights, data)
    if not projected:
        return np.zeros((0, weights.n_neurons))
    return np.vstack([x for x, _ in projected])


def save_weights(
    path: str,
    weights: HomunculusWeights,
    seed: int | None = None,
    overlap: float | None = None,
) -> None:
    w = weights.weights
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# rows {w.shape[0]}\n")
        fh.write(f"# cols {w.shape[1]}\n")
        fh.write(f"# grid {weights.grid_shape[0]}x{weights.grid_shape[1]}\n")
        if seed is not None:
            fh.write(f"# seed {seed}\n")
        if overlap is not None:
            fh.write(f"# overlap {overlap!r}\n")
        for row in w:
            fh.write(" ".join(format(v, ".17g") for v in row) + "\n")


def load_weights(path: str) -> tuple[HomunculusWeights, dict[str, str]]:
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
                continue
            rows.append([float(v) for v in line.split()])
    if not rows:
        raise ValueError("weight file holds no matrix")
    matrix = np.array(rows)
    grid = header.get("grid")
    if grid:
        r, _, c = grid.partition("x")
        shape = (int(r), int(c))
    else:
        shape = GRID_SHAPE
    if "rows" in header and int(header["rows"]) != matrix.shape[0]:
        raise ValueError("row count does not match header")
    if "cols" in header and int(header["cols"]) != matrix.shape[1]:
        raise ValueError("column count does not match header")
    return HomunculusWeights(matrix, shape), header
