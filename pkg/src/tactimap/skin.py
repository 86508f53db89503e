"""Synthetic artificial-skin stimulation with ground-truth body part labels.

The skin is a flat array of binary taxels grouped into four stimulable
parts (torso, upper arm, forearm, hand).  A stimulation event touches one
fixed region of a part (a 10-taxel module, a palm subregion or a whole
fingertip) and is sampled repeatedly while the touch lasts, so one event
yields a short run of identical binary activation vectors sharing a
ground-truth label.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

N_TAXELS = 1154
SAMPLES_PER_STIMULATION = 30


class BodyPartLabel(Enum):
    """Ground-truth label vocabulary, one entry per nameable body part."""

    TORSO = "torso"
    UPPER_ARM = "upper arm"
    FOREARM = "forearm"
    PALM = "palm"
    LITTLE_FINGER = "little finger"
    RING_FINGER = "ring finger"
    MIDDLE_FINGER = "middle finger"
    INDEX_FINGER = "index finger"
    THUMB = "thumb"


# Canonical label order used for report columns and vocabulary indexing.
CANONICAL_LABELS: tuple[BodyPartLabel, ...] = tuple(BodyPartLabel)

_LABEL_BY_VALUE = {label.value: label for label in BodyPartLabel}


def label_from_string(value: str) -> BodyPartLabel:
    try:
        return _LABEL_BY_VALUE[value]
    except KeyError:
        raise ValueError(f"unknown body part label: {value!r}") from None


@dataclass(frozen=True)
class StimulationRegion:
    """A fixed set of taxels touched together, with its ground-truth label."""

    taxels: tuple[int, ...]
    label: BodyPartLabel


@dataclass(frozen=True)
class SkinLayout:
    """Taxel ranges of the stimulable skin parts and their touch regions.

    ``parts`` maps each part name to the contiguous taxel range it owns;
    ``stimulation_regions`` holds, aligned with ``parts``, the regions a
    stimulation event may pick within that part.
    """

    parts: tuple[tuple[str, range], ...]
    stimulation_regions: tuple[tuple[StimulationRegion, ...], ...]

    def __post_init__(self) -> None:
        if len(self.parts) != len(self.stimulation_regions):
            raise ValueError("parts and stimulation_regions must align")
        seen: set[int] = set()
        for (name, taxel_range), regions in zip(self.parts, self.stimulation_regions):
            if len(taxel_range) == 0:
                raise ValueError(f"part {name!r} owns no taxels")
            if seen.intersection(taxel_range):
                raise ValueError(f"part {name!r} overlaps another part")
            seen.update(taxel_range)
            if not regions:
                raise ValueError(f"part {name!r} has no stimulation regions")
            for region in regions:
                if not region.taxels:
                    raise ValueError(f"empty stimulation region in {name!r}")
                if not set(region.taxels) <= set(taxel_range):
                    raise ValueError(f"region leaves its part {name!r}")

    @property
    def n_taxels(self) -> int:
        return max(r.stop for _, r in self.parts)

    @property
    def part_names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.parts)

    def part_range(self, name: str) -> range:
        for part_name, taxel_range in self.parts:
            if part_name == name:
                return taxel_range
        raise KeyError(name)

    def part_of_taxel(self, taxel: int) -> str:
        for part_name, taxel_range in self.parts:
            if taxel in taxel_range:
                return part_name
        raise ValueError(f"taxel {taxel} belongs to no part")

    def label_pools(self) -> tuple[tuple[BodyPartLabel, range], ...]:
        """Contiguous taxel range per label, in taxel order.

        Regions carrying the same label are contiguous by construction, so
        each label owns one range.  Used by the receptive-field generator.
        """
        pools: list[tuple[BodyPartLabel, range]] = []
        for regions in self.stimulation_regions:
            by_label: dict[BodyPartLabel, list[int]] = {}
            for region in regions:
                by_label.setdefault(region.label, []).extend(region.taxels)
            for label, taxels in by_label.items():
                lo, hi = min(taxels), max(taxels) + 1
                if len(taxels) != hi - lo:
                    raise ValueError(f"label {label.value!r} pool is not contiguous")
                pools.append((label, range(lo, hi)))
        pools.sort(key=lambda item: item[1].start)
        return tuple(pools)

    def layout_hash(self) -> str:
        digest = hashlib.sha256()
        for (name, taxel_range), regions in zip(self.parts, self.stimulation_regions):
            digest.update(f"{name}:{taxel_range.start}:{taxel_range.stop}\n".encode())
            for region in regions:
                body = ",".join(map(str, region.taxels))
                digest.update(f"{region.label.value}|{body}\n".encode())
        return digest.hexdigest()[:12]


def _block_regions(start: int, count: int, width: int, label: BodyPartLabel) -> list[StimulationRegion]:
    return [
        StimulationRegion(tuple(range(start + i * width, start + (i + 1) * width)), label)
        for i in range(count)
    ]


def default_layout() -> SkinLayout:
    """1154-taxel skin: torso 440, upper arm 380, forearm 230, hand 104.

    Trunk and arm parts expose 10-taxel modules; the hand exposes five palm
    subregions (9+9+9+9+8 taxels) and five whole 12-taxel fingertips.
    """
    torso = _block_regions(0, 44, 10, BodyPartLabel.TORSO)
    upper_arm = _block_regions(440, 38, 10, BodyPartLabel.UPPER_ARM)
    forearm = _block_regions(820, 23, 10, BodyPartLabel.FOREARM)

    hand: list[StimulationRegion] = []
    cursor = 1050
    for size in (9, 9, 9, 9, 8):
        hand.append(StimulationRegion(tuple(range(cursor, cursor + size)), BodyPartLabel.PALM))
        cursor += size
    for label in CANONICAL_LABELS[4:]:
        hand.append(StimulationRegion(tuple(range(cursor, cursor + 12)), label))
        cursor += 12
    assert cursor == N_TAXELS

    return SkinLayout(
        parts=(
            ("torso", range(0, 440)),
            ("upper arm", range(440, 820)),
            ("forearm", range(820, 1050)),
            ("hand", range(1050, 1154)),
        ),
        stimulation_regions=(tuple(torso), tuple(upper_arm), tuple(forearm), tuple(hand)),
    )


@dataclass(frozen=True)
class TaxelSample:
    """One binary skin snapshot: which taxels are active, and the true label.

    ``stimulation_id`` ties together the samples recorded during a single
    touch; they share identical activation and label.
    """

    active: tuple[int, ...]
    label: BodyPartLabel
    stimulation_id: int
    n_taxels: int = N_TAXELS

    def activation(self) -> np.ndarray:
        """Dense 0/1 activation vector."""
        a = np.zeros(self.n_taxels, dtype=float)
        a[list(self.active)] = 1.0
        return a


def generate_stimulation(layout: SkinLayout, rng: np.random.Generator) -> StimulationRegion:
    """Pick a part uniformly, then one of its regions uniformly."""
    part_idx = int(rng.integers(len(layout.parts)))
    regions = layout.stimulation_regions[part_idx]
    return regions[int(rng.integers(len(regions)))]


def generate_dataset(
    layout: SkinLayout,
    n_stimulations: int,
    samples_per_stimulation: int = SAMPLES_PER_STIMULATION,
    rng: np.random.Generator | None = None,
) -> list[TaxelSample]:
    """Simulate a stream of touches, each held for several samples."""
    if n_stimulations < 1:
        raise ValueError("n_stimulations must be >= 1")
    if samples_per_stimulation < 1:
        raise ValueError("samples_per_stimulation must be >= 1")
    if rng is None:
        rng = np.random.default_rng()
    n_taxels = layout.n_taxels
    data: list[TaxelSample] = []
    for stim_id in range(n_stimulations):
        region = generate_stimulation(layout, rng)
        sample = TaxelSample(region.taxels, region.label, stim_id, n_taxels)
        data.extend([sample] * samples_per_stimulation)
    return data


def subsample(
    data: Sequence[TaxelSample], n: int, rng: np.random.Generator
) -> list[TaxelSample]:
    """Uniform subsample without replacement, preserving stream order."""
    if not 1 <= n <= len(data):
        raise ValueError(f"subsample size {n} out of range 1..{len(data)}")
    idx = rng.choice(len(data), size=n, replace=False)
    idx.sort()
    return [data[i] for i in idx]


def save_dataset(
    path: str,
    data: Sequence[TaxelSample],
    layout: SkinLayout,
    seed: int | None = None,
) -> None:
    """Write one sample per line: stimulation id, label, active taxels."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# taxels {layout.n_taxels}\n")
        fh.write(f"# layout {layout.layout_hash()}\n")
        if seed is not None:
            fh.write(f"# seed {seed}\n")
        fh.write(f"# samples {len(data)}\n")
        for sample in data:
            taxels = ",".join(map(str, sample.active))
            fh.write(f"{sample.stimulation_id}\t{sample.label.value}\t{taxels}\n")


def load_dataset(path: str) -> tuple[list[TaxelSample], dict[str, str]]:
    """Read a dataset file back; returns the samples and the header fields."""
    header: dict[str, str] = {}
    data: list[TaxelSample] = []
    n_taxels = N_TAXELS
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition(" ")
                header[key] = value
                if key == "taxels":
                    n_taxels = int(value)
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise ValueError(f"malformed dataset line: {line!r}")
            stim_id, label_value, taxels = fields
            active = tuple(int(t) for t in taxels.split(",") if t)
            if not active:
                raise ValueError(f"sample with no active taxels: {line!r}")
            if min(active) < 0 or max(active) >= n_taxels:
                raise ValueError(f"taxel index out of range: {line!r}")
            data.append(
                TaxelSample(active, label_from_string(label_value), int(stim_id), n_taxels)
            )
    return data, header


def dataset_labels(data: Iterable[TaxelSample]) -> list[BodyPartLabel]:
    return [sample.label for sample in data]
