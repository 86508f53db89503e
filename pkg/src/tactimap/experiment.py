"""Experiment harness: run mapping cells over size and noise grids.

A cell fixes (dataset size, noise level, mapper, repetition).  Every cell
draws its own random streams from a seed sequence keyed by those
coordinates, so cells are reproducible in isolation and a sweep's output
is byte-identical across runs of the same configuration.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .gmm import DegenerateDensityError, EmConfig, GmmFitError, assign_hard, fit_em
from .homunculus import HomunculusWeights, project, surrogate_weights
from .lexicon import LabeledUtterance, inject_noise, utterances_from_dataset
from .mapping import (
    MappingResult,
    accumulate,
    one_step_map,
    predict_labels,
    sequential_map,
    vocabulary,
)
from .skin import (
    CANONICAL_LABELS,
    BodyPartLabel,
    SkinLayout,
    TaxelSample,
    default_layout,
    generate_dataset,
    subsample,
)

DEFAULT_SIZES = (64, 638, 3190, 6381, 31903, 63806)
DEFAULT_NOISES = tuple(round(0.1 * i, 1) for i in range(9))

PART_COLUMNS = (
    ("acc_torso", BodyPartLabel.TORSO),
    ("acc_upperarm", BodyPartLabel.UPPER_ARM),
    ("acc_forearm", BodyPartLabel.FOREARM),
    ("acc_palm", BodyPartLabel.PALM),
    ("acc_little", BodyPartLabel.LITTLE_FINGER),
    ("acc_ring", BodyPartLabel.RING_FINGER),
    ("acc_middle", BodyPartLabel.MIDDLE_FINGER),
    ("acc_index", BodyPartLabel.INDEX_FINGER),
    ("acc_thumb", BodyPartLabel.THUMB),
)

RECORDS_HEADER = (
    "size,noise,mapper,repetition,accuracy,"
    + ",".join(name for name, _ in PART_COLUMNS)
    + ",iterations,flags"
)

AGGREGATE_HEADER = "size,noise,mapper,n,mean_accuracy,std_accuracy"


def accuracy(
    predicted: Sequence[BodyPartLabel | None], ground_truth: Sequence[BodyPartLabel]
) -> float:
    """Fraction of points whose predicted word matches the touched part.

    Unmapped points (None) count as wrong.
    """
    if len(ground_truth) == 0:
        raise ValueError("accuracy of an empty stream is undefined")
    if len(predicted) != len(ground_truth):
        raise ValueError("prediction and ground truth must align")
    hits = sum(p is t for p, t in zip(predicted, ground_truth))
    return hits / len(ground_truth)


def per_part_accuracy(
    predicted: Sequence[BodyPartLabel | None], ground_truth: Sequence[BodyPartLabel]
) -> dict[BodyPartLabel, float]:
    """Accuracy restricted to each part present in the ground truth."""
    if len(predicted) != len(ground_truth):
        raise ValueError("prediction and ground truth must align")
    totals: dict[BodyPartLabel, int] = {}
    hits: dict[BodyPartLabel, int] = {}
    for p, t in zip(predicted, ground_truth):
        totals[t] = totals.get(t, 0) + 1
        if p is t:
            hits[t] = hits.get(t, 0) + 1
    return {label: hits.get(label, 0) / n for label, n in totals.items()}


@dataclass(frozen=True)
class SweepConfig:
    """Full description of a sweep; every run detail hangs off this."""

    sizes: tuple[int, ...] = DEFAULT_SIZES
    noises: tuple[float, ...] = DEFAULT_NOISES
    repetitions: int = 20
    base_seed: int = 0
    mapper: str = "both"
    overlap: float = 0.1
    corpus_stimulations: int = 2127
    samples_per_stimulation: int = 30
    n_components: int = 9
    em: EmConfig = field(default_factory=EmConfig)
    decay: float = 1.0
    noise_mode: str = "permute"
    sequential_mode: str = "refit"
    allocation: dict[str, int] | None = None

    def __post_init__(self) -> None:
        if not self.sizes or not self.noises:
            raise ValueError("sweep needs at least one size and one noise level")
        corpus = self.corpus_stimulations * self.samples_per_stimulation
        if any(not 1 <= s <= corpus for s in self.sizes):
            raise ValueError(f"sizes must lie in 1..{corpus}")
        if any(not 0.0 <= p <= 1.0 for p in self.noises):
            raise ValueError("noise levels must lie in [0, 1]")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if self.mapper not in ("onestep", "sequential", "both"):
            raise ValueError("mapper must be 'onestep', 'sequential' or 'both'")
        if self.sequential_mode not in ("refit", "reuse"):
            raise ValueError("sequential_mode must be 'refit' or 'reuse'")

    def mappers(self) -> tuple[str, ...]:
        if self.mapper == "both":
            return ("onestep", "sequential")
        return (self.mapper,)


@dataclass
class CellRecord:
    """One mapper run on one sampled dataset."""

    size: int
    noise: float
    mapper: str
    repetition: int
    accuracy: float | None
    per_part: dict[BodyPartLabel, float]
    iterations: int
    flags: tuple[str, ...]
    failed: bool = False
    error: str | None = None


@dataclass
class AggregateRecord:
    size: int
    noise: float
    mapper: str
    n: int
    mean_accuracy: float | None
    std_accuracy: float | None


@dataclass
class SweepResult:
    config: SweepConfig
    records: list[CellRecord]
    aggregates: list[AggregateRecord]

    @property
    def failures(self) -> list[CellRecord]:
        return [r for r in self.records if r.failed]


def cell_seed_sequence(base_seed: int, size: int, noise: float, repetition: int) -> np.random.SeedSequence:
    """Seed material unique to a cell, independent of execution order."""
    return np.random.SeedSequence([base_seed, size, int(round(noise * 10000)), repetition])


def _project_unique(
    weights: HomunculusWeights, data: Sequence[TaxelSample]
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Activation patterns of the distinct touches in a stream.

    Returns (pattern matrix, per-point pattern index, per-pattern point
    count).  Identical snapshots share one projected row.
    """
    pattern_of: dict[tuple[int, ...], int] = {}
    rows: list[np.ndarray] = []
    point_index = np.empty(len(data), dtype=int)
    for n, sample in enumerate(data):
        at = pattern_of.get(sample.active)
        if at is None:
            at = len(rows)
            pattern_of[sample.active] = at
            rows.append(project(weights, sample))
        point_index[n] = at
    counts = np.bincount(point_index, minlength=len(rows)).astype(float)
    return np.vstack(rows), point_index, counts


def _run_one_step(
    patterns: np.ndarray,
    point_index: np.ndarray,
    counts: np.ndarray,
    utterances: Sequence[LabeledUtterance],
    config: SweepConfig,
    rng: np.random.Generator,
) -> tuple[MappingResult, list[BodyPartLabel | None], int]:
    model = fit_em(patterns, config.n_components, config.em, rng, point_weights=counts)
    point_components = assign_hard(model, patterns)[point_index]
    vocab = vocabulary(utterances)
    word_of = {label: i for i, label in enumerate(vocab)}
    pairs = [(word_of[u.label], int(c)) for u, c in zip(utterances, point_components)]
    matrix = accumulate(pairs, len(vocab), config.n_components, config.decay)
    result = one_step_map(matrix, language_labels=vocab)
    return result, predict_labels(result, point_components), 0


def _run_sequential(
    patterns: np.ndarray,
    point_index: np.ndarray,
    utterances: Sequence[LabeledUtterance],
    config: SweepConfig,
    rng: np.random.Generator,
) -> tuple[MappingResult, list[BodyPartLabel | None], int]:
    result = sequential_map(
        patterns[point_index],
        utterances,
        config.n_components,
        config.em,
        rng,
        mode=config.sequential_mode,
        decay=config.decay,
    )
    assert result.point_components is not None
    return result, predict_labels(result, result.point_components), len(result.iterations)


def run_cell(
    config: SweepConfig,
    size: int,
    noise: float,
    repetition: int,
    layout: SkinLayout | None = None,
) -> list[CellRecord]:
    """Run the configured mapper(s) once at the given cell coordinates."""
    if layout is None:
        layout = default_layout()
    seeds = cell_seed_sequence(config.base_seed, size, noise, repetition).spawn(5)
    rng_data = np.random.default_rng(seeds[0])
    rng_weights = np.random.default_rng(seeds[1])
    rng_noise = np.random.default_rng(seeds[2])
    mapper_rngs = {
        "onestep": np.random.default_rng(seeds[3]),
        "sequential": np.random.default_rng(seeds[4]),
    }

    corpus = generate_dataset(
        layout, config.corpus_stimulations, config.samples_per_stimulation, rng_data
    )
    data = subsample(corpus, size, rng_data)
    weights = surrogate_weights(layout, config.allocation, config.overlap, rng_weights)
    patterns, point_index, counts = _project_unique(weights, data)
    clean = utterances_from_dataset(data)
    heard = inject_noise(clean, noise, rng_noise, config.noise_mode)
    truth = [sample.label for sample in data]

    base_flags: list[str] = []
    if set(truth) != set(CANONICAL_LABELS):
        base_flags.append("labels_incomplete")
    if config.sequential_mode == "reuse":
        reuse = True
    else:
        reuse = False

    records: list[CellRecord] = []
    for mapper in config.mappers():
        flags = list(base_flags)
        if mapper == "sequential" and reuse:
            flags.append("reuse")
        try:
            if mapper == "onestep":
                result, predicted, iterations = _run_one_step(
                    patterns, point_index, counts, heard, config, mapper_rngs[mapper]
                )
            else:
                result, predicted, iterations = _run_sequential(
                    patterns, point_index, heard, config, mapper_rngs[mapper]
                )
        except (GmmFitError, DegenerateDensityError) as exc:
            records.append(
                CellRecord(
                    size=size,
                    noise=noise,
                    mapper=mapper,
                    repetition=repetition,
                    accuracy=None,
                    per_part={},
                    iterations=0,
                    flags=tuple(flags + ["failed"]),
                    failed=True,
                    error=str(exc),
                )
            )
            continue
        if not result.complete:
            flags.append("partial")
        records.append(
            CellRecord(
                size=size,
                noise=noise,
                mapper=mapper,
                repetition=repetition,
                accuracy=accuracy(predicted, truth),
                per_part=per_part_accuracy(predicted, truth),
                iterations=iterations,
                flags=tuple(flags),
            )
        )
    return records


def run_sweep(
    config: SweepConfig,
    layout: SkinLayout | None = None,
    progress: Callable[[CellRecord], None] | None = None,
) -> SweepResult:
    """Run the full grid and aggregate accuracies per cell."""
    if layout is None:
        layout = default_layout()
    records: list[CellRecord] = []
    for size in config.sizes:
        for noise in config.noises:
            for repetition in range(config.repetitions):
                for record in run_cell(config, size, noise, repetition, layout):
                    records.append(record)
                    if progress is not None:
                        progress(record)
    return SweepResult(config, records, aggregate_records(config, records))


def aggregate_records(
    config: SweepConfig, records: Sequence[CellRecord]
) -> list[AggregateRecord]:
    out: list[AggregateRecord] = []
    for size in config.sizes:
        for noise in config.noises:
            for mapper in config.mappers():
                values = [
                    r.accuracy
                    for r in records
                    if r.size == size
                    and r.noise == noise
                    and r.mapper == mapper
                    and r.accuracy is not None
                ]
                if values:
                    mean = float(np.mean(values))
                    std = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
                else:
                    mean = std = None
                out.append(AggregateRecord(size, noise, mapper, len(values), mean, std))
    return out


def _fmt(value: float | None) -> str:
    return "" if value is None else format(value, ".6f")


def records_csv_lines(records: Sequence[CellRecord]) -> list[str]:
    lines = [RECORDS_HEADER]
    for r in records:
        parts = [str(r.size), format(r.noise, "g"), r.mapper, str(r.repetition), _fmt(r.accuracy)]
        parts.extend(_fmt(r.per_part.get(label)) for _, label in PART_COLUMNS)
        parts.append(str(r.iterations))
        parts.append("|".join(r.flags))
        lines.append(",".join(parts))
    return lines


def aggregates_csv_lines(aggregates: Sequence[AggregateRecord]) -> list[str]:
    lines = [AGGREGATE_HEADER]
    for a in aggregates:
        lines.append(
            ",".join(
                [
                    str(a.size),
                    format(a.noise, "g"),
                    a.mapper,
                    str(a.n),
                    _fmt(a.mean_accuracy),
                    _fmt(a.std_accuracy),
                ]
            )
        )
    return lines


def write_records_csv(path: str, records: Sequence[CellRecord]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(records_csv_lines(records)) + "\n")


def write_aggregates_csv(path: str, aggregates: Sequence[AggregateRecord]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(aggregates_csv_lines(aggregates)) + "\n")


def single_cell_config(config: SweepConfig, size: int, noise: float) -> SweepConfig:
    """Convenience: narrow a sweep configuration to one grid cell."""
    return replace(config, sizes=(size,), noises=(noise,))
