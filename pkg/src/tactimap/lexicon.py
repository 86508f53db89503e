"""Label streams standing in for heard utterances, with controlled noise.

Every skin sample is paired with the word naming the touched body part.
Noise corrupts a stratified share of the stream: the same rounded
proportion of each class is selected, and the selected words are globally
permuted (keeping the overall word counts) or, optionally, resampled
uniformly from the vocabulary.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .skin import CANONICAL_LABELS, BodyPartLabel, TaxelSample, label_from_string


@dataclass(frozen=True)
class LabeledUtterance:
    """Heard word at stream position ``t`` plus the true part touched."""

    t: int
    label: BodyPartLabel
    ground_truth: BodyPartLabel


def utterances_from_dataset(data: Sequence[TaxelSample]) -> list[LabeledUtterance]:
    """Pair each sample with the word truly naming the touched part."""
    return [LabeledUtterance(t, sample.label, sample.label) for t, sample in enumerate(data)]


def select_corrupted_positions(
    labels: Sequence[BodyPartLabel], proportion: float, rng: np.random.Generator
) -> np.ndarray:
    """Stratified choice of stream positions to corrupt.

    From every class the same rounded share (half rounds up) is drawn
    without replacement, so noise hits all classes evenly.
    """
    if not 0.0 <= proportion <= 1.0:
        raise ValueError("proportion must be in [0, 1]")
    chosen: list[np.ndarray] = []
    for label in CANONICAL_LABELS:
        positions = np.flatnonzero([lab is label for lab in labels])
        if positions.size == 0:
            continue
        take = int(np.floor(proportion * positions.size + 0.5))
        if take > 0:
            chosen.append(rng.choice(positions, size=take, replace=False))
    if not chosen:
        return np.empty(0, dtype=int)
    out = np.concatenate(chosen)
    out.sort()
    return out


def inject_noise(
    utterances: Sequence[LabeledUtterance],
    proportion: float,
    rng: np.random.Generator,
    mode: str = "permute",
) -> list[LabeledUtterance]:
    """Corrupt a stratified share of the heard words.

    ``permute`` shuffles the selected words among their positions, keeping
    the word multiset intact; ``resample`` draws each selected word
    uniformly from the observed vocabulary.
    """
    if mode not in ("permute", "resample"):
        raise ValueError("mode must be 'permute' or 'resample'")
    labels = [u.label for u in utterances]
    selected = select_corrupted_positions(labels, proportion, rng)
    out = list(utterances)
    if selected.size == 0:
        return out
    if mode == "permute":
        shuffled = rng.permutation(selected)
        replacements = [labels[i] for i in shuffled]
    else:
        vocab = [label for label in CANONICAL_LABELS if label in set(labels)]
        replacements = [vocab[int(k)] for k in rng.integers(len(vocab), size=selected.size)]
    for pos, new_label in zip(selected, replacements):
        old = out[pos]
        out[pos] = LabeledUtterance(old.t, new_label, old.ground_truth)
    return out


def export_utterances(path: str, utterances: Sequence[LabeledUtterance]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# utterances {len(utterances)}\n")
        for u in utterances:
            fh.write(f"{u.t}\t{u.label.value}\t{u.ground_truth.value}\n")


def import_utterances(path: str) -> list[LabeledUtterance]:
    out: list[LabeledUtterance] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise ValueError(f"malformed utterance line: {line!r}")
            t, label, truth = fields
            out.append(
                LabeledUtterance(int(t), label_from_string(label), label_from_string(truth))
            )
    return out
