"""Cross-situational word-to-cluster mapping.

Co-occurrence counts between heard words and tactile clusters drive two
mappers.  The one-step mapper assigns every word its row-maximum cluster
independently, so several words may collide on one cluster.  The sequential
mapper repeatedly claims the single strongest (word, cluster) pair, inhibits
that word elsewhere, deletes the points covered by the claim and re-fits the
remaining data with one component fewer (or keeps the initial fit in reuse
mode), which makes the assignment injective.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .gmm import EmConfig, GmmModel, assign_hard, dedup_rows, fit_em
from .lexicon import LabeledUtterance
from .skin import CANONICAL_LABELS, BodyPartLabel


@dataclass(frozen=True)
class CooccurrenceMatrix:
    """Word-by-cluster credit mass; ``decay`` records the weighting used."""

    matrix: np.ndarray
    decay: float | tuple[float, ...] = 1.0

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2:
            raise ValueError("co-occurrence matrix must be 2-D")
        if np.any(m < 0) or not np.all(np.isfinite(m)):
            raise ValueError("co-occurrence mass must be finite and >= 0")
        object.__setattr__(self, "matrix", m)


def accumulate(
    pairs: Sequence[tuple[int, int]],
    n_words: int,
    n_referents: int,
    decay: float | Sequence[float] = 1.0,
) -> CooccurrenceMatrix:
    """Sum per-trial credit into a word-by-referent matrix.

    ``decay`` is either one constant weight or a per-trial schedule aligned
    with ``pairs``.
    """
    if n_words < 1 or n_referents < 1:
        raise ValueError("matrix needs at least one word and one referent")
    if np.isscalar(decay):
        eta = np.full(len(pairs), float(decay))
        stored: float | tuple[float, ...] = float(decay)
    else:
        eta = np.asarray(decay, dtype=float)
        if eta.shape != (len(pairs),):
            raise ValueError("decay schedule must align with the trials")
        stored = tuple(float(v) for v in eta)
    if np.any(eta < 0):
        raise ValueError("credit weights must be >= 0")
    a = np.zeros((n_words, n_referents))
    for t, (word, referent) in enumerate(pairs):
        if not (0 <= word < n_words and 0 <= referent < n_referents):
            raise ValueError(f"trial {t} indexes ({word}, {referent}) out of range")
        a[word, referent] += eta[t]
    return CooccurrenceMatrix(a, stored)


@dataclass(frozen=True)
class IterationRecord:
    """One claim of the sequential mapper."""

    iteration: int
    word_index: int
    component: int
    model_id: int
    mass: float
    n_removed: int
    n_remaining: int


@dataclass
class MappingResult:
    """Outcome of a mapper run.

    ``assignment`` maps word indices to tactile model ids and
    ``tactile_owner`` is its (collision-resolved) reverse.  For the
    sequential mapper a model id names the cluster claimed at that
    iteration; ``point_components`` then holds, per input point, the id of
    the claim whose cluster first captured it (-1 if never captured).
    """

    mode: str
    n_models: int
    assignment: dict[int, int]
    tactile_owner: dict[int, int]
    language_labels: tuple[BodyPartLabel, ...] | None = None
    inhibited: frozenset[tuple[int, int]] = frozenset()
    iterations: list[IterationRecord] = field(default_factory=list)
    complete: bool = True
    point_components: np.ndarray | None = None


def one_step_map(
    a: CooccurrenceMatrix,
    language_labels: Sequence[BodyPartLabel] | None = None,
) -> MappingResult:
    """Map every word to its strongest cluster, independently."""
    matrix = a.matrix
    if matrix.size == 0:
        raise ValueError("empty co-occurrence matrix")
    assignment: dict[int, int] = {}
    for i, row in enumerate(matrix):
        if row.max() > 0:
            assignment[i] = int(np.argmax(row))
    tactile_owner: dict[int, int] = {}
    for j in range(matrix.shape[1]):
        candidates = [i for i, m in assignment.items() if m == j]
        if candidates:
            tactile_owner[j] = min(candidates, key=lambda i: (-matrix[i, j], i))
    return MappingResult(
        mode="one-step",
        n_models=matrix.shape[1],
        assignment=assignment,
        tactile_owner=tactile_owner,
        language_labels=None if language_labels is None else tuple(language_labels),
    )


def vocabulary(utterances: Sequence[LabeledUtterance]) -> tuple[BodyPartLabel, ...]:
    """Distinct heard words in canonical label order."""
    present = {u.label for u in utterances}
    return tuple(label for label in CANONICAL_LABELS if label in present)


def _pair_table(
    pattern_index: np.ndarray,
    word_index: np.ndarray,
    eta: np.ndarray,
    n_words: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Group trials by (pattern, word): ids, point counts and credit mass."""
    key = pattern_index.astype(np.int64) * n_words + word_index
    uniq, inverse = np.unique(key, return_inverse=True)
    counts = np.bincount(inverse, minlength=len(uniq)).astype(float)
    mass = np.bincount(inverse, weights=eta, minlength=len(uniq))
    return uniq // n_words, (uniq % n_words).astype(int), counts, mass


def sequential_map(
    tactile_data: np.ndarray,
    utterances: Sequence[LabeledUtterance],
    n_components: int,
    config: EmConfig | None = None,
    rng: np.random.Generator | None = None,
    mode: str = "refit",
    decay: float | Sequence[float] = 1.0,
) -> MappingResult:
    """Iterated strongest-pair claiming with mutual exclusivity.

    Each iteration fits (or, in reuse mode, keeps) a tactile mixture, claims
    the globally strongest (word, cluster) co-occurrence, inhibits the word
    against other clusters, and deletes the points belonging to both the
    claimed word and the claimed cluster.  In refit mode the next iteration
    fits one component fewer to what is left.
    """
    if mode not in ("refit", "reuse"):
        raise ValueError("mode must be 'refit' or 'reuse'")
    if rng is None:
        rng = np.random.default_rng()
    x = np.asarray(tactile_data, dtype=float)
    if x.ndim != 2:
        raise ValueError("tactile data must be a 2-D array")
    if len(x) != len(utterances):
        raise ValueError("tactile and linguistic streams must align")
    if len(x) == 0:
        raise ValueError("empty data stream")
    if n_components < 1:
        raise ValueError("n_components must be >= 1")

    vocab = vocabulary(utterances)
    word_of = {label: i for i, label in enumerate(vocab)}
    word_index = np.array([word_of[u.label] for u in utterances])
    if np.isscalar(decay):
        eta = np.full(len(x), float(decay))
    else:
        eta = np.asarray(decay, dtype=float)
        if eta.shape != (len(x),):
            raise ValueError("decay schedule must align with the stream")

    patterns, pattern_inv, _ = dedup_rows(x)
    pair_pat, pair_word, pair_count, pair_mass = _pair_table(
        pattern_inv, word_index, eta, len(vocab)
    )
    alive = np.ones(len(pair_pat), dtype=bool)

    reuse_model: GmmModel | None = None
    reuse_hard: np.ndarray | None = None
    if mode == "reuse":
        pat_counts = np.zeros(len(patterns))
        np.add.at(pat_counts, pair_pat, pair_count)
        reuse_model = fit_em(patterns, n_components, config, rng, point_weights=pat_counts)
        reuse_hard = assign_hard(reuse_model, patterns)

    assignment: dict[int, int] = {}
    tactile_owner: dict[int, int] = {}
    inhibited: set[tuple[int, int]] = set()
    iterations: list[IterationRecord] = []
    claims: list[tuple[GmmModel, int]] = []
    complete = False

    while True:
        if len(assignment) == len(vocab):
            complete = True
            break
        live = np.flatnonzero(alive)
        if live.size == 0:
            break

        if mode == "refit":
            j_k = n_components - len(assignment)
            if j_k < 1:
                break
            pat_ids = np.unique(pair_pat[live])
            weights = np.zeros(len(pat_ids))
            lookup = {p: i for i, p in enumerate(pat_ids)}
            live_pos = np.array([lookup[p] for p in pair_pat[live]])
            np.add.at(weights, live_pos, pair_count[live])
            if weights.sum() < j_k:
                break
            model = fit_em(patterns[pat_ids], j_k, config, rng, point_weights=weights)
            hard_local = assign_hard(model, patterns[pat_ids])
            pair_comp = hard_local[live_pos]
        else:
            j_k = n_components
            assert reuse_hard is not None and reuse_model is not None
            model = reuse_model
            pair_comp = reuse_hard[pair_pat[live]]

        a = np.zeros((len(vocab), j_k))
        np.add.at(a, (pair_word[live], pair_comp), pair_mass[live])
        for word in assignment:
            a[word, :] = 0.0
        if mode == "reuse":
            for comp in tactile_owner:
                a[:, comp] = 0.0
        if a.max() <= 0:
            break

        im, jm = np.unravel_index(int(np.argmax(a)), a.shape)
        im, jm = int(im), int(jm)
        if mode == "refit":
            model_id = len(claims)
            claims.append((model, jm))
        else:
            model_id = jm
        assignment[im] = model_id
        tactile_owner[model_id] = im
        inhibited.update((model_id, w) for w in range(len(vocab)) if w != im)

        hit = live[(pair_word[live] == im) & (pair_comp == jm)]
        alive[hit] = False
        removed = int(pair_count[hit].sum())
        remaining = int(pair_count[alive].sum())
        iterations.append(
            IterationRecord(
                iteration=len(iterations),
                word_index=im,
                component=jm,
                model_id=model_id,
                mass=float(a[im, jm]),
                n_removed=removed,
                n_remaining=remaining,
            )
        )

    # Label every original point by the first claim whose cluster captures
    # its activation pattern; later claims only see what is still unclaimed.
    if mode == "refit":
        pat_model = np.full(len(patterns), -1)
        undecided = np.arange(len(patterns))
        for model_id, (model, jm) in enumerate(claims):
            if undecided.size == 0:
                break
            h = assign_hard(model, patterns[undecided])
            pat_model[undecided[h == jm]] = model_id
            undecided = undecided[h != jm]
        n_models = len(claims)
    else:
        assert reuse_hard is not None
        pat_model = reuse_hard.copy()
        n_models = n_components

    return MappingResult(
        mode="sequential" if mode == "refit" else "sequential-reuse",
        n_models=n_models,
        assignment=assignment,
        tactile_owner=tactile_owner,
        language_labels=vocab,
        inhibited=frozenset(inhibited),
        iterations=iterations,
        complete=complete,
        point_components=pat_model[pattern_inv],
    )


def predict_labels(
    result: MappingResult, component_assignments: Sequence[int] | np.ndarray
) -> list[BodyPartLabel | None]:
    """Word label per point from its tactile model id; None when unmapped."""
    if result.language_labels is None:
        raise ValueError("mapping result carries no word labels")
    out: list[BodyPartLabel | None] = []
    for comp in np.asarray(component_assignments, dtype=int):
        owner = result.tactile_owner.get(int(comp))
        out.append(None if owner is None else result.language_labels[owner])
    return out
