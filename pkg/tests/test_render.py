"""Back-projection and heatmap rendering tests."""

import numpy as np
import pytest

from tactimap.render import (
    DEFAULT_PALETTE,
    BackProjection,
    back_project,
    load_backprojection,
    render_heatmap,
    save_backprojection,
    write_ppm,
)
from tactimap.skin import CANONICAL_LABELS, BodyPartLabel

TORSO = BodyPartLabel.TORSO
PALM = BodyPartLabel.PALM


def naive_back_project(activations, predicted, labels):
    """Per-point accumulation, one cell at a time."""
    strengths = np.zeros((activations.shape[1], len(labels)))
    for x, p in zip(activations, predicted):
        if p is None:
            continue
        k = labels.index(p)
        for neuron in range(len(x)):
            strengths[neuron, k] += x[neuron]
    return strengths


class TestBackProject:
    def test_matches_naive_accumulation(self):
        rng = np.random.default_rng(0)
        labels = CANONICAL_LABELS
        x = rng.uniform(0, 2, size=(50, 168))
        predicted = [
            None if rng.random() < 0.1 else labels[int(rng.integers(9))]
            for _ in range(50)
        ]
        projection = back_project(x, predicted)
        np.testing.assert_allclose(
            projection.strengths,
            naive_back_project(x, predicted, list(labels)),
            atol=1e-12,
        )

    def test_mass_is_conserved_per_neuron(self):
        rng = np.random.default_rng(1)
        x = rng.uniform(0, 1, size=(30, 168))
        predicted = [CANONICAL_LABELS[int(k)] for k in rng.integers(9, size=30)]
        projection = back_project(x, predicted)
        np.testing.assert_allclose(
            projection.strengths.sum(axis=1), x.sum(axis=0), rtol=1e-9
        )

    def test_unlabeled_points_contribute_nothing(self):
        x = np.ones((3, 168))
        projection = back_project(x, [None, None, None])
        assert projection.strengths.sum() == 0.0
        assert projection.dominant() == [None] * 168

    def test_unknown_prediction_rejected(self):
        x = np.ones((1, 4))
        with pytest.raises(ValueError):
            back_project(x, [TORSO], labels=(PALM,), grid_shape=(1, 4))

    def test_misaligned_inputs_rejected(self):
        with pytest.raises(ValueError):
            back_project(np.ones((2, 168)), [TORSO])


class TestBackProjectionType:
    def test_dominant_picks_heaviest_word(self):
        strengths = np.zeros((4, 9))
        strengths[0, 3] = 2.0
        strengths[0, 5] = 1.0
        strengths[2, 8] = 0.5
        projection = BackProjection(strengths, grid_shape=(2, 2))
        dom = projection.dominant()
        assert dom[0] is CANONICAL_LABELS[3]
        assert dom[1] is None
        assert dom[2] is CANONICAL_LABELS[8]

    def test_shape_validation(self):
        with pytest.raises(ValueError):
            BackProjection(np.zeros((5, 9)), grid_shape=(2, 2))
        with pytest.raises(ValueError):
            BackProjection(-np.ones((4, 9)), grid_shape=(2, 2))


class TestRenderHeatmap:
    def projection(self):
        strengths = np.zeros((4, 9))
        strengths[0, 0] = 4.0
        strengths[3, 4] = 2.0
        return BackProjection(strengths, grid_shape=(2, 2))

    def test_colors_and_brightness(self):
        image = render_heatmap(self.projection(), scale=1)
        assert image.shape == (2, 2, 3)
        full = np.array(DEFAULT_PALETTE[CANONICAL_LABELS[0]])
        np.testing.assert_array_equal(image[0, 0], full.astype(np.uint8))
        half = np.array(DEFAULT_PALETTE[CANONICAL_LABELS[4]]) * (0.25 + 0.75 * 0.5)
        np.testing.assert_array_equal(image[1, 1], half.astype(np.uint8))
        np.testing.assert_array_equal(image[1, 0], [0, 0, 0])
        np.testing.assert_array_equal(image[0, 1], [0, 0, 0])

    def test_neurons_fill_columns_first(self):
        strengths = np.zeros((4, 9))
        strengths[1, 2] = 1.0
        image = render_heatmap(BackProjection(strengths, grid_shape=(2, 2)), scale=1)
        assert tuple(image[1, 0]) != (0, 0, 0)

    def test_scale_enlarges_blocks(self):
        image = render_heatmap(self.projection(), scale=4)
        assert image.shape == (8, 8, 3)
        np.testing.assert_array_equal(image[:4, :4], np.broadcast_to(image[0, 0], (4, 4, 3)))

    def test_bad_scale_rejected(self):
        with pytest.raises(ValueError):
            render_heatmap(self.projection(), scale=0)


class TestPpmFile:
    def test_header_and_payload(self, tmp_path):
        rng = np.random.default_rng(2)
        image = rng.integers(0, 256, size=(5, 7, 3), dtype=np.uint8)
        path = tmp_path / "map.ppm"
        write_ppm(str(path), image)
        raw = path.read_bytes()
        assert raw.startswith(b"P6\n7 5\n255\n")
        payload = raw[len(b"P6\n7 5\n255\n"):]
        np.testing.assert_array_equal(
            np.frombuffer(payload, dtype=np.uint8).reshape(5, 7, 3), image
        )

    def test_rejects_non_rgb_input(self, tmp_path):
        with pytest.raises(ValueError):
            write_ppm(str(tmp_path / "bad.ppm"), np.zeros((4, 4), dtype=np.uint8))
        with pytest.raises(ValueError):
            write_ppm(str(tmp_path / "bad.ppm"), np.zeros((4, 4, 3), dtype=float))


class TestBackProjectionFile:
    def test_round_trip_is_exact(self, tmp_path):
        rng = np.random.default_rng(3)
        strengths = rng.uniform(0, 3, size=(168, 9))
        projection = BackProjection(strengths)
        path = str(tmp_path / "projection.tsv")
        save_backprojection(path, projection)
        loaded = load_backprojection(path)
        np.testing.assert_array_equal(loaded.strengths, projection.strengths)
        assert loaded.labels == projection.labels
        assert loaded.grid_shape == projection.grid_shape
