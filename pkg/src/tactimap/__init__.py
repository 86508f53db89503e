"""Tactile-linguistic body part mapping.

Synthetic skin stimulation, somatotopic projection, Gaussian mixture
clustering and cross-situational word-to-cluster mapping, with a sweep
harness over dataset size and label noise.
"""

from .skin import (
    BodyPartLabel,
    CANONICAL_LABELS,
    SkinLayout,
    StimulationRegion,
    TaxelSample,
    default_layout,
    generate_dataset,
    generate_stimulation,
    load_dataset,
    save_dataset,
    subsample,
)
from .homunculus import (
    GRID_SHAPE,
    N_NEURONS,
    HomunculusWeights,
    activation_matrix,
    batch_project,
    default_allocation,
    load_weights,
    project,
    save_weights,
    surrogate_weights,
)
from .gmm import (
    DegenerateDensityError,
    EmConfig,
    GmmFitError,
    GmmModel,
    assign_hard,
    fit_em,
    gaussian_logdensity,
    load_gmm,
    posteriors,
    responsibilities,
    save_gmm,
)
from .lexicon import (
    LabeledUtterance,
    export_utterances,
    import_utterances,
    inject_noise,
    utterances_from_dataset,
)
from .mapping import (
    CooccurrenceMatrix,
    IterationRecord,
    MappingResult,
    accumulate,
    one_step_map,
    predict_labels,
    sequential_map,
    vocabulary,
)
from .experiment import (
    AggregateRecord,
    CellRecord,
    SweepConfig,
    SweepResult,
    accuracy,
    per_part_accuracy,
    run_cell,
    run_sweep,
    write_aggregates_csv,
    write_records_csv,
)
from .render import (
    BackProjection,
    back_project,
    load_backprojection,
    render_heatmap,
    save_backprojection,
    write_ppm,
)

__version__ = "0.1.0"
