"""Command line front end.

Subcommands cover the pipeline stages: generate a stimulation dataset,
build homunculus weights, fit a mixture, run a word-to-cluster mapping,
sweep a size/noise grid, and render a saved back-projection as a PPM
image.  Options can also come from a key=value config file; explicit
flags win over the file.

Exit codes: 0 success, 1 bad arguments or inputs, 2 runtime/fit failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from typing import Callable, Sequence

import numpy as np

from .experiment import (
    SweepConfig,
    _project_unique,
    accuracy,
    per_part_accuracy,
    run_sweep,
    write_aggregates_csv,
    write_records_csv,
)
from .gmm import DegenerateDensityError, EmConfig, GmmFitError, assign_hard, fit_em, save_gmm
from .homunculus import load_weights, save_weights, surrogate_weights
from .lexicon import export_utterances, inject_noise, utterances_from_dataset
from .mapping import accumulate, one_step_map, predict_labels, sequential_map, vocabulary
from .render import back_project, load_backprojection, render_heatmap, save_backprojection, write_ppm
from .skin import default_layout, generate_dataset, load_dataset, save_dataset


def load_config_file(path: str) -> dict[str, str]:
    """Parse ``key = value`` lines; '#' starts a comment."""
    out: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {raw.rstrip()!r}")
            out[key.strip()] = value.strip()
    return out


def _csv_ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _csv_floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


class _Resolver:
    """Flag value if given, else config file entry, else default."""

    def __init__(self, args: argparse.Namespace):
        self.cfg = load_config_file(args.config) if getattr(args, "config", None) else {}
        self.args = args

    def get(self, name: str, cast: Callable, default):
        value = getattr(self.args, name.replace("-", "_"), None)
        if value is not None:
            return value
        if name in self.cfg:
            return cast(self.cfg[name])
        return default


def _em_config(r: _Resolver) -> EmConfig:
    return EmConfig(
        tol=r.get("tol", float, 1e-6),
        max_iters=r.get("max-iters", int, 300),
        n_init=r.get("n-init", int, 5),
        reg_scale=r.get("reg-scale", float, 1e-6),
        covariance_type=r.get("covariance", str, "full"),
    )


def cmd_generate(args: argparse.Namespace) -> int:
    r = _Resolver(args)
    seed = r.get("seed", int, 0)
    stimulations = r.get("stimulations", int, 2127)
    samples = r.get("samples", int, 30)
    layout = default_layout()
    rng = np.random.default_rng(seed)
    data = generate_dataset(layout, stimulations, samples, rng)
    save_dataset(args.out, data, layout, seed)
    print(f"wrote {len(data)} samples ({stimulations} stimulations) to {args.out}")
    return 0


def cmd_weights(args: argparse.Namespace) -> int:
    r = _Resolver(args)
    seed = r.get("seed", int, 0)
    overlap = r.get("overlap", float, 0.0)
    rng = np.random.default_rng(seed)
    weights = surrogate_weights(default_layout(), None, overlap, rng)
    save_weights(args.out, weights, seed, overlap)
    print(f"wrote {weights.n_neurons}x{weights.n_taxels} weights to {args.out}")
    return 0


def cmd_fit(args: argparse.Namespace) -> int:
    r = _Resolver(args)
    seed = r.get("seed", int, 0)
    components = r.get("components", int, 9)
    data, _ = load_dataset(args.dataset)
    weights, _ = load_weights(args.weights)
    patterns, _, counts = _project_unique(weights, data)
    model = fit_em(patterns, components, _em_config(r), np.random.default_rng(seed), point_weights=counts)
    save_gmm(args.out, model)
    print(
        f"fit {components} components: loglik {model.log_likelihood:.6g}, "
        f"{model.n_iter} iterations, converged={model.converged}"
    )
    return 0


def _write_report(path: str, mapper: str, result, acc: float, per_part: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# mapper {mapper}\n")
        fh.write(f"# accuracy {acc:.6f}\n")
        fh.write(f"# complete {int(result.complete)}\n")
        assert result.language_labels is not None
        for word, model_id in sorted(result.assignment.items()):
            fh.write(f"assignment\t{result.language_labels[word].value}\t{model_id}\n")
        for label in sorted(per_part, key=lambda l: l.value):
            fh.write(f"part\t{label.value}\t{per_part[label]:.6f}\n")
        for it in result.iterations:
            fh.write(
                f"iteration\t{it.iteration}\tword={result.language_labels[it.word_index].value}"
                f"\tcomponent={it.component}\tmass={it.mass:g}"
                f"\tremoved={it.n_removed}\tremaining={it.n_remaining}\n"
            )


def cmd_map(args: argparse.Namespace) -> int:
    r = _Resolver(args)
    seed = r.get("seed", int, 0)
    noise = r.get("noise", float, 0.0)
    components = r.get("components", int, 9)
    mapper = r.get("mapper", str, "sequential")
    sequential_mode = r.get("sequential-mode", str, "refit")
    if mapper not in ("onestep", "sequential"):
        raise ValueError("mapper must be 'onestep' or 'sequential'")
    data, _ = load_dataset(args.dataset)
    weights, _ = load_weights(args.weights)
    em = _em_config(r)

    seeds = np.random.SeedSequence([seed]).spawn(2)
    rng_noise = np.random.default_rng(seeds[0])
    rng_fit = np.random.default_rng(seeds[1])

    patterns, point_index, counts = _project_unique(weights, data)
    heard = inject_noise(utterances_from_dataset(data), noise, rng_noise, r.get("noise-mode", str, "permute"))
    truth = [s.label for s in data]

    if mapper == "onestep":
        model = fit_em(patterns, components, em, rng_fit, point_weights=counts)
        point_components = assign_hard(model, patterns)[point_index]
        vocab = vocabulary(heard)
        word_of = {label: i for i, label in enumerate(vocab)}
        pairs = [(word_of[u.label], int(c)) for u, c in zip(heard, point_components)]
        result = one_step_map(accumulate(pairs, len(vocab), components), language_labels=vocab)
        predicted = predict_labels(result, point_components)
    else:
        result = sequential_map(
            patterns[point_index], heard, components, em, rng_fit, mode=sequential_mode
        )
        assert result.point_components is not None
        predicted = predict_labels(result, result.point_components)

    acc = accuracy(predicted, truth)
    parts = per_part_accuracy(predicted, truth)
    os.makedirs(args.out_dir, exist_ok=True)
    _write_report(os.path.join(args.out_dir, "mapping.txt"), mapper, result, acc, parts)
    export_utterances(os.path.join(args.out_dir, "utterances.tsv"), heard)
    projection = back_project(patterns[point_index], predicted)
    save_backprojection(os.path.join(args.out_dir, "backprojection.tsv"), projection)
    print(f"{mapper} accuracy {acc:.4f} over {len(data)} points; wrote {args.out_dir}")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    r = _Resolver(args)
    config = SweepConfig(
        sizes=r.get("sizes", _csv_ints, (638, 3190, 6381)),
        noises=r.get("noises", _csv_floats, (0.0, 0.2, 0.4, 0.6, 0.8)),
        repetitions=r.get("reps", int, 20),
        base_seed=r.get("seed", int, 0),
        mapper=r.get("mapper", str, "both"),
        overlap=r.get("overlap", float, 0.1),
        corpus_stimulations=r.get("corpus-stimulations", int, 2127),
        samples_per_stimulation=r.get("samples", int, 30),
        n_components=r.get("components", int, 9),
        em=_em_config(r),
        decay=r.get("decay", float, 1.0),
        noise_mode=r.get("noise-mode", str, "permute"),
        sequential_mode=r.get("sequential-mode", str, "refit"),
    )
    out_dir = r.get("out-dir", str, ".")
    os.makedirs(out_dir, exist_ok=True)

    def progress(record) -> None:
        if not args.quiet:
            acc = "failed" if record.accuracy is None else f"{record.accuracy:.4f}"
            print(
                f"size={record.size} noise={record.noise:g} rep={record.repetition} "
                f"{record.mapper}: {acc}",
                file=sys.stderr,
            )

    result = run_sweep(config, progress=progress)
    records_path = os.path.join(out_dir, "records.csv")
    aggregates_path = os.path.join(out_dir, "aggregate.csv")
    write_records_csv(records_path, result.records)
    write_aggregates_csv(aggregates_path, result.aggregates)
    if result.failures:
        print(f"{len(result.failures)} cell(s) failed:", file=sys.stderr)
        for rec in result.failures:
            print(
                f"  size={rec.size} noise={rec.noise:g} rep={rec.repetition} "
                f"{rec.mapper}: {rec.error}",
                file=sys.stderr,
            )
    print(f"wrote {records_path} and {aggregates_path}")
    return 0


def cmd_render(args: argparse.Namespace) -> int:
    r = _Resolver(args)
    scale = r.get("scale", int, 16)
    projection = load_backprojection(args.backprojection)
    write_ppm(args.out, render_heatmap(projection, scale=scale))
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tactimap",
        description="Tactile-linguistic body part mapping pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="key=value config file; flags override it")
        p.add_argument("--seed", type=int, help="base random seed (default 0)")

    p = sub.add_parser("generate", help="simulate a stimulation dataset")
    common(p)
    p.add_argument("--stimulations", type=int, help="number of touches (default 2127)")
    p.add_argument("--samples", type=int, help="samples per touch (default 30)")
    p.add_argument("--out", required=True, help="dataset file to write")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("weights", help="build homunculus receptive fields")
    common(p)
    p.add_argument("--overlap", type=float, help="cross-part blur in [0,1) (default 0)")
    p.add_argument("--out", required=True, help="weight file to write")
    p.set_defaults(func=cmd_weights)

    p = sub.add_parser("fit", help="fit a Gaussian mixture to projected data")
    common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("--components", type=int, help="mixture size (default 9)")
    p.add_argument("--covariance", choices=("full", "diag"))
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iters", type=int)
    p.add_argument("--n-init", type=int)
    p.add_argument("--reg-scale", type=float)
    p.add_argument("--out", required=True, help="mixture file to write")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("map", help="run a word-to-cluster mapping end to end")
    common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("--mapper", choices=("onestep", "sequential"))
    p.add_argument("--sequential-mode", choices=("refit", "reuse"))
    p.add_argument("--noise", type=float, help="label noise proportion (default 0)")
    p.add_argument("--noise-mode", choices=("permute", "resample"))
    p.add_argument("--components", type=int)
    p.add_argument("--covariance", choices=("full", "diag"))
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iters", type=int)
    p.add_argument("--n-init", type=int)
    p.add_argument("--reg-scale", type=float)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("sweep", help="run a size/noise grid of mapping cells")
    common(p)
    p.add_argument("--sizes", type=_csv_ints, help="comma-separated dataset sizes")
    p.add_argument("--noises", type=_csv_floats, help="comma-separated noise levels")
    p.add_argument("--reps", type=int, help="repetitions per cell (default 20)")
    p.add_argument("--mapper", choices=("onestep", "sequential", "both"))
    p.add_argument("--overlap", type=float, help="receptive-field blur (default 0.1)")
    p.add_argument("--corpus-stimulations", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--components", type=int)
    p.add_argument("--covariance", choices=("full", "diag"))
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iters", type=int)
    p.add_argument("--n-init", type=int)
    p.add_argument("--reg-scale", type=float)
    p.add_argument("--decay", type=float)
    p.add_argument("--noise-mode", choices=("permute", "resample"))
    p.add_argument("--sequential-mode", choices=("refit", "reuse"))
    p.add_argument("--out-dir", help="directory for records.csv and aggregate.csv")
    p.add_argument("--quiet", action="store_true", help="suppress per-cell progress")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("render", help="render a back-projection as a PPM heatmap")
    common(p)
    p.add_argument("--backprojection", required=True)
    p.add_argument("--scale", type=int, help="pixels per neuron (default 16)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (GmmFitError, DegenerateDensityError) as exc:
        print(f"fit failed: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
