"""Gaussian mixture fitting by expectation-maximisation.

Plain EM with k-means++ style seeding, several random restarts keeping the
best final log-likelihood, and a fixed ridge on every covariance estimated
from the global data scale.  Densities are evaluated in log space through
Cholesky factors, so near-singular clusters (many identical rows) stay
finite.  Duplicate data rows are collapsed into weighted unique rows before
iterating; the resulting fit is the one the raw data would give, at the
cost of the unique rows only.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import logsumexp


class GmmFitError(RuntimeError):
    """Raised when every restart of a fit fails numerically."""


class DegenerateDensityError(ArithmeticError):
    """Raised when a point has vanishing density under every component."""


@dataclass(frozen=True)
class EmConfig:
    """Knobs of the EM fit."""

    tol: float = 1e-6
    max_iters: int = 300
    n_init: int = 5
    reg_scale: float = 1e-6
    covariance_type: str = "full"

    def __post_init__(self) -> None:
        if self.tol <= 0 or self.max_iters < 1 or self.n_init < 1:
            raise ValueError("tol, max_iters and n_init must be positive")
        if self.reg_scale <= 0:
            raise ValueError("reg_scale must be positive")
        if self.covariance_type not in ("full", "diag"):
            raise ValueError("covariance_type must be 'full' or 'diag'")


@dataclass
class GmmModel:
    """Fitted mixture: weights on the simplex, means, full covariances."""

    mixture_weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    covariance_type: str = "full"
    log_likelihood: float = float("nan")
    n_iter: int = 0
    converged: bool = False
    ll_history: list[float] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.mixture_weights = np.asarray(self.mixture_weights, dtype=float)
        self.means = np.asarray(self.means, dtype=float)
        self.covariances = np.asarray(self.covariances, dtype=float)
        j, d = self.means.shape
        if self.mixture_weights.shape != (j,):
            raise ValueError("mixture weights do not match component count")
        if self.covariances.shape != (j, d, d):
            raise ValueError("covariances do not match means")
        if np.any(self.mixture_weights < 0) or not np.isclose(
            self.mixture_weights.sum(), 1.0
        ):
            raise ValueError("mixture weights must lie on the simplex")

    @property
    def n_components(self) -> int:
        return self.means.shape[0]

    @property
    def n_features(self) -> int:
        return self.means.shape[1]


def dedup_rows(x: np.ndarray, weights: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Collapse duplicate rows.

    Returns (unique rows in first-appearance order, index of each input row
    into the unique rows, total weight per unique row).
    """
    x = np.ascontiguousarray(x, dtype=float)
    if weights is None:
        weights = np.ones(len(x))
    index: dict[bytes, int] = {}
    inverse = np.empty(len(x), dtype=int)
    keep: list[int] = []
    for i, row in enumerate(x):
        key = row.tobytes()
        at = index.get(key)
        if at is None:
            at = len(keep)
            index[key] = at
            keep.append(i)
        inverse[i] = at
    counts = np.zeros(len(keep))
    np.add.at(counts, inverse, weights)
    return x[keep], inverse, counts


def gaussian_logdensity(x: np.ndarray, mean: np.ndarray, covariance: np.ndarray) -> float:
    """Log density of a multivariate normal at one point."""
    x = np.asarray(x, dtype=float)
    mean = np.asarray(mean, dtype=float)
    covariance = np.asarray(covariance, dtype=float)
    chol = np.linalg.cholesky(covariance)
    z = solve_triangular(chol, x - mean, lower=True, check_finite=False)
    logdet = np.log(np.diag(chol)).sum()
    d = mean.shape[0]
    return float(-0.5 * (d * np.log(2.0 * np.pi) + z @ z) - logdet)


def _log_density_matrix(x: np.ndarray, means: np.ndarray, chols: np.ndarray) -> np.ndarray:
    """Per-point, per-component log densities from precomputed factors."""
    m, d = x.shape
    j = means.shape[0]
    out = np.empty((m, j))
    halfconst = 0.5 * d * np.log(2.0 * np.pi)
    for k in range(j):
        z = solve_triangular(chols[k], (x - means[k]).T, lower=True, check_finite=False)
        quad = np.einsum("dm,dm->m", z, z)
        logdet = np.log(np.diagonal(chols[k])).sum()
        out[:, k] = -0.5 * quad - halfconst - logdet
    return out


def _weighted_log_densities(model: GmmModel, x: np.ndarray) -> np.ndarray:
    chols = np.linalg.cholesky(model.covariances)
    log_dens = _log_density_matrix(x, model.means, chols)
    with np.errstate(divide="ignore"):
        return log_dens + np.log(model.mixture_weights)[None, :]


def responsibilities(model: GmmModel, data: np.ndarray) -> np.ndarray:
    """Posterior component probabilities for every row of ``data``."""
    x = np.atleast_2d(np.asarray(data, dtype=float))
    log_weighted = _weighted_log_densities(model, x)
    norm = logsumexp(log_weighted, axis=1)
    if not np.all(np.isfinite(norm)):
        raise DegenerateDensityError(
            "a point has zero density under every mixture component"
        )
    return np.exp(log_weighted - norm[:, None])


def posteriors(model: GmmModel, x: np.ndarray) -> np.ndarray:
    """Posterior component probabilities for a single point."""
    return responsibilities(model, np.asarray(x, dtype=float)[None, :])[0]


def assign_hard(model: GmmModel, data: np.ndarray) -> np.ndarray:
    """Most probable component per row; ties resolve to the lowest index."""
    return np.argmax(responsibilities(model, data), axis=1)


def _kmeans_pp_means(
    unique: np.ndarray, counts: np.ndarray, n_components: int, rng: np.random.Generator
) -> np.ndarray:
    """Weighted k-means++ seeding over the unique rows."""
    m = len(unique)
    base = counts / counts.sum()
    means = np.empty((n_components, unique.shape[1]))
    pick = int(rng.choice(m, p=base))
    means[0] = unique[pick]
    d2 = ((unique - means[0]) ** 2).sum(axis=1)
    for k in range(1, n_components):
        w = counts * d2
        total = w.sum()
        if total > 0:
            pick = int(rng.choice(m, p=w / total))
        else:
            pick = int(rng.choice(m, p=base))
        means[k] = unique[pick]
        d2 = np.minimum(d2, ((unique - means[k]) ** 2).sum(axis=1))
    return means


def _sq_distances(unique: np.ndarray, means: np.ndarray) -> np.ndarray:
    d2 = (
        (unique**2).sum(axis=1)[:, None]
        - 2.0 * unique @ means.T
        + (means**2).sum(axis=1)[None, :]
    )
    return np.maximum(d2, 0.0)


def _kmeans_init(
    unique: np.ndarray,
    counts: np.ndarray,
    n_components: int,
    rng: np.random.Generator,
    iters: int = 20,
) -> tuple[np.ndarray, np.ndarray]:
    """k-means++ seeds refined by weighted Lloyd steps.

    Starting EM straight from broad covariances around raw seeds tends to
    stall in washed-out optima; hard cluster assignments give it sharp
    initial parameters instead.
    """
    means = _kmeans_pp_means(unique, counts, n_components, rng)
    labels = np.argmin(_sq_distances(unique, means), axis=1)
    for _ in range(iters):
        new = means.copy()
        for k in range(n_components):
            sel = labels == k
            mass = counts[sel].sum()
            if mass > 0:
                new[k] = counts[sel] @ unique[sel] / mass
        relabel = np.argmin(_sq_distances(unique, new), axis=1)
        means = new
        if np.array_equal(relabel, labels):
            break
        labels = relabel
    return means, labels


def _run_em(
    unique: np.ndarray,
    counts: np.ndarray,
    means: np.ndarray,
    covariances: np.ndarray,
    mix: np.ndarray,
    config: EmConfig,
    ridge: float,
) -> GmmModel:
    m, d = unique.shape
    j = means.shape[0]
    total = counts.sum()
    dead_floor = 1e-10 * total
    eye = ridge * np.eye(d)
    history: list[float] = []
    prev_ll = -np.inf
    converged = False

    for _ in range(config.max_iters):
        chols = np.linalg.cholesky(covariances)
        log_dens = _log_density_matrix(unique, means, chols)
        with np.errstate(divide="ignore"):
            log_weighted = log_dens + np.log(mix)[None, :]
        norm = logsumexp(log_weighted, axis=1)
        if not np.all(np.isfinite(norm)):
            raise np.linalg.LinAlgError("log-likelihood diverged")
        ll = float(counts @ norm)
        history.append(ll)
        if np.isfinite(prev_ll) and abs(ll - prev_ll) <= config.tol * abs(ll):
            converged = True
            break
        prev_ll = ll

        resp = np.exp(log_weighted - norm[:, None]) * counts[:, None]
        weight_k = resp.sum(axis=0)
        for k in range(j):
            # A component that lost all its mass keeps its parameters and
            # simply fades out, which preserves likelihood monotonicity.
            if weight_k[k] <= dead_floor:
                continue
            mu = resp[:, k] @ unique / weight_k[k]
            diff = unique - mu
            cov = (resp[:, k] * diff.T) @ diff / weight_k[k]
            if config.covariance_type == "diag":
                cov = np.diag(np.diag(cov))
            means[k] = mu
            covariances[k] = cov + eye
        mix = weight_k / total
    else:
        # Ran out of iterations after an M-step: refresh the reported
        # likelihood so it matches the returned parameters.
        chols = np.linalg.cholesky(covariances)
        log_dens = _log_density_matrix(unique, means, chols)
        with np.errstate(divide="ignore"):
            log_weighted = log_dens + np.log(mix)[None, :]
        norm = logsumexp(log_weighted, axis=1)
        if not np.all(np.isfinite(norm)):
            raise np.linalg.LinAlgError("log-likelihood diverged")
        history.append(float(counts @ norm))

    return GmmModel(
        mixture_weights=mix,
        means=means,
        covariances=covariances,
        covariance_type=config.covariance_type,
        log_likelihood=history[-1],
        n_iter=len(history),
        converged=converged,
        ll_history=history,
    )


def fit_em(
    data: np.ndarray | Sequence[Sequence[float]],
    n_components: int,
    config: EmConfig | None = None,
    rng: np.random.Generator | None = None,
    point_weights: np.ndarray | None = None,
) -> GmmModel:
    """Fit a mixture by EM with restarts; returns the best model found.

    ``point_weights`` lets callers pass pre-aggregated data: a row with
    weight c behaves exactly like c copies of that row.
    """
    if config is None:
        config = EmConfig()
    if rng is None:
        rng = np.random.default_rng()
    x = np.asarray(data, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.size == 0:
        raise ValueError("data must be a non-empty 2-D array")
    if not np.all(np.isfinite(x)):
        raise ValueError("data must be finite")
    if n_components < 1:
        raise ValueError("n_components must be >= 1")

    if point_weights is not None:
        point_weights = np.asarray(point_weights, dtype=float)
        if point_weights.shape != (len(x),):
            raise ValueError("point_weights must give one weight per row")
        if np.any(point_weights <= 0):
            raise ValueError("point_weights must be positive")
        effective_n = point_weights.sum()
    else:
        effective_n = float(len(x))
    if effective_n < n_components:
        raise ValueError(
            f"cannot fit {n_components} components to {effective_n:g} points"
        )

    unique, _, counts = dedup_rows(x, point_weights)
    total = counts.sum()
    global_mean = counts @ unique / total
    centred = unique - global_mean
    global_cov = (counts * centred.T) @ centred / total
    scale = np.trace(global_cov) / unique.shape[1]
    ridge = config.reg_scale * (scale if scale > 0 else 1.0)

    d = unique.shape[1]
    fallback_cov = global_cov + ridge * np.eye(d)
    best: GmmModel | None = None
    failures: list[str] = []
    for _ in range(config.n_init):
        means, labels = _kmeans_init(unique, counts, n_components, rng)
        covariances = np.empty((n_components, d, d))
        mass = np.zeros(n_components)
        for k in range(n_components):
            sel = labels == k
            mass[k] = counts[sel].sum()
            if mass[k] > 0:
                diff = unique[sel] - means[k]
                covariances[k] = (counts[sel] * diff.T) @ diff / mass[k] + ridge * np.eye(d)
            else:
                covariances[k] = fallback_cov
        # Clusters that k-means left empty start with a small share so the
        # first E-step can still hand them points.
        mass = np.where(mass > 0, mass, total / (100.0 * n_components))
        mix = mass / mass.sum()
        if config.covariance_type == "diag":
            covariances = np.stack([np.diag(np.diag(c)) for c in covariances])
        try:
            model = _run_em(unique, counts, means, covariances, mix, config, ridge)
        except np.linalg.LinAlgError as exc:
            failures.append(str(exc))
            continue
        if best is None or model.log_likelihood > best.log_likelihood:
            best = model
    if best is None:
        raise GmmFitError(
            f"all {config.n_init} restarts failed: {failures[-1] if failures else 'unknown'}"
        )
    return best


def save_gmm(path: str, model: GmmModel) -> None:
    j, d = model.means.shape
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# components {j}\n")
        fh.write(f"# dim {d}\n")
        fh.write(f"# covariance {model.covariance_type}\n")
        fh.write(f"# loglik {model.log_likelihood!r}\n")
        fh.write(f"# iters {model.n_iter}\n")
        fh.write(f"# converged {int(model.converged)}\n")
        for k in range(j):
            fh.write(f"weight {format(model.mixture_weights[k], '.17g')}\n")
            fh.write("mean " + " ".join(format(v, ".17g") for v in model.means[k]) + "\n")
            for row in model.covariances[k]:
                fh.write("cov " + " ".join(format(v, ".17g") for v in row) + "\n")


def load_gmm(path: str) -> GmmModel:
    header: dict[str, str] = {}
    weights: list[float] = []
    means: list[list[float]] = []
    covs: list[list[list[float]]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition(" ")
                header[key] = value
            elif line.startswith("weight "):
                weights.append(float(line.split()[1]))
                covs.append([])
            elif line.startswith("mean "):
                means.append([float(v) for v in line.split()[1:]])
            elif line.startswith("cov "):
                covs[-1].append([float(v) for v in line.split()[1:]])
            else:
                raise ValueError(f"malformed mixture line: {line!r}")
    if not weights or len(weights) != len(means):
        raise ValueError("mixture file is incomplete")
    model = GmmModel(
        mixture_weights=np.array(weights),
        means=np.array(means),
        covariances=np.array(covs),
        covariance_type=header.get("covariance", "full"),
        log_likelihood=float(header.get("loglik", "nan")),
        n_iter=int(header.get("iters", "0")),
        converged=bool(int(header.get("converged", "0"))),
    )
    return model
