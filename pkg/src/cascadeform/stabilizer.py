"""Genetic design of the stabilizing diagonal ``D``.

The search minimizes the band objectives

    tau   = |2 min Re(lambda) - lmin - lmax|
    sigma = |2 max Re(lambda) - lmin - lmax|

taken over the nonzero eigenvalues of ``D L``, plus a penalty on any
nonzero eigenvalue whose real part is not safely positive.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_complex_vector
from .exceptions import DesignFailure, DomainError
from .laplacian import ComplexLaplacian, connectivity_metrics, verify_formation_conditions
from .spectral import default_zero_tol, eigenvalues

__all__ = [
    "SpectrumBounds",
    "GAParams",
    "DesignReport",
    "spectrum_objectives",
    "fitness",
    "design_stabilizer",
    "scale_system",
    "GeneticStabilizer",
]

log = logging.getLogger(__name__)

STABILITY_MARGIN = 1e-3
INIT_MODES = ("disc", "row_scaled")


@dataclass(frozen=True)
class SpectrumBounds:
    lambda_min_bar: float
    lambda_max_bar: float

    def __post_init__(self):
        lo, hi = float(self.lambda_min_bar), float(self.lambda_max_bar)
        if not (np.isfinite(lo) and np.isfinite(hi) and 0 < lo < hi):
            raise DomainError(f"spectrum bounds need 0 < lambda_min_bar < lambda_max_bar, got ({lo}, {hi})")
        object.__setattr__(self, "lambda_min_bar", lo)
        object.__setattr__(self, "lambda_max_bar", hi)

    @property
    def center_sum(self):
        return self.lambda_min_bar + self.lambda_max_bar


@dataclass(frozen=True)
class GAParams:
    population_size: int = 100
    generations: int = 200
    crossover_rate: float = 0.9
    mutation_rate: float = 0.1
    mutation_sigma: float = 0.2
    tournament_size: int = 3
    elitism_count: int = 2
    seed: int = 0
    stability_penalty_weight: float = 100.0
    real_diagonal: bool = False
    init: str = "disc"

    def __post_init__(self):
        if self.init not in INIT_MODES:
            raise DomainError(f"init must be one of {INIT_MODES}, got {self.init!r}")
        if self.population_size < 4:
            raise DomainError("population_size must be at least 4")
        if self.generations < 0:
            raise DomainError("generations must be non-negative")
        for name in ("crossover_rate", "mutation_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise DomainError(f"{name} must lie in [0, 1], got {v}")
        if self.mutation_sigma < 0:
            raise DomainError("mutation_sigma must be non-negative")
        if not 1 <= self.tournament_size <= self.population_size:
            raise DomainError("tournament_size must be between 1 and population_size")
        if not 0 <= self.elitism_count < self.population_size:
            raise DomainError("elitism_count must be in [0, population_size)")
        if self.stability_penalty_weight < 0:
            raise DomainError("stability_penalty_weight must be non-negative")


@dataclass(frozen=True)
class DesignReport:
    best_fitness: float
    generations: int
    lambda_a: complex
    lambda_max: complex
    band_membership: bool
    seed: int
    fitness_history: np.ndarray = field(default=None, repr=False, compare=False)

    def to_dict(self):
        return {
            "best_fitness": self.best_fitness,
            "generations": self.generations,
            "lambda_a": [self.lambda_a.real, self.lambda_a.imag],
            "lambda_max": [self.lambda_max.real, self.lambda_max.imag],
            "band_membership": self.band_membership,
            "seed": self.seed,
        }


def spectrum_objectives(spec, bounds):
    """Return ``(tau, sigma)`` over the nonzero eigenvalues of ``spec``."""
    nz = spec.nonzero
    if nz.size == 0:
        raise DomainError("spectrum has no nonzero eigenvalues")
    c = bounds.center_sum
    return abs(2.0 * nz.real.min() - c), abs(2.0 * nz.real.max() - c)


def _penalized(nonzero_re, c, penalty_weight):
    tau = abs(2.0 * nonzero_re.min() - c)
    sigma = abs(2.0 * nonzero_re.max() - c)
    pen = penalty_weight * np.maximum(0.0, STABILITY_MARGIN - nonzero_re).sum()
    return tau + sigma + pen


def fitness(d, l, bounds, penalty_weight=100.0):
    """Scalarized band objective of ``diag(d) @ L``; lower is better.

    Returns ``inf`` when ``D`` is singular or the product does not have
    exactly two structural zero eigenvalues.
    """
    mat = l.matrix if isinstance(l, ComplexLaplacian) else np.asarray(l, dtype=np.complex128)
    d = check_complex_vector(d, name="d", n=mat.shape[0])
    if np.any(d == 0):
        return float("inf")
    spec = eigenvalues(d[:, None] * mat)
    if spec.zero_count != 2:
        return float("inf")
    return float(_penalized(spec.nonzero.real, bounds.center_sum, penalty_weight))


def _batch_fitness(pop, mat, bounds, penalty_weight):
    # LAPACK over the whole population at once; see fitness() for semantics.
    prods = pop[:, :, None] * mat[None, :, :]
    vals = np.linalg.eigvals(prods)
    fro = np.sqrt(np.sum(prods.real ** 2 + prods.imag ** 2, axis=(1, 2)))
    tol = 1e-7 * np.maximum(1.0, fro)
    zero = np.abs(vals) <= tol[:, None]
    c = bounds.center_sum
    lo = np.where(zero, np.inf, vals.real).min(axis=1)
    hi = np.where(zero, -np.inf, vals.real).max(axis=1)
    short = np.where(zero, 0.0, np.maximum(0.0, STABILITY_MARGIN - vals.real))
    with np.errstate(invalid="ignore"):
        out = np.abs(2.0 * lo - c) + np.abs(2.0 * hi - c) + penalty_weight * short.sum(axis=1)
    out[zero.sum(axis=1) != 2] = np.inf
    out[np.any(pop == 0, axis=1)] = np.inf
    out[~np.isfinite(out)] = np.inf
    return out


def _seed_diagonal(mat, bounds, real):
    """Row-normalizing diagonal: rotates each diagonal entry of ``D L`` onto
    the positive real axis and scales rows to the band centre."""
    diag = np.diag(mat)
    rows = np.linalg.norm(mat, axis=1)
    fallback = np.linalg.norm(mat) or 1.0
    scale = 0.5 * bounds.center_sum / np.where(rows > 0, rows, fallback)
    mag = np.abs(diag)
    if real:
        phase = np.where(diag.real < 0, -1.0, 1.0)
    else:
        phase = np.where(mag > 0, np.conj(diag) / np.where(mag > 0, mag, 1.0), 1.0)
    return phase * scale


def _initial_population(mat, bounds, ga, rng):
    """``"disc"``: every d_i uniform in the disc of radius lmax / ||L||_F
    around 1 (an interval on the real line for real diagonals).
    ``"row_scaled"``: one row-normalizing individual plus perturbed copies."""
    n = mat.shape[0]
    if ga.init == "disc":
        r = bounds.lambda_max_bar / max(float(np.linalg.norm(mat)), np.finfo(float).tiny)
        if ga.real_diagonal:
            return (1.0 + r * rng.uniform(-1.0, 1.0, (ga.population_size, n))).astype(np.complex128)
        radius = r * np.sqrt(rng.uniform(size=(ga.population_size, n)))
        angle = rng.uniform(0.0, 2.0 * np.pi, (ga.population_size, n))
        return 1.0 + radius * np.exp(1j * angle)
    base = _seed_diagonal(mat, bounds, ga.real_diagonal)
    k = ga.population_size - 1
    if ga.real_diagonal:
        factor = 1.0 + 0.5 * rng.uniform(-1.0, 1.0, (k, n))
    else:
        radius = 0.5 * np.sqrt(rng.uniform(size=(k, n)))
        angle = rng.uniform(0.0, 2.0 * np.pi, (k, n))
        factor = 1.0 + radius * np.exp(1j * angle)
    return np.vstack([base[None, :], base[None, :] * factor]).astype(np.complex128)


def _to_genes(pop):
    return np.concatenate([pop.real, pop.imag], axis=1)


def _from_genes(genes):
    n = genes.shape[1] // 2
    return genes[:, :n] + 1j * genes[:, n:]


def _run_ga(mat, bounds, ga):
    rng = np.random.default_rng(ga.seed)
    n = mat.shape[0]
    pop = _initial_population(mat, bounds, ga, rng)
    fit = _batch_fitness(pop, mat, bounds, ga.stability_penalty_weight)
    history = []
    n_child = ga.population_size - ga.elitism_count
    for _ in range(ga.generations):
        order = np.argsort(fit, kind="stable")
        pop, fit = pop[order], fit[order]
        history.append(float(fit[0]))
        # population is sorted, so the tournament winner is the smallest index
        picks = rng.integers(0, ga.population_size, size=(2, n_child, ga.tournament_size)).min(axis=2)
        genes_a = _to_genes(pop[picks[0]])
        genes_b = _to_genes(pop[picks[1]])
        swap = rng.uniform(size=genes_a.shape) < 0.5
        do_cross = rng.uniform(size=(n_child, 1)) < ga.crossover_rate
        child = np.where(swap & do_cross, genes_b, genes_a)
        # Gaussian mutation scaled by the magnitude of the complex entry
        mag = np.abs(_from_genes(child))
        mag = np.concatenate([mag, mag], axis=1)
        hit = rng.uniform(size=child.shape) < ga.mutation_rate
        noise = rng.standard_normal(child.shape) * ga.mutation_sigma * mag
        child = child + np.where(hit, noise, 0.0)
        if ga.real_diagonal:
            child[:, n:] = 0.0
        kids = _from_genes(child)
        kid_fit = _batch_fitness(kids, mat, bounds, ga.stability_penalty_weight)
        pop = np.vstack([pop[:ga.elitism_count], kids])
        fit = np.concatenate([fit[:ga.elitism_count], kid_fit])
    order = np.argsort(fit, kind="stable")
    pop, fit = pop[order], fit[order]
    history.append(float(fit[0]))
    return pop[0].copy(), float(fit[0]), np.array(history)


def design_stabilizer(l, bounds, ga=None, check_conditions=True):
    """Search for a diagonal ``D`` placing the nonzero spectrum of ``D L`` in the band.

    Parameters
    ----------
    l : ComplexLaplacian
        Must pass :func:`verify_formation_conditions`.
    bounds : SpectrumBounds
    ga : GAParams, optional

    Returns
    -------
    d : ndarray of complex, shape (n,)
    report : DesignReport
        ``report.fitness_history`` holds the best fitness per generation.

    Raises
    ------
    DomainError
        If ``l`` fails the formation conditions.
    DesignFailure
        If no candidate with two structural zeros and all other eigenvalues
        in the open right half-plane was found.
    """
    ga = ga or GAParams()
    if check_conditions:
        cond = verify_formation_conditions(l)
        if not cond.verdict:
            raise DomainError(f"Laplacian fails the formation conditions: {cond.to_dict()}")
    mat = l.matrix
    d, best, history = _run_ga(mat, bounds, ga)
    spec = eigenvalues(d[:, None] * mat)
    nz = spec.nonzero
    if spec.zero_count != 2 or nz.size == 0 or not np.all(nz.real > 0):
        raise DesignFailure(
            f"no stabilizing diagonal found in {ga.generations} generations (best fitness {best})",
            best_diagonal=d,
            best_fitness=best,
        )
    lam_a, lam_max = connectivity_metrics(spec)
    in_band = bool(np.all((nz.real >= bounds.lambda_min_bar) & (nz.real <= bounds.lambda_max_bar)))
    log.debug("GA done: fitness=%.6g lambda_a=%s lambda_max=%s band=%s", best, lam_a, lam_max, in_band)
    report = DesignReport(best, ga.generations, lam_a, lam_max, in_band, ga.seed, history)
    return d, report


def scale_system(d, k):
    """Uniformly scale the diagonal by ``0 < k <= 1``; spectra scale by ``k``."""
    k = float(k)
    if not (0.0 < k <= 1.0):
        raise DomainError(f"scaling factor must lie in (0, 1], got {k}")
    return k * check_complex_vector(d, name="d")


class GeneticStabilizer(TransformerMixin, BaseEstimator):
    """Estimator wrapper around :func:`design_stabilizer`.

    ``fit`` takes a :class:`ComplexLaplacian`; ``transform`` maps a Laplacian
    (or plain square matrix) ``L`` to the stabilized ``diag(d) @ L``.

    Attributes
    ----------
    diagonal_ : ndarray of complex
    report_ : DesignReport
    fitness_history_ : ndarray
        Best fitness at the start of every generation plus the final one.
    """

    def __init__(self, lambda_min_bar=0.5, lambda_max_bar=20.0, population_size=100,
                 generations=200, crossover_rate=0.9, mutation_rate=0.1, mutation_sigma=0.2,
                 tournament_size=3, elitism_count=2, seed=0, stability_penalty_weight=100.0,
                 real_diagonal=False, init="disc"):
        self.lambda_min_bar = lambda_min_bar
        self.lambda_max_bar = lambda_max_bar
        self.population_size = population_size
        self.generations = generations
        self.crossover_rate = crossover_rate
        self.mutation_rate = mutation_rate
        self.mutation_sigma = mutation_sigma
        self.tournament_size = tournament_size
        self.elitism_count = elitism_count
        self.seed = seed
        self.stability_penalty_weight = stability_penalty_weight
        self.real_diagonal = real_diagonal
        self.init = init

    def _ga_params(self):
        return GAParams(self.population_size, self.generations, self.crossover_rate,
                        self.mutation_rate, self.mutation_sigma, self.tournament_size,
                        self.elitism_count, self.seed, self.stability_penalty_weight,
                        self.real_diagonal, self.init)

    def fit(self, X, y=None):
        if not isinstance(X, ComplexLaplacian):
            raise DomainError("GeneticStabilizer.fit expects a ComplexLaplacian")
        bounds = SpectrumBounds(self.lambda_min_bar, self.lambda_max_bar)
        self.diagonal_, self.report_ = design_stabilizer(X, bounds, self._ga_params())
        self.fitness_history_ = self.report_.fitness_history
        self.n_features_in_ = X.n
        return self

    def transform(self, X):
        check_is_fitted(self, "diagonal_")
        mat = X.matrix if isinstance(X, ComplexLaplacian) else np.asarray(X, dtype=np.complex128)
        if mat.shape != (self.n_features_in_, self.n_features_in_):
            raise DomainError(f"expected a {self.n_features_in_}x{self.n_features_in_} matrix")
        return self.diagonal_[:, None] * mat
