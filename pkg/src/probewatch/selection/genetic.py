"""
Genetic-algorithm wrapper selection.

A chromosome is a bitmask over the candidate columns. Its fitness is the F1
score on the validation rows of a small random forest trained on the masked
training columns. Each generation is ranked by fitness (descending), then
column count (ascending), then the mask bits, so results do not depend on
the order in which parallel fitness evaluations finish.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from probewatch.constants import GA_GENERATIONS, GA_POPULATION
from probewatch.dataset.table import FeatureTable
from probewatch.errors import ArgumentError
from probewatch.evaluation.metrics import f1_score
from probewatch.learners.trees import RandomForest
from probewatch.selection.report import FeatureSubset, SelectionReport, SelectionStage

logger = logging.getLogger(__name__)


@dataclass
class GeneticConfig:
    """
    Search parameters of the wrapper.

    Attributes:
        generations (int): Generations after the initial population.
        population (int): Chromosomes per generation.
        tournament (int): Contestants per parent draw.
        crossover (float): Probability a child bit comes from the first parent.
        mutation (float, optional): Per-bit flip probability; 1/n when None.
        elitism (int): Best chromosomes copied unchanged into the next generation.
        n_trees (int): Trees in the fitness forest.
        max_depth (int, optional): Depth limit of the fitness forest's trees.
        seed (int): Seed of the search and of the fitness forest.
        n_jobs (int): Parallel fitness evaluations.
    """

    generations: int = GA_GENERATIONS
    population: int = GA_POPULATION
    tournament: int = 3
    crossover: float = 0.5
    mutation: Optional[float] = None
    elitism: int = 1
    n_trees: int = 10
    max_depth: Optional[int] = None
    seed: int = 0
    n_jobs: int = 1

    def __post_init__(self):
        if self.generations < 0:
            raise ArgumentError("generations must be >= 0")
        if self.population < 1:
            raise ArgumentError("population must be >= 1")
        if self.tournament < 1:
            raise ArgumentError("tournament must be >= 1")
        if not 0 <= self.elitism <= self.population:
            raise ArgumentError("elitism must lie in [0, population]")


@dataclass
class GeneticResult:
    best_mask: np.ndarray
    best_fitness: float
    history: List[float] = field(default_factory=list)
    repairs: int = 0
    evaluations: int = 0


def _fitness(Xtr, ytr, Xval, yval, mask, n_trees, max_depth, seed) -> float:
    model = RandomForest(n_trees=n_trees, max_depth=max_depth, seed=seed)
    model.fit(Xtr[:, mask], ytr)
    return f1_score(yval, model.predict(Xval[:, mask]))


def _rank_key(mask: np.ndarray, fitness: float) -> Tuple:
    return (-fitness, int(mask.sum()), tuple(int(b) for b in mask))


class GeneticSearch:
    """
    Runs the wrapper search over fixed training and validation matrices.

    Args:
        Xtr, ytr: Training rows and labels.
        Xval, yval: Validation rows and labels.
        config (GeneticConfig): Search parameters.
    """

    def __init__(self, Xtr, ytr, Xval, yval, config: GeneticConfig):
        self.Xtr = np.asarray(Xtr, dtype=float)
        self.ytr = np.asarray(ytr, dtype=np.int64)
        self.Xval = np.asarray(Xval, dtype=float)
        self.yval = np.asarray(yval, dtype=np.int64)
        self.config = config
        self.n = self.Xtr.shape[1]
        self.rng = np.random.default_rng(config.seed)
        self.cache: Dict[bytes, float] = {}
        self.repairs = 0

    def _repair(self, mask: np.ndarray) -> np.ndarray:
        if not mask.any():
            mask[self.rng.integers(self.n)] = True
            self.repairs += 1
        return mask

    def _evaluate(self, masks: Sequence[np.ndarray]) -> List[float]:
        pending: Dict[bytes, np.ndarray] = {}
        for m in masks:
            if m.tobytes() not in self.cache:
                pending.setdefault(m.tobytes(), m)
        todo = list(pending.values())
        c = self.config
        scores = Parallel(n_jobs=c.n_jobs)(
            delayed(_fitness)(
                self.Xtr,
                self.ytr,
                self.Xval,
                self.yval,
                m,
                c.n_trees,
                c.max_depth,
                c.seed,
            )
            for m in todo
        )
        for m, s in zip(todo, scores):
            self.cache[m.tobytes()] = float(s)
        return [self.cache[m.tobytes()] for m in masks]

    def _ranked(self, masks: List[np.ndarray]) -> List[Tuple[np.ndarray, float]]:
        fitness = self._evaluate(masks)
        return sorted(zip(masks, fitness), key=lambda mf: _rank_key(*mf))

    def _tournament(self, ranked: List[Tuple[np.ndarray, float]]) -> np.ndarray:
        picks = self.rng.integers(len(ranked), size=self.config.tournament)
        return ranked[int(picks.min())][0]

    def run(self) -> GeneticResult:
        c = self.config
        mutation = c.mutation if c.mutation is not None else 1.0 / self.n
        population = [
            self._repair(self.rng.random(self.n) < 0.5) for _ in range(c.population)
        ]
        ranked = self._ranked(population)
        best_mask, best_fit = ranked[0]
        history = [best_fit]
        logger.debug(
            "generation 0: best F1 %.4f with %d columns", best_fit, int(best_mask.sum())
        )

        for gen in range(1, c.generations + 1):
            repairs_before = self.repairs
            children = [m.copy() for m, _ in ranked[: c.elitism]]
            while len(children) < c.population:
                first, second = self._tournament(ranked), self._tournament(ranked)
                child = np.where(self.rng.random(self.n) < c.crossover, first, second)
                child = child ^ (self.rng.random(self.n) < mutation)
                children.append(self._repair(child))
            if self.repairs > repairs_before:
                logger.warning(
                    "generation %d: repaired %d empty masks",
                    gen,
                    self.repairs - repairs_before,
                )
            ranked = self._ranked(children)
            if _rank_key(*ranked[0]) < _rank_key(best_mask, best_fit):
                best_mask, best_fit = ranked[0]
            history.append(best_fit)
            logger.debug(
                "generation %d: best F1 %.4f with %d columns",
                gen,
                best_fit,
                int(best_mask.sum()),
            )

        return GeneticResult(
            best_mask=best_mask.copy(),
            best_fitness=best_fit,
            history=history,
            repairs=self.repairs,
            evaluations=len(self.cache),
        )


def ga_wrapper_select(
    train: FeatureTable,
    val: FeatureTable,
    subset: Sequence[str],
    config: Optional[GeneticConfig] = None,
    report: Optional[SelectionReport] = None,
    **overrides,
) -> FeatureSubset:
    """
    Searches for the column mask with the best validation F1.

    Args:
        train (FeatureTable): Labelled training table.
        val (FeatureTable): Labelled validation table with the same columns.
        subset (Sequence[str]): Candidate columns, at least two.
        config (GeneticConfig, optional): Search parameters; defaults when omitted.
        report (SelectionReport, optional): Receives the fitness history.
        **overrides: Fields replacing those of ``config``.

    Returns:
        FeatureSubset: The best mask ever seen, in ``subset`` order.
    """
    names = list(subset)
    if len(names) < 2:
        raise ArgumentError("the wrapper needs at least two candidate columns")
    config = config or GeneticConfig()
    if overrides:
        config = replace(config, **overrides)
    search = GeneticSearch(
        train.matrix(names),
        train.require_labels(),
        val.matrix(names),
        val.require_labels(),
        config,
    )
    result = search.run()
    chosen = [n for n, keep in zip(names, result.best_mask) if keep]
    logger.info(
        "wrapper kept %d of %d columns (F1 %.4f after %d generations, %d fits)",
        len(chosen),
        len(names),
        result.best_fitness,
        config.generations,
        result.evaluations,
    )
    if report is not None:
        report.ga_history = result.history
        report.ga_best_fitness = result.best_fitness
        report.ga_repairs = result.repairs
        report.final = chosen
    return FeatureSubset(chosen, SelectionStage.WRAPPED)
