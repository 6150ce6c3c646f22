"""Wrapper-stage search: a genetic algorithm over binary gene masks.

Fitness is internal stratified-CV KNN accuracy of the masked dataset.
The subset-size objective enters lexicographically: ties on fitness go
to the chromosome with fewer selected genes, both in tournaments and in
final-best selection.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .classifiers import ClassifierSpec, predict, train
from .data import Dataset, FoldPlan, make_folds, project
from .errors import ConfigError, ValidationError

__all__ = [
    "Chromosome",
    "GaConfig",
    "GaTrace",
    "init_population",
    "fitness",
    "tournament_select",
    "uniform_crossover",
    "mutate",
    "evolve",
    "decode",
    "trace_to_csv",
]


@dataclass
class Chromosome:
    bits: np.ndarray                 # uint8 mask over the stage-1 genes
    cached_fitness: float | None = None

    def n_selected(self) -> int:
        return int(self.bits.sum())

    def key(self) -> bytes:
        return self.bits.tobytes()

    def copy(self) -> "Chromosome":
        return Chromosome(self.bits.copy(), self.cached_fitness)


@dataclass(frozen=True)
class GaConfig:
    population_size: int = 100
    iterations: int = 50
    crossover_prob: float = 0.8
    mutation_prob: float = 0.01
    tournament_size: int = 2
    elitism_count: int = 1
    fitness_knn_k: int = 5
    fitness_folds: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.population_size < 2:
            raise ConfigError("population_size must be >= 2")
        if self.iterations < 0:
            raise ConfigError("iterations must be >= 0")
        if not (0.0 <= self.crossover_prob <= 1.0
                and 0.0 <= self.mutation_prob <= 1.0):
            raise ConfigError("probabilities must be in [0, 1]")
        if not 1 <= self.tournament_size <= self.population_size:
            raise ConfigError("tournament_size must be in 1..population_size")
        if not 0 <= self.elitism_count < self.population_size:
            raise ConfigError("elitism_count must be < population_size")
        if self.fitness_knn_k < 1 or self.fitness_folds < 2:
            raise ConfigError("fitness_knn_k >= 1 and fitness_folds >= 2 required")


@dataclass
class GaTrace:
    generations: list = field(default_factory=list)
    best_fitness: list = field(default_factory=list)
    mean_fitness: list = field(default_factory=list)
    best_size: list = field(default_factory=list)

    def record(self, gen: int, best: float, mean: float, size: int):
        self.generations.append(gen)
        self.best_fitness.append(best)
        self.mean_fitness.append(mean)
        self.best_size.append(size)


def _repair(bits: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    if bits.sum() == 0:
        bits[rng.integers(bits.size)] = 1
    return bits


def init_population(n_prime: int, cfg: GaConfig,
                    rng: np.random.Generator | None = None) -> list[Chromosome]:
    """population_size random masks, each bit set with probability 0.5."""
    if n_prime < 1:
        raise ValidationError("chromosome length must be >= 1")
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    pop = []
    for _ in range(cfg.population_size):
        bits = (rng.random(n_prime) < 0.5).astype(np.uint8)
        pop.append(Chromosome(_repair(bits, rng)))
    return pop


def _internal_fold_plan(ds: Dataset, cfg: GaConfig) -> FoldPlan:
    k = min(cfg.fitness_folds, ds.n_samples)  # leave-one-out fallback
    return make_folds(ds.labels, k=k, rounds=1, seed=cfg.seed)


def fitness(chrom: Chromosome, ds_stage1: Dataset, cfg: GaConfig,
            plan: FoldPlan | None = None) -> float:
    """Mean internal-CV KNN accuracy of the dataset masked by the chromosome.

    Fold assignments derive from cfg.seed only, so every chromosome is
    scored on the same splits. The value is cached on the chromosome.
    """
    if chrom.cached_fitness is not None:
        return chrom.cached_fitness
    if chrom.bits.size != ds_stage1.n_genes:
        raise ValidationError("chromosome length does not match gene count")
    if chrom.n_selected() == 0:
        raise ValidationError("chromosome selects no genes")
    if plan is None:
        plan = _internal_fold_plan(ds_stage1, cfg)
    sub = project(ds_stage1, np.flatnonzero(chrom.bits))

    accuracies = []
    for _, _, train_idx, test_idx in plan.splits():
        k = min(cfg.fitness_knn_k, train_idx.size)
        spec = ClassifierSpec(kind="knn", knn_k=k, seed=cfg.seed)
        train_ds = Dataset(sub.values[train_idx], sub.labels[train_idx],
                           sub.gene_ids, sub.class_names, sub.name)
        model = train(spec, train_ds)
        predicted = predict(model, Dataset(
            sub.values[test_idx], sub.labels[test_idx],
            sub.gene_ids, sub.class_names, sub.name))
        accuracies.append(float(np.mean(predicted == sub.labels[test_idx])))
    chrom.cached_fitness = float(np.mean(accuracies))
    return chrom.cached_fitness


def _fitter(a: Chromosome, idx_a: int, b: Chromosome, idx_b: int) -> bool:
    """True when a beats b: higher fitness, then fewer bits, then lower index."""
    return ((a.cached_fitness, -a.n_selected(), -idx_a)
            > (b.cached_fitness, -b.n_selected(), -idx_b))


def tournament_select(pop: list[Chromosome], cfg: GaConfig,
                      rng: np.random.Generator) -> Chromosome:
    """Best of tournament_size uniform draws (with replacement)."""
    picks = rng.integers(0, len(pop), size=cfg.tournament_size)
    best = int(picks[0])
    for p in picks[1:]:
        if _fitter(pop[int(p)], int(p), pop[best], best):
            best = int(p)
    return pop[best]


def uniform_crossover(a: Chromosome, b: Chromosome, cfg: GaConfig,
                      rng: np.random.Generator) -> tuple[Chromosome, Chromosome]:
    """With probability crossover_prob, swap each locus independently
    with probability 0.5; otherwise copy the parents."""
    if a.bits.size != b.bits.size:
        raise ValidationError("parents must have equal length")
    c1, c2 = a.bits.copy(), b.bits.copy()
    if rng.random() < cfg.crossover_prob:
        swap = rng.random(a.bits.size) < 0.5
        c1[swap], c2[swap] = b.bits[swap], a.bits[swap]
    return (Chromosome(_repair(c1, rng)), Chromosome(_repair(c2, rng)))


def mutate(c: Chromosome, cfg: GaConfig, rng: np.random.Generator) -> Chromosome:
    """Flip each bit independently with probability mutation_prob."""
    flips = rng.random(c.bits.size) < cfg.mutation_prob
    bits = np.where(flips, 1 - c.bits, c.bits).astype(np.uint8)
    return Chromosome(_repair(bits, rng))


def _generation_best(pop: list[Chromosome]) -> Chromosome:
    best, best_idx = pop[0], 0
    for i, c in enumerate(pop[1:], start=1):
        if _fitter(c, i, best, best_idx):
            best, best_idx = c, i
    return best


def _lexi_key(c: Chromosome) -> tuple:
    return (-c.cached_fitness, c.n_selected(), tuple(c.bits))


def evolve(ds_stage1: Dataset, cfg: GaConfig) -> tuple[Chromosome, GaTrace]:
    """Generational GA loop with elitism; returns the best-ever chromosome
    (fitness desc, set-bit count asc, bitstring asc) and a per-generation
    trace."""
    rng = np.random.default_rng(cfg.seed)
    plan = _internal_fold_plan(ds_stage1, cfg)
    memo: dict[bytes, float] = {}

    def evaluate(pop: list[Chromosome]):
        for c in pop:
            if c.cached_fitness is None:
                key = c.key()
                if key in memo:
                    c.cached_fitness = memo[key]
                else:
                    memo[key] = fitness(c, ds_stage1, cfg, plan)

    pop = init_population(ds_stage1.n_genes, cfg, rng)
    trace = GaTrace()
    evaluate(pop)
    best_ever = _generation_best(pop).copy()
    gen_best = best_ever
    trace.record(0, gen_best.cached_fitness,
                 float(np.mean([c.cached_fitness for c in pop])),
                 gen_best.n_selected())

    for gen in range(1, cfg.iterations + 1):
        elite_order = sorted(range(len(pop)),
                             key=lambda i: (-pop[i].cached_fitness,
                                            pop[i].n_selected(), i))
        next_pop = [pop[i].copy() for i in elite_order[:cfg.elitism_count]]
        while len(next_pop) < cfg.population_size:
            p1 = tournament_select(pop, cfg, rng)
            p2 = tournament_select(pop, cfg, rng)
            c1, c2 = uniform_crossover(p1, p2, cfg, rng)
            next_pop.append(mutate(c1, cfg, rng))
            if len(next_pop) < cfg.population_size:
                next_pop.append(mutate(c2, cfg, rng))
        pop = next_pop
        evaluate(pop)
        gen_best = _generation_best(pop)
        if _lexi_key(gen_best) < _lexi_key(best_ever):
            best_ever = gen_best.copy()
        trace.record(gen, best_ever.cached_fitness,
                     float(np.mean([c.cached_fitness for c in pop])),
                     best_ever.n_selected())

    return best_ever, trace


def decode(best: Chromosome, stage1_genes) -> np.ndarray:
    """Map set bits back to original-dataset gene indices (ascending)."""
    stage1 = np.asarray(stage1_genes, dtype=np.int64)
    if best.bits.size != stage1.size:
        raise ValidationError("chromosome and stage-1 list lengths differ")
    return stage1[best.bits.astype(bool)]


def trace_to_csv(trace: GaTrace, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["generation", "best_fitness", "mean_fitness", "best_size"])
        for row in zip(trace.generations, trace.best_fitness,
                       trace.mean_fitness, trace.best_size):
            writer.writerow(row)
