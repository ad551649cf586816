"""Elitist two-objective genetic algorithm driving the PD gain search.

Real-coded NSGA-II: fast non-dominated sorting, crowding-distance
selection, simulated binary crossover and polynomial mutation on genomes
normalized to [0, 1]. Genomes decode to per-joint PD gains through a
log-linear map so the search covers several decades of gain magnitude.

The generation loop owns the only PRNG; offspring evaluations are pure
calls joined by offspring index, so they may run through any order-
preserving map (including a process pool) without perturbing the stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .control import Gains
from .pareto import ParetoFront, dominates, extract_front, hypervolume_2d
from .rollout import PENALTY, ObjectiveVector

__all__ = [
    "GaConfig", "GaResult", "GenerationProgress", "Individual",
    "convergence_check", "crowding_distance", "decode_gains", "dominates",
    "fast_nondominated_sort", "nsga2_run", "polynomial_mutation",
    "sbx_crossover",
]


@dataclass(frozen=True)
class GaConfig:
    """Search settings; defaults follow common real-coded NSGA-II practice."""

    n_genes: int
    population_size: int = 30
    max_generations: int = 60
    crossover_probability: float = 0.9
    sbx_eta: float = 15.0
    mutation_probability: float | None = None  # None -> 1/n_genes
    mutation_eta: float = 20.0
    kp_bounds: tuple[float, float] = (1.0, 1.0e3)
    kd_bounds: tuple[float, float] = (1.0e-2, 1.0e2)
    convergence_window: int = 10
    convergence_epsilon: float = 1.0e-3
    rng_seed: int = 0

    def __post_init__(self):
        if self.n_genes < 1:
            raise ValueError("n_genes must be >= 1")
        if self.population_size < 4 or self.population_size % 2:
            raise ValueError("population_size must be even and >= 4")
        if not 0.0 <= self.crossover_probability <= 1.0:
            raise ValueError("crossover_probability must lie in [0, 1]")
        pm = self.effective_mutation_probability
        if not 0.0 <= pm <= 1.0:
            raise ValueError("mutation_probability must lie in [0, 1]")
        for name in ("kp_bounds", "kd_bounds"):
            lo, hi = getattr(self, name)
            if not 0.0 < lo < hi:
                raise ValueError(f"{name} must satisfy 0 < low < high")
        if self.convergence_window < 1:
            raise ValueError("convergence_window must be >= 1")
        if self.max_generations < 0:
            raise ValueError("max_generations must be >= 0")

    @property
    def effective_mutation_probability(self) -> float:
        if self.mutation_probability is None:
            return 1.0 / self.n_genes
        return self.mutation_probability


@dataclass
class Individual:
    genome: np.ndarray
    objectives: ObjectiveVector | None = None
    rank: int | None = None
    crowding: float | None = None


class GenerationProgress(NamedTuple):
    generation: int
    evaluations: int
    front_size: int
    hypervolume: float


@dataclass(frozen=True)
class GaResult:
    front: ParetoFront
    evaluations_used: int
    hv_history: tuple[float, ...]
    converged_at_generation: int | None
    generations_run: int
    hv_reference: ObjectiveVector


def decode_gains(genes: np.ndarray, config: GaConfig) -> Gains:
    """Log-linear decode: gene 0 -> 10^lo ... gene 1 -> 10^hi per bound.

    The first half of the genome holds kp genes, the second half kd genes.
    """
    n = len(genes) // 2
    lo_p, hi_p = math.log10(config.kp_bounds[0]), math.log10(config.kp_bounds[1])
    lo_d, hi_d = math.log10(config.kd_bounds[0]), math.log10(config.kd_bounds[1])
    kp = tuple(10.0 ** (lo_p + g * (hi_p - lo_p)) for g in genes[:n])
    kd = tuple(10.0 ** (lo_d + g * (hi_d - lo_d)) for g in genes[n:])
    return Gains(kp=kp, kd=kd)


def fast_nondominated_sort(population: list[Individual]) -> list[list[int]]:
    """Deb's front sorting; writes ranks back and returns index fronts."""
    n = len(population)
    for ind in population:
        if ind.objectives is None:
            raise ValueError("cannot sort an unevaluated individual")
    dominated_by = [[] for _ in range(n)]
    domination_count = [0] * n
    fronts = [[]]
    for p in range(n):
        for q in range(n):
            if p == q:
                continue
            if dominates(population[p].objectives, population[q].objectives):
                dominated_by[p].append(q)
            elif dominates(population[q].objectives, population[p].objectives):
                domination_count[p] += 1
        if domination_count[p] == 0:
            population[p].rank = 0
            fronts[0].append(p)
    i = 0
    while fronts[i]:
        nxt = []
        for p in fronts[i]:
            for q in dominated_by[p]:
                domination_count[q] -= 1
                if domination_count[q] == 0:
                    population[q].rank = i + 1
                    nxt.append(q)
        i += 1
        fronts.append(nxt)
    fronts.pop()
    return fronts


def crowding_distance(objectives) -> np.ndarray:
    """Per-member crowding; boundary members get +inf, zero-range
    objectives contribute nothing."""
    m = len(objectives)
    dist = np.zeros(m)
    if m <= 2:
        dist[:] = np.inf
        return dist
    values = np.asarray(objectives, dtype=float)
    for k in range(values.shape[1]):
        order = np.argsort(values[:, k], kind="stable")
        col = values[order, k]
        span = col[-1] - col[0]
        dist[order[0]] = np.inf
        dist[order[-1]] = np.inf
        if span > 0.0:
            dist[order[1:-1]] += (col[2:] - col[:-2]) / span
    return dist


def sbx_crossover(p1: np.ndarray, p2: np.ndarray, eta: float,
                  crossover_probability: float, rng: np.random.Generator):
    """Simulated binary crossover on [0, 1] genes.

    With probability `crossover_probability` each gene pair is recombined
    (half of them on average, the SBX convention); otherwise the parents
    are copied through. Children are clipped to [0, 1].
    """
    c1, c2 = p1.copy(), p2.copy()
    if rng.random() > crossover_probability:
        return c1, c2
    for i in range(len(p1)):
        if rng.random() > 0.5:
            continue
        x1, x2 = p1[i], p2[i]
        if abs(x1 - x2) < 1e-14:
            continue
        u = rng.random()
        if u <= 0.5:
            beta = (2.0 * u) ** (1.0 / (eta + 1.0))
        else:
            beta = (1.0 / (2.0 * (1.0 - u))) ** (1.0 / (eta + 1.0))
        c1[i] = 0.5 * ((1.0 + beta) * x1 + (1.0 - beta) * x2)
        c2[i] = 0.5 * ((1.0 - beta) * x1 + (1.0 + beta) * x2)
    np.clip(c1, 0.0, 1.0, out=c1)
    np.clip(c2, 0.0, 1.0, out=c2)
    return c1, c2


def polynomial_mutation(genes: np.ndarray, eta: float, mutation_probability: float,
                        rng: np.random.Generator) -> np.ndarray:
    """Bounded polynomial mutation on [0, 1] genes."""
    out = genes.copy()
    for i in range(len(out)):
        if rng.random() >= mutation_probability:
            continue
        x = out[i]
        u = rng.random()
        if u < 0.5:
            delta = (2.0 * u + (1.0 - 2.0 * u) * (1.0 - x) ** (eta + 1.0)) \
                ** (1.0 / (eta + 1.0)) - 1.0
        else:
            delta = 1.0 - (2.0 * (1.0 - u) + 2.0 * (u - 0.5) * x ** (eta + 1.0)) \
                ** (1.0 / (eta + 1.0))
        out[i] = min(1.0, max(0.0, x + delta))
    return out


def convergence_check(hv_history, window: int = 10, epsilon: float = 1.0e-3) -> bool:
    """Hypervolume stagnation: the last `window` entries span at most
    epsilon relative to the latest value."""
    if len(hv_history) < window:
        return False
    recent = list(hv_history)[-window:]
    scale = max(abs(recent[-1]), 1.0e-12)
    return max(recent) - min(recent) <= epsilon * scale


def _crowded_better(a: Individual, b: Individual, rng: np.random.Generator) -> Individual:
    if a.rank != b.rank:
        return a if a.rank < b.rank else b
    if a.crowding != b.crowding:
        return a if a.crowding > b.crowding else b
    return a if rng.random() < 0.5 else b


def _tournament(population, rng) -> Individual:
    i = int(rng.integers(len(population)))
    j = int(rng.integers(len(population)))
    return _crowded_better(population[i], population[j], rng)


def _assign_crowding(population, fronts) -> None:
    for front in fronts:
        dist = crowding_distance([population[i].objectives for i in front])
        for idx, d in zip(front, dist):
            population[idx].crowding = float(d)


def _front_objectives(population, front) -> list[ObjectiveVector]:
    return [population[i].objectives for i in front]


def _hv_reference(objectives) -> ObjectiveVector:
    """Per-run fixed reference: worst non-penalty objectives of the first
    generation, scaled by 1.1 (falls back to the penalty box when every
    initial rollout diverged)."""
    finite = [o for o in objectives if o.f_acc < PENALTY and o.f_t < PENALTY]
    if not finite:
        return ObjectiveVector(1.1 * PENALTY, 1.1 * PENALTY)
    worst_acc = max(o.f_acc for o in finite)
    worst_t = max(o.f_t for o in finite)
    return ObjectiveVector(max(1.1 * worst_acc, 1.0e-12), max(1.1 * worst_t, 1.0e-12))


def nsga2_run(evaluator: Callable[[np.ndarray], ObjectiveVector], config: GaConfig,
              progress: Callable[[GenerationProgress], None] | None = None,
              eval_map=None, label: str = "") -> GaResult:
    """Run the tuner until hypervolume stagnation or the generation cap.

    `evaluator` maps a genome (genes in [0, 1]) to an ObjectiveVector and
    must be total; `eval_map(func, genomes)` may evaluate a generation in
    parallel as long as results come back in argument order.
    """
    if eval_map is None:
        def eval_map(func, genomes):
            return [func(g) for g in genomes]

    rng = np.random.default_rng(config.rng_seed)
    pop_size = config.population_size
    pm = config.effective_mutation_probability

    genomes = [rng.random(config.n_genes) for _ in range(pop_size)]
    objectives = list(eval_map(evaluator, genomes))
    population = [Individual(genome=g, objectives=o) for g, o in zip(genomes, objectives)]
    evaluations = pop_size

    fronts = fast_nondominated_sort(population)
    _assign_crowding(population, fronts)
    reference = _hv_reference(objectives)

    # The result front is an elitist archive over every evaluation, so its
    # hypervolume never decreases and is not capped by the population size.
    archive = extract_front(objectives, genomes=genomes, label=label)

    def record(generation):
        hv = hypervolume_2d(archive, reference)
        if progress is not None:
            progress(GenerationProgress(generation, evaluations, len(archive), hv))
        return hv

    hv_history = [record(0)]
    converged_at = None
    generation = 0
    if convergence_check(hv_history, config.convergence_window, config.convergence_epsilon):
        converged_at = 0

    while converged_at is None and generation < config.max_generations:
        generation += 1
        offspring_genomes = []
        while len(offspring_genomes) < pop_size:
            pa = _tournament(population, rng)
            pb = _tournament(population, rng)
            c1, c2 = sbx_crossover(pa.genome, pb.genome, config.sbx_eta,
                                   config.crossover_probability, rng)
            offspring_genomes.append(polynomial_mutation(c1, config.mutation_eta, pm, rng))
            offspring_genomes.append(polynomial_mutation(c2, config.mutation_eta, pm, rng))
        offspring_objs = list(eval_map(evaluator, offspring_genomes))
        evaluations += pop_size
        combined = population + [Individual(genome=g, objectives=o)
                                 for g, o in zip(offspring_genomes, offspring_objs)]
        archive = extract_front(list(archive.points) + offspring_objs,
                                genomes=list(archive.genomes) + offspring_genomes,
                                label=label)

        fronts = fast_nondominated_sort(combined)
        _assign_crowding(combined, fronts)
        survivors = []
        for front in fronts:
            if len(survivors) + len(front) <= pop_size:
                survivors.extend(front)
            else:
                crowd = np.array([combined[i].crowding for i in front])
                order = np.argsort(-crowd, kind="stable")
                need = pop_size - len(survivors)
                survivors.extend(front[k] for k in order[:need])
            if len(survivors) == pop_size:
                break
        population = [combined[i] for i in survivors]
        fronts = fast_nondominated_sort(population)
        _assign_crowding(population, fronts)

        hv_history.append(record(generation))
        if convergence_check(hv_history, config.convergence_window, config.convergence_epsilon):
            converged_at = generation

    return GaResult(front=archive, evaluations_used=evaluations,
                    hv_history=tuple(hv_history), converged_at_generation=converged_at,
                    generations_run=generation, hv_reference=reference)
