"""Field ordering by covariance rank.

Fields are ranked per row by absolute covariance (rank 1 = most related),
and a permutation minimizing the summed rank along the open path
pi[0] -> pi[1] -> ... -> pi[d-1] places related fields next to each other.
Indices are 0-based throughout this module.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np

from .ingest import TabularDataset

log = logging.getLogger(__name__)

BRUTE_FORCE_MAX_D = 10
_MAX_DEDUP_TRIES = 20

# Reference orders from the original study, 1-based over the raw columns.
REFERENCE_ORDERS = {
    "wbc": (5, 4, 6, 2, 3, 7, 9, 1, 10, 8),
    "wdbc": (5, 27, 14, 16, 4, 11, 2, 10, 3, 6, 1, 7, 13, 29, 20, 24, 8,
             21, 22, 17, 25, 26, 12, 30, 9, 18, 23, 19, 28, 15, 31),
}


@dataclass(frozen=True)
class RankMatrix:
    ranks: np.ndarray       # d x d ints; diagonal 0, off-diagonal rows are perms of 1..d-1
    basis: np.ndarray       # covariance matrix the ranks came from

    @property
    def d(self) -> int:
        return self.ranks.shape[0]


@dataclass(frozen=True)
class FieldOrdering:
    permutation: tuple
    cost: int
    trace: tuple = ()       # best cost after each generation (GA only)


@dataclass(frozen=True)
class GAConfig:
    population: int = 50
    generations: int = 100
    crossover_rate: float = 0.9
    mutation_rate: float = 0.2
    tournament: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.population < 2:
            raise ValueError("population must be >= 2")
        if self.generations < 1:
            raise ValueError("generations must be >= 1")
        for name in ("crossover_rate", "mutation_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.tournament < 1:
            raise ValueError("tournament size must be >= 1")


def ranks_from_covariance(cov: np.ndarray) -> RankMatrix:
    """Row-wise ranking of |cov|, descending; ties go to the lower field index."""
    cov = np.asarray(cov, dtype=np.float64)
    d = cov.shape[0]
    ranks = np.zeros((d, d), dtype=np.int64)
    for i in range(d):
        others = np.array([j for j in range(d) if j != i], dtype=np.int64)
        if d > 1 and not np.any(cov[i, others]):
            log.warning("field %d has zero covariance with every other field; "
                        "ranking it by index order", i)
        order = others[np.argsort(-np.abs(cov[i, others]), kind="stable")]
        ranks[i, order] = np.arange(1, d)
    return RankMatrix(ranks=ranks, basis=cov)


def rank_adjacency(dataset: TabularDataset) -> RankMatrix:
    """Rank matrix from the sample covariance of the dataset's (normalized) features."""
    x = dataset.features
    if x.shape[1] < 2 or x.shape[0] < 2:
        raise ValueError("rank_adjacency needs at least 2 fields and 2 records")
    return ranks_from_covariance(np.cov(x, rowvar=False))


def _check_perm(perm, d: int) -> np.ndarray:
    p = np.asarray(perm, dtype=np.int64)
    if p.shape != (d,) or sorted(p.tolist()) != list(range(d)):
        raise ValueError(f"not a permutation of 0..{d - 1}: {list(perm)}")
    return p


def path_cost(ranks, permutation) -> int:
    r = ranks.ranks if isinstance(ranks, RankMatrix) else np.asarray(ranks)
    p = _check_perm(permutation, r.shape[0])
    return int(r[p[:-1], p[1:]].sum())


def brute_force_order(ranks: RankMatrix) -> FieldOrdering:
    """Exact optimum over all d! permutations; the lexicographically first wins ties."""
    r = ranks.ranks
    d = r.shape[0]
    if d > BRUTE_FORCE_MAX_D:
        raise ValueError(f"brute force limited to d <= {BRUTE_FORCE_MAX_D}, got {d}")
    if d == 1:
        return FieldOrdering((0,), 0)
    best_cost, best_perm = None, None
    perms = itertools.permutations(range(d))
    chunk = 200_000
    while True:
        block = np.fromiter(itertools.chain.from_iterable(itertools.islice(perms, chunk)),
                            dtype=np.int64)
        if block.size == 0:
            break
        block = block.reshape(-1, d)
        costs = r[block[:, :-1], block[:, 1:]].sum(axis=1)
        k = int(np.argmin(costs))
        if best_cost is None or costs[k] < best_cost:
            best_cost, best_perm = int(costs[k]), tuple(int(v) for v in block[k])
    return FieldOrdering(best_perm, best_cost)


def order_crossover(p1: np.ndarray, p2: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """OX1: keep a random slice of p1, fill the rest in p2's cyclic order."""
    d = p1.size
    a, b = sorted(rng.choice(d + 1, size=2, replace=False))
    child = np.full(d, -1, dtype=np.int64)
    child[a:b] = p1[a:b]
    kept = set(p1[a:b].tolist())
    fill = [g for g in np.roll(p2, -b).tolist() if g not in kept]
    slots = [(b + k) % d for k in range(d - (b - a))]
    child[slots] = fill
    return child


def swap_mutation(p: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    i, j = rng.choice(p.size, size=2, replace=False)
    q = p.copy()
    q[i], q[j] = q[j], q[i]
    return q


def _costs(r: np.ndarray, pop: np.ndarray) -> np.ndarray:
    return r[pop[:, :-1], pop[:, 1:]].sum(axis=1)


def ga_optimize(ranks: RankMatrix, config: GAConfig = GAConfig()) -> FieldOrdering:
    """Permutation GA: tournament selection, OX1, swap mutation, one elite.

    Children that duplicate a member of the new generation are swap-mutated
    again (bounded) to keep the population diverse.  ``trace[g]`` is the
    best cost seen after generation g, with g = 0 the initial population.
    """
    r = ranks.ranks
    d = r.shape[0]
    if d < 2:
        raise ValueError("ga_optimize needs d >= 2")
    rng = np.random.default_rng(config.seed)
    pop = np.stack([rng.permutation(d) for _ in range(config.population)])
    cost = _costs(r, pop)

    def tournament() -> np.ndarray:
        picks = rng.choice(config.population, size=min(config.tournament, config.population),
                           replace=False)
        return pop[picks[np.argmin(cost[picks])]]

    k = int(np.argmin(cost))
    best_perm, best_cost = pop[k].copy(), int(cost[k])
    trace = [best_cost]
    n_unique = math.factorial(d) if d < 13 else config.population
    for _ in range(config.generations):
        children = [best_perm.copy()]
        seen = {best_perm.tobytes()}
        while len(children) < config.population:
            a, b = tournament(), tournament()
            child = order_crossover(a, b, rng) if rng.random() < config.crossover_rate else a.copy()
            if rng.random() < config.mutation_rate:
                child = swap_mutation(child, rng)
            # duplicates collapse diversity on small d; re-mutate up to a bound
            tries = 0
            while len(seen) < n_unique and child.tobytes() in seen and tries < _MAX_DEDUP_TRIES:
                child = swap_mutation(child, rng)
                tries += 1
            seen.add(child.tobytes())
            children.append(child)
        pop = np.stack(children)
        cost = _costs(r, pop)
        k = int(np.argmin(cost))
        if cost[k] < best_cost:
            best_perm, best_cost = pop[k].copy(), int(cost[k])
        trace.append(best_cost)
    return FieldOrdering(tuple(int(v) for v in best_perm), best_cost, tuple(trace))


def identity_ordering(ranks: RankMatrix) -> FieldOrdering:
    perm = tuple(range(ranks.d))
    return FieldOrdering(perm, path_cost(ranks, perm))


def reorder_fields(dataset: TabularDataset, ordering) -> TabularDataset:
    """Permute feature columns; labels and split tags are left as they are."""
    perm = ordering.permutation if isinstance(ordering, FieldOrdering) else ordering
    if len(perm) != dataset.d:
        raise ValueError(f"ordering has {len(perm)} fields, dataset has {dataset.d}")
    p = _check_perm(perm, dataset.d)
    return dataset.replace(
        features=dataset.features[:, p].copy(),
        feature_names=tuple(dataset.feature_names[i] for i in p))


def inverse(permutation) -> tuple:
    p = np.asarray(permutation)
    inv = np.empty_like(p)
    inv[p] = np.arange(p.size)
    return tuple(int(v) for v in inv)


def format_ordering(ordering: FieldOrdering) -> str:
    """Comma-separated 1-based field indices."""
    return ",".join(str(i + 1) for i in ordering.permutation)


def parse_ordering(text: str) -> tuple:
    """Inverse of :func:`format_ordering`; returns 0-based indices."""
    items = [t.strip() for t in text.replace("\n", ",").split(",") if t.strip()]
    return tuple(int(t) - 1 for t in items)


def format_trace(trace) -> str:
    lines = ["generation best_cost"]
    lines += [f"{g} {c}" for g, c in enumerate(trace)]
    return "\n".join(lines) + "\n"


def random_rank_matrix(d: int, rng: np.random.Generator) -> RankMatrix:
    """Row-wise random ranks; useful for exercising the solvers."""
    ranks = np.zeros((d, d), dtype=np.int64)
    for i in range(d):
        others = [j for j in range(d) if j != i]
        ranks[i, others] = rng.permutation(d - 1) + 1
    return RankMatrix(ranks=ranks, basis=np.full((d, d), math.nan))
