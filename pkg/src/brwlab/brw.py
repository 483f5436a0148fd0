"""Monte Carlo simulation of the nearest-neighbour branching walk.

Three layers:

* per-run simulation of plain populations (``step`` / ``simulate``), with
  counts kept per site and one Binomial draw per occupied site per direction
  (distributionally identical to per-particle Bernoulli births, since births
  are independent across particles);
* lineage-tagged simulation from +/-1 and the antithetic mirror coupling,
  which builds the +1 trajectory deterministically from the -1 trajectory:
  the boundary-tagged part is mirrored, the crossed part is copied, so the
  crossing births are simultaneous by construction;
* vectorized batch engines that evolve many replicates at once for
  high-throughput summary statistics.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ResourceCapError, UsageError
from .exact_dist import ProcessParams
from .lattice import Site, as_site, neighbors
from .stats_mc import RandomStreamSpec, stream

DEFAULT_POPULATION_CAP = 10_000_000

ALPHA = "alpha"  # descendants of -1 whose whole lineage stayed at negative sites
BETA = "beta"  # descendants of +1 whose whole lineage stayed at positive sites
GAMMA_DESC = "gamma_desc"  # born at 0 from an alpha parent, plus all their descendants
DELTA_DESC = "delta_desc"  # born at 0 from a beta parent, plus all their descendants
PLAIN = "plain"

TAGS = (ALPHA, BETA, GAMMA_DESC, DELTA_DESC, PLAIN)

# (site, tag, visited_zero)
TaggedState = tuple[int, str, bool]


@dataclass(frozen=True)
class TaggedParticle:
    site: int
    tag: str
    visited_zero: bool
    pair_id: int | None = None


@dataclass
class Population:
    """Particle counts per site at one generation."""

    counts: dict[Site, int]
    time: int

    def total(self) -> int:
        return sum(self.counts.values())


@dataclass
class TaggedPopulation:
    """Lineage-tagged counts per (site, tag, visited_zero) at one generation."""

    counts: dict[TaggedState, int]
    time: int

    def total(self) -> int:
        return sum(self.counts.values())

    def multiset(self, tag: str) -> dict[int, int]:
        """Site multiset (site -> count) of one tag class."""
        out: dict[int, int] = {}
        for (site, tg, _visited), n in self.counts.items():
            if tg == tag:
                out[site] = out.get(site, 0) + n
        return out

    def site_counts(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for (site, _tg, _visited), n in self.counts.items():
            out[site] = out.get(site, 0) + n
        return out

    def particles(self) -> list[TaggedParticle]:
        """Materialized particle view, canonically ordered; pair ids number each
        crossed-tag particle in order so coupled copies align."""
        out: list[TaggedParticle] = []
        pair = 0
        for (site, tag, visited), n in sorted(self.counts.items()):
            for _ in range(n):
                if tag in (GAMMA_DESC, DELTA_DESC):
                    out.append(TaggedParticle(site, tag, visited, pair))
                    pair += 1
                else:
                    out.append(TaggedParticle(site, tag, visited))
        return out


def _binomials(rng: np.random.Generator, ns: Sequence[int], p: float) -> np.ndarray:
    """One batched draw per call keeps per-generation RNG use deterministic and fast."""
    return rng.binomial(np.asarray(ns, dtype=np.int64), p)


def step(
    pop: Population,
    params: ProcessParams,
    rng: np.random.Generator,
    cap: int = DEFAULT_POPULATION_CAP,
) -> Population:
    """One generation: every particle independently begets a child at each of
    the 2d nearest sites with probability p, then dies."""
    sites = sorted(pop.counts)
    dirs = neighbors((0,) * params.d)
    ns = [pop.counts[s] for s in sites for _ in dirs]
    draws = _binomials(rng, ns, params.p) if ns else np.zeros(0, dtype=np.int64)
    new: dict[Site, int] = {}
    i = 0
    for s in sites:
        for e in dirs:
            k = int(draws[i])
            i += 1
            if k:
                child = tuple(a + b for a, b in zip(s, e))
                new[child] = new.get(child, 0) + k
    out = Population(counts=new, time=pop.time + 1)
    if out.total() > cap:
        raise ResourceCapError(
            f"population {out.total()} exceeds cap {cap} at generation {out.time}"
        )
    return out


def simulate(
    start: int | Sequence[int],
    t: int,
    params: ProcessParams,
    rng: np.random.Generator,
    cap: int = DEFAULT_POPULATION_CAP,
) -> list[Population]:
    """Trajectory of t+1 populations from a single particle at `start`."""
    if t < 0:
        raise UsageError("time must be >= 0")
    pop = Population(counts={as_site(start, params.d): 1}, time=0)
    traj = [pop]
    for _ in range(t):
        pop = step(pop, params, rng, cap)
        traj.append(pop)
    return traj


def _child_state(site: int, tag: str, visited: bool, child_site: int) -> TaggedState:
    child_visited = visited or child_site == 0
    if tag == ALPHA:
        child_tag = ALPHA if child_site < 0 else GAMMA_DESC
    elif tag == BETA:
        child_tag = BETA if child_site > 0 else DELTA_DESC
    else:
        child_tag = tag
    return (child_site, child_tag, child_visited)


def step_tagged(
    tpop: TaggedPopulation,
    params: ProcessParams,
    rng: np.random.Generator,
    cap: int = DEFAULT_POPULATION_CAP,
) -> TaggedPopulation:
    if params.d != 1:
        raise UsageError("tagged simulation is defined for d = 1")
    states = sorted(tpop.counts)
    ns = [tpop.counts[s] for s in states for _ in (-1, 1)]
    draws = _binomials(rng, ns, params.p) if ns else np.zeros(0, dtype=np.int64)
    new: dict[TaggedState, int] = {}
    i = 0
    for (site, tag, visited) in states:
        for delta in (-1, 1):
            k = int(draws[i])
            i += 1
            if k:
                cs = _child_state(site, tag, visited, site + delta)
                new[cs] = new.get(cs, 0) + k
    out = TaggedPopulation(counts=new, time=tpop.time + 1)
    if out.total() > cap:
        raise ResourceCapError(
            f"population {out.total()} exceeds cap {cap} at generation {out.time}"
        )
    return out


def simulate_tagged(
    start: int,
    t: int,
    params: ProcessParams,
    rng: np.random.Generator,
    cap: int = DEFAULT_POPULATION_CAP,
) -> list[TaggedPopulation]:
    """Tagged trajectory from one particle at -1 (alpha) or +1 (beta)."""
    if start not in (-1, 1):
        raise UsageError(f"start must be -1 or +1, got {start}")
    if t < 0:
        raise UsageError("time must be >= 0")
    tag = ALPHA if start == -1 else BETA
    tpop = TaggedPopulation(counts={(start, tag, False): 1}, time=0)
    traj = [tpop]
    for _ in range(t):
        tpop = step_tagged(tpop, params, rng, cap)
        traj.append(tpop)
    return traj


def _mirror_of_minus(tpop: TaggedPopulation) -> TaggedPopulation:
    """The +1 population coupled to a -1 population: mirror the alpha part into
    beta, copy the crossed part verbatim."""
    counts: dict[TaggedState, int] = {}
    for (site, tag, visited), n in tpop.counts.items():
        if tag == ALPHA:
            counts[(-site, BETA, visited)] = n
        elif tag == GAMMA_DESC:
            counts[(site, DELTA_DESC, visited)] = n
        else:  # pragma: no cover - minus trajectories hold only alpha/gamma states
            raise UsageError(f"unexpected tag {tag} in a -1 trajectory")
    return TaggedPopulation(counts=counts, time=tpop.time)


def coupled_simulate(
    t: int,
    params: ProcessParams,
    rng: np.random.Generator,
    cap: int = DEFAULT_POPULATION_CAP,
) -> tuple[list[TaggedPopulation], list[TaggedPopulation]]:
    """Antithetically coupled pair of trajectories from -1 and from +1.

    The -1 trajectory drives everything: the +1 trajectory's beta part is the
    spatial mirror of the alpha part and its delta part is an exact copy of
    the gamma part, so crossing births coincide and the crossed populations
    agree pathwise at every time. The +1 trajectory is distributed as a
    direct tagged simulation from +1 (checked statistically elsewhere).
    """
    traj_minus = simulate_tagged(-1, t, params, rng, cap)
    traj_plus = [_mirror_of_minus(tp) for tp in traj_minus]
    return traj_minus, traj_plus


def _negate_multiset(ms: dict[int, int]) -> dict[int, int]:
    return {-site: n for site, n in ms.items()}


def coupling_violations(
    traj_minus: Sequence[TaggedPopulation], traj_plus: Sequence[TaggedPopulation]
) -> list[str]:
    """Pathwise checks of one coupled run; empty list means the run passes.

    Checks, at every generation: the delta site multiset equals the gamma
    site multiset; the beta multiset is the negated alpha multiset; and every
    +1-side particle at a site <= 0 carries the visited-zero flag.
    """
    problems: list[str] = []
    if len(traj_minus) != len(traj_plus):
        return [f"trajectory lengths differ: {len(traj_minus)} vs {len(traj_plus)}"]
    for minus, plus in zip(traj_minus, traj_plus):
        s = minus.time
        gamma = minus.multiset(GAMMA_DESC)
        delta = plus.multiset(DELTA_DESC)
        if gamma != delta:
            problems.append(f"t={s}: delta multiset {delta} != gamma multiset {gamma}")
        alpha = minus.multiset(ALPHA)
        beta = plus.multiset(BETA)
        if beta != _negate_multiset(alpha):
            problems.append(f"t={s}: beta multiset {beta} != mirrored alpha {alpha}")
        for (site, tag, visited), n in plus.counts.items():
            if site <= 0 and not visited and n > 0:
                problems.append(f"t={s}: {n} {tag} particle(s) at {site} without visited flag")
    return problems


# ---------------------------------------------------------------------------
# Vectorized batch engines.  One generation draws, for every replicate and
# every cell of the site grid, a Binomial(count, p) per direction; replicates
# are split into fixed-size blocks with one dedicated random stream per block,
# so results do not depend on how blocks are scheduled across workers.
# ---------------------------------------------------------------------------

BATCH_BLOCK = 16_384


def _blocks(n_runs: int, block: int) -> list[tuple[int, int]]:
    return [(i, min(block, n_runs - i * block)) for i in range((n_runs + block - 1) // block)]


def _batch_counts_block(
    t: int, params: ProcessParams, size: int, rng: np.random.Generator, cap: int
) -> np.ndarray:
    """Counts grid (size, (2t+1)^d) after t generations from one particle."""
    d = params.d
    width = 2 * t + 1
    grid = np.zeros((size,) + (width,) * d, dtype=np.int64)
    grid[(slice(None),) + (t,) * d] = 1  # displacement 0 from start sits at index t
    for _ in range(t):
        new = np.zeros_like(grid)
        for axis in range(d):
            for delta in (-1, 1):
                draws = rng.binomial(grid, params.p)
                src = [slice(None)] * (d + 1)
                dst = [slice(None)] * (d + 1)
                if delta == -1:
                    src[axis + 1] = slice(1, None)
                    dst[axis + 1] = slice(None, -1)
                else:
                    src[axis + 1] = slice(None, -1)
                    dst[axis + 1] = slice(1, None)
                new[tuple(dst)] += draws[tuple(src)]
        grid = new
        totals = grid.reshape(size, -1).sum(axis=1)
        if int(totals.max(initial=0)) > cap:
            raise ResourceCapError(f"a replicate exceeded the population cap {cap}")
    return grid


def batch_site_counts(
    start: int | Sequence[int],
    t: int,
    params: ProcessParams,
    n_runs: int,
    seed: int,
    cap: int = DEFAULT_POPULATION_CAP,
    block: int = BATCH_BLOCK,
    stream_offset: int = 0,
) -> np.ndarray:
    """Final-generation count grids for n_runs independent replicates.

    Axis 0 is the replicate; spatial axes have width 2t+1 indexed by
    displacement from the start site (displacement 0 at index t).
    """
    as_site(start, params.d)  # dimension check; the grid is displacement-indexed
    out = []
    for index, size in _blocks(n_runs, block):
        rng = stream(RandomStreamSpec(seed, stream_offset + index))
        out.append(_batch_counts_block(t, params, size, rng, cap))
    return np.concatenate(out, axis=0) if out else np.zeros((0,) + (2 * t + 1,) * params.d, np.int64)


def _batch_tagged_block(
    start: int, t: int, params: ProcessParams, size: int, rng: np.random.Generator, cap: int
) -> tuple[np.ndarray, np.ndarray]:
    """Evolve (boundary, crossed) tag layers for one block; returns both grids.

    Layer 0 holds alpha (start=-1) or beta (start=+1); layer 1 holds the
    crossed tag. Sites live on a width 2t+3 axis with site 0 at index t+1.
    """
    width = 2 * t + 3
    zero = t + 1
    bound = np.zeros((size, width), dtype=np.int64)
    crossed = np.zeros((size, width), dtype=np.int64)
    bound[:, zero + start] = 1
    inward = -start  # direction that moves toward site 0
    for _ in range(t):
        new_bound = np.zeros_like(bound)
        new_crossed = np.zeros_like(crossed)
        for delta in (-1, 1):
            draws = rng.binomial(bound, params.p)
            shifted = np.zeros_like(draws)
            if delta == -1:
                shifted[:, :-1] = draws[:, 1:]
            else:
                shifted[:, 1:] = draws[:, :-1]
            if delta == inward:
                # births landing on site 0 cross over; boundary tags never sit at 0
                new_crossed[:, zero] += shifted[:, zero]
                shifted[:, zero] = 0
            new_bound += shifted
        for delta in (-1, 1):
            draws = rng.binomial(crossed, params.p)
            if delta == -1:
                new_crossed[:, :-1] += draws[:, 1:]
            else:
                new_crossed[:, 1:] += draws[:, :-1]
        bound, crossed = new_bound, new_crossed
        totals = bound.sum(axis=1) + crossed.sum(axis=1)
        if int(totals.max(initial=0)) > cap:
            raise ResourceCapError(f"a replicate exceeded the population cap {cap}")
    return bound, crossed


def batch_tagged_summaries(
    start: int,
    t: int,
    params: ProcessParams,
    n_runs: int,
    seed: int,
    cap: int = DEFAULT_POPULATION_CAP,
    block: int = BATCH_BLOCK,
    stream_offset: int = 0,
) -> dict[str, np.ndarray]:
    """Summary statistics (total, count at +1, count at 0) of direct tagged runs."""
    if params.d != 1:
        raise UsageError("tagged simulation is defined for d = 1")
    if start not in (-1, 1):
        raise UsageError(f"start must be -1 or +1, got {start}")
    totals, at_plus1, at_zero = [], [], []
    zero = t + 1
    for index, size in _blocks(n_runs, block):
        rng = stream(RandomStreamSpec(seed, stream_offset + index))
        bound, crossed = _batch_tagged_block(start, t, params, size, rng, cap)
        totals.append(bound.sum(axis=1) + crossed.sum(axis=1))
        at_plus1.append(bound[:, zero + 1] + crossed[:, zero + 1])
        at_zero.append(bound[:, zero] + crossed[:, zero])
    return {
        "total": np.concatenate(totals) if totals else np.zeros(0, np.int64),
        "at_plus1": np.concatenate(at_plus1) if at_plus1 else np.zeros(0, np.int64),
        "at_zero": np.concatenate(at_zero) if at_zero else np.zeros(0, np.int64),
    }


def batch_coupled_summaries(
    t: int,
    params: ProcessParams,
    n_runs: int,
    seed: int,
    cap: int = DEFAULT_POPULATION_CAP,
    block: int = BATCH_BLOCK,
    stream_offset: int = 0,
) -> dict[str, np.ndarray]:
    """Summary statistics of the coupling-constructed +1 trajectories.

    Each replicate simulates from -1 and reads the +1 summaries off the
    transformed state: beta counts are the mirrored alpha counts and delta
    counts equal gamma counts, so no second simulation is needed.
    """
    totals, at_plus1, at_zero = [], [], []
    zero = t + 1
    for index, size in _blocks(n_runs, block):
        rng = stream(RandomStreamSpec(seed, stream_offset + index))
        alpha, gamma = _batch_tagged_block(-1, t, params, size, rng, cap)
        totals.append(alpha.sum(axis=1) + gamma.sum(axis=1))
        # beta at +1 mirrors alpha at -1; delta equals gamma
        at_plus1.append(alpha[:, zero - 1] + gamma[:, zero + 1])
        at_zero.append(gamma[:, zero])
    return {
        "total": np.concatenate(totals) if totals else np.zeros(0, np.int64),
        "at_plus1": np.concatenate(at_plus1) if at_plus1 else np.zeros(0, np.int64),
        "at_zero": np.concatenate(at_zero) if at_zero else np.zeros(0, np.int64),
    }

def batch_visited_counts(
    start: int,
    t: int,
    params: ProcessParams,
    n_runs: int,
    seed: int,
    cap: int = DEFAULT_POPULATION_CAP,
    block: int = BATCH_BLOCK,
    stream_offset: int = 0,
) -> np.ndarray:
    """Final-generation site counts of crossed-tag (= lineage visited 0) particles.

    Axis 1 has width 2t+3 with site 0 at index t+1. From +1 the crossed tag is
    exactly the visited-zero class, and symmetrically from -1.
    """
    if params.d != 1:
        raise UsageError("tagged simulation is defined for d = 1")
    if start not in (-1, 1):
        raise UsageError(f"start must be -1 or +1, got {start}")
    out = []
    for index, size in _blocks(n_runs, block):
        rng = stream(RandomStreamSpec(seed, stream_offset + index))
        _bound, crossed = _batch_tagged_block(start, t, params, size, rng, cap)
        out.append(crossed)
    return np.concatenate(out, axis=0) if out else np.zeros((0, 2 * t + 3), np.int64)
