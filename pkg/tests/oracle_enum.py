"""Brute-force genealogy oracle, independent of the production recursion.

Enumerates every assignment of the per-particle birth bits (one bit per
nearest site per particle per generation) and accumulates the exact
probability of every reachable population snapshot. Distributions of any
count statistic are then read off the snapshot weights. Plain dicts and
math.fsum only: nothing is shared with the convolution engine it checks.

A snapshot is a sorted tuple of (site, visited_flag) pairs; `visited_flag`
records whether the particle's ancestral line (itself included) has occupied
site 0. For d >= 2 sites are coordinate tuples and the flag tracks the
all-zero site, though only d = 1 uses it.
"""
from __future__ import annotations

import itertools
import math
from typing import Iterable


def _neighbors(site: tuple[int, ...]) -> list[tuple[int, ...]]:
    out = []
    for i in range(len(site)):
        for delta in (-1, 1):
            out.append(site[:i] + (site[i] + delta,) + site[i + 1 :])
    return out


def _is_zero(site: tuple[int, ...]) -> bool:
    return all(c == 0 for c in site)


def enumerate_populations(
    t: int, p: float, start: tuple[int, ...]
) -> dict[tuple, float]:
    """Map from time-t population snapshot to its exact probability."""
    start_state = (start, _is_zero(start))
    layers: dict[tuple, list[float]] = {(start_state,): [1.0]}
    for _ in range(t):
        nxt: dict[tuple, list[float]] = {}
        for pop, weights in layers.items():
            weight = math.fsum(weights)
            n_dirs = 2 * len(start)
            # one bit-vector per particle: bit j says "child born at neighbor j"
            for bits in itertools.product(range(2**n_dirs), repeat=len(pop)):
                prob = weight
                children = []
                for (site, visited), b in zip(pop, bits):
                    for j, child_site in enumerate(_neighbors(site)):
                        if (b >> j) & 1:
                            prob *= p
                            children.append((child_site, visited or _is_zero(child_site)))
                        else:
                            prob *= 1.0 - p
                snapshot = tuple(sorted(children))
                nxt.setdefault(snapshot, []).append(prob)
        layers = nxt
    return {pop: math.fsum(ws) for pop, ws in layers.items()}


def pmf_of_count(
    populations: dict[tuple, float],
    z: tuple[int, ...],
    require_visit: bool = False,
) -> dict[int, float]:
    """Distribution of the number of (qualifying) particles at site z."""
    buckets: dict[int, list[float]] = {}
    for pop, prob in populations.items():
        count = sum(
            1 for site, visited in pop if site == z and (visited or not require_visit)
        )
        buckets.setdefault(count, []).append(prob)
    return {k: math.fsum(v) for k, v in sorted(buckets.items())}


def joint_pmf_of_counts(
    populations: dict[tuple, float],
    subset: Iterable[int],
    require_visit: bool = False,
) -> dict[tuple[int, ...], float]:
    """Joint distribution of qualifying counts on a 1-d site subset."""
    sites = tuple(sorted(subset))
    buckets: dict[tuple[int, ...], list[float]] = {}
    for pop, prob in populations.items():
        vec = tuple(
            sum(
                1
                for site, visited in pop
                if site == (c,) and (visited or not require_visit)
            )
            for c in sites
        )
        buckets.setdefault(vec, []).append(prob)
    return {k: math.fsum(v) for k, v in sorted(buckets.items())}
