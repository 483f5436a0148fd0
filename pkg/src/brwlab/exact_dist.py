"""Exact count-distribution engine for the nearest-neighbour branching walk.

Distributions of particle counts are computed by recursive convolution over
the genealogy: one particle's time-t count at displacement z is the
independent sum, over the 2d nearest sites, of "a child is born there with
probability p and then contributes its own time-(t-1) count". Supports stay
polynomial because the count at a fixed site is bounded by the number of
lattice walks reaching it.

All masses are float64. Tail states may be dropped per operation, but only
while the discarded probability stays below a configurable cap (default
1e-15); the discarded total is carried in ``truncated_mass`` and is never
renormalized away, so equality / dominance tolerances can budget for it.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping

import numpy as np
from scipy import signal

from .errors import ResourceCapError, UsageError
from .lattice import Site, as_site, modulus_eq, modulus_leq, neighbors, feasible_sites, origin

__all__ = [
    "Pmf",
    "JointPmf",
    "ProcessParams",
    "ExactCaps",
    "DEFAULT_CAPS",
    "convolve",
    "bernoulli_mix",
    "descendant_pmf",
    "visited_pmf",
    "joint_pmf_on_subset",
    "dominates",
    "cdf_gap",
    "pmf_equal",
    "verify_monotonicity_exact",
    "duad_pairs",
    "preorder_pairs",
    "MonotonicityReport",
    "PairCheck",
]


@dataclass(frozen=True)
class ProcessParams:
    """Birth probability per neighbour per generation, and lattice dimension."""

    p: float
    d: int = 1

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise UsageError(f"birth probability must be in [0,1], got {self.p}")
        if self.d < 1:
            raise UsageError(f"dimension must be >= 1, got {self.d}")


@dataclass(frozen=True)
class ExactCaps:
    """Resource caps for the exact recursion."""

    max_time: int = 64
    max_support: int = 4_000_000  # cells per intermediate array
    truncation: float = 1e-15  # mass droppable per operation


DEFAULT_CAPS = ExactCaps()


@dataclass(frozen=True)
class Pmf:
    """Probability mass function over counts 0..len(mass)-1.

    ``truncated_mass`` is the probability discarded by tail capping across the
    operations that produced this pmf.
    """

    mass: np.ndarray
    truncated_mass: float = 0.0

    @staticmethod
    def delta(k: int) -> "Pmf":
        m = np.zeros(k + 1)
        m[k] = 1.0
        return Pmf(m)

    @staticmethod
    def from_mapping(mapping: Mapping[int, float], truncated_mass: float = 0.0) -> "Pmf":
        if not mapping:
            raise UsageError("empty pmf")
        top = max(mapping)
        m = np.zeros(top + 1)
        for k, v in mapping.items():
            if k < 0:
                raise UsageError("counts must be nonnegative")
            if v < 0:
                raise UsageError("probabilities must be nonnegative")
            m[k] = v
        pmf = Pmf(m, truncated_mass)
        pmf.validate()
        return pmf

    def as_dict(self) -> dict[int, float]:
        return {int(k): float(v) for k, v in enumerate(self.mass) if v != 0.0}

    def total(self) -> float:
        return float(self.mass.sum())

    def cdf(self) -> np.ndarray:
        return np.cumsum(self.mass)

    def mean(self) -> float:
        return float(np.arange(len(self.mass)) @ self.mass)

    def validate(self, tol: float = 1e-12) -> None:
        if np.any(self.mass < 0):
            raise UsageError("negative mass")
        if abs(self.total() + self.truncated_mass - 1.0) > tol:
            raise UsageError(
                f"mass {self.total()} + truncated {self.truncated_mass} not within {tol} of 1"
            )


@dataclass(frozen=True)
class JointPmf:
    """Joint pmf of the count vector on an ordered site subset.

    ``mass[v_1, ..., v_k]`` is the probability that the count at sites[i]
    equals v_i for every i.
    """

    sites: tuple[int, ...]
    mass: np.ndarray
    truncated_mass: float = 0.0

    @staticmethod
    def delta(sites: tuple[int, ...], vec: tuple[int, ...]) -> "JointPmf":
        m = np.zeros(tuple(v + 1 for v in vec))
        m[vec] = 1.0
        return JointPmf(sites, m)

    def as_dict(self) -> dict[tuple[int, ...], float]:
        out = {}
        for idx in zip(*np.nonzero(self.mass)):
            out[tuple(int(i) for i in idx)] = float(self.mass[idx])
        return out

    def total(self) -> float:
        return float(self.mass.sum())


def _prune(mass: np.ndarray, cap: float) -> tuple[np.ndarray, float]:
    """Drop the lightest states whose combined probability stays below cap."""
    if cap <= 0.0:
        return mass, 0.0
    flat = mass.reshape(-1)
    pos = np.nonzero(flat > 0)[0]
    if len(pos) == 0:
        return mass, 0.0
    order = pos[np.argsort(flat[pos], kind="stable")]
    csum = np.cumsum(flat[order])
    ndrop = int(np.searchsorted(csum, cap, side="left"))
    if ndrop == 0:
        return mass, 0.0
    dropped = float(csum[ndrop - 1])
    out = flat.copy()
    out[order[:ndrop]] = 0.0
    return out.reshape(mass.shape), dropped


def _trim(mass: np.ndarray) -> np.ndarray:
    """Remove trailing all-zero slices along every axis (keep at least one cell)."""
    for axis in range(mass.ndim):
        other = tuple(a for a in range(mass.ndim) if a != axis)
        nz = np.nonzero(mass.any(axis=other) if other else mass != 0)[0]
        top = int(nz[-1]) + 1 if len(nz) else 1
        sl = [slice(None)] * mass.ndim
        sl[axis] = slice(0, top)
        mass = mass[tuple(sl)]
    return mass


def _convolve_arrays(a: np.ndarray, b: np.ndarray, caps: ExactCaps) -> np.ndarray:
    out_cells = 1
    for sa, sb in zip(a.shape, b.shape):
        out_cells *= sa + sb - 1
    if out_cells > caps.max_support:
        raise ResourceCapError(f"convolution support {out_cells} exceeds cap {caps.max_support}")
    if a.ndim == 1:
        return np.convolve(a, b)
    if a.ndim == 2:
        return signal.convolve2d(a, b)
    # direct shifted-add fallback for higher arity
    out = np.zeros(tuple(sa + sb - 1 for sa, sb in zip(a.shape, b.shape)))
    for idx in zip(*np.nonzero(b)):
        sl = tuple(slice(i, i + s) for i, s in zip(idx, a.shape))
        out[sl] += a * b[idx]
    return out


def convolve(a: Pmf, b: Pmf, caps: ExactCaps = DEFAULT_CAPS) -> Pmf:
    """Distribution of X + Y for independent X ~ a, Y ~ b."""
    mass = _convolve_arrays(a.mass, b.mass, caps)
    # unrepresented mass: 1 - (1-ta)(1-tb)
    trunc = a.truncated_mass + b.truncated_mass - a.truncated_mass * b.truncated_mass
    mass, dropped = _prune(mass, caps.truncation)
    return Pmf(_trim(mass), trunc + dropped)


def _convolve_joint(a: JointPmf, b: JointPmf, caps: ExactCaps) -> JointPmf:
    if a.sites != b.sites:
        raise UsageError("joint pmfs over different site subsets")
    mass = _convolve_arrays(a.mass, b.mass, caps)
    trunc = a.truncated_mass + b.truncated_mass - a.truncated_mass * b.truncated_mass
    mass, dropped = _prune(mass, caps.truncation)
    return JointPmf(a.sites, _trim(mass), trunc + dropped)


def bernoulli_mix(a: Pmf | JointPmf, p: float) -> Pmf | JointPmf:
    """p * a + (1-p) * (point mass at zero): an offspring that exists with probability p."""
    if not 0.0 <= p <= 1.0:
        raise UsageError(f"mix probability must be in [0,1], got {p}")
    mass = a.mass * p
    mass[(0,) * mass.ndim] += 1.0 - p
    if isinstance(a, JointPmf):
        return JointPmf(a.sites, _trim(mass), a.truncated_mass * p)
    return Pmf(_trim(mass), a.truncated_mass * p)


_DELTA0 = Pmf.delta(0)
_DELTA1 = Pmf.delta(1)

_desc_cache: dict[tuple, Pmf] = {}


def _canonical(z: Site) -> Site:
    """Representative of z modulo coordinate sign flips and permutations.

    The offspring rule is invariant under these symmetries, so counts at all
    sites of one class share a single distribution; computing on the
    representative makes the reflection symmetry hold bit-exactly.
    """
    return tuple(sorted(abs(c) for c in z))


def _descendant_canon(t: int, cz: Site, params: ProcessParams, caps: ExactCaps) -> Pmf:
    dist = sum(cz)
    if dist > t or (dist - t) % 2 != 0:
        return _DELTA0
    if t == 0:
        return _DELTA1  # dist == 0 here
    key = (t, cz, params.p, params.d, caps.truncation)
    hit = _desc_cache.get(key)
    if hit is not None:
        return hit
    acc: Pmf | None = None
    for e in neighbors(origin(params.d)):
        child_target = _canonical(tuple(c - s for c, s in zip(cz, e)))
        factor = bernoulli_mix(_descendant_canon(t - 1, child_target, params, caps), params.p)
        acc = factor if acc is None else convolve(acc, factor, caps)
    _desc_cache[key] = acc
    return acc


def descendant_pmf(
    t: int,
    z: int | Iterable[int],
    params: ProcessParams,
    caps: ExactCaps = DEFAULT_CAPS,
) -> Pmf:
    """Exact distribution of the time-t count at displacement z of one origin particle."""
    if t < 0:
        raise UsageError("time must be >= 0")
    if t > caps.max_time:
        raise ResourceCapError(f"t={t} exceeds max_time cap {caps.max_time}")
    site = as_site(z, params.d)
    return _descendant_canon(t, _canonical(site), params, caps)


def _check_walk_args(t: int, start: int, params: ProcessParams, caps: ExactCaps) -> None:
    if params.d != 1:
        raise UsageError("visited / joint distributions are defined for d = 1")
    if start not in (-1, 1):
        raise UsageError(f"start must be -1 or +1, got {start}")
    if t < 0:
        raise UsageError("time must be >= 0")
    if t > caps.max_time:
        raise ResourceCapError(f"t={t} exceeds max_time cap {caps.max_time}")


def visited_pmf(
    t: int,
    start: int,
    z: int,
    require_visit: bool,
    params: ProcessParams,
    caps: ExactCaps = DEFAULT_CAPS,
) -> Pmf:
    """Exact distribution of the time-t count at z of descendants of `start`.

    With ``require_visit`` only particles whose ancestral line (including the
    particle itself, at the observation time) has occupied site 0 are counted.
    The recursion runs over typed states (site, visited-flag): a particle at 0
    always carries the flag, and children inherit their parent's flag.
    """
    _check_walk_args(t, start, params, caps)
    z = int(z)
    p = params.p
    memo: dict[tuple[int, int, bool], Pmf] = {}

    def rec(s: int, x: int, flag: bool) -> Pmf:
        flag = flag or x == 0 or not require_visit
        if abs(x - z) > s or (x - z - s) % 2 != 0:
            return _DELTA0
        if s == 0:
            return _DELTA1 if flag else _DELTA0
        key = (s, x, flag)
        hit = memo.get(key)
        if hit is not None:
            return hit
        left = bernoulli_mix(rec(s - 1, x - 1, flag), p)
        right = bernoulli_mix(rec(s - 1, x + 1, flag), p)
        out = convolve(left, right, caps)
        memo[key] = out
        return out

    return rec(t, start, False)


def joint_pmf_on_subset(
    t: int,
    start: int,
    subset: Iterable[int],
    require_visit: bool,
    params: ProcessParams,
    caps: ExactCaps = DEFAULT_CAPS,
    max_sites: int = 2,
) -> JointPmf:
    """Exact joint distribution of qualifying counts on an ordered subset of {0,1,2,...}.

    Multivariate analogue of :func:`visited_pmf` with vector-valued convolution.
    """
    _check_walk_args(t, start, params, caps)
    sites = tuple(sorted(int(c) for c in subset))
    if len(sites) != len(set(sites)):
        raise UsageError("subset sites must be distinct")
    if any(c < 0 for c in sites):
        raise UsageError("subset must lie in {0,1,2,...}")
    if not 1 <= len(sites) <= max_sites:
        raise UsageError(f"subset size must be within 1..{max_sites}")
    p = params.p
    k = len(sites)
    zero = JointPmf.delta(sites, (0,) * k)
    memo: dict[tuple[int, int, bool], JointPmf] = {}

    def rec(s: int, x: int, flag: bool) -> JointPmf:
        flag = flag or x == 0 or not require_visit
        if all(abs(x - c) > s or (x - c - s) % 2 != 0 for c in sites):
            return zero
        if s == 0:
            if flag and x in sites:
                vec = tuple(1 if c == x else 0 for c in sites)
                return JointPmf.delta(sites, vec)
            return zero
        key = (s, x, flag)
        hit = memo.get(key)
        if hit is not None:
            return hit
        left = bernoulli_mix(rec(s - 1, x - 1, flag), p)
        right = bernoulli_mix(rec(s - 1, x + 1, flag), p)
        out = _convolve_joint(left, right, caps)
        memo[key] = out
        return out

    return rec(t, start, False)


def _padded_cdfs(a: Pmf, b: Pmf) -> tuple[np.ndarray, np.ndarray]:
    n = max(len(a.mass), len(b.mass))
    ca = np.cumsum(np.pad(a.mass, (0, n - len(a.mass))))
    cb = np.cumsum(np.pad(b.mass, (0, n - len(b.mass))))
    return ca, cb


def cdf_gap(a: Pmf, b: Pmf) -> float:
    """max_x CDF_a(x) - CDF_b(x); <= 0 everywhere means a dominates b exactly."""
    ca, cb = _padded_cdfs(a, b)
    return float(np.max(ca - cb))


def dominates(a: Pmf, b: Pmf, tol: float = 1e-12) -> bool:
    """First-order stochastic dominance of a over b: CDF_a <= CDF_b + tol pointwise."""
    return cdf_gap(a, b) <= tol


def pmf_equal(a: Pmf | JointPmf, b: Pmf | JointPmf, tol: float = 1e-12) -> bool:
    """Pointwise mass equality within tol, truncated mass counted against the budget."""
    return mass_gap(a, b) <= tol


def mass_gap(a: Pmf | JointPmf, b: Pmf | JointPmf) -> float:
    """Sup-norm of the pointwise mass difference plus both truncation budgets."""
    if isinstance(a, JointPmf) != isinstance(b, JointPmf):
        raise UsageError("cannot compare a joint pmf with a plain pmf")
    if a.mass.ndim != b.mass.ndim:
        raise UsageError(f"arity mismatch: {a.mass.ndim} vs {b.mass.ndim}")
    if isinstance(a, JointPmf) and a.sites != b.sites:
        raise UsageError(f"site subsets differ: {a.sites} vs {b.sites}")
    shape = tuple(max(sa, sb) for sa, sb in zip(a.mass.shape, b.mass.shape))
    pa = np.zeros(shape)
    pa[tuple(slice(0, s) for s in a.mass.shape)] = a.mass
    pb = np.zeros(shape)
    pb[tuple(slice(0, s) for s in b.mass.shape)] = b.mass
    return float(np.max(np.abs(pa - pb))) + a.truncated_mass + b.truncated_mass


@dataclass(frozen=True)
class PairCheck:
    """One ordered site pair checked for dominance (or two-sided equality)."""

    t: int
    z: Site
    w: Site
    relation: str  # "dominates" or "equal"
    gap: float
    ok: bool


@dataclass
class MonotonicityReport:
    t_max: int
    p: float
    d: int
    mode: str
    tol: float
    pairs: list[PairCheck] = field(default_factory=list)

    @property
    def violations(self) -> list[PairCheck]:
        return [c for c in self.pairs if not c.ok]


def duad_pairs(t: int, d: int) -> list[tuple[Site, Site, str]]:
    """Nearest feasible same-time pairs, ordered by the modulus preorder."""
    pairs: list[tuple[Site, Site, str]] = []
    if d == 1:
        lo = t % 2
        for z in range(lo, t - 1, 2):
            pairs.append(((z,), (z + 2,), "dominates"))
        if t % 2 == 1:
            pairs.append(((-1,), (1,), "equal"))
        return pairs
    deltas = [
        (2, 0), (-2, 0), (0, 2), (0, -2),
        (1, 1), (1, -1), (-1, 1), (-1, -1),
    ]
    seen: set[tuple[Site, Site]] = set()
    for z in feasible_sites(t, origin(d)):
        for dx in deltas:
            w = tuple(a + b for a, b in zip(z, dx))
            if not modulus_leq(z, w):
                continue
            if sum(abs(c) for c in w) > t:
                continue
            if modulus_eq(z, w):
                key = (min(z, w), max(z, w))
                if key in seen:
                    continue
                seen.add(key)
                pairs.append((key[0], key[1], "equal"))
            else:
                pairs.append((z, w, "dominates"))
    return pairs


def preorder_pairs(t: int, d: int) -> list[tuple[Site, Site, str]]:
    """All ordered feasible pairs z <= w in the modulus preorder."""
    sites = feasible_sites(t, origin(d))
    pairs: list[tuple[Site, Site, str]] = []
    seen: set[tuple[Site, Site]] = set()
    for z in sites:
        for w in sites:
            if z == w or not modulus_leq(z, w):
                continue
            if modulus_eq(z, w):
                key = (min(z, w), max(z, w))
                if key in seen:
                    continue
                seen.add(key)
                pairs.append((key[0], key[1], "equal"))
            else:
                pairs.append((z, w, "dominates"))
    return pairs


def verify_monotonicity_exact(
    t_max: int,
    params: ProcessParams,
    mode: str = "duads",
    tol: float = 1e-12,
    caps: ExactCaps = DEFAULT_CAPS,
) -> MonotonicityReport:
    """Check stochastic dominance along the modulus preorder, exactly.

    duads mode checks every pair of nearest feasible sites at each time
    (equal-modulus duads are checked for two-sided equality); full_preorder
    mode checks every feasible ordered pair.
    """
    if params.d not in (1, 2):
        raise UsageError("exact monotonicity sweep supports d in {1, 2}")
    if mode not in ("duads", "full_preorder"):
        raise UsageError(f"unknown mode {mode!r}")
    report = MonotonicityReport(t_max=t_max, p=params.p, d=params.d, mode=mode, tol=tol)
    pair_fn = duad_pairs if mode == "duads" else preorder_pairs
    for t in range(1, t_max + 1):
        for z, w, relation in pair_fn(t, params.d):
            pz = descendant_pmf(t, z, params, caps)
            pw = descendant_pmf(t, w, params, caps)
            if relation == "equal":
                gap = mass_gap(pz, pw)
            else:
                gap = cdf_gap(pz, pw)
            ok = gap <= tol
            report.pairs.append(PairCheck(t=t, z=z, w=w, relation=relation, gap=gap, ok=ok))
    return report
