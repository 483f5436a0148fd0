"""Integer-lattice geometry.

Sites of Z^d with the coordinate-wise-modulus preorder and walk
feasibility (range + parity), space-time points of the oriented lattices
(even / odd parity classes), and the finite trapezoid sublattice used by
the percolation sweeps, including its mirror symmetry about the y = 0 axis.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

import numpy as np

from .errors import UsageError

Site = tuple[int, ...]


class Point(NamedTuple):
    """Space-time point: spatial coordinate y at generation k."""

    y: int
    k: int


class Bond(NamedTuple):
    """Oriented bond between consecutive generations; to.y = frm.y +/- 1."""

    frm: Point
    to: Point


def as_site(z: int | Iterable[int], d: int | None = None) -> Site:
    """Normalize an int or coordinate iterable to a Site tuple, checking dimension."""
    site = (int(z),) if isinstance(z, (int, np.integer)) else tuple(int(c) for c in z)
    if d is not None and len(site) != d:
        raise UsageError(f"site {site} has dimension {len(site)}, expected {d}")
    return site


def neighbors(z: Site) -> list[Site]:
    """The 2d nearest sites, in canonical order (per coordinate: -1 step, then +1)."""
    out = []
    for i in range(len(z)):
        for delta in (-1, 1):
            out.append(z[:i] + (z[i] + delta,) + z[i + 1 :])
    return out


def modulus_leq(z: int | Iterable[int], w: int | Iterable[int]) -> bool:
    """Coordinate-wise |z_i| <= |w_i|."""
    zs, ws = as_site(z), as_site(w)
    if len(zs) != len(ws):
        raise UsageError(f"dimension mismatch: {len(zs)} vs {len(ws)}")
    return all(abs(a) <= abs(b) for a, b in zip(zs, ws))


def modulus_eq(z: int | Iterable[int], w: int | Iterable[int]) -> bool:
    """Coordinate-wise |z_i| == |w_i| (equivalence classes of the preorder)."""
    return modulus_leq(z, w) and modulus_leq(w, z)


def is_feasible(z: int | Iterable[int], t: int, start: int | Iterable[int]) -> bool:
    """Whether a walk started at `start` can occupy `z` at time t (range and parity)."""
    if t < 0:
        raise UsageError("time must be >= 0")
    zs = as_site(z)
    ss = as_site(start, len(zs))
    dist = sum(abs(a - b) for a, b in zip(zs, ss))
    return dist <= t and (dist - t) % 2 == 0


def origin(d: int) -> Site:
    return (0,) * d


def feasible_sites(t: int, start: int | Iterable[int] = 0, d: int | None = None) -> list[Site]:
    """All sites occupied with nonzero probability at time t from `start`."""
    ss = as_site(start, d)
    ranges = [range(c - t, c + t + 1) for c in ss]
    return [z for z in itertools.product(*ranges) if is_feasible(z, t, ss)]


def mirror(pt: Point) -> Point:
    """Reflection about the y = 0 axis; axis points are fixed."""
    return Point(-pt.y, pt.k)


def mirror_bond(b: Bond) -> Bond:
    return Bond(mirror(b.frm), mirror(b.to))


def in_even_lattice(pt: Point) -> bool:
    """Membership in the space-time lattice with y + k even, k >= 0."""
    return pt.k >= 0 and (pt.y + pt.k) % 2 == 0


def in_odd_lattice(pt: Point) -> bool:
    """Membership in the odd-shifted lattice (y + k odd), home of the trapezoid."""
    return pt.k >= 0 and (pt.y + pt.k) % 2 == 1


@dataclass
class Trapezoid:
    """Finite sublattice between (-1,0),(1,0) and (-1-n,n),(1+n,n).

    Points and bonds are stored in canonical order: level ascending, then y
    ascending, with each point's left child bond before its right child bond.
    The canonical order makes bond indices (and therefore bit-string encodings
    of configurations) reproducible across runs.
    """

    n: int
    points: list[Point]
    bonds: list[Bond]
    index: dict[Bond, int]
    point_index: dict[Point, int]
    # per-bond source/destination point indices, for vectorized path counting
    bond_src: np.ndarray = field(repr=False)
    bond_dst: np.ndarray = field(repr=False)
    _levels: list[list[tuple[Bond, int]]] | None = field(default=None, repr=False)

    def points_at_level(self, k: int) -> list[Point]:
        if not 0 <= k <= self.n:
            raise UsageError(f"level {k} outside 0..{self.n}")
        return [Point(y, k) for y in range(-1 - k, 2 + k, 2)]

    def contains(self, pt: Point) -> bool:
        return 0 <= pt.k <= self.n and abs(pt.y) <= 1 + pt.k and (pt.y + pt.k) % 2 == 1

    def _level_table(self) -> list[list[tuple[Bond, int]]]:
        if self._levels is None:
            table: list[list[tuple[Bond, int]]] = [[] for _ in range(max(self.n, 1))]
            for i, b in enumerate(self.bonds):
                table[b.frm.k].append((b, i))
            self._levels = table
        return self._levels

    def level_bonds(self, k: int) -> list[Bond]:
        """Bonds from level k to level k+1, in canonical order."""
        if not 0 <= k < self.n:
            raise UsageError(f"bond level {k} outside 0..{self.n - 1}")
        return [b for b, _ in self._level_table()[k]]

    def level_bond_indices(self, k: int) -> list[tuple[Bond, int]]:
        if not 0 <= k < self.n:
            raise UsageError(f"bond level {k} outside 0..{self.n - 1}")
        return self._level_table()[k]

    def mirror_bond_permutation(self) -> np.ndarray:
        """perm[i] = index of the mirror image of bond i (an involution)."""
        return np.array([self.index[mirror_bond(b)] for b in self.bonds], dtype=np.int64)

    def rotation_permutation(self, m: int) -> np.ndarray:
        """Bond permutation realizing the mirror swap of all bonds ending at time <= m."""
        if not 0 <= m <= self.n:
            raise UsageError(f"m={m} outside 0..{self.n}")
        perm = np.arange(len(self.bonds), dtype=np.int64)
        mirror_perm = self.mirror_bond_permutation()
        for i, b in enumerate(self.bonds):
            if b.to.k <= m:
                perm[i] = mirror_perm[i]
        return perm


def build_trapezoid(n: int) -> Trapezoid:
    """Construct the horizon-n trapezoid; level k holds k+2 points."""
    if n < 0:
        raise UsageError("horizon must be >= 0")
    points: list[Point] = []
    for k in range(n + 1):
        points.extend(Point(y, k) for y in range(-1 - k, 2 + k, 2))
    point_index = {pt: i for i, pt in enumerate(points)}
    bonds: list[Bond] = []
    for k in range(n):
        for y in range(-1 - k, 2 + k, 2):
            bonds.append(Bond(Point(y, k), Point(y - 1, k + 1)))
            bonds.append(Bond(Point(y, k), Point(y + 1, k + 1)))
    index = {b: i for i, b in enumerate(bonds)}
    bond_src = np.array([point_index[b.frm] for b in bonds], dtype=np.int64)
    bond_dst = np.array([point_index[b.to] for b in bonds], dtype=np.int64)
    return Trapezoid(
        n=n,
        points=points,
        bonds=bonds,
        index=index,
        point_index=point_index,
        bond_src=bond_src,
        bond_dst=bond_dst,
    )
