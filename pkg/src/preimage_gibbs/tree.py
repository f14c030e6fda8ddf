"""Level-by-level n-preimage trees with per-node Birkhoff sums.

Level j holds the j-preimages of the root. Node i of level j+1 stores the
index of its image in level j (``parent``); children of one parent are
contiguous and in branch order, so the concatenation of levels is ordered
lexicographically by branch path. Building in parallel splits the
first-level branches into contiguous chunks and stitches the chunks back
in order, which yields exactly the arrays of the serial build.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import PhaseSpaceMismatch, ResourceCapExceeded
from .measure import (AtomicMeasure, Character, Cylinder, ShiftMeasure, ShiftPoint,
                      TorusMeasure, TorusPoint, integrate)
from .potential import LocallyConstantPotential, TrigPotential
from .shift import ShiftSystem
from .torus import (exact_preimage_step, float_preimage_step, to_exact_arrays)

MAX_LEAVES = 10**7


@dataclass(frozen=True, eq=False)
class Level:
    parent: np.ndarray  # index into the previous level
    data: np.ndarray  # exact numerators, float coords, or leading-symbol windows
    den: int | None  # common denominator of exact torus levels
    cum: np.ndarray  # phi summed along the path from level 1 down to this node

    def __len__(self):
        return len(self.cum)


def _kind(system, x) -> str:
    if isinstance(system, ShiftSystem):
        if x.space != "shift":
            raise PhaseSpaceMismatch("shift system needs a shift point")
        return "shift"
    if x.space != "torus":
        raise PhaseSpaceMismatch("toral map needs a torus point")
    return "exact" if system.is_linear and x.is_exact else "float"


def _phi_values(kind, potential, data, den) -> np.ndarray:
    if kind == "shift":
        return potential.on_windows(data)
    if potential.is_constant:
        return np.full(len(data), float(potential.constant))
    coords = data / den if kind == "exact" else data
    if data.dtype == object:
        coords = np.array([[int(a) / den for a in row] for row in data], dtype=float)
    return potential.on_coords(np.asarray(coords, dtype=float))


def _step(system, kind, level: Level, potential, width: int) -> Level:
    if kind == "exact":
        parent, data, den = exact_preimage_step(system, level.data, level.den)
    elif kind == "float":
        parent, data = float_preimage_step(system, level.data)
        den = None
    else:
        adj_t = system.matrix.T
        parent, syms = np.nonzero(adj_t[level.data[:, 0]])
        data = np.concatenate([syms[:, None], level.data[parent, : width - 1]], axis=1)
        den = None
    cum = level.cum[parent] + _phi_values(kind, potential, data, den)
    return Level(parent.astype(np.int64), data, den, cum)


def _expand(system, kind, start: Level, potential, width: int, steps: int) -> list:
    out = []
    lvl = start
    for _ in range(steps):
        lvl = _step(system, kind, lvl, potential, width)
        out.append(lvl)
    return out


def _concat(chunks: list, offsets: list) -> Level:
    parent = np.concatenate([c.parent + off for c, off in zip(chunks, offsets)])
    data = np.concatenate([c.data for c in chunks])
    cum = np.concatenate([c.cum for c in chunks])
    return Level(parent, data, chunks[0].den, cum)


@dataclass(frozen=True, eq=False)
class PreimageTree:
    system: object
    potential: object
    root: object
    depth: int
    kind: str
    levels: tuple  # levels[0] is the root
    width: int = 0

    @property
    def leaves(self) -> Level:
        return self.levels[-1]

    @property
    def leaf_sums(self) -> np.ndarray:
        """S_n phi at every leaf."""
        return self.levels[-1].cum

    def leaf_weights(self) -> np.ndarray:
        """exp(S_n phi(y)) / sum_z exp(S_n phi(z)), with the max shifted out."""
        s = self.leaf_sums
        e = np.exp(s - s.max())
        return e / math.fsum(e)

    def node_weights(self) -> list:
        """Leaf mass below every node, for levels 0..n."""
        w = self.leaf_weights()
        out = [w]
        for j in range(self.depth, 0, -1):
            w = np.bincount(self.levels[j].parent, weights=w, minlength=len(self.levels[j - 1]))
            out.append(w)
        return out[::-1]

    def words(self, j: int) -> np.ndarray:
        """Shift trees: the length-j word w with node = w + root."""
        if self.kind != "shift":
            raise TypeError("words exist only for shift trees")
        w = np.zeros((1, 0), dtype=np.int64)
        for i in range(1, j + 1):
            lvl = self.levels[i]
            w = np.concatenate([lvl.data[:, :1], w[lvl.parent]], axis=1)
        return w

    def points(self, j: int) -> list:
        lvl = self.levels[j]
        if self.kind == "exact":
            return [TorusPoint(tuple(Fraction(int(a), lvl.den) for a in row)) for row in lvl.data]
        if self.kind == "float":
            return [TorusPoint(tuple(float(c) for c in row)) for row in lvl.data]
        x = self.root
        return [ShiftPoint(tuple(int(a) for a in w) + x.head, x.tail) for w in self.words(j)]

    # ------------------------------------------------------------------
    def to_measure(self) -> AtomicMeasure:
        """The weighted preimage measure: orbit points of every leaf, merged."""
        n = self.depth
        nw = self.node_weights()
        weights = np.concatenate([nw[j] for j in range(1, n + 1)]) / n
        if self.kind == "float":
            coords = np.concatenate([self.levels[j].data for j in range(1, n + 1)])
            return TorusMeasure(weights / math.fsum(weights), coords=coords)
        if self.kind == "exact":
            return _merge_exact([self.levels[j] for j in range(1, n + 1)], weights)
        pts, acc = [], {}
        off = 0
        for j in range(1, n + 1):
            for p in self.points(j):
                w = weights[off]
                off += 1
                if p in acc:
                    acc[p] += w
                else:
                    acc[p] = w
                    pts.append(p)
        vals = np.array([acc[p] for p in pts])
        return ShiftMeasure(tuple(pts), vals / math.fsum(vals))

    def expectations(self, functions: Sequence) -> np.ndarray:
        """Integrals against the weighted preimage measure without merging atoms."""
        n = self.depth
        nw = self.node_weights()
        out = np.zeros(len(functions))
        for i, g in enumerate(functions):
            if getattr(g, "is_constant", False):
                out[i] = 1.0
            elif isinstance(g, Cylinder) and self.kind == "shift":
                L = len(g.word)
                if L > self.width:
                    out[i] = integrate(self.to_measure(), g)
                    continue
                word = np.asarray(g.word)
                tot = [math.fsum(nw[j][np.all(self.levels[j].data[:, :L] == word, axis=1)])
                       for j in range(1, n + 1)]
                out[i] = math.fsum(tot) / n
            elif isinstance(g, Character) and self.kind != "shift":
                k = np.asarray(g.k, dtype=np.int64)
                acc = 0.0
                for j in range(1, n + 1):
                    lvl = self.levels[j]
                    if self.kind == "exact":
                        if lvl.data.dtype == object:
                            t = np.array([int(v) % lvl.den for v in lvl.data @ k.astype(object)]) / lvl.den
                        else:
                            t = ((lvl.data @ k) % lvl.den) / lvl.den
                    else:
                        t = (lvl.data @ k.astype(float)) % 1.0
                    f = np.cos if g.part == "cos" else np.sin
                    acc += float(np.dot(nw[j], f(2 * np.pi * t)))
                out[i] = acc / n
            else:
                out[i] = integrate(self.to_measure(), g)
        return out


def _merge_exact(levels: list, weights: np.ndarray) -> TorusMeasure:
    nums, dens = [], []
    for lvl in levels:
        num = lvl.data
        if num.dtype == object:
            g = np.array([math.gcd(*(int(a) for a in row), lvl.den) for row in num], dtype=object)
            nums.append(num // g[:, None])
            dens.append(np.array([lvl.den], dtype=object) // g)
        else:
            g = np.gcd.reduce(np.concatenate([num, np.full((len(num), 1), lvl.den, dtype=np.int64)], axis=1), axis=1)
            nums.append(num // g[:, None])
            dens.append(lvl.den // g)
    num = np.concatenate(nums)
    den = np.concatenate(dens)
    if num.dtype == object or den.dtype == object:
        acc: dict = {}
        order = []
        for row, d, w in zip(num, den, weights):
            key = (tuple(int(a) for a in row), int(d))
            if key not in acc:
                acc[key] = 0.0
                order.append(key)
            acc[key] += w
        order.sort()
        unum = np.array([k[0] for k in order], dtype=object)
        uden = np.array([k[1] for k in order], dtype=object)
        uw = np.array([acc[k] for k in order])
    else:
        keys = np.concatenate([num, den[:, None]], axis=1)
        ukeys, inv = np.unique(keys, axis=0, return_inverse=True)
        uw = np.bincount(inv.ravel(), weights=weights, minlength=len(ukeys))
        unum, uden = ukeys[:, :-1].copy(), ukeys[:, -1].copy()
    return TorusMeasure(uw / math.fsum(uw), num=unum, den=uden)


def leaf_bound(system, n: int) -> int:
    return system.degree ** n


def build_tree(system, potential, x, n: int, threads: int = 1, width: int | None = None,
               force: bool = False) -> PreimageTree:
    """All n-preimages of x with their Birkhoff sums.

    ``width`` (shift systems) is how many leading symbols every node keeps;
    at least the potential range, more when long cylinders are queried.
    """
    if n < 1:
        raise ValueError("depth n must be >= 1")
    kind = _kind(system, x)
    if leaf_bound(system, n) > MAX_LEAVES and not force:
        raise ResourceCapExceeded(
            f"depth {n} gives up to {leaf_bound(system, n)} leaves (> {MAX_LEAVES}); use force")
    if kind == "shift":
        if not isinstance(potential, LocallyConstantPotential):
            raise PhaseSpaceMismatch("shift systems need a locally constant potential")
        system.check(x)
        width = max(potential.range, width or 0, 1)
        root = Level(np.zeros(0, dtype=np.int64), np.array([x.prefix(width)], dtype=np.int64), None, np.zeros(1))
    else:
        if not isinstance(potential, TrigPotential):
            raise PhaseSpaceMismatch("toral maps need a trig potential")
        if x.dim != system.dim:
            raise ValueError("point dimension does not match the map")
        width = 0
        if kind == "exact":
            num, den = to_exact_arrays(x)
            root = Level(np.zeros(0, dtype=np.int64), num, den, np.zeros(1))
        else:
            root = Level(np.zeros(0, dtype=np.int64), x.as_float()[None, :], None, np.zeros(1))

    first = _step(system, kind, root, potential, width)
    if threads <= 1 or n == 1 or len(first) < 2:
        rest = _expand(system, kind, first, potential, width, n - 1)
    else:
        bounds = np.linspace(0, len(first), min(threads, len(first)) + 1).astype(int)
        chunks = [Level(np.zeros(hi - lo, dtype=np.int64), first.data[lo:hi], first.den, first.cum[lo:hi])
                  for lo, hi in zip(bounds[:-1], bounds[1:])]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda c: _expand(system, kind, c, potential, width, n - 1), chunks))
        rest = []
        prev_sizes = [hi - lo for lo, hi in zip(bounds[:-1], bounds[1:])]
        for j in range(n - 1):
            offsets = list(np.cumsum([0] + prev_sizes[:-1]))
            rest.append(_concat([p[j] for p in parts], offsets))
            prev_sizes = [len(p[j]) for p in parts]
    return PreimageTree(system, potential, x, n, kind, (root, first, *rest), width)
