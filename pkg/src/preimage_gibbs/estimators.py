"""Weighted preimage measures, periodic-point measures and convergence statistics."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import PhaseSpaceMismatch, ResourceCapExceeded
from .measure import (AtomicMeasure, Cylinder, ShiftMeasure, ShiftPoint, TestDictionary,
                      TorusMeasure, TorusPoint, expectations)
from .potential import TrigPotential
from .shift import HaarOracle, MarkovOracle, ShiftSystem
from .torus import (exact_forward_array, fixed_point_arrays, fixed_point_count,
                    forward, random_rational_points)
from .tree import _merge_exact, build_tree

DEFAULT_SAMPLER_DEPTH = {"shift": 14, "torus": 12}
DEFAULT_DENOMINATOR = 10**6


def _space(system) -> str:
    return "shift" if isinstance(system, ShiftSystem) else "torus"


def weighted_preimage_measure(system, potential, x, n: int, threads: int = 1,
                              force: bool = False) -> AtomicMeasure:
    """(1/n) sum over n-preimages y of x of softmax(S_n phi)(y) * sum_{i<n} delta_{f^i y}."""
    return build_tree(system, potential, x, n, threads=threads, force=force).to_measure()


# ---------------------------------------------------------------------------
# periodic points

@dataclass(frozen=True, eq=False)
class PeriodicData:
    """Fix(f^n) together with S_n phi at each point."""

    system: object
    n: int
    sums: np.ndarray
    num: np.ndarray | None = None
    den: int | None = None
    coords: np.ndarray | None = None
    words: np.ndarray | None = None

    def __len__(self):
        return len(self.sums)

    def weights(self) -> np.ndarray:
        e = np.exp(self.sums - self.sums.max())
        return e / math.fsum(e)

    def points(self) -> list:
        if self.words is not None:
            return [ShiftPoint((), tuple(int(a) for a in w)) for w in self.words]
        if self.coords is not None:
            return [TorusPoint(tuple(float(c) for c in row)) for row in self.coords]
        return [TorusPoint(tuple(Fraction(int(a), self.den) for a in row)) for row in self.num]

    def measure(self) -> AtomicMeasure:
        w = self.weights()
        if self.words is not None:
            return ShiftMeasure(tuple(self.points()), w)
        if self.coords is not None:
            return TorusMeasure(w, coords=self.coords)
        from .tree import Level
        return _merge_exact([Level(np.zeros(0), self.num, self.den, np.zeros(0))], w)


def periodic_data(system, potential, n: int, force: bool = False) -> PeriodicData:
    if isinstance(system, ShiftSystem):
        if system.periodic_count(n) > 10**7 and not force:
            raise ResourceCapExceeded(f"|Fix(sigma^{n})| > 10^7; use force")
        words = system.periodic_words(n)
        r = potential.range
        sums = np.zeros(len(words))
        for i in range(n):
            win = words[:, (i + np.arange(r)) % n]
            sums += potential.on_windows(win)
        return PeriodicData(system, n, sums, words=words)
    arr, den = fixed_point_arrays(system, n, force=force)
    if potential.is_constant:
        sums = np.full(len(arr), n * float(potential.constant))
    elif den is None:
        sums = np.zeros(len(arr))
        y = arr
        for _ in range(n):
            sums += potential.on_coords(y)
            y = system.lift(y) % 1.0
    else:
        sums = np.zeros(len(arr))
        y = arr
        for _ in range(n):
            sums += potential.on_coords(np.asarray(y / den, dtype=float))
            y = exact_forward_array(system, y, den)
    if den is None:
        return PeriodicData(system, n, sums, coords=arr)
    return PeriodicData(system, n, sums, num=arr, den=den)


def periodic_point_measure(system, potential, n: int, force: bool = False) -> AtomicMeasure:
    """sum over Fix(f^n) of exp(S_n phi(x)) delta_x, normalised."""
    return periodic_data(system, potential, n, force=force).measure()


def pressure_estimate(system, potential, n: int, force: bool = False) -> float:
    """(1/n) log sum_{Fix(f^n)} exp(S_n phi)."""
    if potential.is_constant:
        c = potential.constant if isinstance(potential, TrigPotential) else potential.values[0]
        if isinstance(system, ShiftSystem):
            count = system.periodic_count(n)
        elif system.is_linear:
            count = fixed_point_count(system, n)
        else:
            count = len(periodic_data(system, potential, n, force=force))
        return math.log(count) / n + c
    s = periodic_data(system, potential, n, force=force).sums
    m = s.max()
    return float((m + math.log(math.fsum(np.exp(s - m)))) / n)


# ---------------------------------------------------------------------------
# oracles and sampling

def gibbs_oracle(system, potential, surrogate_depth: int | None = None):
    """Exact oracle when one exists, else the periodic-point measure at a fixed depth."""
    if isinstance(system, ShiftSystem):
        return MarkovOracle(system, potential)
    if system.is_linear and potential.is_constant:
        return HaarOracle(system.dim)
    depth = surrogate_depth or DEFAULT_SAMPLER_DEPTH["torus"]
    return periodic_point_measure(system, potential, depth)


def reference_pressure(system, potential) -> float | None:
    if isinstance(system, ShiftSystem):
        return MarkovOracle(system, potential).pressure
    if potential.is_constant:
        return system.entropy + potential.constant
    return None


@dataclass(frozen=True)
class SamplerSpec:
    """How to draw x ~ mu_phi for the outer integral.

    ``kind``: "haar" (uniform rationals with the given denominator; only
    valid for a linear toral map with constant potential), "periodic"
    (periodic-point measure at ``depth``) or "auto".
    """

    kind: str = "auto"
    depth: int | None = None
    denominator: int = DEFAULT_DENOMINATOR

    def resolve(self, system, potential) -> "SamplerSpec":
        space = _space(system)
        kind = self.kind
        if kind == "auto":
            kind = "haar" if (space == "torus" and system.is_linear and potential.is_constant) else "periodic"
        if kind == "haar" and not (space == "torus" and system.is_linear and potential.is_constant):
            raise ValueError("haar sampling is the equilibrium state only for linear maps with constant potential")
        if kind not in ("haar", "periodic"):
            raise ValueError(f"unknown sampler kind {kind!r}")
        depth = self.depth or DEFAULT_SAMPLER_DEPTH[space]
        return SamplerSpec(kind, depth if kind == "periodic" else None, self.denominator)


def sample_points(system, potential, spec: SamplerSpec, count: int, rng: np.random.Generator) -> list:
    spec = spec.resolve(system, potential)
    if spec.kind == "haar":
        return random_rational_points(rng, system.dim, count, spec.denominator)
    data = periodic_data(system, potential, spec.depth)
    idx = rng.choice(len(data), size=count, p=data.weights())
    pts = data.points()
    return [pts[i] for i in idx]


# ---------------------------------------------------------------------------
# convergence statistics

@dataclass(frozen=True)
class ConvergenceReport:
    n_values: tuple
    statistics: tuple
    test_function_id: str
    system_id: str
    sampling: dict = field(default_factory=dict)
    tolerance: float | None = None

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.n_values, self.n_values[1:])):
            raise ValueError("n values must be strictly increasing")
        if not all(math.isfinite(s) for s in self.statistics):
            raise ValueError("statistics must be finite")

    @property
    def minimum(self) -> float:
        return min(self.statistics)

    @property
    def argmin(self) -> int:
        return self.n_values[int(np.argmin(self.statistics))]

    @property
    def min_below_tolerance(self) -> bool | None:
        if self.tolerance is None:
            return None
        return self.minimum < self.tolerance

    def rows(self) -> list:
        samples = self.sampling.get("samples", 1)
        return [(n, s, self.test_function_id, samples) for n, s in zip(self.n_values, self.statistics)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["n", "statistic", "g_id", "samples"])
        for n, s, g, k in self.rows():
            wr.writerow([n, repr(float(s)), g, k])
        return buf.getvalue()

    def to_json(self) -> str:
        d = asdict(self)
        d["n_values"] = list(self.n_values)
        d["statistics"] = [float(s) for s in self.statistics]
        d["minimum"] = self.minimum
        d["min_below_tolerance"] = self.min_below_tolerance
        return json.dumps(d, indent=1, sort_keys=True)


def _cylinder_width(functions) -> int:
    return max([len(g.word) for g in functions if isinstance(g, Cylinder)] + [0])


def preimage_expectations(system, potential, x, n: int, functions, force: bool = False) -> np.ndarray:
    """<mu_n^x, g> for every g, straight from the tree."""
    tree = build_tree(system, potential, x, n, width=_cylinder_width(functions), force=force)
    return tree.expectations(functions)


def birkhoff_deviation(system, oracle_value: float, g, y, n: int) -> float:
    """(1/n) sum_{i<n} g(f^i y) - oracle_value."""
    vals = []
    z = y
    for _ in range(n):
        vals.append(g(z))
        z = z.shift() if isinstance(z, ShiftPoint) else forward(system, z)
    return math.fsum(vals) / n - oracle_value


def l1_convergence_report(system, potential, functions, n_list: Sequence[int], samples: int, seed: int,
                          sampler: SamplerSpec = SamplerSpec(), oracle=None, threads: int = 1,
                          force: bool = False) -> list:
    """One report per test function: (1/N) sum_j |<mu_n^{x_j}, g> - <mu_phi, g>| against n.

    The same N sample points are used for every n.
    """
    if samples < 1:
        raise ValueError("need at least one sample")
    functions = list(functions)
    for g in functions:
        if g.space != _space(system):
            raise PhaseSpaceMismatch(f"{g.id} does not live on this phase space")
    n_list = sorted(set(int(n) for n in n_list))
    rng = np.random.default_rng(seed)
    spec = sampler.resolve(system, potential)
    xs = sample_points(system, potential, spec, samples, rng)
    oracle = oracle if oracle is not None else gibbs_oracle(system, potential, spec.depth)
    target = expectations(oracle, functions)
    constant = np.array([getattr(g, "is_constant", False) for g in functions])

    def one(x):
        return np.array([preimage_expectations(system, potential, x, n, functions, force=force)
                         for n in n_list])

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            vals = list(pool.map(one, xs))
    else:
        vals = [one(x) for x in xs]
    vals = np.array(vals)  # (samples, len(n_list), len(functions))
    dev = np.abs(vals - target[None, None, :])
    dev[:, :, constant] = 0.0
    stat = np.array([[math.fsum(dev[:, i, k]) / samples for k in range(len(functions))]
                     for i in range(len(n_list))])
    sampling = {"kind": spec.kind, "depth": spec.depth, "denominator": spec.denominator,
                "samples": samples, "seed": seed}
    sid = json.dumps(system.describe(), sort_keys=True)
    return [ConvergenceReport(tuple(n_list), tuple(float(v) for v in stat[:, k]), g.id, sid, sampling)
            for k, g in enumerate(functions)]


def l1_convergence_statistic(system, potential, g, n: int, samples: int, seed: int,
                             sampler: SamplerSpec = SamplerSpec(), threads: int = 1) -> float:
    return l1_convergence_report(system, potential, [g], [n], samples, seed, sampler, threads=threads)[0].statistics[0]


def pointwise_sequence(system, potential, z, dictionary: TestDictionary, n_list: Sequence[int],
                       oracle=None, tolerance: float | None = None, threads: int = 1,
                       force: bool = False) -> ConvergenceReport:
    """weak-* distance between mu_n^z and the equilibrium state for each n in the list."""
    if dictionary.space != _space(system):
        raise PhaseSpaceMismatch("dictionary and system live on different phase spaces")
    oracle = oracle if oracle is not None else gibbs_oracle(system, potential)
    funcs = dictionary.functions
    target = expectations(oracle, funcs)
    w = np.asarray(dictionary.weights)
    stats = []
    for n in n_list:
        tree = build_tree(system, potential, z, n, threads=threads, width=_cylinder_width(funcs), force=force)
        stats.append(float(np.max(w * np.abs(tree.expectations(funcs) - target))))
    sid = json.dumps(system.describe(), sort_keys=True)
    return ConvergenceReport(tuple(n_list), tuple(stats), dictionary.name, sid,
                             {"point": str(z), "samples": 1}, tolerance)
