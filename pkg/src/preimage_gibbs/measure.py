"""Points, atomic measures, test functions and the weak-* dictionary distance.

Two phase spaces are supported: the m-torus (points with exact rational or
float coordinates) and one-sided shift spaces (points written as a finite
head followed by a periodically repeated tail).
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Iterator, Sequence, Union

import numpy as np

from .errors import EmptyDictionary, InvalidMeasure, PhaseSpaceMismatch

MASS_TOL = 1e-12

Word = tuple


# ---------------------------------------------------------------------------
# words

def parse_word(text) -> tuple:
    """Parse ``"0110"``, ``"1,12,3"`` or a sequence of ints into a tuple."""
    if isinstance(text, (list, tuple, np.ndarray)):
        return tuple(int(a) for a in text)
    text = str(text).strip()
    if not text:
        return ()
    if "," in text:
        return tuple(int(a) for a in text.split(",") if a.strip() != "")
    return tuple(int(c) for c in text)


def format_word(word: Sequence[int]) -> str:
    if any(a >= 10 for a in word):
        s = ",".join(str(a) for a in word)
        return s + "," if len(word) == 1 else s
    return "".join(str(a) for a in word)


def parse_rational(text) -> Fraction:
    if isinstance(text, Fraction):
        return text
    if isinstance(text, int):
        return Fraction(text)
    return Fraction(str(text))


def format_rational(q) -> str:
    if isinstance(q, Fraction):
        return f"{q.numerator}/{q.denominator}"
    return repr(float(q))


# ---------------------------------------------------------------------------
# points

@dataclass(frozen=True)
class TorusPoint:
    """A point of T^m, coordinates reduced to [0, 1).

    Coordinates are all :class:`fractions.Fraction` (exact) or all floats.
    """

    coords: tuple

    space = "torus"

    def __post_init__(self):
        raw = tuple(self.coords)
        if any(isinstance(c, float) or isinstance(c, np.floating) for c in raw):
            red = tuple(float(c) % 1.0 for c in raw)
        else:
            red = tuple(parse_rational(c) % 1 for c in raw)
        object.__setattr__(self, "coords", red)

    @classmethod
    def of(cls, *coords) -> "TorusPoint":
        return cls(tuple(coords))

    @classmethod
    def origin(cls, dim: int) -> "TorusPoint":
        return cls(tuple(Fraction(0) for _ in range(dim)))

    @property
    def dim(self) -> int:
        return len(self.coords)

    @property
    def is_exact(self) -> bool:
        return all(isinstance(c, Fraction) for c in self.coords)

    def as_float(self) -> np.ndarray:
        return np.array([float(c) for c in self.coords])

    def common_denominator(self) -> int:
        return math.lcm(*(c.denominator for c in self.coords))

    def __str__(self):
        return "(" + ", ".join(format_rational(c) for c in self.coords) + ")"


def _primitive_root(tail: tuple) -> tuple:
    n = len(tail)
    for p in range(1, n + 1):
        if n % p == 0 and tail[:p] * (n // p) == tail:
            return tail[:p]
    return tail


@dataclass(frozen=True)
class ShiftPoint:
    """One-sided sequence ``head + tail tail tail ...`` in canonical form.

    The canonical form has a primitive tail and the shortest possible head,
    so two ShiftPoints are equal exactly when the sequences are equal.
    """

    head: tuple
    tail: tuple

    space = "shift"

    def __post_init__(self):
        head = tuple(int(a) for a in self.head)
        tail = tuple(int(a) for a in self.tail)
        if not tail:
            raise ValueError("shift point needs a nonempty periodic tail")
        tail = _primitive_root(tail)
        while head and head[-1] == tail[-1]:
            head = head[:-1]
            tail = (tail[-1],) + tail[:-1]
        object.__setattr__(self, "head", head)
        object.__setattr__(self, "tail", tail)

    @classmethod
    def parse(cls, head="", tail="0") -> "ShiftPoint":
        return cls(parse_word(head), parse_word(tail))

    @classmethod
    def periodic(cls, word) -> "ShiftPoint":
        return cls((), parse_word(word))

    def symbol(self, i: int) -> int:
        h = len(self.head)
        if i < h:
            return self.head[i]
        return self.tail[(i - h) % len(self.tail)]

    def prefix(self, length: int) -> tuple:
        h = len(self.head)
        if length <= h:
            return self.head[:length]
        reps = (length - h) // len(self.tail) + 1
        return (self.head + self.tail * reps)[:length]

    def shift(self) -> "ShiftPoint":
        if self.head:
            return ShiftPoint(self.head[1:], self.tail)
        return ShiftPoint((), self.tail[1:] + self.tail[:1])

    def prepend(self, symbol: int) -> "ShiftPoint":
        return ShiftPoint((int(symbol),) + self.head, self.tail)

    def __str__(self):
        return f"{format_word(self.head)}({format_word(self.tail)})^inf"


Point = Union[TorusPoint, ShiftPoint]


# ---------------------------------------------------------------------------
# test functions

@dataclass(frozen=True)
class Character:
    """Real or imaginary part of x -> exp(2 pi i k.x) on the torus."""

    k: tuple
    part: str = "cos"

    space = "torus"

    def __post_init__(self):
        object.__setattr__(self, "k", tuple(int(a) for a in self.k))
        if self.part not in ("cos", "sin"):
            raise ValueError(f"character part must be 'cos' or 'sin', got {self.part!r}")
        if self.part == "sin" and not any(self.k):
            raise ValueError("sin part of the zero character vanishes identically")

    @property
    def is_constant(self) -> bool:
        return not any(self.k)

    @property
    def id(self) -> str:
        return f"{self.part}[{','.join(map(str, self.k))}]"

    def __call__(self, point: TorusPoint) -> float:
        _check_space(point.space, self.space)
        if point.is_exact:
            t = sum(a * c for a, c in zip(self.k, point.coords)) % 1
            phase = 2 * math.pi * float(t)
        else:
            phase = 2 * math.pi * (sum(a * c for a, c in zip(self.k, point.coords)) % 1.0)
        return math.cos(phase) if self.part == "cos" else math.sin(phase)


@dataclass(frozen=True)
class Cylinder:
    """Indicator of the cylinder of sequences starting with ``word``."""

    word: tuple

    space = "shift"

    def __post_init__(self):
        object.__setattr__(self, "word", parse_word(self.word))

    @property
    def is_constant(self) -> bool:
        return len(self.word) == 0

    @property
    def id(self) -> str:
        return f"cyl[{format_word(self.word)}]"

    def __call__(self, point: ShiftPoint) -> float:
        _check_space(point.space, self.space)
        return 1.0 if point.prefix(len(self.word)) == self.word else 0.0


@dataclass(frozen=True)
class Tabulated:
    """Arbitrary callback test function; integrable against atomic measures only."""

    func: Callable
    space: str
    name: str = "tabulated"

    is_constant = False

    @property
    def id(self) -> str:
        return self.name

    def __call__(self, point) -> float:
        _check_space(point.space, self.space)
        return float(self.func(point))


TestFunction = Union[Character, Cylinder, Tabulated]


def constant_function(space: str, dim: int = 2) -> TestFunction:
    if space == "torus":
        return Character((0,) * dim)
    return Cylinder(())


def _check_space(a: str, b: str):
    if a != b:
        raise PhaseSpaceMismatch(f"{a} object used with {b} object")


# ---------------------------------------------------------------------------
# measures

def _normalized(weights) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    total = math.fsum(w)
    if not total > 0:
        raise InvalidMeasure("total weight must be positive")
    return w / total


class AtomicMeasure:
    """Finite probability measure sum_i w_i delta_{p_i}.

    Use :meth:`from_atoms` to build one from ``(point, weight)`` pairs; the
    concrete storage is :class:`TorusMeasure` or :class:`ShiftMeasure`.
    """

    space: str
    weights: np.ndarray

    @staticmethod
    def from_atoms(atoms: Iterable[tuple], normalize: bool = False) -> "AtomicMeasure":
        atoms = list(atoms)
        if not atoms:
            raise InvalidMeasure("an atomic measure needs at least one atom")
        spaces = {p.space for p, _ in atoms}
        if len(spaces) != 1:
            raise PhaseSpaceMismatch("atoms from different phase spaces")
        weights = [w for _, w in atoms]
        if normalize:
            weights = _normalized(weights)
        if spaces == {"shift"}:
            return ShiftMeasure(tuple(p for p, _ in atoms), np.asarray(weights, dtype=float))
        return TorusMeasure.from_points([p for p, _ in atoms], weights)

    @staticmethod
    def dirac(point) -> "AtomicMeasure":
        return AtomicMeasure.from_atoms([(point, 1.0)])

    @staticmethod
    def uniform(points) -> "AtomicMeasure":
        points = list(points)
        return AtomicMeasure.from_atoms([(p, 1.0 / len(points)) for p in points])

    def _validate(self):
        w = self.weights
        if w.ndim != 1 or len(w) == 0:
            raise InvalidMeasure("weights must be a nonempty vector")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise InvalidMeasure("weights must be finite and nonnegative")
        total = math.fsum(w)
        if abs(total - 1.0) > MASS_TOL:
            raise InvalidMeasure(f"weights sum to {total!r}, not 1")
        w.setflags(write=False)

    def __len__(self):
        return len(self.weights)

    @property
    def total_mass(self) -> float:
        return math.fsum(self.weights)

    def point(self, i: int):
        raise NotImplementedError

    def points(self) -> list:
        return [self.point(i) for i in range(len(self))]

    def atoms(self) -> Iterator[tuple]:
        for i in range(len(self)):
            yield self.point(i), float(self.weights[i])

    def expectations(self, functions: Sequence[TestFunction]) -> np.ndarray:
        return np.array([integrate(self, g) for g in functions])

    def expectation(self, g: TestFunction) -> float:
        return integrate(self, g)


@dataclass(frozen=True, eq=False)
class TorusMeasure(AtomicMeasure):
    """Atoms on T^m stored as arrays.

    Exact atoms: ``num[i] / den[i]`` with 0 <= num < den (integer arrays,
    int64 or Python-int object arrays). Float atoms: ``coords`` in [0, 1).
    """

    weights: np.ndarray
    num: np.ndarray | None = None
    den: np.ndarray | None = None
    coords: np.ndarray | None = None

    space = "torus"

    def __post_init__(self):
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))
        self._validate()
        if self.coords is None:
            if self.num is None or self.den is None:
                raise InvalidMeasure("exact torus measure needs num and den")
            if self.num.shape[0] != len(self.weights) or self.den.shape != (len(self.weights),):
                raise InvalidMeasure("shape mismatch between atoms and weights")
            if np.any(self.den <= 0):
                raise InvalidMeasure("denominators must be positive")
            self.num.setflags(write=False)
            self.den.setflags(write=False)
        else:
            if self.coords.shape[0] != len(self.weights):
                raise InvalidMeasure("shape mismatch between atoms and weights")
            self.coords.setflags(write=False)

    @classmethod
    def from_points(cls, points: Sequence[TorusPoint], weights) -> "TorusMeasure":
        dims = {p.dim for p in points}
        if len(dims) != 1:
            raise InvalidMeasure("torus atoms of different dimension")
        weights = np.asarray(weights, dtype=float)
        if all(p.is_exact for p in points):
            dens = [p.common_denominator() for p in points]
            nums = [[int(c * d) for c in p.coords] for p, d in zip(points, dens)]
            big = max(dens) > 2**62
            dt = object if big else np.int64
            return cls(weights, num=np.array(nums, dtype=dt), den=np.array(dens, dtype=dt))
        coords = np.array([p.as_float() for p in points], dtype=float)
        return cls(weights, coords=coords)

    @property
    def dim(self) -> int:
        return (self.num if self.coords is None else self.coords).shape[1]

    @property
    def is_exact(self) -> bool:
        return self.coords is None

    def point(self, i: int) -> TorusPoint:
        if self.is_exact:
            d = int(self.den[i])
            return TorusPoint(tuple(Fraction(int(a), d) for a in self.num[i]))
        return TorusPoint(tuple(float(c) for c in self.coords[i]))

    def phases(self, k) -> np.ndarray:
        """Fractional part of k.x for every atom, as floats in [0, 1)."""
        k = np.asarray(k, dtype=np.int64)
        if self.is_exact:
            if self.num.dtype == object:
                t = (self.num @ k.astype(object)) % self.den
                return np.array([int(a) / int(b) for a, b in zip(t, self.den)], dtype=float)
            t = (self.num @ k) % self.den
            return t / self.den
        return (self.coords @ k.astype(float)) % 1.0

    def fourier(self, k) -> complex:
        ph = 2 * np.pi * self.phases(k)
        return complex(np.dot(self.weights, np.cos(ph)), -np.dot(self.weights, np.sin(ph)))

    def expectations(self, functions):
        out = np.empty(len(functions))
        cache: dict = {}
        for i, g in enumerate(functions):
            if isinstance(g, Character):
                _check_dim(len(g.k), self.dim)
                if g.k not in cache:
                    cache[g.k] = self.fourier(g.k)
                c = cache[g.k]
                out[i] = c.real if g.part == "cos" else -c.imag
            else:
                out[i] = integrate(self, g)
        return out


@dataclass(frozen=True, eq=False)
class ShiftMeasure(AtomicMeasure):
    points_: tuple
    weights: np.ndarray
    _prefix_cache: dict = field(default_factory=dict, repr=False, compare=False)

    space = "shift"

    def __post_init__(self):
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))
        self._validate()
        if len(self.points_) != len(self.weights):
            raise InvalidMeasure("shape mismatch between atoms and weights")
        if not all(isinstance(p, ShiftPoint) for p in self.points_):
            raise PhaseSpaceMismatch("shift measure holding non-shift points")

    def point(self, i: int) -> ShiftPoint:
        return self.points_[i]

    def points(self) -> list:
        return list(self.points_)

    def prefix_array(self, length: int) -> np.ndarray:
        if length not in self._prefix_cache:
            arr = np.array([p.prefix(length) for p in self.points_], dtype=np.int64)
            self._prefix_cache[length] = arr.reshape(len(self.points_), length)
        return self._prefix_cache[length]

    def cylinder_mass(self, word) -> float:
        word = parse_word(word)
        if not word:
            return self.total_mass
        mask = np.all(self.prefix_array(len(word)) == np.asarray(word), axis=1)
        return math.fsum(self.weights[mask])

    def expectations(self, functions):
        out = np.empty(len(functions))
        for i, g in enumerate(functions):
            if isinstance(g, Cylinder):
                out[i] = self.cylinder_mass(g.word)
            else:
                out[i] = integrate(self, g)
        return out


def _check_dim(a, b):
    if a != b:
        raise PhaseSpaceMismatch(f"dimension {a} test function on T^{b}")


def integrate(mu: AtomicMeasure, g: TestFunction) -> float:
    """Return sum over atoms of weight * g(point)."""
    _check_space(mu.space, g.space)
    if isinstance(g, Character):
        _check_dim(len(g.k), mu.dim)
        c = mu.fourier(g.k)
        return c.real if g.part == "cos" else -c.imag
    if isinstance(g, Cylinder):
        return mu.cylinder_mass(g.word)
    return math.fsum(w * g(p) for p, w in mu.atoms())


def fourier_coefficient(mu: AtomicMeasure, k) -> complex:
    """sum_i w_i exp(-2 pi i k.x_i) for a torus measure."""
    if mu.space != "torus":
        raise PhaseSpaceMismatch("Fourier coefficients need a torus measure")
    _check_dim(len(k), mu.dim)
    return mu.fourier(k)


def mixture(measures: Sequence[AtomicMeasure], coefficients: Sequence[float]) -> AtomicMeasure:
    """Convex combination of measures on the same phase space (atoms concatenated)."""
    atoms = []
    for mu, c in zip(measures, coefficients):
        atoms.extend((p, c * w) for p, w in mu.atoms())
    return AtomicMeasure.from_atoms(atoms)


# ---------------------------------------------------------------------------
# dictionaries and the weak-* distance

@dataclass(frozen=True)
class TestDictionary:
    __test__ = False  # not a pytest class

    functions: tuple
    weights: tuple
    name: str = "custom"

    def __post_init__(self):
        if len(self.functions) == 0:
            raise EmptyDictionary("test dictionary is empty")
        if len(self.weights) != len(self.functions):
            raise ValueError("one weight per test function required")
        if any(not (w > 0) for w in self.weights):
            raise ValueError("dictionary weights must be strictly positive")
        spaces = {g.space for g in self.functions}
        if len(spaces) != 1:
            raise PhaseSpaceMismatch("dictionary mixes torus and shift test functions")

    @property
    def space(self) -> str:
        return self.functions[0].space

    def __len__(self):
        return len(self.functions)

    @classmethod
    def torus_characters(cls, dim: int, K: int, weight=None) -> "TestDictionary":
        """cos and sin parts of every character with 0 < |k|_inf <= K.

        ``k`` and ``-k`` give the same pair up to sign, so only one of them
        is kept. ``weight`` is a callable of k (default: all ones); use
        :func:`sobolev_weight` for 1/(1+|k|^2).
        """
        if K < 1:
            raise EmptyDictionary("K must be at least 1")
        funcs, ws = [], []
        for k in _half_space_vectors(dim, K):
            w = 1.0 if weight is None else float(weight(k))
            for part in ("cos", "sin"):
                funcs.append(Character(k, part))
                ws.append(w)
        return cls(tuple(funcs), tuple(ws), name=f"characters(K={K})")

    @classmethod
    def cylinder_indicators(cls, words: Iterable, weight=None) -> "TestDictionary":
        funcs = tuple(Cylinder(w) for w in words)
        ws = tuple(1.0 if weight is None else float(weight(g.word)) for g in funcs)
        return cls(funcs, ws, name="cylinders")

    @classmethod
    def constant(cls, space: str, dim: int = 2) -> "TestDictionary":
        return cls((constant_function(space, dim),), (1.0,), name="constant")


def sobolev_weight(k) -> float:
    return 1.0 / (1.0 + sum(a * a for a in k))


def _half_space_vectors(dim: int, K: int) -> list:
    out = []
    for k in np.ndindex(*([2 * K + 1] * dim)):
        v = tuple(int(a) - K for a in k)
        nz = [a for a in v if a != 0]
        if nz and nz[0] > 0:
            out.append(v)
    return out


def expectations(nu, functions: Sequence[TestFunction]) -> np.ndarray:
    """Integrals of each test function against a measure or an oracle."""
    return np.asarray(nu.expectations(functions), dtype=float)


def weak_star_distance(mu, nu, dictionary: TestDictionary) -> float:
    """max over the dictionary of w(g) * |<mu, g> - <nu, g>|.

    ``nu`` may be an :class:`AtomicMeasure` or a Gibbs oracle.
    """
    if not isinstance(dictionary, TestDictionary) or len(dictionary) == 0:
        raise EmptyDictionary("weak-* distance needs a nonempty dictionary")
    _check_space(mu.space, dictionary.space)
    _check_space(nu.space, dictionary.space)
    a = expectations(mu, dictionary.functions)
    b = expectations(nu, dictionary.functions)
    return float(np.max(np.asarray(dictionary.weights) * np.abs(a - b)))


def weighted_discrepancy(mu, nu, dictionary: TestDictionary) -> float:
    """Weighted mean of |<mu,g> - <nu,g>| over the dictionary (summary number)."""
    a = expectations(mu, dictionary.functions)
    b = expectations(nu, dictionary.functions)
    w = np.asarray(dictionary.weights)
    return float(np.dot(w, np.abs(a - b)) / w.sum())


# ---------------------------------------------------------------------------
# serialization

def measure_to_json(mu: AtomicMeasure) -> str:
    atoms = []
    for p, w in mu.atoms():
        if mu.space == "torus":
            atoms.append({"point": [format_rational(c) for c in p.coords], "weight": repr(w)})
        else:
            atoms.append({"head": format_word(p.head), "tail": format_word(p.tail), "weight": repr(w)})
    return json.dumps({"space": mu.space, "atoms": atoms}, indent=1)


def measure_from_json(text: str) -> AtomicMeasure:
    data = json.loads(text)
    atoms = []
    for a in data["atoms"]:
        if data["space"] == "torus":
            coords = tuple(_parse_coord(c) for c in a["point"])
            atoms.append((TorusPoint(coords), float(a["weight"])))
        else:
            atoms.append((ShiftPoint.parse(a["head"], a["tail"]), float(a["weight"])))
    return AtomicMeasure.from_atoms(atoms)


def _parse_coord(c):
    if isinstance(c, float):
        return c
    s = str(c)
    if "/" in s or s.lstrip("-").isdigit():
        return Fraction(s)
    return float(s)


def measure_to_csv(mu: AtomicMeasure) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    if mu.space == "torus":
        wr.writerow([f"x{i + 1}" for i in range(mu.dim)] + ["weight"])
        for p, w in mu.atoms():
            wr.writerow([format_rational(c) for c in p.coords] + [repr(w)])
    else:
        wr.writerow(["head", "tail", "weight"])
        for p, w in mu.atoms():
            wr.writerow([format_word(p.head), format_word(p.tail), repr(w)])
    return buf.getvalue()


def measure_from_csv(text: str) -> AtomicMeasure:
    rows = list(csv.reader(io.StringIO(text)))
    header, body = rows[0], rows[1:]
    atoms = []
    if header[0] == "head":
        for head, tail, w in body:
            atoms.append((ShiftPoint.parse(head, tail), float(w)))
    else:
        for row in body:
            atoms.append((TorusPoint(tuple(_parse_coord(c) for c in row[:-1])), float(row[-1])))
    return AtomicMeasure.from_atoms(atoms)
