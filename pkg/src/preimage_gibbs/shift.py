"""One-sided subshifts of finite type, their Markov Gibbs oracle and cylinder lifts."""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import IllegalWord, PhaseSpaceMismatch, ResourceCapExceeded
from .measure import Cylinder, ShiftPoint, TestFunction, format_word, parse_word
from .potential import LocallyConstantPotential

POWER_TOL = 1e-14
POWER_MAXITER = 100_000
MAX_WORDS = 10**7


@dataclass(frozen=True)
class ShiftSystem:
    """Subshift of finite type given by a primitive 0/1 adjacency matrix."""

    adjacency: tuple
    name: str = "sft"

    def __post_init__(self):
        adj = tuple(tuple(int(a) for a in row) for row in self.adjacency)
        s = len(adj)
        if s < 2 or any(len(r) != s for r in adj):
            raise ValueError("adjacency must be a square matrix over >= 2 symbols")
        if any(a not in (0, 1) for r in adj for a in r):
            raise ValueError("adjacency entries must be 0 or 1")
        object.__setattr__(self, "adjacency", adj)
        if not _is_primitive(np.array(adj)):
            raise ValueError("adjacency matrix is not primitive")

    @classmethod
    def full(cls, s: int) -> "ShiftSystem":
        return cls(tuple((1,) * s for _ in range(s)), name=f"full-{s}-shift")

    @classmethod
    def golden_mean(cls) -> "ShiftSystem":
        return cls(((1, 1), (1, 0)), name="golden-mean")

    @property
    def alphabet_size(self) -> int:
        return len(self.adjacency)

    @property
    def matrix(self) -> np.ndarray:
        return np.array(self.adjacency, dtype=np.int64)

    @property
    def degree(self) -> int:
        """Maximum number of preimages of a point."""
        return int(self.matrix.sum(axis=0).max())

    def describe(self) -> dict:
        return {"type": "shift", "adjacency": [list(r) for r in self.adjacency]}

    def is_legal_word(self, word) -> bool:
        w = parse_word(word)
        if any(not 0 <= a < self.alphabet_size for a in w):
            return False
        return all(self.adjacency[a][b] for a, b in zip(w, w[1:]))

    def is_legal(self, x: ShiftPoint) -> bool:
        if x.space != "shift":
            return False
        seq = x.head + x.tail + x.tail[:1]
        return self.is_legal_word(seq)

    def check(self, x: ShiftPoint) -> ShiftPoint:
        if x.space != "shift":
            raise PhaseSpaceMismatch("expected a shift point")
        if not self.is_legal(x):
            raise IllegalWord(f"point {x} is not in the shift space")
        return x

    def legal_words(self, n: int) -> np.ndarray:
        """All legal words of length n, lexicographic, as an (N, n) array."""
        if n == 0:
            return np.zeros((1, 0), dtype=np.int64)
        words = np.arange(self.alphabet_size, dtype=np.int64)[:, None]
        adj = self.matrix
        for _ in range(n - 1):
            rows, syms = np.nonzero(adj[words[:, -1]])
            if len(rows) > MAX_WORDS:
                raise ResourceCapExceeded(f"more than {MAX_WORDS} legal words")
            words = np.concatenate([words[rows], syms[:, None]], axis=1)
        return words

    def periodic_words(self, n: int) -> np.ndarray:
        """Legal circular words of length n; one per point of Fix(sigma^n)."""
        words = self.legal_words(n)
        keep = self.matrix[words[:, -1], words[:, 0]] == 1
        return words[keep]

    def periodic_count(self, n: int) -> int:
        """tr(A^n), exact."""
        from .torus import matpow
        P = matpow(self.adjacency, n)
        return sum(P[i][i] for i in range(self.alphabet_size))

    def legal_extension(self, word) -> ShiftPoint:
        """Some point of the shift space starting with ``word`` (first cycle found by BFS)."""
        w = parse_word(word)
        if not self.is_legal_word(w) or not w:
            raise IllegalWord(f"{word!r} is not a nonempty legal word")
        adj = self.matrix
        start = w[-1]
        # shortest cycle reachable from the last symbol, entered at its first node
        prev = {start: None}
        queue = deque([start])
        order = []
        while queue:
            a = queue.popleft()
            order.append(a)
            for b in np.nonzero(adj[a])[0]:
                b = int(b)
                if b not in prev:
                    prev[b] = a
                    queue.append(b)
        for a in order:
            cyc = _shortest_cycle(adj, a)
            if cyc is not None:
                path = []
                node = a
                while node != start:
                    path.append(node)
                    node = prev[node]
                path.reverse()
                return ShiftPoint(w + tuple(path), cyc[1:] + cyc[:1])
        raise IllegalWord("no cycle reachable")  # unreachable for primitive systems


def _shortest_cycle(adj: np.ndarray, a: int):
    prev = {}
    queue = deque([a])
    seen = {a}
    while queue:
        u = queue.popleft()
        for v in np.nonzero(adj[u])[0]:
            v = int(v)
            if v == a:
                cyc = [u]
                while cyc[-1] != a:
                    cyc.append(prev[cyc[-1]])
                return tuple(reversed(cyc))
            if v not in seen:
                seen.add(v)
                prev[v] = u
                queue.append(v)
    return None


def _is_primitive(adj: np.ndarray) -> bool:
    n = len(adj)
    P = (adj > 0).astype(np.int64)
    Q = P.copy()
    for _ in range((n - 1) ** 2 + 1):  # Wielandt bound
        if np.all(Q > 0):
            return True
        Q = np.minimum(Q @ P, 1)
    return bool(np.all(Q > 0))


def shift_preimages(S: ShiftSystem, x: ShiftPoint) -> list:
    """Every legal a.x, in symbol order."""
    S.check(x)
    x0 = x.symbol(0)
    return [x.prepend(a) for a in range(S.alphabet_size) if S.adjacency[a][x0]]


def birkhoff_sum(phi: LocallyConstantPotential, y: ShiftPoint, n: int) -> float:
    seq = y.prefix(n + phi.range - 1)
    return math.fsum(phi(seq[i:i + phi.range]) for i in range(n))


# ---------------------------------------------------------------------------
# oracles

def perron(M: np.ndarray, tol: float = POWER_TOL, maxiter: int = POWER_MAXITER):
    """Perron value and right eigenvector of a primitive nonnegative matrix.

    Power iteration normalised in l1; stops when successive iterates agree
    to ``tol`` relative to their largest entry.
    """
    x = np.full(len(M), 1.0 / len(M))
    for _ in range(maxiter):
        y = M @ x
        y /= y.sum()
        if np.max(np.abs(y - x)) <= tol * np.max(y):
            x = y
            break
        x = y
    else:
        raise ArithmeticError("power iteration did not converge")
    lam = float((M @ x).sum() / x.sum())
    return lam, x


@dataclass(frozen=True, eq=False)
class MarkovOracle:
    """Exact equilibrium state of a locally constant potential on an SFT.

    Built from the transfer matrix on states (symbols for range <= 2, blocks
    of r-1 symbols otherwise). ``left @ right == 1``.
    """

    system: ShiftSystem
    potential: LocallyConstantPotential
    states: tuple = field(init=False)
    M: np.ndarray = field(init=False, repr=False)
    eigenvalue: float = field(init=False)
    left: np.ndarray = field(init=False, repr=False)
    right: np.ndarray = field(init=False, repr=False)

    space = "shift"

    def __post_init__(self):
        S, phi = self.system, self.potential
        if phi.alphabet_size != S.alphabet_size:
            raise ValueError("potential alphabet does not match the system")
        s, r = S.alphabet_size, phi.range
        adj = S.matrix
        if r <= 2:
            states = tuple((a,) for a in range(s))
            M = np.zeros((s, s))
            for a in range(s):
                for b in range(s):
                    if adj[a, b]:
                        M[a, b] = math.exp(phi((a,) if r == 1 else (a, b)))
        else:
            states = tuple(tuple(w) for w in S.legal_words(r - 1))
            index = {u: i for i, u in enumerate(states)}
            M = np.zeros((len(states), len(states)))
            for u, i in index.items():
                for b in range(s):
                    if adj[u[-1], b]:
                        M[i, index[u[1:] + (b,)]] = math.exp(phi(u + (b,)))
        lam, right = perron(M)
        _, left = perron(M.T)
        left = left / (left @ right)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "eigenvalue", lam)
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "right", right)
        self.M.setflags(write=False)

    @property
    def pressure(self) -> float:
        return math.log(self.eigenvalue)

    @property
    def state_length(self) -> int:
        return len(self.states[0])

    def _state_path(self, w: tuple) -> list:
        k = self.state_length
        idx = {u: i for i, u in enumerate(self.states)}
        return [idx.get(w[i:i + k]) for i in range(len(w) - k + 1)]

    def stationary(self) -> np.ndarray:
        return self.left * self.right

    def transition(self) -> np.ndarray:
        """Stochastic matrix P_uv = M_uv r_v / (lambda r_u)."""
        return self.M * self.right[None, :] / (self.eigenvalue * self.right[:, None])

    def cylinder_measure(self, word) -> float:
        """mu[w] = l_{w_0} * prod(M / lambda) * r_{w_last} (summed when w is shorter than a state)."""
        w = parse_word(word)
        if not w:
            return 1.0
        if not self.system.is_legal_word(w):
            return 0.0
        k = self.state_length
        if len(w) < k:
            return math.fsum(self.left[i] * self.right[i]
                             for i, u in enumerate(self.states) if u[:len(w)] == w)
        path = self._state_path(w)
        if any(p is None for p in path):
            return 0.0
        val = self.left[path[0]]
        for a, b in zip(path, path[1:]):
            val *= self.M[a, b] / self.eigenvalue
        return float(val * self.right[path[-1]])

    def expectations(self, functions) -> np.ndarray:
        return np.array([self.expectation(g) for g in functions])

    def expectation(self, g: TestFunction) -> float:
        if isinstance(g, Cylinder):
            return self.cylinder_measure(g.word)
        if g.space != "shift":
            raise PhaseSpaceMismatch("shift oracle integrates shift test functions only")
        raise TypeError(f"no closed form for {g.id} under the Markov oracle")


@dataclass(frozen=True)
class HaarOracle:
    """Haar (Lebesgue) measure on T^m: the equilibrium state of constant potentials."""

    dim: int

    space = "torus"

    def expectation(self, g: TestFunction) -> float:
        if g.space != "torus":
            raise PhaseSpaceMismatch("Haar oracle integrates torus test functions only")
        k = getattr(g, "k", None)
        if k is None:
            raise TypeError(f"no closed form for {g.id} under Haar measure")
        return 1.0 if (not any(k) and g.part == "cos") else 0.0

    def expectations(self, functions) -> np.ndarray:
        return np.array([self.expectation(g) for g in functions])


GibbsOracle = MarkovOracle | HaarOracle


def oracle_cylinder_measure(O: MarkovOracle, word) -> float:
    return O.cylinder_measure(word)


# ---------------------------------------------------------------------------
# natural-extension lift

@dataclass(frozen=True)
class LiftResult:
    past: tuple
    future: tuple
    direct: float
    limit: dict  # depth n -> mu(pi f^-n E)
    difference: float  # max |limit - direct| over depths n >= len(past)

    @property
    def anchor_depth(self) -> int:
        return len(self.past)


def two_sided_cylinder_measure(O: MarkovOracle, word) -> float:
    """Stationary two-sided chain value pi_{u_0} prod P_{u_i u_{i+1}}."""
    w = parse_word(word)
    if not w:
        return 1.0
    if not O.system.is_legal_word(w):
        return 0.0
    k = O.state_length
    pi = O.stationary()
    if len(w) < k:
        return math.fsum(pi[i] for i, u in enumerate(O.states) if u[:len(w)] == w)
    path = O._state_path(w)
    if any(p is None for p in path):
        return 0.0
    P = O.transition()
    val = pi[path[0]]
    for a, b in zip(path, path[1:]):
        val *= P[a, b]
    return float(val)


def lifted_cylinder_measure(O: MarkovOracle, past="", future="", extra_depth: int = 3) -> LiftResult:
    """Measure of the natural-extension cylinder fixing ``past`` at times -j..-1
    and ``future`` at times 0..k-1, by two routes.

    Direct: the stationary two-sided Markov chain. Limit: for each depth n,
    the mu-measure of the set of n-th prehistory entries x_{-n} that extend
    to a prehistory in the cylinder. For n >= j that set is the union of
    cylinders [u w] over legal words u of length n - j, enumerated here.
    """
    past, future = parse_word(past), parse_word(future)
    w = past + future
    j = len(past)
    direct = two_sided_cylinder_measure(O, w)
    limit = {}
    for n in range(0, j + extra_depth + 1):
        if not O.system.is_legal_word(w):
            limit[n] = 0.0
        elif n < j:
            limit[n] = O.cylinder_measure(w[j - n:])
        else:
            prefixes = O.system.legal_words(n - j)
            vals = [O.cylinder_measure(tuple(int(a) for a in u) + w) for u in prefixes
                    if not len(u) or not w or O.system.adjacency[int(u[-1])][w[0]]]
            limit[n] = math.fsum(vals)
    diff = max(abs(v - direct) for n, v in limit.items() if n >= j)
    return LiftResult(past, future, direct, limit, diff)


def anchored_words(S: ShiftSystem, max_past: int, max_future: int):
    """Every legal (past, future) pair with len(past) <= max_past, len(future) <= max_future."""
    for j in range(max_past + 1):
        for k in range(max_future + 1):
            for w in itertools.product(range(S.alphabet_size), repeat=j + k):
                if S.is_legal_word(w):
                    yield tuple(w[:j]), tuple(w[j:])


# ---------------------------------------------------------------------------
# Gibbs ratio

def gibbs_ratio(O: MarkovOracle, y: ShiftPoint, n: int) -> float:
    """mu[y_0 .. y_{n-1}] * exp(n P - S_n phi(y)); the Bowen ball is the n-cylinder."""
    O.system.check(y)
    S = birkhoff_sum(O.potential, y, n)
    return O.cylinder_measure(y.prefix(n)) * math.exp(n * O.pressure - S)


def word_label(w) -> str:
    return format_word(tuple(int(a) for a in w))
