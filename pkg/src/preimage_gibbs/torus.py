"""Toral endomorphisms x -> A x + eps p(x) (mod 1) on T^m.

Linear maps (eps = 0) are handled in exact integer arithmetic: points live
on a common denominator and preimages / periodic points come from coset
representatives of Z^m / B Z^m obtained with a Smith normal form. Perturbed
maps follow every linear branch with damped Newton iterations and refuse
to answer when a branch fails to converge or two branches collide.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import CertificationError, ResourceCapExceeded, SingularMatrix
from .measure import TorusPoint, parse_rational

HYPERBOLIC_MARGIN = 1e-9
NEWTON_MAX_ITER = 50
NEWTON_TOL = 1e-13
ROUNDTRIP_TOL = 1e-10
COLLISION_TOL = 1e-8
MAX_POINTS = 10**7
_INT64_SAFE = 2**62


# ---------------------------------------------------------------------------
# integer linear algebra

def _imat(A) -> list:
    return [[int(a) for a in row] for row in A]


def _identity(m: int) -> list:
    return [[int(i == j) for j in range(m)] for i in range(m)]


def matmul(A, B) -> list:
    return [[sum(a * b for a, b in zip(row, col)) for col in zip(*B)] for row in A]


def matpow(A, n: int) -> list:
    A = _imat(A)
    R = _identity(len(A))
    while n:
        if n & 1:
            R = matmul(R, A)
        A = matmul(A, A)
        n >>= 1
    return R


def det(A) -> int:
    """Exact integer determinant (fraction-free Bareiss elimination)."""
    M = _imat(A)
    m = len(M)
    sign, prev = 1, 1
    for k in range(m - 1):
        if M[k][k] == 0:
            for i in range(k + 1, m):
                if M[i][k] != 0:
                    M[k], M[i] = M[i], M[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, m):
            for j in range(k + 1, m):
                M[i][j] = (M[i][j] * M[k][k] - M[i][k] * M[k][j]) // prev
        prev = M[k][k]
    return sign * M[m - 1][m - 1]


def adjugate(A) -> list:
    A = _imat(A)
    m = len(A)
    if m == 1:
        return [[1]]
    adj = [[0] * m for _ in range(m)]
    for i in range(m):
        for j in range(m):
            minor = [row[:j] + row[j + 1:] for k, row in enumerate(A) if k != i]
            adj[j][i] = (-1) ** (i + j) * det(minor)
    return adj


@dataclass(frozen=True)
class SmithDecomposition:
    """A = U @ D @ V with U, V unimodular and D = diag(d_1 | d_2 | ... | d_m)."""

    U: tuple
    D: tuple
    V: tuple

    @property
    def diagonal(self) -> tuple:
        return tuple(self.D[i][i] for i in range(len(self.D)))

    def coset_representatives(self) -> np.ndarray:
        """Integer vectors U t, 0 <= t_i < d_i: one per class of Z^m / A Z^m.

        Rows are ordered lexicographically in t; that order is the branch
        index used everywhere else.
        """
        d = self.diagonal
        t = np.indices(d).reshape(len(d), -1).T.astype(object)
        U = np.array(self.U, dtype=object)
        reps = t @ U.T
        if all(abs(int(v)) < _INT64_SAFE for v in reps.ravel()):
            return reps.astype(np.int64)
        return reps


def smith_normal_form(A) -> SmithDecomposition:
    D = _imat(A)
    m = len(D)
    U, V = _identity(m), _identity(m)

    def swap_rows(i, j):
        D[i], D[j] = D[j], D[i]
        for row in U:
            row[i], row[j] = row[j], row[i]

    def swap_cols(i, j):
        for row in D:
            row[i], row[j] = row[j], row[i]
        V[i], V[j] = V[j], V[i]

    for t in range(m):
        while True:
            nz = [(abs(D[i][j]), i, j) for i in range(t, m) for j in range(t, m) if D[i][j]]
            if not nz:
                break
            _, i, j = min(nz)
            swap_rows(t, i)
            swap_cols(t, j)
            p = D[t][t]
            clean = True
            for i in range(t + 1, m):
                q = D[i][t] // p
                if q:
                    D[i] = [a - q * b for a, b in zip(D[i], D[t])]
                    for row in U:
                        row[t] += q * row[i]
                clean &= D[i][t] == 0
            for j in range(t + 1, m):
                q = D[t][j] // p
                if q:
                    for row in D:
                        row[j] -= q * row[t]
                    V[t] = [a + q * b for a, b in zip(V[t], V[j])]
                clean &= D[t][j] == 0
            if not clean:
                continue
            bad = [(i, j) for i in range(t + 1, m) for j in range(t + 1, m) if D[i][j] % p]
            if not bad:
                break
            i = bad[0][0]
            D[t] = [a + b for a, b in zip(D[t], D[i])]
            for row in U:
                row[i] -= row[t]
        if D[t][t] < 0:
            D[t] = [-a for a in D[t]]
            for row in U:
                row[t] = -row[t]
    freeze = lambda M: tuple(tuple(r) for r in M)  # noqa: E731
    return SmithDecomposition(freeze(U), freeze(D), freeze(V))


# ---------------------------------------------------------------------------
# classification

class MapClass(enum.Enum):
    EXPANDING = "Expanding"
    HYPERBOLIC_INVERTIBLE = "HyperbolicInvertible"
    HYPERBOLIC_NONINVERTIBLE = "HyperbolicNoninvertible"
    NOT_HYPERBOLIC = "NotHyperbolic"


@dataclass(frozen=True)
class HyperbolicityReport:
    eigenvalues: tuple
    map_class: MapClass
    entropy: float


def classify(A) -> HyperbolicityReport:
    """Eigenvalues, hyperbolicity class and topological entropy of f_A."""
    A = _imat(A)
    d = det(A)
    if d == 0:
        raise SingularMatrix("det A = 0: the induced map is not a covering")
    eig = np.linalg.eigvals(np.array(A, dtype=float))
    mods = np.abs(eig)
    entropy = float(sum(math.log(r) for r in mods if r > 1.0))
    if np.any(np.abs(mods - 1.0) < HYPERBOLIC_MARGIN):
        cls = MapClass.NOT_HYPERBOLIC
    elif np.all(mods > 1.0):
        cls = MapClass.EXPANDING
    elif abs(d) == 1:
        cls = MapClass.HYPERBOLIC_INVERTIBLE
    else:
        cls = MapClass.HYPERBOLIC_NONINVERTIBLE
    order = np.lexsort((eig.imag, -mods))
    return HyperbolicityReport(tuple(complex(e) for e in eig[order]), cls, entropy)


# ---------------------------------------------------------------------------
# perturbations

@dataclass(frozen=True)
class TrigPolynomial:
    """p(y) = sum_j amplitude_j * sin(2 pi k_j . y), vector valued."""

    frequencies: tuple
    amplitudes: tuple

    def __post_init__(self):
        object.__setattr__(self, "frequencies", tuple(tuple(int(a) for a in k) for k in self.frequencies))
        object.__setattr__(self, "amplitudes", tuple(tuple(float(a) for a in c) for c in self.amplitudes))
        if len(self.frequencies) != len(self.amplitudes):
            raise ValueError("one amplitude vector per frequency")

    @classmethod
    def from_terms(cls, terms) -> "TrigPolynomial":
        return cls(tuple(t[0] for t in terms), tuple(t[1] for t in terms))

    @property
    def _K(self) -> np.ndarray:
        return np.array(self.frequencies, dtype=float)

    @property
    def _C(self) -> np.ndarray:
        return np.array(self.amplitudes, dtype=float)

    def __call__(self, y: np.ndarray) -> np.ndarray:
        s = np.sin(2 * np.pi * (y @ self._K.T))
        return s @ self._C

    def jacobian(self, y: np.ndarray) -> np.ndarray:
        """Batched derivative, shape (N, m, m)."""
        c = np.cos(2 * np.pi * (y @ self._K.T)) * (2 * np.pi)
        return np.einsum("nt,ti,tj->nij", c, self._C, self._K)

    def derivative_bound(self) -> float:
        """Upper bound for sup_y ||Dp(y)||_2."""
        return float(sum(2 * np.pi * np.linalg.norm(c) * np.linalg.norm(k)
                         for c, k in zip(self._C, self._K)))

    def c1_bound(self) -> float:
        """Upper bound for sup|p| + sup|Dp| (max-row operator norm)."""
        C, K = self._C, self._K
        sup = np.abs(C).sum(axis=0).max()
        dsup = 2 * np.pi * (np.abs(C)[:, :, None] * np.abs(K)[:, None, :]).sum(axis=0).sum(axis=1).max()
        return float(sup + dsup)


# ---------------------------------------------------------------------------
# the map

@dataclass(frozen=True)
class LatticeMap:
    """f(x) = A x + eps * p(x) mod 1 on T^m."""

    A: tuple
    perturbation: TrigPolynomial | None = None
    epsilon: float = 0.0
    report: HyperbolicityReport = field(init=False, repr=False, compare=False)
    smith: SmithDecomposition = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        A = tuple(tuple(int(a) for a in row) for row in self.A)
        if len({len(r) for r in A} | {len(A)}) != 1:
            raise ValueError("A must be square")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "report", classify(A))
        object.__setattr__(self, "smith", smith_normal_form(A))
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        if self.perturbation is not None and len(self.perturbation.frequencies):
            if any(len(k) != self.dim for k in self.perturbation.frequencies):
                raise ValueError("perturbation frequency of wrong dimension")

    @property
    def dim(self) -> int:
        return len(self.A)

    @property
    def det(self) -> int:
        return det(self.A)

    @property
    def degree(self) -> int:
        return abs(self.det)

    @property
    def is_linear(self) -> bool:
        return self.epsilon == 0 or self.perturbation is None or not self.perturbation.frequencies

    @property
    def entropy(self) -> float:
        return self.report.entropy

    @property
    def A_float(self) -> np.ndarray:
        return np.array(self.A, dtype=float)

    def coset_representatives(self) -> np.ndarray:
        return self.smith.coset_representatives()

    def describe(self) -> dict:
        d = {"type": "torus", "matrix": [list(r) for r in self.A]}
        if not self.is_linear:
            d["perturbation"] = {
                "epsilon": self.epsilon,
                "terms": [{"frequency": list(k), "amplitude": list(c)}
                          for k, c in zip(self.perturbation.frequencies, self.perturbation.amplitudes)],
            }
        return d

    # lifted map on R^m, batched
    def certify(self):
        """Refuse perturbations large enough for Df to degenerate somewhere.

        If eps * sup||Dp|| < sigma_min(A), then A + eps Dp(y) is invertible
        for every y, so f is a local diffeomorphism homotopic to f_A and
        stays |det A|-to-1 (no critical points).
        """
        if self.is_linear:
            return
        smin = float(np.linalg.svd(self.A_float, compute_uv=False).min())
        bound = self.epsilon * self.perturbation.derivative_bound()
        if bound >= smin:
            raise CertificationError(
                f"eps * sup|Dp| = {bound:.4g} >= sigma_min(A) = {smin:.4g}: "
                "critical points cannot be excluded; epsilon too large")

    def lift(self, y: np.ndarray) -> np.ndarray:
        out = y @ self.A_float.T
        if not self.is_linear:
            out = out + self.epsilon * self.perturbation(y)
        return out

    def lift_jacobian(self, y: np.ndarray) -> np.ndarray:
        J = np.broadcast_to(self.A_float, (len(y), self.dim, self.dim)).copy()
        if not self.is_linear:
            J += self.epsilon * self.perturbation.jacobian(y)
        return J


def forward(f: LatticeMap, x: TorusPoint) -> TorusPoint:
    """f(x); exact when f is linear and x is rational."""
    if f.is_linear and x.is_exact:
        return TorusPoint(tuple(sum(a * c for a, c in zip(row, x.coords)) for row in f.A))
    y = f.lift(x.as_float()[None, :])[0]
    return TorusPoint(tuple(float(c) for c in y % 1.0))


def torus_distance(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = np.abs(a - b) % 1.0
    return np.minimum(d, 1.0 - d).max(axis=-1)


# ---------------------------------------------------------------------------
# exact linear preimage step (array level)

def exact_preimage_step(f: LatticeMap, num: np.ndarray, den: int):
    """All preimages of the points num/den under the linear map.

    Returns ``(parent_index, child_num, child_den)``; children of parent i
    occupy rows i*d .. i*d+d-1 in coset order.
    """
    d_signed = f.det
    d = abs(d_signed)
    sgn = 1 if d_signed > 0 else -1
    adj = adjugate(f.A)
    reps = f.coset_representatives()
    m = f.dim
    new_den = den * d
    bound = max(abs(int(a)) for row in adj for a in row) * m * den * (1 + int(np.abs(reps).max()))
    big = bound >= _INT64_SAFE or num.dtype == object
    dt = object if big else np.int64
    num = num.astype(dt)
    reps = reps.astype(dt)
    lifted = num[:, None, :] + den * reps[None, :, :]  # (N, d, m)
    adj_arr = np.array(adj, dtype=dt) * sgn
    child = np.einsum("ndj,ij->ndi", lifted, adj_arr) if dt is np.int64 else lifted @ adj_arr.T
    child = child % new_den
    parent = np.repeat(np.arange(len(num), dtype=np.int64), d)
    return parent, child.reshape(-1, m), new_den


def exact_forward_array(f: LatticeMap, num: np.ndarray, den) -> np.ndarray:
    A = np.array(f.A, dtype=num.dtype)
    return (num @ A.T) % (np.asarray(den)[..., None] if np.ndim(den) else den)


def to_exact_arrays(x: TorusPoint):
    den = x.common_denominator()
    num = np.array([[int(c * den) for c in x.coords]], dtype=object if den >= _INT64_SAFE else np.int64)
    return num, den


# ---------------------------------------------------------------------------
# Newton branch following (array level)

def _newton(residual, jacobian, y0: np.ndarray, what: str, scale: float = 1.0) -> np.ndarray:
    # residuals of lifted values carry rounding of order eps * |lift|
    tol = max(NEWTON_TOL, 16 * np.finfo(float).eps * scale)
    y = y0.copy()
    F = residual(y)
    norm = np.abs(F).max(axis=1)
    for _ in range(NEWTON_MAX_ITER):
        if norm.max() < tol:
            return y
        J = jacobian(y)
        try:
            step = np.linalg.solve(J, F[..., None])[..., 0]
        except np.linalg.LinAlgError as exc:
            raise CertificationError(f"singular Jacobian while solving for {what}") from exc
        t = np.ones(len(y))
        for _ in range(30):
            trial = y - t[:, None] * step
            Ft = residual(trial)
            nt = np.abs(Ft).max(axis=1)
            worse = nt > norm * (1 - 1e-4 * t) + tol
            if not worse.any():
                break
            t = np.where(worse, t / 2, t)
        y, F, norm = trial, Ft, nt
    if norm.max() < tol * 10:
        return y
    raise CertificationError(
        f"Newton did not converge for {what} in {NEWTON_MAX_ITER} iterations "
        f"(residual {norm.max():.3e}); epsilon too large")


def float_preimage_step(f: LatticeMap, coords: np.ndarray):
    """Perturbed preimages, each seeded from the matching linear branch."""
    f.certify()
    reps = f.coset_representatives().astype(float)
    d, m = len(reps), f.dim
    targets = (coords[:, None, :] + reps[None, :, :]).reshape(-1, m)
    seeds = np.linalg.solve(f.A_float, targets.T).T
    if f.is_linear:
        y = seeds
    else:
        y = _newton(lambda z: f.lift(z) - targets, f.lift_jacobian, seeds, "preimage branches",
                    scale=float(np.abs(targets).max()))
    y = y % 1.0
    parent = np.repeat(np.arange(len(coords), dtype=np.int64), d)
    back = f.lift(y) % 1.0
    err = torus_distance(back, np.repeat(coords, d, axis=0))
    if err.size and err.max() > ROUNDTRIP_TOL:
        raise CertificationError(f"preimage round-trip error {err.max():.3e} exceeds {ROUNDTRIP_TOL}")
    sib = y.reshape(-1, d, m)
    for a in range(d):
        for b in range(a + 1, d):
            if torus_distance(sib[:, a], sib[:, b]).min() < COLLISION_TOL:
                raise CertificationError("two preimage branches collided; epsilon too large")
    return parent, y


# ---------------------------------------------------------------------------
# public point-level operations

def preimages(f: LatticeMap, x: TorusPoint) -> list:
    """The |det A| preimages of x, in coset order."""
    if len(x.coords) != f.dim:
        raise ValueError("point dimension does not match the map")
    if f.is_linear and x.is_exact:
        num, den = to_exact_arrays(x)
        _, child, cden = exact_preimage_step(f, num, den)
        return [TorusPoint(tuple(Fraction(int(a), cden) for a in row)) for row in child]
    _, y = float_preimage_step(f, x.as_float()[None, :])
    return [TorusPoint(tuple(float(c) for c in row)) for row in y]


def fixed_point_count(f: LatticeMap, n: int) -> int:
    """|det(A^n - I)|, the number of points of period dividing n."""
    B = matpow(f.A, n)
    for i in range(f.dim):
        B[i][i] -= 1
    return abs(det(B))


def fixed_point_arrays(f: LatticeMap, n: int, force: bool = False):
    """Exact Fix(f^n) for a linear map as ``(num, den)`` with a scalar den.

    For a perturbed map, returns ``(coords, None)`` after Newton refinement.
    """
    if n < 1:
        raise ValueError("n must be positive")
    B = matpow(f.A, n)
    for i in range(f.dim):
        B[i][i] -= 1
    dB = det(B)
    if dB == 0:
        raise SingularMatrix(f"A^{n} - I is singular; the map is not hyperbolic")
    count = abs(dB)
    if count > MAX_POINTS and not force:
        raise ResourceCapExceeded(f"|Fix(f^{n})| = {count} exceeds {MAX_POINTS}; use force")
    reps = smith_normal_form(B).coset_representatives()
    sgn = 1 if dB > 0 else -1
    G = (np.array(adjugate(B), dtype=object) * sgn) % count
    big = count * count * f.dim >= _INT64_SAFE or reps.dtype == object
    if big:
        num = (reps.astype(object) @ G.T) % count
    else:
        num = (reps.astype(np.int64) % count) @ G.astype(np.int64).T % count
    if f.is_linear:
        return num, count
    f.certify()
    seeds = np.linalg.solve(np.array(B, dtype=float), reps.astype(float).T).T
    k = reps.astype(float)

    def residual(y):
        z = y
        for _ in range(n):
            z = f.lift(z)
        return z - y - k

    def jacobian(y):
        J = np.broadcast_to(np.eye(f.dim), (len(y), f.dim, f.dim)).copy()
        z = y
        for _ in range(n):
            J = f.lift_jacobian(z) @ J
            z = f.lift(z)
        return J - np.eye(f.dim)

    scale = float(np.abs(k).max(initial=0.0))
    y = _newton(residual, jacobian, seeds, f"Fix(f^{n})", scale=scale) % 1.0
    if len(y) > 1:
        tree = cKDTree(y, boxsize=1.0 + 1e-12)
        if tree.query_pairs(COLLISION_TOL, p=np.inf):
            raise CertificationError("two periodic-point branches collided; epsilon too large")
    return y, None


def fixed_points(f: LatticeMap, n: int, force: bool = False) -> list:
    arr, den = fixed_point_arrays(f, n, force=force)
    if den is None:
        return [TorusPoint(tuple(float(c) for c in row)) for row in arr]
    return [TorusPoint(tuple(Fraction(int(a), den) for a in row)) for row in arr]


def random_rational_points(rng: np.random.Generator, dim: int, count: int, denominator: int) -> list:
    """Uniform samples from the grid (1/q) Z^m / Z^m (Haar at resolution 1/q)."""
    nums = rng.integers(0, denominator, size=(count, dim))
    return [TorusPoint(tuple(Fraction(int(a), denominator) for a in row)) for row in nums]


def parse_point(coords: Sequence) -> TorusPoint:
    if all(isinstance(c, (int, str, Fraction)) for c in coords):
        return TorusPoint(tuple(parse_rational(c) for c in coords))
    return TorusPoint(tuple(float(c) for c in coords))
