"""Hölder potentials with a closed form: locally constant (shifts) and trig (torus)."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .measure import format_word, parse_word


@dataclass(frozen=True)
class LocallyConstantPotential:
    """phi(x) = table[x_0 ... x_{r-1}] on a shift over ``alphabet_size`` symbols.

    ``values`` maps words of length ``range`` to reals; words missing from
    the table take ``default``.
    """

    alphabet_size: int
    range: int
    values: tuple  # dense table indexed by the base-s code of the word
    name: str = "table"

    @classmethod
    def from_table(cls, alphabet_size: int, r: int, table: dict, default: float = 0.0,
                   name: str = "table") -> "LocallyConstantPotential":
        if r < 1:
            raise ValueError("potential range must be >= 1")
        dense = [float(default)] * alphabet_size**r
        for word, v in table.items():
            w = parse_word(word)
            if len(w) != r or any(not 0 <= a < alphabet_size for a in w):
                raise ValueError(f"bad potential word {word!r} for range {r}")
            dense[_code(w, alphabet_size)] = float(v)
        return cls(alphabet_size, r, tuple(dense), name)

    @classmethod
    def zero(cls, alphabet_size: int) -> "LocallyConstantPotential":
        return cls(alphabet_size, 1, (0.0,) * alphabet_size, "zero")

    @classmethod
    def symbol_weight(cls, alphabet_size: int, beta: float, symbol: int = 1) -> "LocallyConstantPotential":
        """phi(x) = beta * [x_0 == symbol]."""
        vals = [0.0] * alphabet_size
        vals[symbol] = float(beta)
        return cls(alphabet_size, 1, tuple(vals), f"beta[{symbol}]={beta!r}")

    @property
    def table(self) -> np.ndarray:
        return np.asarray(self.values)

    @property
    def is_constant(self) -> bool:
        return len(set(self.values)) == 1

    def __call__(self, word) -> float:
        w = parse_word(word)[: self.range]
        return self.values[_code(w, self.alphabet_size)]

    def on_windows(self, windows: np.ndarray) -> np.ndarray:
        """Vectorised evaluation on an (N, >= r) array of leading symbols."""
        codes = np.zeros(len(windows), dtype=np.int64)
        for j in range(self.range):
            codes = codes * self.alphabet_size + windows[:, j]
        return self.table[codes]

    def shifted(self, c: float) -> "LocallyConstantPotential":
        return LocallyConstantPotential(self.alphabet_size, self.range,
                                        tuple(v + c for v in self.values), f"{self.name}+{c!r}")

    def describe(self) -> dict:
        words = itertools.product(range(self.alphabet_size), repeat=self.range)
        return {"type": "table", "range": self.range,
                "values": {format_word(w): self.values[_code(w, self.alphabet_size)] for w in words}}


def _code(word, s: int) -> int:
    c = 0
    for a in word:
        c = c * s + int(a)
    return c


@dataclass(frozen=True)
class TrigPotential:
    """phi(y) = c + sum_k (a_k cos 2 pi k.y + b_k sin 2 pi k.y) on T^m."""

    constant: float = 0.0
    frequencies: tuple = ()
    cos_coeffs: tuple = ()
    sin_coeffs: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "frequencies", tuple(tuple(int(a) for a in k) for k in self.frequencies))
        n = len(self.frequencies)
        if len(self.cos_coeffs) != n or len(self.sin_coeffs) != n:
            raise ValueError("one cos and one sin coefficient per frequency")

    @property
    def is_constant(self) -> bool:
        return all(a == 0 and b == 0 for a, b in zip(self.cos_coeffs, self.sin_coeffs))

    def on_coords(self, y: np.ndarray) -> np.ndarray:
        out = np.full(len(y), float(self.constant))
        if self.frequencies:
            ph = 2 * np.pi * (y @ np.array(self.frequencies, dtype=float).T)
            out += np.cos(ph) @ np.array(self.cos_coeffs) + np.sin(ph) @ np.array(self.sin_coeffs)
        return out

    def __call__(self, point) -> float:
        return float(self.on_coords(point.as_float()[None, :])[0])

    def shifted(self, c: float) -> "TrigPotential":
        return TrigPotential(self.constant + c, self.frequencies, self.cos_coeffs, self.sin_coeffs)

    def describe(self) -> dict:
        return {"type": "trig", "constant": self.constant,
                "terms": [{"frequency": list(k), "cos": a, "sin": b}
                          for k, a, b in zip(self.frequencies, self.cos_coeffs, self.sin_coeffs)]}

    @property
    def sup_norm(self) -> float:
        return abs(self.constant) + sum(math.hypot(a, b) for a, b in zip(self.cos_coeffs, self.sin_coeffs))
