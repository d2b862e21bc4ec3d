"""Orthonormal dictionaries in L2 of the uniform design on [0, 1]."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .numerics import QuadratureRule

#: Sup-norms are evaluated on this many equispaced points plus breakpoints.
SUP_GRID_POINTS = 10_000


class Dictionary:
    """Base class: a family ``phi_1, ..., phi_D`` orthonormal in L2(P^X).

    Subclasses implement :meth:`evaluate`, returning the ``(n, D)`` matrix of
    basis values, and declare their breakpoints (points where elements may
    jump) and the envelope constant ``c_M`` of
    ``sup_{||g||_2 = 1} ||g||_inf <= c_M * sqrt(D)``.
    """

    kind: str = "abstract"
    size: int
    envelope: float
    breakpoints: tuple

    def evaluate(self, x) -> np.ndarray:
        raise NotImplementedError

    def element(self, k: int, x):
        """Value of the ``k``-th element (1-based) at ``x``."""
        if not 1 <= k <= self.size:
            raise IndexError(f"basis index {k} out of range 1..{self.size}")
        x = np.asarray(x, dtype=float)
        out = self.evaluate(np.atleast_1d(x).ravel())[:, k - 1]
        return out.reshape(x.shape) if x.ndim else float(out[0])

    def combination(self, beta, x) -> np.ndarray:
        """Evaluate ``sum_k beta_k phi_k`` (``beta`` may be a batch ``(m, D)``)."""
        return self.evaluate(x) @ np.asarray(beta, dtype=float).T

    def sup_grid(self) -> np.ndarray:
        grid = np.linspace(0.0, 1.0, SUP_GRID_POINTS)
        return np.unique(np.concatenate([grid, np.asarray(self.breakpoints, dtype=float)]))

    def to_spec(self) -> dict:
        return {"kind": self.kind, "size": self.size}


@dataclass(frozen=True)
class Histogram(Dictionary):
    """Regular histogram: ``phi_k = sqrt(D) * 1[(k-1)/D, k/D)``, last bin closed."""

    size: int
    kind: str = field(default="histogram", init=False)

    def __post_init__(self):
        if int(self.size) != self.size or self.size < 1:
            raise ValueError("dictionary size must be a positive integer")

    @property
    def envelope(self) -> float:
        return 1.0

    @property
    def breakpoints(self) -> tuple:
        return tuple(k / self.size for k in range(1, self.size))

    def bin_index(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.minimum(np.floor(x * self.size), self.size - 1).astype(np.int64)

    def evaluate(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.zeros((x.size, self.size))
        inside = (x >= 0.0) & (x <= 1.0)
        idx = self.bin_index(x[inside])
        out[np.flatnonzero(inside), idx] = math.sqrt(self.size)
        return out


@dataclass(frozen=True)
class Fourier(Dictionary):
    """Trigonometric system: ``1, sqrt2 cos(2 pi x), sqrt2 sin(2 pi x), ...``."""

    size: int
    kind: str = field(default="fourier", init=False)

    def __post_init__(self):
        if int(self.size) != self.size or self.size < 1:
            raise ValueError("dictionary size must be a positive integer")

    @property
    def envelope(self) -> float:
        return math.sqrt(2.0)

    @property
    def breakpoints(self) -> tuple:
        return ()

    def evaluate(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty((x.size, self.size))
        out[:, 0] = 1.0
        for k in range(2, self.size + 1):
            freq = 2.0 * math.pi * (k // 2)
            trig = np.cos if k % 2 == 0 else np.sin
            out[:, k - 1] = math.sqrt(2.0) * trig(freq * x)
        return out


@dataclass(frozen=True, eq=False)
class CustomDictionary(Dictionary):
    """User-supplied family; orthonormality is checked at construction."""

    functions: Sequence[Callable]
    envelope: float
    breakpoints: tuple = ()
    rule: QuadratureRule = QuadratureRule()
    kind: str = field(default="custom", init=False)

    def __post_init__(self):
        defect = gram_defect(self, self.rule)
        if defect > 1e-9:
            raise ValueError(f"family is not orthonormal under the design law (defect {defect:.3e})")

    @property
    def size(self) -> int:
        return len(self.functions)

    def evaluate(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return np.column_stack([np.broadcast_to(f(x), x.shape) for f in self.functions])


def make_dictionary(kind: str, size: int) -> Dictionary:
    if kind == "histogram":
        return Histogram(int(size))
    if kind == "fourier":
        return Fourier(int(size))
    raise ValueError(f"unknown dictionary kind {kind!r} (expected 'histogram' or 'fourier')")


def eval_basis(dictionary: Dictionary, k: int, x):
    return dictionary.element(k, x)


def gram_matrix(dictionary: Dictionary, rule: QuadratureRule | None = None) -> np.ndarray:
    rule = rule or QuadratureRule()
    x, w = rule.nodes_weights(dictionary.breakpoints)
    phi = dictionary.evaluate(x)
    return (phi * w[:, None]).T @ phi


def gram_defect(dictionary: Dictionary, rule: QuadratureRule | None = None) -> float:
    """Max entrywise deviation of the Gram matrix from the identity."""
    gram = gram_matrix(dictionary, rule)
    return float(np.max(np.abs(gram - np.eye(gram.shape[0]))))


def unit_sphere_sup(dictionary: Dictionary) -> float:
    """``sup_{||beta||_2 = 1} ||sum beta_k phi_k||_inf``.

    For fixed ``x`` the sup over the sphere is ``||phi(x)||_2`` (equality in
    Cauchy-Schwarz), so the value is the max of that norm over the sup grid.
    """
    phi = dictionary.evaluate(dictionary.sup_grid())
    return float(np.sqrt(np.max(np.sum(phi ** 2, axis=1))))


def l2_ball_cap(dictionary: Dictionary, radius: float = 1.0) -> float:
    """Largest ``s`` such that the L2 ball of radius ``s`` sits in the sup-norm ball."""
    return radius / unit_sphere_sup(dictionary)
