"""Numerical primitives shared by the rest of the package.

Three tools live here:

* composite Gauss-Legendre quadrature against the (uniform) design law,
  with user-declared breakpoints so piecewise-constant integrands are
  integrated exactly;
* an exact solver for the trust-region subproblem
  ``max b'x + x'Qx  s.t. ||x||_2 <= r`` based on an eigendecomposition of
  ``Q`` and a safeguarded Newton iteration on the secular equation;
* Legendre-Fenchel conjugation of increasing convex functions on the
  half-line, in closed form for ``u**2 / A**2`` and by grid supremum
  otherwise.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np


class QuadratureError(ArithmeticError):
    """Raised when an integrand is not finite at a quadrature node."""


class ConvexityError(ValueError):
    """Raised when a function handed to :func:`conjugate` is not convex."""


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------


@lru_cache(maxsize=32)
def _leggauss(order):
    nodes, weights = np.polynomial.legendre.leggauss(order)
    return nodes, weights


@dataclass(frozen=True)
class QuadratureRule:
    """Composite Gauss-Legendre rule on the design support ``[0, 1]``.

    The support is cut into ``panels`` equal panels, further split at every
    declared breakpoint, and each resulting piece receives a
    ``nodes_per_panel`` point Gauss-Legendre rule.
    """

    nodes_per_panel: int = 10
    panels: int = 128
    tol: float = 1e-12

    def __post_init__(self):
        if self.nodes_per_panel < 1:
            raise ValueError("nodes_per_panel must be >= 1")
        if self.panels < 1:
            raise ValueError("panels must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")

    def edges(self, breakpoints: Sequence[float] = ()) -> np.ndarray:
        uniform = np.linspace(0.0, 1.0, self.panels + 1)
        extra = np.asarray([b for b in breakpoints if 0.0 < b < 1.0], dtype=float)
        return np.unique(np.concatenate([uniform, extra]))

    def nodes_weights(self, breakpoints: Sequence[float] = ()):
        """Nodes and weights of the composite rule, uniform density on [0, 1]."""
        return _composite(self.nodes_per_panel, self.panels, tuple(float(b) for b in breakpoints))

    def refined(self) -> "QuadratureRule":
        return QuadratureRule(self.nodes_per_panel, 2 * self.panels, self.tol)


@lru_cache(maxsize=64)
def _composite(order, panels, breakpoints):
    rule = QuadratureRule(order, panels)
    edges = rule.edges(breakpoints)
    ref_x, ref_w = _leggauss(order)
    left, right = edges[:-1, None], edges[1:, None]
    half = 0.5 * (right - left)
    x = (left + half * (ref_x[None, :] + 1.0)).ravel()
    w = (half * ref_w[None, :]).ravel()
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def integrate(f: Callable[[np.ndarray], np.ndarray], rule: QuadratureRule | None = None,
              breakpoints: Sequence[float] = ()) -> float:
    """Integrate ``f`` against the uniform design law on ``[0, 1]``.

    ``f`` must be vectorised. Panels are split at ``breakpoints`` so that
    functions which are smooth between breakpoints (histogram indicators in
    particular) are integrated to machine precision.
    """
    rule = rule or QuadratureRule()
    x, w = rule.nodes_weights(breakpoints)
    values = np.asarray(f(x), dtype=float)
    values = np.broadcast_to(values, x.shape)
    bad = ~np.isfinite(values)
    if bad.any():
        node = x[np.argmax(bad)]
        raise QuadratureError(f"integrand is not finite at node x={node!r}")
    return float(np.dot(w, values))


# ---------------------------------------------------------------------------
# Trust-region subproblem
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TRSProblem:
    """``max b'x + x'Qx`` over the Euclidean ball of radius ``r``."""

    Q: np.ndarray
    b: np.ndarray
    r: float

    def __post_init__(self):
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        if Q.shape != (b.size, b.size):
            raise ValueError(f"Q has shape {Q.shape}, expected {(b.size, b.size)}")
        if np.max(np.abs(Q - Q.T), initial=0.0) > 1e-12:
            raise ValueError("Q must be symmetric")
        if not (self.r >= 0 and np.isfinite(self.r)):
            raise ValueError("radius must be a finite nonnegative number")
        object.__setattr__(self, "Q", 0.5 * (Q + Q.T))
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "r", float(self.r))


class TRSEigen:
    """Eigendecomposition of a TRS instance, reusable across many radii.

    The localized suprema need the same ``(Q, b)`` at every point of an
    ``s`` grid, so the decomposition is done once and :meth:`solve` is
    vectorised over radii.
    """

    def __init__(self, Q, b):
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        b = np.atleast_1d(np.asarray(b, dtype=float))
        try:
            evals, evecs = np.linalg.eigh(0.5 * (Q + Q.T))
        except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
            raise ArithmeticError(f"eigendecomposition failed: {exc}") from exc
        self.evals = evals
        self.evecs = evecs
        self.bt = evecs.T @ b
        self.bnorm = float(np.linalg.norm(b))
        scale = max(1.0, float(np.max(np.abs(evals), initial=0.0)))
        self.lam_max = float(evals[-1])
        self.lead = evals >= self.lam_max - 1e-12 * scale
        lead_b = float(np.linalg.norm(self.bt[self.lead]))
        # b numerically orthogonal to the leading eigenspace
        self.hard = lead_b <= 1e-13 * max(1.0, self.bnorm)

    def _coords(self, lam):
        """Eigen-coordinates of x(lam) = (lam I - Q)^{-1} b / 2 for an array of lam."""
        denom = 2.0 * (lam[:, None] - self.evals[None, :])
        with np.errstate(divide="ignore", invalid="ignore"):
            xt = np.where(denom != 0.0, self.bt[None, :] / denom, 0.0)
        return xt

    def solve(self, radii):
        """Return ``(maximizers, values)`` for each radius in ``radii``."""
        radii = np.atleast_1d(np.asarray(radii, dtype=float))
        k, d = radii.size, self.evals.size
        xt = np.zeros((k, d))
        done = radii <= 0.0

        # interior solution: Q negative definite and unconstrained maximizer inside
        if self.lam_max < 0.0:
            x0 = self.bt / (-2.0 * self.evals)
            inside = ~done & (np.linalg.norm(x0) <= radii)
            xt[inside] = x0
            done |= inside

        # hard case: boundary solution at lam = lam_max, completed along the eigenspace
        if self.hard and self.lam_max >= 0.0:
            rest = np.where(self.lead, 0.0, self.bt / np.where(self.lead, 1.0, 2.0 * (self.lam_max - self.evals)))
            rest_norm = float(np.linalg.norm(rest))
            hard = ~done & (rest_norm <= radii)
            if hard.any():
                lead_idx = int(np.flatnonzero(self.lead)[-1])
                tau = np.sqrt(np.maximum(radii[hard] ** 2 - rest_norm ** 2, 0.0))
                xt[hard] = rest
                xt[hard, lead_idx] = tau
                done |= hard

        todo = ~done
        if todo.any():
            xt[todo] = self._boundary(radii[todo])

        x = xt @ self.evecs.T
        values = xt @ self.bt + (xt ** 2) @ self.evals
        return x, values

    def _boundary(self, radii):
        # secular equation phi(lam) = 1/r - 1/||x(lam)|| = 0, decreasing in lam
        lo = np.full(radii.shape, max(self.lam_max, 0.0))
        hi = lo + self.bnorm / (2.0 * radii)
        lam = hi.copy()
        for _ in range(200):
            xt = self._coords(lam)
            nrm = np.linalg.norm(xt, axis=1)
            phi = 1.0 / radii - 1.0 / nrm
            lo = np.where(phi > 0.0, lam, lo)
            hi = np.where(phi <= 0.0, lam, hi)
            gap = lam[:, None] - self.evals[None, :]
            with np.errstate(divide="ignore", invalid="ignore"):
                dphi = -np.sum(xt ** 2 / gap, axis=1) / nrm ** 3
                newton = lam - phi / dphi
            bad = ~np.isfinite(newton) | (newton <= lo) | (newton >= hi)
            lam_next = np.where(bad, 0.5 * (lo + hi), newton)
            width = hi - lo
            if np.all((np.abs(lam_next - lam) <= 4 * np.finfo(float).eps * np.maximum(1.0, np.abs(lam)))
                      | (width <= 4 * np.finfo(float).eps * np.maximum(1.0, np.abs(hi)))):
                lam = lam_next
                break
            lam = lam_next
        xt = self._coords(lam)
        # pull onto the sphere; removes the residual root-finding error in the norm
        nrm = np.linalg.norm(xt, axis=1)
        return xt * (radii / nrm)[:, None]


def solve_trs(p: TRSProblem):
    """Exact maximizer and maximum of ``b'x + x'Qx`` over ``||x|| <= r``.

    Returns a ``(maximizer, value)`` pair. The hard case (``b`` orthogonal to
    the leading eigenspace of ``Q``) is resolved by adding a multiple of a
    leading eigenvector to the partial solution.
    """
    if p.r == 0.0:
        return np.zeros_like(p.b), 0.0
    x, values = TRSEigen(p.Q, p.b).solve([p.r])
    return x[0], float(values[0])


# ---------------------------------------------------------------------------
# Convex conjugation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConjugatePair:
    """An increasing convex function on ``[0, inf)`` and its conjugate.

    When ``scale`` is given the function is ``u**2 / scale**2`` and the
    conjugate is evaluated in closed form; otherwise ``phi`` is tabulated
    on ``[0, u_max]`` and the conjugate is a grid supremum.
    """

    phi: Callable[[np.ndarray], np.ndarray] | None = None
    scale: float | None = None
    u_max: float = 1e3
    grid_points: int = 10**6

    def __post_init__(self):
        if self.phi is None and self.scale is None:
            raise ValueError("either phi or scale must be provided")
        if self.scale is not None and not self.scale > 0:
            raise ValueError("scale must be positive")

    @classmethod
    def quadratic(cls, scale: float) -> "ConjugatePair":
        return cls(scale=scale)

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        if self.scale is not None:
            return u ** 2 / self.scale ** 2
        return np.asarray(self.phi(u), dtype=float)

    @property
    def conjugate(self) -> Callable:
        return conjugate(self)


def _check_convex_increasing(values, tol=1e-9):
    scale = max(1.0, float(np.max(np.abs(values))))
    if abs(values[0]) > tol * scale:
        raise ConvexityError("phi must vanish at 0")
    if np.any(np.diff(values) < -tol * scale):
        raise ConvexityError("phi must be nondecreasing on the grid")
    if np.any(np.diff(values, 2) < -tol * scale):
        raise ConvexityError("phi is not convex on the grid")


def conjugate(pair: ConjugatePair) -> Callable:
    """Return ``v -> sup_{u >= 0} (u v - phi(u))`` as a vectorised function."""
    if pair.scale is not None:
        a2 = pair.scale ** 2

        def closed(v):
            v = np.asarray(v, dtype=float)
            out = np.where(v > 0, a2 * v ** 2 / 4.0, 0.0)
            return out if out.ndim else float(out)

        return closed

    u = np.linspace(0.0, pair.u_max, pair.grid_points)
    values = np.asarray(pair.phi(u), dtype=float)
    if not np.all(np.isfinite(values)):
        raise ConvexityError("phi is not finite on the conjugation grid")
    _check_convex_increasing(values)

    def tabulated(v):
        v = np.asarray(v, dtype=float)
        flat = np.atleast_1d(v).ravel()
        out = np.empty(flat.shape)
        for i, vi in enumerate(flat):
            out[i] = max(float(np.max(u * vi - values)), 0.0)
        out = out.reshape(v.shape)
        return out if out.ndim else float(out)

    return tabulated
