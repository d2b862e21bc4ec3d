"""Localized suprema of the empirical process and their Monte Carlo expectations.

For a model centered at ``g0`` inside the dictionary span, write
``g - g0 = sum beta_k phi_k``. With

* ``a_k = P_n(psi phi_k)`` (``P(psi phi_k) = 0`` by residual orthogonality),
* ``c_k = (P_n - P) phi_k``,
* ``M_jk = P_n(phi_j phi_k) - delta_jk``,

the localized suprema over ``{||beta|| <= s}`` are

* linear:       ``max a'beta          = s ||a||``
* first order:  ``max c'beta          = s ||c||``
* quadratic:    ``max beta'M beta     = s^2 max(lambda_max(M), 0)``
* full:         ``max -a'beta - beta'M beta``  (a trust-region subproblem).

These closed forms hold for ``s`` up to ``s_box``, the radius of the
largest L2 ball contained in the constraint set. Beyond it the sets are
intersected with the constraint and the maximum is approximated by
multi-start projected ascent (flagged approximate).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dictionary import Dictionary
from .erm import ModelConstraint, dykstra, project_ball
from .numerics import TRSEigen
from .parallel import parallel_map
from .scenario import ConfigurationError, Dataset, Scenario, derive_seed, population, sample

ORTHOGONALITY_TOL = 1e-6
STREAM_REPLICATES = 1
ASCENT_STARTS = 8


@dataclass(frozen=True, eq=False)
class EmpiricalCoefficients:
    a: np.ndarray
    c: np.ndarray
    M: np.ndarray
    constraint: ModelConstraint

    @property
    def s_box(self) -> float:
        return self.constraint.l2_cap()

    @property
    def D(self) -> int:
        return self.a.size


def empirical_coefficients(data: Dataset, sc: Scenario, dictionary: Dictionary,
                           constraint: ModelConstraint | None = None) -> EmpiricalCoefficients:
    pop = population(sc, dictionary)
    target = pop.target
    if target.residual_defect > ORTHOGONALITY_TOL:
        raise ConfigurationError(
            f"residual g* - g0 is not orthogonal to the dictionary (defect {target.residual_defect:.3e}); "
            "the family is not orthonormal under the design law")
    if constraint is None:
        constraint = ModelConstraint.sup_ball(dictionary, target.coefficients)
    phi = dictionary.evaluate(data.xs)
    n = data.n
    psi = -2.0 * (data.ys - phi @ target.coefficients)
    a = phi.T @ psi / n
    c = phi.sum(axis=0) / n - pop.mean_phi
    M = phi.T @ phi / n - np.eye(dictionary.size)
    return EmpiricalCoefficients(a, c, 0.5 * (M + M.T), constraint)


# ---------------------------------------------------------------------------
# single-s suprema
# ---------------------------------------------------------------------------


def _ascent(coef: EmpiricalCoefficients, Q, b, s, seed=0, iters=2000):
    """Multi-start projected ascent of ``b'x + x'Qx`` over ``ball(s) cap constraint``."""
    con = coef.constraint
    center = con.center

    def proj(x):
        ball = lambda y: project_ball(y, np.zeros_like(y), s)  # noqa: E731
        model = lambda y: con.project(center + y) - center  # noqa: E731
        return dykstra(x, [ball, model], tol=1e-12, max_sweeps=2000)[0]

    rng = np.random.default_rng(seed)
    D = b.size
    starts = [np.zeros(D)]
    if np.linalg.norm(b) > 0:
        starts.append(s * b / np.linalg.norm(b))
    evals, evecs = np.linalg.eigh(Q)
    starts += [s * evecs[:, -1], -s * evecs[:, -1]]
    while len(starts) < ASCENT_STARTS:
        v = rng.standard_normal(D)
        starts.append(s * v / np.linalg.norm(v))
    step = 1.0 / (2.0 * max(float(np.max(np.abs(evals), initial=0.0)), 1e-12) + np.linalg.norm(b) / max(s, 1e-300))
    best = 0.0
    for x in starts:
        x = proj(x)
        for _ in range(iters):
            x_new = proj(x + step * (b + 2.0 * Q @ x))
            if np.max(np.abs(x_new - x)) <= 1e-13:
                x = x_new
                break
            x = x_new
        best = max(best, float(b @ x + x @ Q @ x))
    return best


def linear_sup(coef: EmpiricalCoefficients, s: float) -> float:
    if s <= coef.s_box:
        return float(s * np.linalg.norm(coef.a))
    return _ascent(coef, np.zeros((coef.D, coef.D)), coef.a, s)


def first_order_sup(coef: EmpiricalCoefficients, s: float) -> float:
    if s <= coef.s_box:
        return float(s * np.linalg.norm(coef.c))
    return _ascent(coef, np.zeros((coef.D, coef.D)), coef.c, s)


def quad_sup(coef: EmpiricalCoefficients, s: float) -> float:
    if s <= coef.s_box:
        return float(TRSEigen(coef.M, np.zeros(coef.D)).solve([s])[1][0])
    return _ascent(coef, coef.M, np.zeros(coef.D), s)


def full_sup(coef: EmpiricalCoefficients, s: float) -> float:
    if s <= coef.s_box:
        return float(TRSEigen(-coef.M, -coef.a).solve([s])[1][0])
    return _ascent(coef, -coef.M, -coef.a, s)


# ---------------------------------------------------------------------------
# curves on an s grid
# ---------------------------------------------------------------------------


def s_grid(s_box: float, points: int = 200, min_ratio: float = 1e-4) -> np.ndarray:
    """``0`` followed by ``points`` log-spaced values from ``s_box*min_ratio`` to ``s_box``."""
    return np.concatenate([[0.0], np.geomspace(s_box * min_ratio, s_box, points)])


@dataclass(frozen=True, eq=False)
class LocalSupremumCurve:
    s: np.ndarray
    linear: np.ndarray
    quadratic: np.ndarray
    first_order: np.ndarray
    full: np.ndarray
    s_box: float

    @property
    def approximate(self) -> np.ndarray:
        return self.s > self.s_box


def local_sup_curve(coef: EmpiricalCoefficients, grid) -> LocalSupremumCurve:
    s = np.asarray(grid, dtype=float)
    if np.any(np.diff(s) <= 0) or s[0] < 0:
        raise ValueError("s grid must be increasing and nonnegative")
    exact = s <= coef.s_box
    lin = s * np.linalg.norm(coef.a)
    first = s * np.linalg.norm(coef.c)
    quad = np.empty_like(s)
    full = np.empty_like(s)
    quad[exact] = s[exact] ** 2 * max(float(np.linalg.eigvalsh(coef.M)[-1]), 0.0)
    full[exact] = TRSEigen(-coef.M, -coef.a).solve(s[exact])[1]
    for i in np.flatnonzero(~exact):
        lin[i] = linear_sup(coef, s[i])
        first[i] = first_order_sup(coef, s[i])
        quad[i] = quad_sup(coef, s[i])
        full[i] = full_sup(coef, s[i])
    return LocalSupremumCurve(s, lin, quad, first, full, coef.s_box)


@dataclass(frozen=True)
class VariationalResult:
    s_hat: float
    index: int
    at_edge: bool


def variational_s_hat(coef: EmpiricalCoefficients, grid) -> VariationalResult:
    """Grid argmin of ``s^2 - E_n(s)``; flags a minimizer at the right edge."""
    curve = local_sup_curve(coef, grid)
    crit = curve.s ** 2 - curve.full
    i = int(np.argmin(crit))
    return VariationalResult(float(curve.s[i]), i, i == curve.s.size - 1)


# ---------------------------------------------------------------------------
# Monte Carlo expectations
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ExpectedCurves:
    s: np.ndarray
    mean: dict
    se: dict
    norm_a: np.ndarray
    lam_plus: np.ndarray
    s_box: float
    n: int

    @property
    def R(self) -> int:
        return self.norm_a.size

    @property
    def slope(self) -> float:
        """Monte Carlo estimate of ``E||a||`` (``E_l(s) = slope * s`` below ``s_box``)."""
        return float(np.mean(self.norm_a))

    @property
    def slope_se(self) -> float:
        return float(np.std(self.norm_a, ddof=1) / np.sqrt(self.R))

    def linear_at(self, s: float) -> float:
        if s <= self.s_box:
            return self.slope * s
        return float(np.interp(s, self.s, self.mean["El"]))


def _replicate(sc, dictionary, n, grid, seed, r):
    data = sample(sc, n, derive_seed(seed, STREAM_REPLICATES, r))
    coef = empirical_coefficients(data, sc, dictionary)
    curve = local_sup_curve(coef, grid)
    lam = max(float(np.linalg.eigvalsh(coef.M)[-1]), 0.0)
    return curve, float(np.linalg.norm(coef.a)), lam


def estimate_expected_curves(sc: Scenario, dictionary: Dictionary, n: int, R: int, grid,
                             seed: int, threads: int | None = None) -> ExpectedCurves:
    """Means and standard errors of the four localized suprema over ``R`` datasets."""
    if R < 2:
        raise ValueError("R must be >= 2")
    grid = np.asarray(grid, dtype=float)
    out = parallel_map(lambda r: _replicate(sc, dictionary, n, grid, seed, r), range(R), threads)
    stacks = {
        "E1": np.array([c.first_order for c, _, _ in out]),
        "El": np.array([c.linear for c, _, _ in out]),
        "Eq": np.array([c.quadratic for c, _, _ in out]),
        "E": np.array([c.full for c, _, _ in out]),
    }
    mean = {k: v.mean(axis=0) for k, v in stacks.items()}
    se = {k: v.std(axis=0, ddof=1) / np.sqrt(R) for k, v in stacks.items()}
    return ExpectedCurves(grid, mean, se, np.array([x for _, x, _ in out]),
                          np.array([x for _, _, x in out]), out[0][0].s_box, n)


@dataclass(frozen=True)
class ConcentrationPoint:
    s_tilde0: float
    s_tilde0_se: float
    s0: float
    slope: float
    slope_se: float
    R: int
    s_tilde0_at_edge: bool
    s0_at_edge: bool


def concentration_point(curves: ExpectedCurves) -> ConcentrationPoint:
    """``s~0 = argmin s^2 - E_l(s)`` and ``s0 = argmin s^2 - E(s)``.

    Below ``s_box`` the linear curve is ``m s`` with ``m = E||a||``, whose
    minimizer is ``m / 2``; ``s0`` is a grid argmin.
    """
    m, m_se = curves.slope, curves.slope_se
    if m / 2.0 <= curves.s_box:
        s_t, s_t_se, t_edge = m / 2.0, m_se / 2.0, False
    else:
        i = int(np.argmin(curves.s ** 2 - curves.mean["El"]))
        s_t, s_t_se, t_edge = float(curves.s[i]), float("nan"), i == curves.s.size - 1
    j = int(np.argmin(curves.s ** 2 - curves.mean["E"]))
    return ConcentrationPoint(s_t, s_t_se, float(curves.s[j]), m, m_se, curves.R,
                              t_edge, j == curves.s.size - 1)
