"""Least-squares estimation over the sup-norm ball ``B_inf(g0, 1)`` of a dictionary span."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dictionary import Dictionary, Histogram
from .scenario import Dataset, Scenario, project_target

SAMPLED_POINTS = 512


def dykstra(z, projections, tol=1e-13, max_sweeps=10_000):
    """Project ``z`` onto an intersection of convex sets with Dykstra's algorithm.

    ``projections`` is a sequence of callables, each the Euclidean projection
    onto one set. Returns ``(x, sweeps)``.
    """
    x = np.array(z, dtype=float)
    incr = [np.zeros_like(x) for _ in projections]
    for sweep in range(1, max_sweeps + 1):
        x_prev = x.copy()
        moved = 0.0
        for i, proj in enumerate(projections):
            y = x + incr[i]
            x_new = proj(y)
            new_incr = y - x_new
            moved = max(moved, float(np.max(np.abs(new_incr - incr[i]), initial=0.0)))
            incr[i] = new_incr
            x = x_new
        if np.max(np.abs(x - x_prev), initial=0.0) <= tol and moved <= tol:
            return x, sweep
    return x, max_sweeps


def project_ball(x, center, radius):
    d = x - center
    nrm = float(np.linalg.norm(d))
    if nrm <= radius:
        return np.array(x, dtype=float)
    return center + d * (radius / nrm)


def _project_slabs(z, rows, bound, center, half_width, tol=1e-13, max_sweeps=20_000):
    """Dykstra/Hildreth projection onto ``{|rows (x - c)| <= bound} cap box``.

    Increments for the slabs are scalar multiples of the slab normals. Each
    sweep visits only slabs that are violated or carry a nonzero increment;
    the others would be no-ops.
    """
    x = np.array(z, dtype=float) - center
    norms_sq = np.einsum("ij,ij->i", rows, rows)
    mult = np.zeros(rows.shape[0])
    box_incr = np.zeros_like(x)
    for _ in range(max_sweeps):
        x_prev = x.copy()
        vals = rows @ x
        active = np.flatnonzero((np.abs(vals) > bound) | (mult != 0.0))
        for i in active:
            a = rows[i]
            v = a @ x + mult[i] * norms_sq[i]  # value of a at y = x + mult_i a
            target = min(max(v, -bound), bound)
            new_mult = (v - target) / norms_sq[i]
            x = x + (mult[i] - new_mult) * a
            mult[i] = new_mult
        y = x + box_incr
        x = np.clip(y, -half_width, half_width)
        box_incr = y - x
        if np.max(np.abs(x - x_prev), initial=0.0) <= tol:
            break
    return center + x


@dataclass(frozen=True, eq=False)
class ModelConstraint:
    """Convex constraint set in absolute coefficients, centered at ``center``.

    ``kind`` is one of

    * ``"box"``: ``|beta_k - center_k| <= half_width`` (histogram sup ball, exact);
    * ``"ball"``: ``||beta - center||_2 <= radius``;
    * ``"box-ball"``: intersection of the two above;
    * ``"sampled"``: ``|sum (beta_k - center_k) phi_k(x_j)| <= radius`` on sample
      points ``x_j``, intersected with the certified outer box
      ``|beta_k - center_k| <= radius``.
    """

    kind: str
    center: np.ndarray
    radius: float = 1.0
    half_width: float | None = None
    ball_radius: float | None = None
    rows: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("box", "ball", "box-ball", "sampled"):
            raise ValueError(f"unknown constraint kind {self.kind!r}")
        if not self.radius > 0:
            raise ValueError("constraint radius must be positive")
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        if self.kind in ("box", "box-ball") and not (self.half_width and self.half_width > 0):
            raise ValueError("box constraints need a positive half_width")
        if self.kind in ("ball", "box-ball") and not (self.ball_radius and self.ball_radius > 0):
            raise ValueError("ball constraints need a positive ball_radius")
        if self.kind == "sampled" and self.rows is None:
            raise ValueError("sampled constraints need evaluation rows")

    @classmethod
    def sup_ball(cls, dictionary: Dictionary, center, radius: float = 1.0,
                 points: int = SAMPLED_POINTS) -> "ModelConstraint":
        """The model ``{g : ||g - g0||_inf <= radius}`` of the dictionary span."""
        if isinstance(dictionary, Histogram):
            return cls("box", center, radius, half_width=radius / math.sqrt(dictionary.size))
        grid = (np.arange(points) + 0.5) / points
        return cls("sampled", center, radius, rows=dictionary.evaluate(grid))

    def project(self, beta) -> np.ndarray:
        beta = np.asarray(beta, dtype=float)
        c = self.center
        if self.kind == "box":
            return np.clip(beta, c - self.half_width, c + self.half_width)
        if self.kind == "ball":
            return project_ball(beta, c, self.ball_radius)
        if self.kind == "box-ball":
            box = lambda y: np.clip(y, c - self.half_width, c + self.half_width)  # noqa: E731
            ball = lambda y: project_ball(y, c, self.ball_radius)  # noqa: E731
            return dykstra(beta, [box, ball])[0]
        if self.contains(beta, tol=0.0):
            return beta.copy()
        return _project_slabs(beta, self.rows, self.radius, c, self.radius)

    def contains(self, beta, tol: float = 1e-10) -> bool:
        d = np.asarray(beta, dtype=float) - self.center
        if self.kind in ("box", "box-ball") and np.max(np.abs(d)) > self.half_width + tol:
            return False
        if self.kind in ("ball", "box-ball") and np.linalg.norm(d) > self.ball_radius + tol:
            return False
        if self.kind == "sampled":
            if np.max(np.abs(d)) > self.radius + tol:
                return False
            if np.max(np.abs(self.rows @ d)) > self.radius + tol:
                return False
        return True

    def l2_cap(self) -> float:
        """Largest ``s`` with the centered L2 ball of radius ``s`` inside the set."""
        if self.kind == "box":
            return self.half_width
        if self.kind == "ball":
            return self.ball_radius
        if self.kind == "box-ball":
            return min(self.half_width, self.ball_radius)
        return self.radius / float(np.sqrt(np.max(np.sum(self.rows ** 2, axis=1))))


@dataclass(frozen=True, eq=False)
class FittedModel:
    coefficients: np.ndarray
    center: np.ndarray
    empirical_risk: float
    iterations: int = 0
    gap: float = 0.0
    converged: bool = True

    @property
    def s_hat(self) -> float:
        return float(np.linalg.norm(self.coefficients - self.center))


def empirical_risk(data: Dataset, dictionary: Dictionary, beta) -> float:
    resid = data.ys - dictionary.evaluate(data.xs) @ np.asarray(beta, dtype=float)
    return float(np.mean(resid ** 2))


def _default_constraint(sc, dictionary, con):
    if con is not None:
        return con
    return ModelConstraint.sup_ball(dictionary, project_target(sc, dictionary).coefficients)


def fit_histogram(data: Dataset, sc: Scenario, dictionary: Histogram,
                  con: ModelConstraint | None = None) -> FittedModel:
    """Exact minimizer for the histogram model: bins decouple.

    Each coefficient is the bin mean of ``y`` over ``sqrt(D)``, clipped to the
    box. Empty bins keep the center coefficient.
    """
    if not isinstance(dictionary, Histogram):
        raise TypeError("fit_histogram needs a histogram dictionary")
    con = _default_constraint(sc, dictionary, con)
    if con.kind != "box":
        raise ValueError("fit_histogram needs a box constraint")
    D = dictionary.size
    idx = dictionary.bin_index(data.xs)
    counts = np.bincount(idx, minlength=D)
    sums = np.bincount(idx, weights=data.ys, minlength=D)
    beta = con.center.copy()
    filled = counts > 0
    beta[filled] = sums[filled] / counts[filled] / math.sqrt(D)
    beta = con.project(beta)
    return FittedModel(beta, con.center, empirical_risk(data, dictionary, beta))


def fit_projected_gradient(data: Dataset, sc: Scenario, dictionary: Dictionary,
                           con: ModelConstraint | None = None, rtol: float = 1e-12,
                           xtol: float = 1e-14, max_iter: int = 100_000) -> FittedModel:
    """Projected gradient with step ``1/L`` on ``beta' G beta / 2 - b' beta``.

    ``G`` is the empirical Gram matrix and ``L`` its largest eigenvalue. Stops
    when the relative objective change drops below ``rtol`` and the iterate
    moves less than ``xtol``, or after ``max_iter`` iterations.
    """
    con = _default_constraint(sc, dictionary, con)
    phi = dictionary.evaluate(data.xs)
    n = data.n
    gram = phi.T @ phi / n
    rhs = phi.T @ data.ys / n
    lip = float(np.linalg.eigvalsh(gram)[-1])
    mean_y2 = float(np.mean(data.ys ** 2))

    def risk(beta):
        return float(beta @ gram @ beta - 2.0 * rhs @ beta + mean_y2)

    beta = con.project(con.center)
    if lip <= 0.0:
        return FittedModel(beta, con.center, risk(beta))
    obj = risk(beta)
    gap = math.inf
    it = 0
    converged = False
    for it in range(1, max_iter + 1):
        new = con.project(beta - (gram @ beta - rhs) / lip)
        new_obj = risk(new)
        gap = abs(obj - new_obj) / max(abs(obj), 1e-300)
        step = float(np.max(np.abs(new - beta)))
        beta, obj = new, new_obj
        if gap <= rtol and step <= xtol:
            converged = True
            break
    return FittedModel(beta, con.center, obj, iterations=it, gap=gap, converged=converged)


def fit(data: Dataset, sc: Scenario, dictionary: Dictionary, con: ModelConstraint | None = None) -> FittedModel:
    """Closed form for histograms, projected gradient otherwise."""
    con = _default_constraint(sc, dictionary, con)
    if isinstance(dictionary, Histogram) and con.kind == "box":
        return fit_histogram(data, sc, dictionary, con)
    return fit_projected_gradient(data, sc, dictionary, con)


def s_hat(fit: FittedModel) -> float:
    """``||g_hat - g0||``, the square root of the excess risk for centered-span models."""
    return fit.s_hat
