"""Independent reference computations used as test oracles."""
import numpy as np
from scipy import optimize


def trs_bruteforce(Q, b, r, samples=200_000, seed=0):
    """Max of ``b'x + x'Qx`` over ``||x|| <= r`` by random search plus SLSQP polishing.

    Shares no code with the eigen-based solver: candidates are drawn
    uniformly in the ball and on the sphere, and the best few are refined by
    a generic constrained optimizer.
    """
    Q = np.atleast_2d(np.asarray(Q, float))
    b = np.atleast_1d(np.asarray(b, float))
    D = b.size
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((samples, D))
    v /= np.linalg.norm(v, axis=1)[:, None]
    radii = r * rng.random(samples) ** (1.0 / D)
    cand = np.vstack([v * r, v * radii[:, None], np.zeros((1, D))])
    vals = cand @ b + np.einsum("ij,jk,ik->i", cand, Q, cand)
    best = float(np.max(vals))
    cons = {"type": "ineq", "fun": lambda x: r ** 2 - x @ x, "jac": lambda x: -2 * x}
    for i in np.argsort(vals)[-5:]:
        res = optimize.minimize(lambda x: -(b @ x + x @ Q @ x), cand[i], jac=lambda x: -(b + 2 * Q @ x),
                                constraints=[cons], method="SLSQP", options={"ftol": 1e-15, "maxiter": 500})
        x = res.x
        if np.linalg.norm(x) > r:
            x = x * (r / np.linalg.norm(x))
        best = max(best, float(b @ x + x @ Q @ x))
    return best


def conjugate_grid(phi, v, u_max=100.0, step=1e-4):
    u = np.arange(0.0, u_max + step / 2, step)
    return float(np.max(u * v - phi(u)))
