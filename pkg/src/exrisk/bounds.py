"""Closed-form deviation bounds and the regime conditions they rely on."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .numerics import ConjugatePair, conjugate


@dataclass(frozen=True)
class BoundConfig:
    """Constants entering the deviation bounds.

    ``K`` and ``C`` are derived as ``2 (A1 + A2)``. ``A_J`` is the slope of the
    linear aggregate function ``J(s) = A_J s``, ``A_inf`` the slope of the
    envelope ``D(s) = A_inf s``, ``A0 = s~0 sqrt(n)``, ``m_n = sqrt(n)``.
    """

    A1: float
    A2: float
    A_J: float
    A_inf: float
    n: int
    D: int
    A0: float = 1.0
    c0: float = 1.0
    ratio: float = 3.0

    def __post_init__(self):
        for name in ("A1", "A2", "A_J", "A_inf", "A0"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.n < 1 or self.D < 1:
            raise ValueError("n and D must be positive")
        if self.c0 < 0:
            raise ValueError("c0 must be nonnegative")

    @property
    def K(self) -> float:
        return 2.0 * (self.A1 + self.A2)

    @property
    def C(self) -> float:
        return 2.0 * (self.A1 + self.A2)

    @property
    def m_n(self) -> float:
        return math.sqrt(self.n)

    def to_dict(self) -> dict:
        out = asdict(self)
        out.update(K=self.K, C=self.C, m_n=self.m_n)
        return out


def r0_squared(cfg: BoundConfig, phi: ConjugatePair | None = None) -> float:
    """``2 C^2 Phi*(8K / (m_n C^2))``; ``Phi(u) = u^2 / A_J^2`` unless ``phi`` is given."""
    v = 8.0 * cfg.K / (cfg.m_n * cfg.C ** 2)
    if phi is None:
        if cfg.A_J == 0:
            return 0.0
        phi = ConjugatePair.quadratic(cfg.A_J)
    return 2.0 * cfg.C ** 2 * float(conjugate(phi)(v))


def r0_squared_closed(cfg: BoundConfig) -> float:
    return 32.0 * cfg.K ** 2 * cfg.A_J ** 2 / (cfg.m_n ** 2 * cfg.C ** 2)


def _variance_term(cfg, E_s, sigma_s, t):
    return math.sqrt(max(8.0 * cfg.K * E_s + 2.0 * sigma_s ** 2, 0.0) * t / cfg.n)


def bousquet_upper(cfg: BoundConfig, s: float, E_s: float, sigma_s: float, t: float) -> float:
    """Right-tail threshold for ``E_n(s)`` at confidence ``1 - exp(-t)``."""
    return E_s + _variance_term(cfg, E_s, sigma_s, t) + 2.0 * cfg.K * t / (3.0 * cfg.n)


def klein_rio_lower(cfg: BoundConfig, s: float, E_s: float, sigma_s: float, t: float) -> float:
    """Left-tail threshold for ``E_n(s)`` at confidence ``1 - exp(-t)``."""
    return E_s - _variance_term(cfg, E_s, sigma_s, t) - cfg.K * t / cfg.n


@dataclass(frozen=True)
class DeviationThresholds:
    upper: float
    lower: float
    z: float


def lemma_dev_thresholds(cfg: BoundConfig, s: float, t: float, s_tilde0: float | None = None,
                         r0: float | None = None) -> DeviationThresholds:
    """Simplified deviations using ``sigma_s <= C s`` and the conjugate bound.

    ``upper = 2 C s sqrt(t/n) + r0 sqrt(t/n) + 2 K t / (3 n)`` and
    ``lower = 2 C s sqrt(t/n) + r0 sqrt(t/n) + K t / n``. ``z`` is the same
    lower-type quantity evaluated at ``s~0`` (``s`` if not given).
    """
    if r0 is None:
        r0 = math.sqrt(r0_squared(cfg))
    root = math.sqrt(t / cfg.n)
    common = 2.0 * cfg.C * s * root + r0 * root
    s_ref = s if s_tilde0 is None else s_tilde0
    z = 2.0 * cfg.C * s_ref * root + r0 * root + cfg.K * t / cfg.n
    return DeviationThresholds(common + 2.0 * cfg.K * t / (3.0 * cfg.n), common + cfg.K * t / cfg.n, z)


def delta_threshold(cfg: BoundConfig, t: float, s_tilde0: float) -> float:
    """Deviation radius for ``| ||g_hat - g0|| - s~0 |`` at level ``exp(-t)``."""
    first = math.sqrt(cfg.A_J * cfg.A_inf) * s_tilde0 / cfg.n ** 0.25
    u = t + math.log1p(cfg.K * math.sqrt(cfg.n))
    second = cfg.c0 * (math.sqrt(u / cfg.n) + u / cfg.n)
    return max(first, second)


def delta_second_branch_unit(cfg: BoundConfig, t: float) -> float:
    """Second branch of :func:`delta_threshold` per unit of ``c0``."""
    u = t + math.log1p(cfg.K * math.sqrt(cfg.n))
    return math.sqrt(u / cfg.n) + u / cfg.n


@dataclass(frozen=True)
class RegimeCondition:
    name: str
    passed: bool
    lhs: float
    rhs: float


def check_regime(cfg: BoundConfig) -> list[RegimeCondition]:
    """Evaluate the asymptotic conditions; informational only.

    ``a << b`` is read as ``ratio * a <= b``.
    """
    n, D, r = cfg.n, cfg.D, cfg.ratio
    ln = math.log(n) if n > 1 else 0.0
    sq = math.sqrt(n)
    return [
        RegimeCondition("(ln n)^2 <= D", ln ** 2 <= D, ln ** 2, D),
        RegimeCondition("D <= sqrt(n)/ln n", ln > 0 and D <= sq / ln, D, sq / ln if ln > 0 else math.inf),
        RegimeCondition("sqrt(ln n) << A0", r * math.sqrt(ln) <= cfg.A0, r * math.sqrt(ln), cfg.A0),
        RegimeCondition("A0 << sqrt(n)", r * cfg.A0 <= sq, r * cfg.A0, sq),
        RegimeCondition("A_J A_inf <= sqrt(n)", cfg.A_J * cfg.A_inf <= sq, cfg.A_J * cfg.A_inf, sq),
    ]
