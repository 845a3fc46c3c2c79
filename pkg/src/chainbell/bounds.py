"""Closed-form bounds for the chained Bell inequality with coincidence losses.

Every function here is pure and evaluated in double precision. ``n`` is the
number of measurement settings per observer (``n >= 2``; ``n = 2`` is CHSH)
and ``gamma`` the coincidence probability, the infimum over chained setting
pairs of the probability that a trial produces a coincident pair.
"""

from __future__ import annotations

import math
import operator
from dataclasses import dataclass

from .errors import DomainError, ThinningRequired

__all__ = [
    "BoundsReport",
    "CoincidenceBound",
    "bounds_report",
    "check_gamma",
    "check_n",
    "coincidence_bound",
    "delta_lower_bound",
    "eta_crit",
    "gamma_crit",
    "gamma_crit_cos",
    "local_bound",
    "p_crit",
    "p_from_gamma",
    "quantum_value",
]


def check_n(n: int) -> int:
    try:
        n = operator.index(n)
    except TypeError:
        raise DomainError(f"number of settings must be an integer, got {n!r}") from None
    if n < 2:
        raise DomainError(f"number of settings must be >= 2, got {n}")
    return n


def check_gamma(gamma: float) -> float:
    gamma = float(gamma)
    if not (0.0 < gamma <= 1.0):
        raise DomainError(f"coincidence probability must lie in (0, 1], got {gamma!r}")
    return gamma


def local_bound(n: int) -> float:
    """Local-realist maximum of the chained Bell sum, ``2n - 2``."""
    return float(2 * check_n(n) - 2)


def quantum_value(n: int) -> float:
    """Quantum maximum ``2n cos(pi / 2n)``."""
    n = check_n(n)
    return 2 * n * math.cos(math.pi / (2 * n))


@dataclass(frozen=True)
class CoincidenceBound:
    """Upper bound on the coincidence-conditioned Bell sum at a given gamma.

    ``raw`` is the closed form ``(4n - 2) / gamma - 2n``; ``clamped`` caps it at
    the algebraic maximum ``2n``. The bound is ``vacuous`` whenever the cap bites.
    """

    n: int
    gamma: float
    raw: float
    clamped: float

    @property
    def vacuous(self) -> bool:
        return self.raw >= 2 * self.n

    def __float__(self) -> float:
        return self.clamped


def coincidence_bound(n: int, gamma: float) -> CoincidenceBound:
    n = check_n(n)
    gamma = check_gamma(gamma)
    raw = (4 * n - 2) / gamma - 2 * n
    return CoincidenceBound(n=n, gamma=gamma, raw=raw, clamped=min(raw, float(2 * n)))


def gamma_crit(n: int) -> float:
    """Critical coincidence probability: at or below it a local model can fake the quantum value."""
    n = check_n(n)
    t = math.tan(math.pi / (4 * n))
    return (2 * n - 1) / (2 * n) * (1 + t * t)


def gamma_crit_cos(n: int) -> float:
    """Same quantity as :func:`gamma_crit` via ``1 + tan^2 = 1 / cos^2``."""
    n = check_n(n)
    c = math.cos(math.pi / (4 * n))
    return (2 * n - 1) / (2 * n * c * c)


def eta_crit(n: int) -> float:
    """Critical detection efficiency for the detection loophole (evaluated, not simulated)."""
    n = check_n(n)
    return 2.0 / (n / (n - 1) * math.cos(math.pi / (2 * n)) + 1.0)


def p_crit(n: int) -> float:
    """Gating parameter that tunes the local model's conditional correlation to ``cos(pi / 2n)``."""
    n = check_n(n)
    t = math.tan(math.pi / (4 * n))
    return (2 * n - 1) * t * t


def delta_lower_bound(n: int, gamma: float) -> float:
    """Lower bound on the overlap ratio delta, clamped at 0 where it is trivial."""
    n = check_n(n)
    gamma = check_gamma(gamma)
    return max(0.0, 2 * n - (2 * n - 1) / gamma)


def p_from_gamma(n: int, gamma: float) -> float:
    """Invert ``gamma = (2n - 1 + p) / 2n`` for the gated model.

    Raises :class:`ThinningRequired` below ``(2n - 1) / 2n``, where only
    setting-independent thinning can lower the coincidence probability further.
    """
    n = check_n(n)
    gamma = check_gamma(gamma)
    floor = (2 * n - 1) / (2 * n)
    if gamma < floor:
        raise ThinningRequired(
            f"gamma={gamma!r} is below {floor!r}, the smallest value reachable by gating alone for n={n}; "
            "uniform thinning is required"
        )
    return min(1.0, max(0.0, 2 * n * gamma - (2 * n - 1)))


@dataclass(frozen=True)
class BoundsReport:
    n: int
    local_bound: float
    quantum_value: float
    gamma_crit: float
    eta_crit: float
    p_crit: float
    coincidence_bound_at: CoincidenceBound | None = None

    def to_dict(self) -> dict:
        out = {
            "n": self.n,
            "local_bound": self.local_bound,
            "quantum_value": self.quantum_value,
            "gamma_crit": self.gamma_crit,
            "eta_crit": self.eta_crit,
            "p_crit": self.p_crit,
        }
        if self.coincidence_bound_at is not None:
            cb = self.coincidence_bound_at
            out["coincidence_bound"] = {
                "gamma": cb.gamma,
                "raw": cb.raw,
                "clamped": cb.clamped,
                "vacuous": cb.vacuous,
            }
        return out


def bounds_report(n: int, gamma: float | None = None) -> BoundsReport:
    n = check_n(n)
    return BoundsReport(
        n=n,
        local_bound=local_bound(n),
        quantum_value=quantum_value(n),
        gamma_crit=gamma_crit(n),
        eta_crit=eta_crit(n),
        p_crit=p_crit(n),
        coincidence_bound_at=None if gamma is None else coincidence_bound(n, gamma),
    )
