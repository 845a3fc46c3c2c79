"""Chained setting pairs, detection events and the chained Bell sum."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Literal, Sequence

from .bounds import check_n
from .errors import DomainError

Side = Literal["A", "B"]
ALICE: Side = "A"
BOB: Side = "B"


@dataclass(frozen=True)
class ChainedPair:
    """Setting pair ``(a_i, b_i)`` at 1-based chain position ``index``.

    ``sign`` is -1 only for the closing pair ``(1, n)``, whose correlation
    enters the Bell sum with a minus sign.
    """

    index: int
    alice_setting: int
    bob_setting: int
    sign: int

    def __str__(self) -> str:
        return f"#{self.index}(a={self.alice_setting},b={self.bob_setting})"


@lru_cache(maxsize=None)
def chained_pairs(n: int) -> tuple[ChainedPair, ...]:
    """The 2n pairs ``(1,1), (2,1), (2,2), (3,2), ..., (n,n), (1,n)`` in chain order."""
    n = check_n(n)
    pairs = []
    for j in range(2 * n):
        b = j // 2 + 1
        a = 1 if j == 2 * n - 1 else (j + 1) // 2 + 1
        pairs.append(ChainedPair(j + 1, a, b, -1 if j == 2 * n - 1 else 1))
    return tuple(pairs)


@lru_cache(maxsize=None)
def pair_lookup(n: int) -> dict[tuple[int, int], int]:
    """Map ``(alice_setting, bob_setting)`` to the 0-based chain position."""
    return {(p.alice_setting, p.bob_setting): p.index - 1 for p in chained_pairs(n)}


def check_setting(setting: int, n: int) -> int:
    setting = int(setting)
    if not 1 <= setting <= n:
        raise DomainError(f"setting must lie in 1..{n}, got {setting}")
    return setting


def check_side(side: str) -> Side:
    if side in ("A", "Alice", "alice"):
        return ALICE
    if side in ("B", "Bob", "bob"):
        return BOB
    raise DomainError(f"side must be 'A' (Alice) or 'B' (Bob), got {side!r}")


def chained_sum(correlations: Sequence[float]) -> float:
    """Assemble the coincidence-conditioned chained Bell sum.

    ``correlations[i]`` is the conditional correlation of chain position i+1.
    Consecutive positions are grouped as ``|c1 + c2| + |c3 + c4| + ...`` and
    the final group enters as ``|c_{2n-1} - c_{2n}|``.
    """
    m = len(correlations)
    if m < 4 or m % 2:
        raise DomainError(f"expected 2n >= 4 correlations, got {m}")
    total = 0.0
    for g in range(0, m - 2, 2):
        total += abs(correlations[g] + correlations[g + 1])
    total += abs(correlations[m - 2] - correlations[m - 1])
    return total


@dataclass(frozen=True)
class DetectionEvent:
    """One local detection: who, with which setting, what result, and when."""

    trial_id: int
    side: Side
    setting: int
    outcome: int
    timestamp: float
