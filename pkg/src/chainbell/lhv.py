"""Local hidden-variable model that fakes the quantum chained Bell value.

The hidden variable is ``(theta, r, u)``, all independent and uniform. The
circle is cut into ``4n`` half-open sectors of width ``pi / 2n``. Alice's
setting ``a`` sits at sector index ``2(a - 1)`` and Bob's setting ``b`` at
``2b - 1``; a party outputs +1 on the ``2n`` sectors starting at its own index.
Outcomes depend on ``theta`` only.

Emission times form a staircase: when ``r > p`` a party fires
``(relative sector mod 2n)`` time units late, otherwise immediately. With the
default window ``delta_t = 3/2`` a one-step difference is coincident and the
wrap-around step of ``2n - 1`` units is not, so every chained pair loses
exactly the sectors that would spoil its correlation. The auxiliary ``u``
coordinate delays Alice far out of any window with probability
``thinning_q``, removing coincidences independently of the settings.

Everything except :func:`simulate_trial` is deterministic; the exact oracle
enumerates sectors crossed with the gating strata using rational weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import numpy as np

from .bounds import check_n
from .chain import (
    ALICE,
    BOB,
    ChainedPair,
    DetectionEvent,
    chained_pairs,
    chained_sum,
    check_setting,
    check_side,
)
from .errors import DomainError

TWO_PI = 2.0 * math.pi
_U53 = 2.0**-53


@dataclass(frozen=True)
class HiddenVariable:
    theta: float
    r: float
    u: float = 0.5


@dataclass(frozen=True)
class ModelParams:
    n: int
    p: float
    thinning_q: float = 0.0
    delta_t: float = 1.5
    time_unit: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "n", check_n(self.n))
        if not 0.0 <= self.p <= 1.0:
            raise DomainError(f"p must lie in [0, 1], got {self.p!r}")
        if not 0.0 <= self.thinning_q < 1.0:
            raise DomainError(f"thinning_q must lie in [0, 1), got {self.thinning_q!r}")
        if not self.time_unit > 0:
            raise DomainError(f"time_unit must be positive, got {self.time_unit!r}")
        if not self.time_unit < self.delta_t < 2 * self.time_unit:
            raise DomainError(
                f"delta_t={self.delta_t!r} must lie strictly between one and two time units "
                f"({self.time_unit!r}, {2 * self.time_unit!r})"
            )

    @property
    def sector_width(self) -> float:
        return math.pi / (2 * self.n)

    @property
    def thinning_offset(self) -> float:
        return 4 * self.n * self.time_unit

    @property
    def trial_spacing(self) -> float:
        """Base-time spacing between consecutive trials, wide enough that no window straddles two."""
        return 10 * (2 * self.n) * self.time_unit


def angle_index(side: str, setting: int, n: int) -> int:
    """Sector index at which a party's setting starts its +1 half-circle."""
    side = check_side(side)
    setting = check_setting(setting, n)
    return 2 * (setting - 1) if side == ALICE else 2 * setting - 1


def sector(theta, n: int):
    """Index of the half-open sector ``[k w, (k+1) w)`` containing ``theta``, ``w = pi / 2n``."""
    width = math.pi / (2 * n)
    if np.ndim(theta) == 0:
        return min(math.floor(theta % TWO_PI / width), 4 * n - 1)
    theta = np.mod(theta, TWO_PI)
    return np.minimum(np.floor(theta / width), 4 * n - 1).astype(np.int64)


def outcome(side: str, setting: int, theta, params: ModelParams):
    n = params.n
    rel = (sector(theta, n) - angle_index(side, setting, n)) % (4 * n)
    if np.ndim(rel) == 0:
        return 1 if rel < 2 * n else -1
    return np.where(rel < 2 * n, 1, -1)


def emission_time(side: str, setting: int, hv: HiddenVariable, params: ModelParams):
    """Local emission delay. Accepts scalar or array-valued hidden-variable fields."""
    n = params.n
    side = check_side(side)
    stair = (sector(hv.theta, n) - angle_index(side, setting, n)) % (2 * n) * params.time_unit
    if np.ndim(stair) == 0 and np.ndim(hv.r) == 0 and np.ndim(hv.u) == 0:
        if side == ALICE and hv.u < params.thinning_q:
            return params.thinning_offset
        return 0.0 if hv.r <= params.p else float(stair)
    t = np.where(np.asarray(hv.r) <= params.p, 0.0, stair)
    if side == ALICE:
        t = np.where(np.asarray(hv.u) < params.thinning_q, params.thinning_offset, t)
    return t


def hidden_variable_from_words(w_theta: int, w_r: int, w_u: int) -> HiddenVariable:
    """Map three raw 64-bit words to a hidden variable (53-bit uniform doubles)."""
    return HiddenVariable(
        theta=((w_theta >> 11) * _U53) * TWO_PI,
        r=(w_r >> 11) * _U53,
        u=(w_u >> 11) * _U53,
    )


def trial_words(seed: int, trial: int) -> np.ndarray:
    """The four raw words owned by ``trial`` under ``seed`` (one Philox block per trial)."""
    return np.random.Philox(key=seed, counter=[trial, 0, 0, 0]).random_raw(4)


def simulate_trial(
    pair: ChainedPair, params: ModelParams, seed: int, trial: int
) -> tuple[DetectionEvent, DetectionEvent]:
    """Generate Alice's and Bob's detections for one trial.

    Deterministic in ``(seed, trial)`` and independent of any other trial.
    """
    w = [int(x) for x in trial_words(seed, trial)]
    hv = hidden_variable_from_words(w[1], w[2], w[3])
    base = trial * params.trial_spacing
    a, b = pair.alice_setting, pair.bob_setting
    ev_a = DetectionEvent(
        trial, ALICE, a, outcome(ALICE, a, hv.theta, params),
        round(base + emission_time(ALICE, a, hv, params), 9),
    )
    ev_b = DetectionEvent(
        trial, BOB, b, outcome(BOB, b, hv.theta, params),
        round(base + emission_time(BOB, b, hv, params), 9),
    )
    return ev_a, ev_b


# -- exact oracle ----------------------------------------------------------


@dataclass(frozen=True)
class _Cell:
    weight: Fraction
    hv: HiddenVariable


@dataclass(frozen=True)
class ExactPairStats:
    pair: ChainedPair
    coincidence_prob: float
    conditional_corr: float


class _Enumeration:
    """Partition of hidden-variable space into cells on which the model is constant."""

    def __init__(self, params: ModelParams, delta_t: float | None = None):
        self.params = params
        self.delta_t = params.delta_t if delta_t is None else float(delta_t)
        if not self.delta_t > 0:
            raise DomainError(f"delta_t must be positive, got {self.delta_t!r}")
        n, p, q = params.n, params.p, params.thinning_q
        fp, fq = Fraction(p), Fraction(q)
        r_strata = [(p / 2, fp), ((1 + p) / 2, 1 - fp)]
        u_strata = [(q / 2, fq), ((1 + q) / 2, 1 - fq)]
        per_sector = Fraction(1, 4 * n)
        width = params.sector_width
        cells = []
        for s in range(4 * n):
            theta = (s + 0.5) * width
            for r, wr in r_strata:
                for u, wu in u_strata:
                    w = per_sector * wr * wu
                    if w:
                        cells.append(_Cell(w, HiddenVariable(theta, r, u)))
        self.cells = cells

    def reading(self, pair: ChainedPair, cell: _Cell) -> tuple[int, bool]:
        """Outcome product and coincidence verdict of ``pair`` on ``cell``."""
        prm = self.params
        a, b = pair.alice_setting, pair.bob_setting
        x = outcome(ALICE, a, cell.hv.theta, prm) * outcome(BOB, b, cell.hv.theta, prm)
        dt = emission_time(ALICE, a, cell.hv, prm) - emission_time(BOB, b, cell.hv, prm)
        return x, abs(dt) < self.delta_t

    @cached_property
    def table(self) -> list[list[tuple[int, bool]]]:
        pairs = chained_pairs(self.params.n)
        return [[self.reading(pr, c) for pr in pairs] for c in self.cells]

    def pair_measures(self, i: int) -> tuple[Fraction, Fraction]:
        """``P(coincident_i)`` and ``integral of X_i`` over the coincident set."""
        prob = Fraction(0)
        xsum = Fraction(0)
        for cell, row in zip(self.cells, self.table):
            x, hit = row[i]
            if hit:
                prob += cell.weight
                xsum += x * cell.weight
        return prob, xsum

    def intersection_measures(self, i: int) -> tuple[Fraction, Fraction]:
        """Same as :meth:`pair_measures` but over cells coincident for every pair."""
        prob = Fraction(0)
        xsum = Fraction(0)
        for cell, row in zip(self.cells, self.table):
            if all(hit for _, hit in row):
                prob += cell.weight
                xsum += row[i][0] * cell.weight
        return prob, xsum


def exact_pair_stats(
    pair: ChainedPair, params: ModelParams, delta_t: float | None = None
) -> ExactPairStats:
    """Coincidence probability and conditional correlation of one chained pair, without sampling.

    ``delta_t`` overrides the model's window, e.g. to predict what a narrower
    analysis window would see on the same events.
    """
    enum = _Enumeration(params, delta_t)
    prob, xsum = enum.pair_measures(pair.index - 1)
    corr = float(xsum / prob) if prob else math.nan
    return ExactPairStats(pair, float(prob), corr)


def exact_all_pairs(params: ModelParams, delta_t: float | None = None) -> list[ExactPairStats]:
    enum = _Enumeration(params, delta_t)
    out = []
    for pair in chained_pairs(params.n):
        prob, xsum = enum.pair_measures(pair.index - 1)
        out.append(ExactPairStats(pair, float(prob), float(xsum / prob) if prob else math.nan))
    return out


def exact_gamma(params: ModelParams, delta_t: float | None = None) -> float:
    return min(s.coincidence_prob for s in exact_all_pairs(params, delta_t))


def exact_bell_value(params: ModelParams) -> float:
    """The coincidence-conditioned chained Bell sum the model produces."""
    return chained_sum([s.conditional_corr for s in exact_all_pairs(params)])


def _require_unthinned(params: ModelParams) -> None:
    if params.thinning_q > 0:
        raise DomainError("the overlap oracle is defined for the unthinned model (thinning_q = 0)")


def _delta(enum: _Enumeration) -> Fraction:
    n2 = 2 * enum.params.n
    p_all, _ = enum.intersection_measures(0)
    return min(p_all / enum.pair_measures(i)[0] for i in range(n2))


def exact_delta(params: ModelParams) -> float:
    """Worst-case probability that a coincidence on one pair is a coincidence on all pairs."""
    _require_unthinned(params)
    return float(_delta(_Enumeration(params)))


def lemma1_check(params: ModelParams, i: int) -> float:
    """Slack ``(1 - delta) - |E(X_i | L_i) - delta E(X_i | L_all)|`` for 1-based position ``i``.

    Non-negative whenever the overlap inequality holds for this pair.
    """
    _require_unthinned(params)
    n2 = 2 * params.n
    if not 1 <= i <= n2:
        raise DomainError(f"pair index must lie in 1..{n2}, got {i}")
    enum = _Enumeration(params)
    delta = _delta(enum)
    prob_i, xsum_i = enum.pair_measures(i - 1)
    prob_all, xsum_all = enum.intersection_measures(i - 1)
    e_i = xsum_i / prob_i
    e_all = xsum_all / prob_all if prob_all else Fraction(0)
    return float((1 - delta) - abs(e_i - delta * e_all))
