"""Coincidence matching of detection streams and the statistics built on it."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .bounds import check_n
from .chain import ALICE, BOB, ChainedPair, DetectionEvent, chained_pairs, chained_sum, check_side
from .errors import DomainError, IncompleteDataError, MalformedInputError

MODES = ("sync", "stream")


def _check_delta_t(delta_t: float) -> float:
    delta_t = float(delta_t)
    if not delta_t > 0:
        raise DomainError(f"coincidence window must be positive, got {delta_t!r}")
    return delta_t


@dataclass
class TrialTable:
    """Column store of trials, one row per trial with Alice's and Bob's readings.

    A trial missing one side carries setting 0 and a NaN timestamp there.
    """

    trial_id: np.ndarray
    alice_setting: np.ndarray
    bob_setting: np.ndarray
    alice_outcome: np.ndarray
    bob_outcome: np.ndarray
    alice_time: np.ndarray
    bob_time: np.ndarray

    def __len__(self) -> int:
        return int(self.trial_id.size)

    @classmethod
    def concat(cls, tables: Sequence[TrialTable]) -> TrialTable:
        return cls(*(np.concatenate([getattr(t, f) for t in tables]) for f in cls.__dataclass_fields__))

    @classmethod
    def from_columns(cls, trial, is_alice, setting, outcome, time) -> TrialTable:
        """Build from per-event columns; rejects two events on one side of a trial."""
        trial = np.asarray(trial, dtype=np.int64)
        is_alice = np.asarray(is_alice, dtype=bool)
        setting = np.asarray(setting, dtype=np.int64)
        outcome = np.asarray(outcome, dtype=np.int8)
        time = np.asarray(time, dtype=np.float64)
        ids = np.unique(trial)
        cols = []
        for mask in (is_alice, ~is_alice):
            t = trial[mask]
            uniq, first, counts = np.unique(t, return_index=True, return_counts=True)
            if np.any(counts > 1):
                bad = int(uniq[np.argmax(counts > 1)])
                side = "A" if mask is is_alice else "B"
                raise MalformedInputError(f"trial {bad} has more than one event on side {side}")
            pos = np.searchsorted(ids, uniq)
            s = np.zeros(ids.size, np.int64)
            o = np.zeros(ids.size, np.int8)
            tm = np.full(ids.size, np.nan)
            s[pos] = setting[mask][first]
            o[pos] = outcome[mask][first]
            tm[pos] = time[mask][first]
            cols.append((s, o, tm))
        (sa, oa, ta), (sb, ob, tb) = cols
        return cls(ids, sa, sb, oa, ob, ta, tb)

    @classmethod
    def from_events(cls, events: Iterable[DetectionEvent]) -> TrialTable:
        events = list(events)
        return cls.from_columns(
            [e.trial_id for e in events],
            [check_side(e.side) == ALICE for e in events],
            [e.setting for e in events],
            [e.outcome for e in events],
            [e.timestamp for e in events],
        )

    def to_events(self) -> list[DetectionEvent]:
        """Events sorted by (trial, side), Alice first."""
        out = []
        for k in range(len(self)):
            t = int(self.trial_id[k])
            if self.alice_setting[k]:
                out.append(DetectionEvent(t, ALICE, int(self.alice_setting[k]),
                                          int(self.alice_outcome[k]), float(self.alice_time[k])))
            if self.bob_setting[k]:
                out.append(DetectionEvent(t, BOB, int(self.bob_setting[k]),
                                          int(self.bob_outcome[k]), float(self.bob_time[k])))
        return out


def _pair_lut(n: int) -> np.ndarray:
    lut = np.full((n + 1, n + 1), -1, dtype=np.int64)
    for p in chained_pairs(n):
        lut[p.alice_setting, p.bob_setting] = p.index - 1
    return lut


def pair_indices(alice_setting, bob_setting, n: int) -> np.ndarray:
    """0-based chain position of each setting combination, -1 where it is not chained."""
    a = np.asarray(alice_setting, dtype=np.int64)
    b = np.asarray(bob_setting, dtype=np.int64)
    ok = (a >= 1) & (a <= n) & (b >= 1) & (b <= n)
    out = np.full(a.shape, -1, dtype=np.int64)
    out[ok] = _pair_lut(n)[a[ok], b[ok]]
    return out


@dataclass
class SyncMatch:
    coincident: np.ndarray
    pair_index: np.ndarray
    non_chained: int
    incomplete: int


def match_trial_synchronized(trials: TrialTable | Iterable[DetectionEvent], delta_t: float, n: int) -> SyncMatch:
    """Per-trial coincidence verdicts: a trial is coincident iff ``|t_A - t_B| < delta_t``."""
    delta_t = _check_delta_t(delta_t)
    n = check_n(n)
    if not isinstance(trials, TrialTable):
        trials = TrialTable.from_events(trials)
    complete = (trials.alice_setting > 0) & (trials.bob_setting > 0)
    with np.errstate(invalid="ignore"):
        coincident = complete & (np.abs(trials.alice_time - trials.bob_time) < delta_t)
    pidx = pair_indices(trials.alice_setting, trials.bob_setting, n)
    return SyncMatch(
        coincident=coincident,
        pair_index=pidx,
        non_chained=int(np.count_nonzero(complete & (pidx < 0))),
        incomplete=int(np.count_nonzero(~complete)),
    )


@dataclass
class StreamMatch:
    alice_idx: np.ndarray
    bob_idx: np.ndarray
    alice_singles: np.ndarray
    bob_singles: np.ndarray


def _timestamps(events) -> np.ndarray:
    seq = list(events) if not isinstance(events, np.ndarray) else events
    if len(seq) and isinstance(seq[0], DetectionEvent):
        return np.array([e.timestamp for e in seq], dtype=np.float64)
    return np.asarray(seq, dtype=np.float64)


def match_stream_windowed(alice, bob, delta_t: float, backend: str | None = None) -> StreamMatch:
    """One-to-one nearest-neighbour pairing of two time-sorted streams.

    A single forward pass over Alice's events with a cursor into Bob's. Each
    Alice event takes the nearest unconsumed Bob event closer than
    ``delta_t``, equidistant candidates resolving to the earlier one. One step
    of lookahead adjusts that choice:

    * if the next Alice event could also use the nearest candidate, a
      candidate it cannot reach is taken instead, so it is not stranded;
    * if the next Alice event is strictly closer to the nearest candidate
      and has no other candidate, the current event leaves it and takes its
      runner-up (or stays single).

    ``alice``/``bob`` are timestamp arrays or sequences of
    :class:`DetectionEvent`.
    """
    delta_t = _check_delta_t(delta_t)
    a = _timestamps(alice)
    b = _timestamps(bob)
    for name, x in (("alice", a), ("bob", b)):
        if x.size > 1 and not np.all(x[1:] >= x[:-1]):
            raise MalformedInputError(f"{name} stream is not sorted by timestamp")
        if np.isnan(x).any():
            raise MalformedInputError(f"{name} stream contains NaN timestamps")
    ai, bi = _kernels.match_stream(a, b, delta_t, backend=backend)
    a_used = np.zeros(a.size, bool)
    b_used = np.zeros(b.size, bool)
    a_used[ai] = True
    b_used[bi] = True
    return StreamMatch(ai, bi, np.flatnonzero(~a_used), np.flatnonzero(~b_used))


@dataclass
class PairStats:
    """Tallies for one chained pair. Integer fields merge by addition."""

    pair: ChainedPair
    trials: int = 0
    coincidences: int = 0
    corr_sum: int = 0

    def __add__(self, other: PairStats) -> PairStats:
        if other.pair != self.pair:
            raise ValueError(f"cannot merge tallies of {self.pair} and {other.pair}")
        return PairStats(self.pair, self.trials + other.trials,
                         self.coincidences + other.coincidences, self.corr_sum + other.corr_sum)

    @property
    def defined(self) -> bool:
        return self.coincidences > 0

    @property
    def cond_corr(self) -> float:
        return self.corr_sum / self.coincidences if self.coincidences else math.nan

    @property
    def gamma_hat(self) -> float:
        return self.coincidences / self.trials if self.trials else math.nan

    @property
    def std_err(self) -> float:
        if not self.coincidences:
            return math.nan
        c = self.cond_corr
        return math.sqrt(max(0.0, 1.0 - c * c) / self.coincidences)

    def to_dict(self) -> dict:
        return {
            "index": self.pair.index,
            "alice_setting": self.pair.alice_setting,
            "bob_setting": self.pair.bob_setting,
            "sign": self.pair.sign,
            "trials": self.trials,
            "coincidences": self.coincidences,
            "corr_sum": self.corr_sum,
            "cond_corr": self.cond_corr if self.defined else None,
            "gamma_hat": self.gamma_hat if self.trials else None,
            "std_err": self.std_err if self.defined else None,
        }


def accumulate_stats(pair_index, products, trials_per_pair: Sequence[int], n: int) -> list[PairStats]:
    """Per-pair tallies from matched coincidences.

    ``pair_index`` holds the 0-based chain position of each coincidence (-1
    entries are ignored), ``products`` the matching outcome products.
    """
    n = check_n(n)
    pairs = chained_pairs(n)
    if len(trials_per_pair) != len(pairs):
        raise DomainError(f"need {len(pairs)} trial counts, got {len(trials_per_pair)}")
    pidx = np.asarray(pair_index, dtype=np.int64)
    prod = np.asarray(products, dtype=np.int64)
    keep = pidx >= 0
    counts = np.bincount(pidx[keep], minlength=len(pairs))
    sums = np.bincount(pidx[keep], weights=prod[keep], minlength=len(pairs))
    return [
        PairStats(p, int(trials_per_pair[k]), int(counts[k]), int(round(sums[k])))
        for k, p in enumerate(pairs)
    ]


def s_estimator(stats: Sequence[PairStats], n: int) -> tuple[float, float]:
    """Empirical chained Bell sum and its root-sum-square standard error."""
    n = check_n(n)
    by_index = {s.pair.index: s for s in stats}
    for pair in chained_pairs(n):
        s = by_index.get(pair.index)
        if s is None:
            raise IncompleteDataError(f"missing statistics for chained pair {pair}")
        if not s.defined:
            raise IncompleteDataError(f"chained pair {pair} has no coincidences")
    ordered = [by_index[k] for k in range(1, 2 * n + 1)]
    value = chained_sum([s.cond_corr for s in ordered])
    se = math.sqrt(sum(s.std_err**2 for s in ordered))
    return value, se


def gamma_estimator(stats: Sequence[PairStats]) -> float:
    """Empirical coincidence probability: the minimum per-pair coincidence rate."""
    if not stats:
        raise IncompleteDataError("no pair statistics")
    for s in stats:
        if s.trials <= 0:
            raise IncompleteDataError(f"chained pair {s.pair} has no trials")
    return min(s.gamma_hat for s in stats)


@dataclass
class Tally:
    """Matching outcome for a whole data set."""

    stats: list[PairStats]
    non_chained: int = 0
    incomplete: int = 0
    singles: dict = field(default_factory=dict)


def trials_per_pair(trials: TrialTable, n: int) -> list[int]:
    pidx = pair_indices(trials.alice_setting, trials.bob_setting, n)
    return np.bincount(pidx[pidx >= 0], minlength=2 * n).tolist()


def tally(trials: TrialTable, n: int, delta_t: float, mode: str = "sync", backend: str | None = None) -> Tally:
    """Match ``trials`` under ``mode`` and accumulate per-pair statistics.

    Denominators come from the trial ids (ground-truth trials per chained pair).
    """
    n = check_n(n)
    if mode not in MODES:
        raise DomainError(f"mode must be one of {MODES}, got {mode!r}")
    tpp = trials_per_pair(trials, n)
    if mode == "sync":
        m = match_trial_synchronized(trials, delta_t, n)
        hit = m.coincident & (m.pair_index >= 0)
        prod = trials.alice_outcome.astype(np.int64) * trials.bob_outcome
        stats = accumulate_stats(m.pair_index[hit], prod[hit], tpp, n)
        return Tally(stats, m.non_chained, m.incomplete)

    has_a = trials.alice_setting > 0
    has_b = trials.bob_setting > 0
    ra = np.flatnonzero(has_a)
    rb = np.flatnonzero(has_b)
    ra = ra[np.argsort(trials.alice_time[ra], kind="stable")]
    rb = rb[np.argsort(trials.bob_time[rb], kind="stable")]
    sm = match_stream_windowed(trials.alice_time[ra], trials.bob_time[rb], delta_t, backend=backend)
    ka, kb = ra[sm.alice_idx], rb[sm.bob_idx]
    pidx = pair_indices(trials.alice_setting[ka], trials.bob_setting[kb], n)
    prod = trials.alice_outcome[ka].astype(np.int64) * trials.bob_outcome[kb]
    stats = accumulate_stats(pidx, prod, tpp, n)
    return Tally(
        stats,
        non_chained=int(np.count_nonzero(pidx < 0)),
        incomplete=int(np.count_nonzero(~(has_a & has_b))),
        singles={"alice": int(sm.alice_singles.size), "bob": int(sm.bob_singles.size)},
    )


def merge_stats(*groups: Sequence[PairStats]) -> list[PairStats]:
    """Order-independent merge of tallies from independent shards."""
    acc: dict[int, PairStats] = {}
    for group in groups:
        for s in group:
            acc[s.pair.index] = acc[s.pair.index] + s if s.pair.index in acc else s
    return [acc[k] for k in sorted(acc)]

