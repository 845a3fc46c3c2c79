"""Seeded Monte Carlo experiments over the local model and a quantum reference source.

Trial ``t`` owns Philox block ``t`` under key ``seed``, so generation is split
into shards that run on worker threads and still give bit-identical output
regardless of shard layout or thread count.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import __version__, _kernels
from .bounds import (
    check_n,
    coincidence_bound,
    eta_crit,
    gamma_crit,
    local_bound,
    p_crit,
    quantum_value,
)
from .chain import chained_pairs, chained_sum
from .coincidence import MODES, PairStats, TrialTable, gamma_estimator, s_estimator, tally
from .errors import DomainError, IncompleteDataError
from .lhv import TWO_PI, ModelParams, exact_all_pairs

SHARD_TRIALS = 1 << 16
SAMPLINGS = ("chained", "uniform")
SOURCES = ("lhv", "quantum")
# grid values are typically typed with 6 decimals; accept them at the critical point
GAMMA_CRIT_TOL = 1e-6


def worker_count() -> int:
    env = os.environ.get("CHAINED_BELL_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise DomainError(f"CHAINED_BELL_THREADS must be an integer, got {env!r}") from None
    return min(8, os.cpu_count() or 1)


def derive_seed(seed: int, index: int) -> int:
    """Independent 64-bit seed for sub-experiment ``index``."""
    return int(np.random.SeedSequence(seed, spawn_key=(index,)).generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class ExperimentConfig:
    n: int
    trials_per_pair: int
    seed: int
    p: float | None = None
    thinning_q: float = 0.0
    delta_t: float = 1.5
    time_unit: float = 1.0
    mode: str = "sync"
    sampling: str = "chained"
    source: str = "lhv"
    target_gamma: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "n", check_n(self.n))
        if int(self.trials_per_pair) < 1:
            raise DomainError(f"trials_per_pair must be >= 1, got {self.trials_per_pair!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise DomainError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")
        if self.mode not in MODES:
            raise DomainError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.sampling not in SAMPLINGS:
            raise DomainError(f"sampling must be one of {SAMPLINGS}, got {self.sampling!r}")
        if self.source not in SOURCES:
            raise DomainError(f"source must be one of {SOURCES}, got {self.source!r}")
        if self.source == "quantum" and self.sampling != "chained":
            raise DomainError("the quantum reference samples chained pairs only")
        if not self.delta_t > 0:
            raise DomainError(f"delta_t must be positive, got {self.delta_t!r}")
        if self.source == "lhv":
            if self.p is None:
                raise DomainError("the local model needs p (or use ExperimentConfig.from_gamma)")
            self.model_params()  # validates p, thinning_q, time_unit

    @classmethod
    def from_gamma(cls, n: int, gamma: float, **kwargs) -> ExperimentConfig:
        """Configure the model to fake the quantum value at coincidence probability ``gamma``.

        Gating is fixed at the critical value and setting-independent thinning
        supplies the rest, so conditional correlations stay at ``cos(pi / 2n)``.
        """
        n = check_n(n)
        gamma = float(gamma)
        gc = gamma_crit(n)
        if not 0 < gamma <= gc + GAMMA_CRIT_TOL:
            raise DomainError(
                f"gamma={gamma!r} is outside (0, gamma_crit]; no local model can fake the quantum value "
                f"above gamma_crit,{n} = {100 * gc:.2f}%"
            )
        q = max(0.0, 1.0 - gamma / gc)
        return cls(n=n, p=p_crit(n), thinning_q=q, target_gamma=gamma, **kwargs)

    @property
    def total_trials(self) -> int:
        per = 2 * self.n if self.sampling == "chained" else self.n * self.n
        return per * int(self.trials_per_pair)

    def model_params(self) -> ModelParams:
        return ModelParams(self.n, float(self.p), float(self.thinning_q), 1.5 * self.time_unit, self.time_unit)

    @property
    def trial_spacing(self) -> float:
        return 10 * (2 * self.n) * self.time_unit

    def to_dict(self) -> dict:
        return asdict(self)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _chain_tables(n: int) -> tuple[np.ndarray, np.ndarray]:
    pairs = chained_pairs(n)
    return (np.array([p.alice_setting for p in pairs], np.int64),
            np.array([p.bob_setting for p in pairs], np.int64))


def _quantum_block(raw: np.ndarray, first: int, n: int, spacing: float):
    a_tab, b_tab = _chain_tables(n)
    t = first + np.arange(raw.shape[0], dtype=np.int64)
    j = t % (2 * n)
    c = math.cos(math.pi / (2 * n))
    corr = np.where(j == 2 * n - 1, -c, c)
    a_out = np.where(raw[:, 1] >> np.uint64(63), -1, 1).astype(np.int8)
    agree = (raw[:, 2] >> np.uint64(11)).astype(np.float64) * 2.0**-53 < (1.0 + corr) / 2.0
    b_out = np.where(agree, a_out, -a_out).astype(np.int8)
    base = t.astype(np.float64) * spacing
    return a_tab[j], b_tab[j], a_out, b_out, base, base.copy()


def _shard(config: ExperimentConfig, first: int, count: int, backend: str | None) -> TrialTable:
    raw = np.random.Philox(key=int(config.seed), counter=[first, 0, 0, 0]).random_raw(4 * count).reshape(count, 4)
    n = config.n
    if config.source == "quantum":
        cols = _quantum_block(raw, first, n, config.trial_spacing)
    else:
        a_tab, b_tab = _chain_tables(n)
        prm = config.model_params()
        cols = _kernels.lhv_block(
            raw, first, n, prm.p, prm.thinning_q, prm.time_unit, config.trial_spacing,
            TWO_PI, prm.sector_width, config.sampling == "uniform", a_tab, b_tab, backend=backend,
        )
    a_set, b_set, a_out, b_out, a_time, b_time = cols
    return TrialTable(
        np.arange(first, first + count, dtype=np.int64), a_set, b_set, a_out, b_out,
        np.round(a_time, 9), np.round(b_time, 9),
    )


def generate(config: ExperimentConfig, backend: str | None = None, workers: int | None = None) -> TrialTable:
    """All trials of ``config`` as a table. A pure function of the config."""
    total = config.total_trials
    starts = list(range(0, total, SHARD_TRIALS))
    workers = worker_count() if workers is None else max(1, workers)

    def job(start: int) -> TrialTable:
        return _shard(config, start, min(SHARD_TRIALS, total - start), backend)

    if workers == 1 or len(starts) == 1:
        parts = [job(s) for s in starts]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(job, starts))
    return TrialTable.concat(parts)


@dataclass
class ExperimentReport:
    config: dict
    config_hash: str
    pair_stats: list[PairStats]
    s_hat: float | None
    s_se: float | None
    gamma_hat: float | None
    bounds: dict
    verdicts: dict
    prediction: dict
    non_chained: int = 0
    incomplete: int = 0
    singles: dict = field(default_factory=dict)
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "version": __version__,
            "config": self.config,
            "config_hash": self.config_hash,
            "pairs": [s.to_dict() for s in self.pair_stats],
            "s_hat": self.s_hat,
            "s_se": self.s_se,
            "gamma_hat": self.gamma_hat,
            "bounds": self.bounds,
            "verdicts": self.verdicts,
            "prediction": self.prediction,
            "non_chained": self.non_chained,
            "incomplete": self.incomplete,
            "singles": self.singles,
            "error": self.error,
        }


def _prediction(config: ExperimentConfig) -> dict:
    n = config.n
    if config.source == "quantum":
        return {"gamma": 1.0, "s": quantum_value(n)}
    exact = exact_all_pairs(config.model_params(), delta_t=config.delta_t)
    out = {"gamma": min(s.coincidence_prob for s in exact), "s": None}
    corr = [s.conditional_corr for s in exact]
    if not any(math.isnan(c) for c in corr):
        out["s"] = chained_sum(corr)
    return out


def build_report(config: ExperimentConfig | dict, stats: list[PairStats], n: int, *,
                 non_chained: int = 0, incomplete: int = 0, singles: dict | None = None,
                 prediction: dict | None = None) -> ExperimentReport:
    """Assemble estimates, closed-form bounds and verdicts from tallies."""
    if isinstance(config, ExperimentConfig):
        cfg, chash = config.to_dict(), config.config_hash()
    else:
        cfg = dict(config)
        chash = hashlib.sha256(json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()).hexdigest()[:16]
    gc = gamma_crit(n)
    bounds = {
        "local": local_bound(n),
        "quantum": quantum_value(n),
        "gamma_crit": gc,
        "eta_crit": eta_crit(n),
    }
    error = None
    s_hat = s_se = gamma_hat = None
    try:
        gamma_hat = gamma_estimator(stats)
        s_hat, s_se = s_estimator(stats, n)
    except IncompleteDataError as exc:
        error = str(exc)
    if gamma_hat is not None and gamma_hat > 0:
        cb = coincidence_bound(n, gamma_hat)
        bounds["coincidence_bound"] = {"gamma": gamma_hat, "raw": cb.raw, "clamped": cb.clamped, "vacuous": cb.vacuous}
    if error is None:
        clamped = bounds["coincidence_bound"]["clamped"]
        exceeds_local = s_hat > bounds["local"]
        verdicts = {
            "exceeds_local": exceeds_local,
            "exceeds_coincidence_bound": s_hat > clamped,
            "loophole_free": exceeds_local and gamma_hat > gc,
            "bound_margin_se": (s_hat - clamped) / s_se if s_se > 0 else None,
        }
    else:
        verdicts = {"error": error}
    return ExperimentReport(
        config=cfg, config_hash=chash, pair_stats=stats, s_hat=s_hat, s_se=s_se, gamma_hat=gamma_hat,
        bounds=bounds, verdicts=verdicts, prediction=prediction or {}, non_chained=non_chained,
        incomplete=incomplete, singles=singles or {}, error=error,
    )


def run(config: ExperimentConfig, backend: str | None = None, workers: int | None = None,
        trials: TrialTable | None = None) -> ExperimentReport:
    """Generate, match and summarize one experiment. Deterministic given the config."""
    if trials is None:
        trials = generate(config, backend=backend, workers=workers)
    t = tally(trials, config.n, config.delta_t, config.mode, backend=backend)
    return build_report(
        config, t.stats, config.n, non_chained=t.non_chained, incomplete=t.incomplete,
        singles=t.singles, prediction=_prediction(config),
    )


def quantum_reference(n: int, trials_per_pair: int, seed: int, **kwargs) -> ExperimentReport:
    """Ideal quantum statistics: every trial coincident, correlations ``+-cos(pi / 2n)``."""
    return run(ExperimentConfig(n=n, trials_per_pair=trials_per_pair, seed=seed, source="quantum", **kwargs))


@dataclass(frozen=True)
class SweepRow:
    gamma: float
    gamma_hat: float | None
    s_hat: float | None
    se: float | None
    bound: float
    quantum: float
    error: str | None = None


def sweep_row(n: int, gamma: float, trials_per_pair: int, seed: int, index: int, **kwargs) -> SweepRow:
    config = ExperimentConfig.from_gamma(n, gamma, trials_per_pair=trials_per_pair,
                                         seed=derive_seed(seed, index), **kwargs)
    rep = run(config)
    return SweepRow(gamma=float(gamma), gamma_hat=rep.gamma_hat, s_hat=rep.s_hat, se=rep.s_se,
                    bound=coincidence_bound(n, gamma).clamped, quantum=quantum_value(n), error=rep.error)


def sweep(n: int, gamma_grid: Sequence[float], trials_per_pair: int, seed: int, **kwargs) -> list[SweepRow]:
    """Fake the quantum value at every requested coincidence probability.

    Raises :class:`DomainError` if any grid value exceeds ``gamma_crit(n)``.
    """
    n = check_n(n)
    gc = gamma_crit(n)
    for g in gamma_grid:
        if not 0 < g <= gc + GAMMA_CRIT_TOL:
            raise DomainError(f"gamma={g!r} outside (0, gamma_crit,{n} = {100 * gc:.2f}%]")
    return [sweep_row(n, g, trials_per_pair, seed, k, **kwargs) for k, g in enumerate(gamma_grid)]

