"""On-disk formats: event records (CSV), reports (canonical JSON), sweep tables (CSV)."""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Iterable

import numpy as np

from .coincidence import TrialTable
from .errors import MalformedInputError

EVENT_HEADER = "trial,side,setting,outcome,time"
SWEEP_HEADER = "gamma,s_hat,se,bound,quantum,gamma_hat,error"


def atomic_write(path: str | os.PathLike, text: str) -> None:
    """Write ``text`` to a temp file beside ``path`` and rename it into place."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="ascii", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def format_time(t: float) -> str:
    return f"{t:.9f}"


def event_lines(trials: TrialTable) -> Iterable[str]:
    yield EVENT_HEADER
    ids = trials.trial_id.tolist()
    sa, sb = trials.alice_setting.tolist(), trials.bob_setting.tolist()
    oa, ob = trials.alice_outcome.tolist(), trials.bob_outcome.tolist()
    ta, tb = trials.alice_time.tolist(), trials.bob_time.tolist()
    for k, t in enumerate(ids):
        if sa[k]:
            yield f"{t},A,{sa[k]},{oa[k]},{ta[k]:.9f}"
        if sb[k]:
            yield f"{t},B,{sb[k]},{ob[k]},{tb[k]:.9f}"


def write_events(path: str | os.PathLike, trials: TrialTable) -> None:
    atomic_write(path, "\n".join(event_lines(trials)) + "\n")


def parse_events(text: str) -> TrialTable:
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise MalformedInputError("empty event file", line=1)
    if lines[0].strip() != EVENT_HEADER:
        raise MalformedInputError(f"expected header {EVENT_HEADER!r}, got {lines[0].strip()!r}", line=1)
    trial, is_alice, setting, outcome, time = [], [], [], [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 5:
            raise MalformedInputError(f"expected 5 fields, got {len(parts)}", line=lineno)
        t, side, s, o, tm = parts
        try:
            t = int(t)
            s = int(s)
            o = int(o)
            tm = float(tm)
        except ValueError as exc:
            raise MalformedInputError(f"unparseable field ({exc})", line=lineno) from None
        if t < 0:
            raise MalformedInputError(f"negative trial id {t}", line=lineno)
        if side not in ("A", "B"):
            raise MalformedInputError(f"side must be A or B, got {side!r}", line=lineno)
        if s < 1:
            raise MalformedInputError(f"setting must be >= 1, got {s}", line=lineno)
        if o not in (-1, 1):
            raise MalformedInputError(f"outcome must be -1 or 1, got {o}", line=lineno)
        if not math.isfinite(tm):
            raise MalformedInputError(f"time must be finite, got {tm!r}", line=lineno)
        trial.append(t)
        is_alice.append(side == "A")
        setting.append(s)
        outcome.append(o)
        time.append(tm)
    if not trial:
        raise MalformedInputError("event file has no events", line=2)
    return TrialTable.from_columns(trial, is_alice, setting, outcome, time)


def read_events(path: str | os.PathLike) -> TrialTable:
    return parse_events(Path(path).read_text(encoding="ascii"))


def _canonical(obj):
    if isinstance(obj, dict):
        return {str(k): _canonical(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_canonical(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return float(f"{x:.15g}") if math.isfinite(x) else None
    return obj


def dumps_report(doc: dict) -> str:
    """Canonical JSON: sorted keys, reals rounded to 15 significant digits."""
    return json.dumps(_canonical(doc), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_report(path: str | os.PathLike, doc: dict) -> None:
    atomic_write(path, dumps_report(doc))


def sha256_file(path: str | os.PathLike) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _fmt(x) -> str:
    return "" if x is None else f"{x:.15g}"


def sweep_lines(rows) -> Iterable[str]:
    yield SWEEP_HEADER
    for r in rows:
        err = "" if r.error is None else r.error.replace(",", ";").replace("\n", " ")
        yield ",".join([_fmt(r.gamma), _fmt(r.s_hat), _fmt(r.se), _fmt(r.bound), _fmt(r.quantum),
                        _fmt(r.gamma_hat), err])


def write_sweep(path: str | os.PathLike, rows) -> None:
    atomic_write(path, "\n".join(sweep_lines(rows)) + "\n")
