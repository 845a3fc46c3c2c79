"""Reference kernels in numpy / plain Python. Bit-identical to the compiled ones."""

from __future__ import annotations

import numpy as np

_U53 = 2.0**-53
_MASK32 = np.uint64(0xFFFFFFFF)


def _settings(raw, first_trial, n, uniform, a_table, b_table):
    if uniform:
        hi = raw[:, 0] >> np.uint64(32)
        lo = raw[:, 0] & _MASK32
        a = ((hi * np.uint64(n)) >> np.uint64(32)).astype(np.int64) + 1
        b = ((lo * np.uint64(n)) >> np.uint64(32)).astype(np.int64) + 1
    else:
        j = (first_trial + np.arange(raw.shape[0], dtype=np.int64)) % (2 * n)
        a = a_table[j]
        b = b_table[j]
    return a, b


def lhv_block(raw, first_trial, n, p, q, time_unit, spacing, two_pi, width, uniform,
              a_table, b_table, a_set, b_set, a_out, b_out, a_time, b_time):
    a, b = _settings(raw, first_trial, n, uniform, a_table, b_table)
    theta = (raw[:, 1] >> np.uint64(11)).astype(np.float64) * _U53 * two_pi
    r = (raw[:, 2] >> np.uint64(11)).astype(np.float64) * _U53
    u = (raw[:, 3] >> np.uint64(11)).astype(np.float64) * _U53
    s = np.minimum(np.floor(theta / width).astype(np.int64), 4 * n - 1)
    ia = 2 * (a - 1)
    ib = 2 * b - 1
    gated = r <= p
    ta = np.where(gated, 0.0, ((s - ia) % (2 * n)).astype(np.float64) * time_unit)
    ta = np.where(u < q, (4 * n) * time_unit, ta)
    tb = np.where(gated, 0.0, ((s - ib) % (2 * n)).astype(np.float64) * time_unit)
    base = (first_trial + np.arange(raw.shape[0], dtype=np.int64)).astype(np.float64) * spacing
    a_set[:] = a
    b_set[:] = b
    a_out[:] = np.where((s - ia) % (4 * n) < 2 * n, 1, -1)
    b_out[:] = np.where((s - ib) % (4 * n) < 2 * n, 1, -1)
    a_time[:] = base + ta
    b_time[:] = base + tb


def _sole_candidate(b, used, j, t_next, c, dt):
    """True if ``b[c]`` is the only unconsumed Bob event within ``dt`` of ``t_next``."""
    nb = len(b)
    x = j
    while x < nb and b[x] < t_next + dt:
        if x != c and not used[x] and abs(b[x] - t_next) < dt:
            return False
        x += 1
    return True


def match_stream(a, b, dt, ai, bi):
    """Greedy nearest-neighbour pairing of two sorted timestamp streams.

    Writes matched index pairs into ``ai``/``bi`` and returns their count.
    """
    a = a.tolist()
    b = b.tolist()
    na, nb = len(a), len(b)
    used = bytearray(nb)
    j = k = 0
    for i in range(na):
        ta = a[i]
        while j < nb and (used[j] or b[j] <= ta - dt):
            j += 1
        has_next = i + 1 < na
        t_next = a[i + 1] if has_next else 0.0
        best = second = expiring = -1
        d_best = d_second = d_exp = 0.0
        x = j
        while x < nb and b[x] < ta + dt:
            if not used[x]:
                d = abs(b[x] - ta)
                if best < 0 or d < d_best:
                    second, d_second = best, d_best
                    best, d_best = x, d
                elif second < 0 or d < d_second:
                    second, d_second = x, d
                if has_next and b[x] <= t_next - dt and (expiring < 0 or d < d_exp):
                    expiring, d_exp = x, d
            x += 1
        if best < 0:
            continue
        if has_next and b[best] > t_next - dt:
            if expiring >= 0:
                # the next Alice event can still take the nearest; do not strand one it cannot reach
                best = expiring
            elif abs(t_next - b[best]) < d_best and _sole_candidate(b, used, j, t_next, best, dt):
                best = second
                if best < 0:
                    continue
        used[best] = 1
        ai[k] = i
        bi[k] = best
        k += 1
    return k
