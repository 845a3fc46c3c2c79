# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels. Must stay bit-identical to _pykernels."""

from libc.math cimport floor, fabs
from libc.stdint cimport uint64_t, int64_t, int8_t

cdef double U53 = 1.0 / 9007199254740992.0


cdef inline long long pmod(long long x, long long m) noexcept nogil:
    cdef long long r = x % m
    return r + m if r < 0 else r


def lhv_block(const uint64_t[:, ::1] raw, long long first_trial, int n, double p, double q,
              double time_unit, double spacing, double two_pi, double width, bint uniform,
              const int64_t[::1] a_table, const int64_t[::1] b_table,
              int64_t[::1] a_set, int64_t[::1] b_set, int8_t[::1] a_out, int8_t[::1] b_out,
              double[::1] a_time, double[::1] b_time):
    cdef Py_ssize_t k, m = raw.shape[0]
    cdef long long t, s, ia, ib, a, b, j
    cdef uint64_t w0
    cdef double theta, r, u, ta, tb, base
    cdef long long n2 = 2 * n, n4 = 4 * n
    with nogil:
        for k in range(m):
            t = first_trial + k
            if uniform:
                w0 = raw[k, 0]
                a = <long long>(((w0 >> 32) * <uint64_t>n) >> 32) + 1
                b = <long long>(((w0 & 0xFFFFFFFFULL) * <uint64_t>n) >> 32) + 1
            else:
                j = t % n2
                a = a_table[j]
                b = b_table[j]
            theta = <double>(raw[k, 1] >> 11) * U53 * two_pi
            r = <double>(raw[k, 2] >> 11) * U53
            u = <double>(raw[k, 3] >> 11) * U53
            s = <long long>floor(theta / width)
            if s > n4 - 1:
                s = n4 - 1
            ia = 2 * (a - 1)
            ib = 2 * b - 1
            if r <= p:
                ta = 0.0
                tb = 0.0
            else:
                ta = <double>pmod(s - ia, n2) * time_unit
                tb = <double>pmod(s - ib, n2) * time_unit
            if u < q:
                ta = <double>n4 * time_unit
            base = <double>t * spacing
            a_set[k] = a
            b_set[k] = b
            a_out[k] = 1 if pmod(s - ia, n4) < n2 else -1
            b_out[k] = 1 if pmod(s - ib, n4) < n2 else -1
            a_time[k] = base + ta
            b_time[k] = base + tb


cdef inline bint sole_candidate(const double[::1] b, const unsigned char[::1] used, Py_ssize_t j,
                                double t_next, Py_ssize_t c, double dt) noexcept nogil:
    cdef Py_ssize_t x = j, nb = b.shape[0]
    while x < nb and b[x] < t_next + dt:
        if x != c and not used[x] and fabs(b[x] - t_next) < dt:
            return False
        x += 1
    return True


def match_stream(const double[::1] a, const double[::1] b, double dt,
                 int64_t[::1] ai, int64_t[::1] bi):
    cdef Py_ssize_t na = a.shape[0], nb = b.shape[0]
    cdef Py_ssize_t i, j = 0, k = 0, x, best, second, expiring
    cdef double ta, t_next, d, d_best, d_second, d_exp
    cdef bint has_next
    cdef unsigned char[::1] used = bytearray(nb)
    with nogil:
        for i in range(na):
            ta = a[i]
            while j < nb and (used[j] or b[j] <= ta - dt):
                j += 1
            has_next = i + 1 < na
            t_next = a[i + 1] if has_next else 0.0
            best = -1
            second = -1
            expiring = -1
            d_best = 0.0
            d_second = 0.0
            d_exp = 0.0
            x = j
            while x < nb and b[x] < ta + dt:
                if not used[x]:
                    d = fabs(b[x] - ta)
                    if best < 0 or d < d_best:
                        second = best
                        d_second = d_best
                        best = x
                        d_best = d
                    elif second < 0 or d < d_second:
                        second = x
                        d_second = d
                    if has_next and b[x] <= t_next - dt and (expiring < 0 or d < d_exp):
                        expiring = x
                        d_exp = d
                x += 1
            if best < 0:
                continue
            if has_next and b[best] > t_next - dt:
                if expiring >= 0:
                    best = expiring
                elif fabs(t_next - b[best]) < d_best and sole_candidate(b, used, j, t_next, best, dt):
                    best = second
                    if best < 0:
                        continue
            used[best] = 1
            ai[k] = i
            bi[k] = best
            k += 1
    return k
