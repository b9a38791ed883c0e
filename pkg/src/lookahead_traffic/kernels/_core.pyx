# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled stepping kernels.

Drop-in replacement for ``_ref.py``; see that module for the shared
conventions.  The two backends must stay draw-for-draw identical: any change
to how uniforms are consumed here must be mirrored there (and vice versa).
"""
import numpy as np

from libc.math cimport INFINITY, log1p
from libc.stdint cimport int64_t, uint8_t, uint64_t
from libc.string cimport memcpy

cdef uint64_t GAMMA = 0x9E3779B97F4A7C15
cdef uint64_t MIX_A = 0xBF58476D1CE4E5B9
cdef uint64_t MIX_B = 0x94D049BB133111EB
cdef double INV_2_53 = 1.0 / 9007199254740992.0


cdef inline uint64_t mix64(uint64_t z) nogil:
    z ^= z >> 30
    z *= MIX_A
    z ^= z >> 27
    z *= MIX_B
    z ^= z >> 31
    return z


cdef inline double next_uniform(uint64_t seed, uint64_t* counter) nogil:
    counter[0] += 1
    return <double>(mix64(seed + counter[0] * GAMMA) >> 11) * INV_2_53


def uniforms(uint64_t[::1] rng, Py_ssize_t count):
    """Draw ``count`` uniforms on [0, 1), advancing the stream counter."""
    out = np.empty(count, dtype=np.float64)
    cdef double[::1] view = out
    cdef uint64_t seed = rng[0]
    cdef uint64_t counter = rng[1]
    cdef Py_ssize_t i
    with nogil:
        for i in range(count):
            view[i] = next_uniform(seed, &counter)
    rng[1] = counter
    return out


def lookahead_counts(cells, look):
    """Occupied-cell count in each cell's look-ahead window (0s if look=0)."""
    counts = np.zeros(cells.shape[0], dtype=np.int64)
    for offset in range(2, look + 2):
        counts += np.roll(cells, -offset)
    return counts


def metropolis_advance(uint8_t[::1] cells, uint64_t[::1] rng,
                       double[::1] move_prob, Py_ssize_t look,
                       Py_ssize_t n_steps):
    """Advance ``n_steps`` fixed-step sweeps in place (see ``_ref``)."""
    cdef Py_ssize_t n = cells.shape[0]
    scratch = np.empty(n, dtype=np.uint8)
    cdef uint8_t[::1] buf = scratch
    cdef uint8_t* src = &cells[0]
    cdef uint8_t* dst = &buf[0]
    cdef uint8_t* tmp
    cdef uint64_t seed = rng[0]
    cdef uint64_t counter = rng[1]
    cdef Py_ssize_t step, k, i, idx, nxt, cnt
    cdef double u
    with nogil:
        for step in range(n_steps):
            memcpy(dst, src, n)
            for k in range(n):
                if src[k] == 1:
                    nxt = k + 1
                    if nxt == n:
                        nxt = 0
                    if src[nxt] == 0:
                        cnt = 0
                        for i in range(2, look + 2):
                            idx = k + i
                            if idx >= n:
                                idx -= n
                            cnt += src[idx]
                        u = next_uniform(seed, &counter)
                        if u < move_prob[cnt]:
                            dst[k] = 0
                            dst[nxt] = 1
            tmp = src
            src = dst
            dst = tmp
    if src != &cells[0]:
        memcpy(&cells[0], src, n)
    rng[1] = counter


cdef inline Py_ssize_t _scan_rates(uint8_t* cells, Py_ssize_t n,
                                   double* rates, Py_ssize_t look,
                                   int64_t* eligible,
                                   double* cumulative) nogil:
    """Fill eligible-cell indices and cumulative rates; return their count."""
    cdef Py_ssize_t k, i, idx, nxt, cnt, n_eligible = 0
    cdef double total = 0.0
    for k in range(n):
        if cells[k] == 1:
            nxt = k + 1
            if nxt == n:
                nxt = 0
            if cells[nxt] == 0:
                cnt = 0
                for i in range(2, look + 2):
                    idx = k + i
                    if idx >= n:
                        idx -= n
                    cnt += cells[idx]
                total += rates[cnt]
                eligible[n_eligible] = k
                cumulative[n_eligible] = total
                n_eligible += 1
    return n_eligible


cdef inline void _apply_move(uint8_t* cells, Py_ssize_t n,
                             Py_ssize_t k) nogil:
    cells[k] = 0
    if k + 1 == n:
        cells[0] = 1
    else:
        cells[k + 1] = 1


cdef inline Py_ssize_t _select(double* cumulative, Py_ssize_t n_eligible,
                               double target) nogil:
    cdef Py_ssize_t j = 0
    while j < n_eligible - 1 and cumulative[j] <= target:
        j += 1
    return j


def kmc_single(uint8_t[::1] cells, uint64_t[::1] rng, double[::1] rates,
               Py_ssize_t look):
    """One event-driven move in place; returns the waiting time (see ``_ref``)."""
    cdef Py_ssize_t n = cells.shape[0]
    idx_buf = np.empty(n, dtype=np.int64)
    cum_buf = np.empty(n, dtype=np.float64)
    cdef int64_t[::1] eligible = idx_buf
    cdef double[::1] cumulative = cum_buf
    cdef uint64_t seed = rng[0]
    cdef uint64_t counter = rng[1]
    cdef Py_ssize_t n_eligible, pick
    cdef double total, wait, target
    with nogil:
        n_eligible = _scan_rates(&cells[0], n, &rates[0], look,
                                 &eligible[0], &cumulative[0])
        if n_eligible == 0:
            wait = INFINITY
        else:
            total = cumulative[n_eligible - 1]
            wait = -log1p(-next_uniform(seed, &counter)) / total
            target = next_uniform(seed, &counter) * total
            pick = _select(&cumulative[0], n_eligible, target)
            _apply_move(&cells[0], n, eligible[pick])
    rng[1] = counter
    return wait


def kmc_advance(uint8_t[::1] cells, uint64_t[::1] rng, double[::1] rates,
                Py_ssize_t look, double t_now, double t_end):
    """Event-driven moves in place up to ``t_end`` (see ``_ref``)."""
    cdef Py_ssize_t n = cells.shape[0]
    idx_buf = np.empty(n, dtype=np.int64)
    cum_buf = np.empty(n, dtype=np.float64)
    cdef int64_t[::1] eligible = idx_buf
    cdef double[::1] cumulative = cum_buf
    cdef uint64_t seed = rng[0]
    cdef uint64_t counter = rng[1]
    cdef Py_ssize_t n_eligible, pick
    cdef double total, wait, target
    with nogil:
        while True:
            n_eligible = _scan_rates(&cells[0], n, &rates[0], look,
                                     &eligible[0], &cumulative[0])
            if n_eligible == 0:
                break
            total = cumulative[n_eligible - 1]
            wait = -log1p(-next_uniform(seed, &counter)) / total
            if t_now + wait > t_end:
                break
            t_now = t_now + wait
            target = next_uniform(seed, &counter) * total
            pick = _select(&cumulative[0], n_eligible, target)
            _apply_move(&cells[0], n, eligible[pick])
    rng[1] = counter
    return t_end
