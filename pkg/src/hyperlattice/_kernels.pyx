# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled event loop and state enumeration.

Mirrors ``_kernels_py`` operation for operation so both backends agree
bit for bit.  The callback dispatch mode is only available in Python.
"""
import math

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, sqrt

ctypedef cnp.int64_t i64

DEF MODE_SINGLE = 0
DEF MODE_IDLE_PREF = 1
DEF MODE_FIXED = 2


def enumerate_states(int servers, int K):
    cdef Py_ssize_t total = math.comb(K + servers, servers)
    out_arr = np.zeros((total, servers), dtype=np.int64)
    cdef i64[:, ::1] out = out_arr
    cdef i64[::1] n = np.zeros(servers, dtype=np.int64)
    cdef Py_ssize_t row = 0
    cdef int last = servers - 1
    cdef int k, j, l
    cdef i64 tail
    for k in range(K + 1):
        for j in range(last):
            n[j] = 0
        n[last] = k
        while True:
            for j in range(servers):
                out[row, j] = n[j]
            row += 1
            tail = n[last]
            j = last - 1
            while j >= 0 and tail == 0:
                tail += n[j]
                j -= 1
            if j < 0:
                break
            n[j] += 1
            for l in range(j + 1, last):
                n[l] = 0
            n[last] = tail - 1
    return out_arr


cdef inline i64 _pick(double u, const i64[::1] members, const double[::1] weights,
                      Py_ssize_t lo, Py_ssize_t hi, i64* n, bint idle_only) nogil:
    cdef double total = 0.0
    cdef double acc = 0.0
    cdef double target
    cdef i64 chosen = -1
    cdef Py_ssize_t p
    for p in range(lo, hi):
        if not idle_only or n[members[p]] == 0:
            total += weights[p]
    target = u * total
    for p in range(lo, hi):
        if not idle_only or n[members[p]] == 0:
            acc += weights[p]
            chosen = members[p]
            if target < acc:
                break
    return chosen


def simulate_events(
    const double[::1] arrival_times, const i64[::1] regions,
    const double[::1] service_exp, const double[::1] dispatch_u,
    const i64[::1] region_ptr, const i64[::1] region_members,
    const double[::1] region_weights, const i64[::1] region_mode,
    const double[::1] mu, double t_warm,
    bint travel, bint busy_travel, double speed,
    const double[:, ::1] call_xy, const double[:, ::1] idle_u,
    const i64[::1] rect_ptr, const double[:, ::1] rects, const double[::1] rect_cum,
    double[::1] busy_time, double[::1] qlen_area, double[:, ::1] qhist,
    i64[:, ::1] dispatch_counts,
    double[::1] completion, i64[::1] assigned, double[::1] travel_time,
    bint record_log, double[::1] log_time, i64[::1] log_kind, i64[::1] log_region,
    i64[::1] log_server, i64[::1] log_q,
    callback=None,
):
    if callback is not None:
        raise NotImplementedError("callback dispatch needs the Python backend")
    cdef Py_ssize_t N = arrival_times.shape[0]
    cdef Py_ssize_t I = mu.shape[0]
    cdef Py_ssize_t qcap = qhist.shape[1] - 1
    n_arr = np.zeros(I, dtype=np.int64)
    head_arr = np.full(I, -1, dtype=np.int64)
    tail_arr = np.full(I, -1, dtype=np.int64)
    dep_arr = np.full(I, np.inf)
    px_arr = np.zeros(I)
    py_arr = np.zeros(I)
    nxt_arr = np.full(N, -1, dtype=np.int64)
    cdef i64[::1] n = n_arr
    cdef i64[::1] head = head_arr
    cdef i64[::1] tail = tail_arr
    cdef double[::1] next_dep = dep_arr
    cdef double[::1] pos_x = px_arr
    cdef double[::1] pos_y = py_arr
    cdef i64[::1] nxt = nxt_arr
    cdef Py_ssize_t c, s, s_dep, p, lo, hi, q, qlo, qhi
    cdef i64 r, mode, done, job
    cdef double t_cur = 0.0, t_dep, t_arr, t_new, start, dt, duration, dx, dy, tt, x, y, target
    cdef Py_ssize_t n_log = 0
    cdef bint any_idle
    with nogil:
        for c in range(N):
            completion[c] = -1.0
            assigned[c] = -1
            travel_time[c] = 0.0
        c = 0
        while c < N:
            s_dep = -1
            t_dep = INFINITY
            for s in range(I):
                if next_dep[s] < t_dep:
                    t_dep = next_dep[s]
                    s_dep = s
            t_arr = arrival_times[c]
            t_new = t_dep if t_dep <= t_arr else t_arr

            if t_new > t_warm:
                start = t_cur if t_cur > t_warm else t_warm
                dt = t_new - start
                for s in range(I):
                    if n[s] > 0:
                        busy_time[s] += dt
                    qlen_area[s] += n[s] * dt
                    qhist[s, n[s] if n[s] < qcap else qcap] += dt
            t_cur = t_new

            if t_dep <= t_arr:
                s = s_dep
                done = head[s]
                completion[done] = t_cur
                head[s] = nxt[done]
                if head[s] < 0:
                    tail[s] = -1
                n[s] -= 1
                if travel:
                    pos_x[s] = call_xy[done, 0]
                    pos_y[s] = call_xy[done, 1]
                if n[s] > 0:
                    job = head[s]
                    duration = service_exp[job] / mu[s]
                    if travel:
                        dx = call_xy[job, 0] - pos_x[s]
                        dy = call_xy[job, 1] - pos_y[s]
                        tt = sqrt(dx * dx + dy * dy) / speed
                        travel_time[job] = tt
                        if busy_travel:
                            duration = duration + tt
                    next_dep[s] = t_cur + duration
                else:
                    next_dep[s] = INFINITY
                if record_log:
                    log_time[n_log] = t_cur
                    log_kind[n_log] = 1
                    log_region[n_log] = regions[done]
                    log_server[n_log] = s
                    log_q[n_log] = n[s]
                    n_log += 1
            else:
                r = regions[c]
                mode = region_mode[r]
                lo = region_ptr[r]
                hi = region_ptr[r + 1]
                if mode == MODE_SINGLE:
                    s = region_members[lo]
                elif mode == MODE_IDLE_PREF:
                    any_idle = False
                    for p in range(lo, hi):
                        if n[region_members[p]] == 0:
                            any_idle = True
                            break
                    s = _pick(dispatch_u[c], region_members, region_weights, lo, hi,
                              &n[0], any_idle)
                else:
                    s = _pick(dispatch_u[c], region_members, region_weights, lo, hi,
                              &n[0], False)
                assigned[c] = s
                if tail[s] >= 0:
                    nxt[tail[s]] = c
                else:
                    head[s] = c
                tail[s] = c
                n[s] += 1
                if n[s] == 1:
                    duration = service_exp[c] / mu[s]
                    if travel:
                        qlo = rect_ptr[s]
                        qhi = rect_ptr[s + 1]
                        target = idle_u[c, 0] * rect_cum[qhi - 1]
                        q = qlo
                        while q < qhi - 1 and target >= rect_cum[q]:
                            q += 1
                        x = rects[q, 0] + idle_u[c, 1] * (rects[q, 2] - rects[q, 0])
                        y = rects[q, 1] + idle_u[c, 2] * (rects[q, 3] - rects[q, 1])
                        dx = call_xy[c, 0] - x
                        dy = call_xy[c, 1] - y
                        tt = sqrt(dx * dx + dy * dy) / speed
                        travel_time[c] = tt
                        if busy_travel:
                            duration = duration + tt
                    next_dep[s] = t_cur + duration
                if t_cur > t_warm:
                    dispatch_counts[s, r] += 1
                if record_log:
                    log_time[n_log] = t_cur
                    log_kind[n_log] = 0
                    log_region[n_log] = r
                    log_server[n_log] = s
                    log_q[n_log] = n[s]
                    n_log += 1
                c += 1
    return n_log
