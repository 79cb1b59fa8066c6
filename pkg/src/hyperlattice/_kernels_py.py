"""Pure-Python reference versions of the compiled kernels in ``_kernels.pyx``.

Both implementations perform the same floating-point operations in the
same order, so given identical inputs they produce bit-identical outputs.
"""
import math

import numpy as np

INF = math.inf

MODE_SINGLE = 0
MODE_IDLE_PREF = 1
MODE_FIXED = 2
MODE_CALLBACK = 3


def enumerate_states(servers, K):
    """All weak compositions of 0..K into ``servers`` parts, in tour order."""
    total = math.comb(K + servers, servers)
    out = np.zeros((total, servers), dtype=np.int64)
    n = [0] * servers
    row = 0
    last = servers - 1
    for k in range(K + 1):
        # first composition of level k in lex order is (0, ..., 0, k)
        for j in range(last):
            n[j] = 0
        n[last] = k
        while True:
            out[row] = n
            row += 1
            # successor: bump the rightmost part that still has mass after it
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
    return out


def _pick(u, members, weights, woff, lo, hi, n, idle_only):
    total = 0.0
    for p in range(lo, hi):
        if not idle_only or n[members[p]] == 0:
            total += weights[p - woff]
    target = u * total
    acc = 0.0
    chosen = -1
    for p in range(lo, hi):
        if not idle_only or n[members[p]] == 0:
            acc += weights[p - woff]
            chosen = members[p]
            if target < acc:
                break
    return chosen


def _sample_point(s, u0, u1, u2, rect_ptr, rects, rect_cum):
    lo = rect_ptr[s]
    hi = rect_ptr[s + 1]
    target = u0 * rect_cum[hi - 1]
    q = lo
    while q < hi - 1 and target >= rect_cum[q]:
        q += 1
    x = rects[q][0] + u1 * (rects[q][2] - rects[q][0])
    y = rects[q][1] + u2 * (rects[q][3] - rects[q][1])
    return x, y


def simulate_events(
    arrival_times, regions, service_exp, dispatch_u,
    region_ptr, region_members, region_weights, region_mode,
    mu, t_warm,
    travel, busy_travel, speed, call_xy, idle_u,
    rect_ptr, rects, rect_cum,
    busy_time, qlen_area, qhist, dispatch_counts,
    completion, assigned, travel_time,
    record_log, log_time, log_kind, log_region, log_server, log_q,
    callback=None,
):
    """Event loop for one replication; fills the output arrays in place.

    Returns the number of event-log rows written.
    """
    N = arrival_times.shape[0]
    I = mu.shape[0]
    qcap = qhist.shape[1] - 1
    # plain lists are much faster than per-element numpy access
    arrival_times = arrival_times.tolist()
    regions = regions.tolist()
    service_exp = service_exp.tolist()
    dispatch_u = dispatch_u.tolist()
    region_ptr = region_ptr.tolist()
    region_members = region_members.tolist()
    region_weights = region_weights.tolist()
    region_mode = region_mode.tolist()
    mu = mu.tolist()
    call_xy = call_xy.tolist()
    idle_u = idle_u.tolist()
    rect_ptr = rect_ptr.tolist()
    rects = rects.tolist()
    rect_cum = rect_cum.tolist()
    out_busy = busy_time.tolist()
    out_area = qlen_area.tolist()
    out_hist = qhist.tolist()
    out_counts = dispatch_counts.tolist()
    out_completion = [-1.0] * N
    out_assigned = [-1] * N
    out_travel = [0.0] * N
    n = [0] * I
    head = [-1] * I
    tail = [-1] * I
    next_dep = [INF] * I
    pos_x = [0.0] * I
    pos_y = [0.0] * I
    nxt = [-1] * N
    t_cur = 0.0
    n_log = 0
    c = 0
    while c < N:
        # earliest pending departure
        s_dep = -1
        t_dep = INF
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
                    out_busy[s] += dt
                out_area[s] += n[s] * dt
                out_hist[s][n[s] if n[s] < qcap else qcap] += dt
        t_cur = t_new

        if t_dep <= t_arr:
            s = s_dep
            done = head[s]
            out_completion[done] = t_cur
            head[s] = nxt[done]
            if head[s] < 0:
                tail[s] = -1
            n[s] -= 1
            if travel:
                pos_x[s] = call_xy[done][0]
                pos_y[s] = call_xy[done][1]
            if n[s] > 0:
                job = head[s]
                duration = service_exp[job] / mu[s]
                if travel:
                    dx = call_xy[job][0] - pos_x[s]
                    dy = call_xy[job][1] - pos_y[s]
                    tt = math.sqrt(dx * dx + dy * dy) / speed
                    out_travel[job] = tt
                    if busy_travel:
                        duration = duration + tt
                next_dep[s] = t_cur + duration
            else:
                next_dep[s] = INF
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
                s = _pick(dispatch_u[c], region_members, region_weights, 0, lo, hi, n, any_idle)
            elif mode == MODE_FIXED:
                s = _pick(dispatch_u[c], region_members, region_weights, 0, lo, hi, n, False)
            else:
                probs = callback(r, n)
                s = _pick(dispatch_u[c], region_members, probs, lo, lo, hi, n, False)
            out_assigned[c] = s
            if tail[s] >= 0:
                nxt[tail[s]] = c
            else:
                head[s] = c
            tail[s] = c
            n[s] += 1
            if n[s] == 1:
                duration = service_exp[c] / mu[s]
                if travel:
                    px, py = _sample_point(s, idle_u[c][0], idle_u[c][1], idle_u[c][2],
                                           rect_ptr, rects, rect_cum)
                    dx = call_xy[c][0] - px
                    dy = call_xy[c][1] - py
                    tt = math.sqrt(dx * dx + dy * dy) / speed
                    out_travel[c] = tt
                    if busy_travel:
                        duration = duration + tt
                next_dep[s] = t_cur + duration
            if t_cur > t_warm:
                out_counts[s][r] += 1
            if record_log:
                log_time[n_log] = t_cur
                log_kind[n_log] = 0
                log_region[n_log] = r
                log_server[n_log] = s
                log_q[n_log] = n[s]
                n_log += 1
            c += 1
    busy_time[:] = out_busy
    qlen_area[:] = out_area
    qhist[:] = out_hist
    dispatch_counts[:] = out_counts
    completion[:] = out_completion
    assigned[:] = out_assigned
    travel_time[:] = out_travel
    return n_log
