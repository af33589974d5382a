# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled event loops.  Semantics mirror ``_pykernels`` line for line;
see that module for the argument conventions."""
import numpy as np
cimport numpy as cnp
from libc.math cimport ceil

cnp.import_array()

cdef enum:
    STATUS_OK = 0
    STATUS_NEED_UNIFORMS = 1


def rps_kernel(const double[::1] arr_time, const long long[::1] arr_node,
               const long long[::1] by_node, const long long[::1] node_start,
               const long long[::1] nfrag, const double[::1] frag_service,
               const double[::1] uniforms, long long n_nodes, long long n_must,
               double[::1] delivery, long long[::1] arrived, long long[::1] head):
    cdef Py_ssize_t n_pkts = arr_time.shape[0]
    cdef Py_ssize_t n_unif = uniforms.shape[0]
    cdef long long[::1] rem = np.zeros(n_nodes, dtype=np.int64)
    cdef long long[::1] nonempty = np.zeros(n_nodes, dtype=np.int64)
    cdef double t = 0.0
    cdef Py_ssize_t k = 0, u = 0
    cdef long long remaining = n_must, cnt, i, j
    cdef int status = STATUS_OK
    while remaining > 0:
        while k < n_pkts and arr_time[k] <= t:
            arrived[arr_node[k]] += 1
            k += 1
        cnt = 0
        for i in range(n_nodes):
            if head[i] < arrived[i]:
                nonempty[cnt] = i
                cnt += 1
        if cnt == 0:
            if k >= n_pkts:
                break
            t = arr_time[k]
            continue
        if u >= n_unif:
            status = STATUS_NEED_UNIFORMS
            break
        i = nonempty[<long long>(uniforms[u] * cnt)]
        u += 1
        j = by_node[node_start[i] + head[i]]
        if rem[i] == 0:
            rem[i] = nfrag[j]
        t = t + frag_service[j]
        rem[i] -= 1
        if rem[i] == 0:
            delivery[j] = t
            head[i] += 1
            if j < n_must:
                remaining -= 1
    return np.array([t, k, u, status], dtype=float)


cdef inline long long _n_fragments(double length, double mtu) nogil:
    cdef long long nf = <long long>ceil(length / mtu)
    return nf if nf > 1 else 1


cdef inline double _fragment_bytes(double length, double mtu, long long nf, long long rem) nogil:
    if rem == 1:
        return length - (nf - 1) * mtu
    return mtu


def dcf_kernel(const double[::1] arr_time, const long long[::1] arr_node,
               const long long[::1] by_node, const long long[::1] node_start,
               const double[::1] pkt_bytes, double mtu, const double[::1] uniforms,
               long long n_nodes, long long n_must, long long W, long long m,
               double slot, double sifs, double difs, double ack, double header_bits,
               double rate, double coll_time, int overhead,
               double[::1] delivery, long long[::1] arrived, long long[::1] head,
               long long[::1] counters):
    cdef Py_ssize_t n_pkts = arr_time.shape[0]
    cdef Py_ssize_t n_unif = uniforms.shape[0]
    cdef long long[::1] rem = np.zeros(n_nodes, dtype=np.int64)
    cdef long long[::1] stage = np.zeros(n_nodes, dtype=np.int64)
    cdef long long[::1] counter = np.zeros(n_nodes, dtype=np.int64)
    cdef long long[::1] active = np.zeros(n_nodes, dtype=np.int64)
    cdef double t = 0.0, air, done, maxbytes, fb
    cdef Py_ssize_t k = 0, u = 0
    cdef long long remaining = n_must, i, j, nact, cmin, jump, js, ntx, last_tx, nf
    cdef int status = STATUS_OK
    cdef long long successes = 0, collisions = 0, idle = 0
    while remaining > 0:
        while k < n_pkts and arr_time[k] <= t:
            i = arr_node[k]
            arrived[i] += 1
            k += 1
            if active[i] == 0:
                if u >= n_unif:
                    status = STATUS_NEED_UNIFORMS
                    break
                active[i] = 1
                stage[i] = 0
                counter[i] = <long long>(uniforms[u] * W)
                u += 1
        if status != STATUS_OK:
            break
        nact = 0
        cmin = -1
        for i in range(n_nodes):
            if active[i]:
                nact += 1
                if cmin < 0 or counter[i] < cmin:
                    cmin = counter[i]
        if nact == 0:
            if k >= n_pkts:
                break
            t = arr_time[k]
            continue
        if cmin > 0:
            jump = cmin
            if k < n_pkts:
                js = <long long>ceil((arr_time[k] - t) / slot)
                if js < 1:
                    js = 1
                if js < jump:
                    jump = js
            for i in range(n_nodes):
                if active[i]:
                    counter[i] -= jump
            t = t + jump * slot
            idle += jump
            continue
        ntx = 0
        last_tx = -1
        maxbytes = 0.0
        for i in range(n_nodes):
            if active[i] and counter[i] == 0:
                ntx += 1
                last_tx = i
                j = by_node[node_start[i] + head[i]]
                nf = _n_fragments(pkt_bytes[j], mtu)
                if rem[i] == 0:
                    rem[i] = nf
                fb = _fragment_bytes(pkt_bytes[j], mtu, nf, rem[i])
                if fb > maxbytes:
                    maxbytes = fb
        if ntx == 1:
            i = last_tx
            j = by_node[node_start[i] + head[i]]
            air = (header_bits + 8.0 * maxbytes) / rate
            if overhead:
                done = t + air + sifs + ack
                t = done + difs
            else:
                done = t + air
                t = done
            successes += 1
            rem[i] -= 1
            stage[i] = 0
            if rem[i] == 0:
                delivery[j] = done
                head[i] += 1
                if j < n_must:
                    remaining -= 1
            if head[i] < arrived[i]:
                if u >= n_unif:
                    status = STATUS_NEED_UNIFORMS
                    break
                counter[i] = <long long>(uniforms[u] * W)
                u += 1
            else:
                active[i] = 0
        else:
            if coll_time > 0:
                t = t + coll_time
            else:
                air = (header_bits + 8.0 * maxbytes) / rate
                if overhead:
                    t = t + air + difs
                else:
                    t = t + air
            collisions += 1
            for i in range(n_nodes):
                if active[i] and counter[i] == 0:
                    if stage[i] < m:
                        stage[i] += 1
                    if u >= n_unif:
                        status = STATUS_NEED_UNIFORMS
                        break
                    counter[i] = <long long>(uniforms[u] * (W << stage[i]))
                    u += 1
            if status != STATUS_OK:
                break
    counters[0] = successes
    counters[1] = collisions
    counters[2] = idle
    return np.array([t, k, u, status], dtype=float)


def saturated_kernel(long long n_nodes, double frame_bytes, double horizon,
                     const double[::1] uniforms, long long W, long long m, double slot,
                     double sifs, double difs, double ack, double header_bits, double rate,
                     double coll_time, int overhead, long long[::1] counters):
    cdef Py_ssize_t n_unif = uniforms.shape[0]
    cdef long long[::1] stage = np.zeros(n_nodes, dtype=np.int64)
    cdef long long[::1] counter = np.zeros(n_nodes, dtype=np.int64)
    cdef Py_ssize_t u = 0
    cdef int status = STATUS_OK
    cdef long long i, cmin, ntx
    cdef double air, t_succ, t_coll, t = 0.0
    cdef long long successes = 0, collisions = 0, idle = 0
    if n_unif < n_nodes:
        return np.array([0.0, 0, 0, STATUS_NEED_UNIFORMS], dtype=float)
    for i in range(n_nodes):
        counter[i] = <long long>(uniforms[u] * W)
        u += 1
    air = (header_bits + 8.0 * frame_bytes) / rate
    if overhead:
        t_succ = air + sifs + ack + difs
        t_coll = air + difs
    else:
        t_succ = air
        t_coll = air
    if coll_time > 0:
        t_coll = coll_time
    while t < horizon:
        cmin = counter[0]
        for i in range(1, n_nodes):
            if counter[i] < cmin:
                cmin = counter[i]
        if cmin > 0:
            for i in range(n_nodes):
                counter[i] -= cmin
            t = t + cmin * slot
            idle += cmin
            continue
        ntx = 0
        for i in range(n_nodes):
            if counter[i] == 0:
                ntx += 1
        if ntx == 1:
            t = t + t_succ
            successes += 1
            for i in range(n_nodes):
                if counter[i] == 0:
                    if u >= n_unif:
                        status = STATUS_NEED_UNIFORMS
                        break
                    stage[i] = 0
                    counter[i] = <long long>(uniforms[u] * W)
                    u += 1
        else:
            t = t + t_coll
            collisions += 1
            for i in range(n_nodes):
                if counter[i] == 0:
                    if stage[i] < m:
                        stage[i] += 1
                    if u >= n_unif:
                        status = STATUS_NEED_UNIFORMS
                        break
                    counter[i] = <long long>(uniforms[u] * (W << stage[i]))
                    u += 1
        if status != STATUS_OK:
            break
    counters[0] = successes
    counters[1] = collisions
    counters[2] = idle
    return np.array([t, 0, u, status], dtype=float)
