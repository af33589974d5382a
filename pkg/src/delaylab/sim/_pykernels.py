"""Pure-Python event loops.  Reference semantics for ``_ckernels.pyx``.

Both implementations must stay operation-for-operation identical so that
the two backends give bit-identical results for the same inputs.

Shared argument conventions
---------------------------
arr_time, arr_node : packet arrival epochs (sorted) and owning node
by_node, node_start : packet indices grouped per node in arrival order;
    node i owns ``by_node[node_start[i]:node_start[i + 1]]``
n_must : packets ``0 .. n_must - 1`` must be delivered before the loop stops
uniforms : pre-drawn U[0, 1) variates, consumed strictly in order

Returned ``state`` is ``[end_time, admitted, uniforms_used, status]`` where
status 1 means the uniform buffer ran dry and the caller must retry with a
larger one.
"""
import math

import numpy as np

STATUS_OK = 0
STATUS_NEED_UNIFORMS = 1


def _lists(*arrays):
    return [a.tolist() if isinstance(a, np.ndarray) else list(a) for a in arrays]


def rps_kernel(arr_time, arr_node, by_node, node_start, nfrag, frag_service,
               uniforms, n_nodes, n_must, delivery, arrived, head):
    """1-limited polling: serve one fragment of a uniformly chosen nonempty queue."""
    out_delivery, out_arrived, out_head = delivery, arrived, head
    arr_time, arr_node, by_node, node_start, nfrag, frag_service, uniforms = _lists(
        arr_time, arr_node, by_node, node_start, nfrag, frag_service, uniforms)
    delivery, arrived, head = {}, _lists(arrived)[0], _lists(head)[0]
    n_nodes, n_must = int(n_nodes), int(n_must)
    n_pkts = len(arr_time)
    n_unif = len(uniforms)
    rem = [0] * n_nodes
    nonempty = [0] * n_nodes
    t = 0.0
    k = 0
    u = 0
    remaining = n_must
    status = STATUS_OK
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
        i = nonempty[int(uniforms[u] * cnt)]
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
    _write_back(out_delivery, delivery, out_arrived, arrived, out_head, head)
    return np.array([t, k, u, status], dtype=float)


def _write_back(out_delivery, delivery, out_arrived, arrived, out_head, head):
    if delivery:
        idx = np.fromiter(delivery.keys(), dtype=np.int64, count=len(delivery))
        out_delivery[idx] = np.fromiter(delivery.values(), dtype=float, count=len(delivery))
    out_arrived[:] = arrived
    out_head[:] = head


def _n_fragments(length, mtu):
    nf = int(math.ceil(length / mtu))
    return nf if nf > 1 else 1


def _fragment_bytes(length, mtu, nf, rem):
    # rem counts fragments still to send, including this one
    if rem == 1:
        return length - (nf - 1) * mtu
    return mtu


def dcf_kernel(arr_time, arr_node, by_node, node_start, pkt_bytes, mtu, uniforms,
               n_nodes, n_must, W, m, slot, sifs, difs, ack, header_bits, rate,
               coll_time, overhead, delivery, arrived, head, counters):
    """Slotted DCF with binary exponential backoff and infinite retries.

    ``counters`` receives [successes, collisions, idle_slots].
    """
    out_delivery, out_arrived, out_head = delivery, arrived, head
    arr_time, arr_node, by_node, node_start, pkt_bytes, uniforms = _lists(
        arr_time, arr_node, by_node, node_start, pkt_bytes, uniforms)
    delivery, arrived, head = {}, _lists(arrived)[0], _lists(head)[0]
    W, m, n_nodes, n_must = int(W), int(m), int(n_nodes), int(n_must)
    n_pkts = len(arr_time)
    n_unif = len(uniforms)
    rem = [0] * n_nodes
    stage = [0] * n_nodes
    counter = [0] * n_nodes
    active = [0] * n_nodes
    t = 0.0
    k = 0
    u = 0
    remaining = n_must
    status = STATUS_OK
    successes = 0
    collisions = 0
    idle = 0
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
                counter[i] = int(uniforms[u] * W)
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
                js = int(math.ceil((arr_time[k] - t) / slot))
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
                counter[i] = int(uniforms[u] * W)
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
                    counter[i] = int(uniforms[u] * (W << stage[i]))
                    u += 1
            if status != STATUS_OK:
                break
    counters[0] = successes
    counters[1] = collisions
    counters[2] = idle
    _write_back(out_delivery, delivery, out_arrived, arrived, out_head, head)
    return np.array([t, k, u, status], dtype=float)


def saturated_kernel(n_nodes, frame_bytes, horizon, uniforms, W, m, slot, sifs, difs,
                     ack, header_bits, rate, coll_time, overhead, counters):
    """Every node always has a ``frame_bytes`` frame queued; run until
    ``horizon`` seconds.  ``counters`` receives [successes, collisions,
    idle_slots]."""
    uniforms = _lists(uniforms)[0]
    W, m, n_nodes = int(W), int(m), int(n_nodes)
    n_unif = len(uniforms)
    stage = [0] * n_nodes
    counter = [0] * n_nodes
    u = 0
    status = STATUS_OK
    if n_unif < n_nodes:
        return np.array([0.0, 0, 0, STATUS_NEED_UNIFORMS], dtype=float)
    for i in range(n_nodes):
        counter[i] = int(uniforms[u] * W)
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
    t = 0.0
    successes = 0
    collisions = 0
    idle = 0
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
                    counter[i] = int(uniforms[u] * W)
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
                    counter[i] = int(uniforms[u] * (W << stage[i]))
                    u += 1
        if status != STATUS_OK:
            break
    counters[0] = successes
    counters[1] = collisions
    counters[2] = idle
    return np.array([t, 0, u, status], dtype=float)
