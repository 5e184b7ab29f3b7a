"""Hot inner loops.

Every kernel here is decorated with :func:`byzcount._accel.njit`; with numba
disabled they run as plain Python over numpy arrays.  The exhaustive subset
scan additionally has a vectorized numpy implementation because the
un-jitted Gray-code loop is far too slow past ~16 vertices.
"""
import numpy as np

from ._accel import USE_NUMBA, njit


# ---------------------------------------------------------------------------
# exhaustive subset expansion
# ---------------------------------------------------------------------------

@njit
def _subset_scan_gray(k, m, indptr, indices, max_size):
    # Out(S) is tracked with per-vertex hit counters while the Gray code
    # flips one inner vertex at a time.
    cnt = np.zeros(m, dtype=np.int64)
    in_s = np.zeros(k, dtype=np.uint8)
    out = 0
    size = 0
    best_out = -1
    best_size = 0
    best_mask = np.int64(0)
    total = np.int64(1) << k
    for g in range(1, total):
        gray = g ^ (g >> 1)
        # index of the flipped bit = trailing zeros of g
        v = 0
        t = g
        while (t & 1) == 0:
            t >>= 1
            v += 1
        if in_s[v] == 0:
            in_s[v] = 1
            size += 1
            if cnt[v] > 0:
                out -= 1
            for e in range(indptr[v], indptr[v + 1]):
                x = indices[e]
                cnt[x] += 1
                if cnt[x] == 1:
                    if x >= k or in_s[x] == 0:
                        out += 1
        else:
            in_s[v] = 0
            size -= 1
            for e in range(indptr[v], indptr[v + 1]):
                x = indices[e]
                cnt[x] -= 1
                if cnt[x] == 0:
                    if x >= k or in_s[x] == 0:
                        out -= 1
            if cnt[v] > 0:
                out += 1
        if size > max_size:
            continue
        if best_out < 0:
            best_out = out
            best_size = size
            best_mask = gray
            continue
        lhs = out * best_size
        rhs = best_out * size
        if lhs < rhs or (lhs == rhs and (size < best_size or (size == best_size and gray < best_mask))):
            best_out = out
            best_size = size
            best_mask = gray
    return best_out, best_size, best_mask


def _pick_best(out, size, mask):
    """Index minimising (out/size, size, mask) over parallel arrays."""
    ratio = out / size
    order = np.lexsort((mask, size, ratio))
    return order[0]


def _subset_scan_numpy(k, m, indptr, indices, max_size, lo_bits=16):
    words = (m + 63) // 64
    nbr = np.zeros((k, words), dtype=np.uint64)
    for v in range(k):
        for x in indices[indptr[v]:indptr[v + 1]]:
            nbr[v, x // 64] |= np.uint64(1) << np.uint64(x % 64)
    lo = min(k, lo_bits)
    hi = k - lo

    def doubling(first, count):
        union = np.zeros((1 << count, words), dtype=np.uint64)
        own = np.zeros((1 << count, words), dtype=np.uint64)
        for b in range(count):
            v = first + b
            half = 1 << b
            union[half:2 * half] = union[:half] | nbr[v]
            own[half:2 * half] = own[:half]
            own[half:2 * half, v // 64] |= np.uint64(1) << np.uint64(v % 64)
        return union, own

    lo_union, lo_own = doubling(0, lo)
    hi_union, hi_own = doubling(lo, hi)
    lo_size = np.bitwise_count(np.arange(1 << lo, dtype=np.uint64)).astype(np.int64)
    lo_mask = np.arange(1 << lo, dtype=np.int64)

    best = None
    for h in range(1 << hi):
        size = lo_size + int(bin(h).count("1"))
        union = lo_union | hi_union[h]
        own = lo_own | hi_own[h]
        out = np.bitwise_count(union & ~own).sum(axis=1).astype(np.int64)
        keep = (size > 0) & (size <= max_size)
        if not keep.any():
            continue
        o, s, mk = out[keep], size[keep], lo_mask[keep] | (np.int64(h) << lo)
        j = _pick_best(o, s, mk)
        cand = (int(o[j]), int(s[j]), int(mk[j]))
        if best is None:
            best = cand
        else:
            lhs, rhs = cand[0] * best[1], best[0] * cand[1]
            if lhs < rhs or (lhs == rhs and (cand[1], cand[2]) < (best[1], best[2])):
                best = cand
    if best is None:
        return -1, 0, 0
    return best


def subset_scan(k, m, indptr, indices, max_size):
    """Minimise |Out(S)|/|S| over nonempty S within the first ``k`` vertices.

    ``indptr``/``indices`` give, for each of the ``k`` inner vertices, its
    distinct neighbours as indices in ``[0, m)``; vertices ``>= k`` are
    outer and never part of S.  Only subsets with ``|S| <= max_size`` count.
    Ties go to the smaller subset, then the smaller bitmask.

    Returns ``(out, size, mask)``; ``out == -1`` when no subset qualifies.
    """
    if k == 0 or max_size <= 0:
        return -1, 0, 0
    indptr = np.asarray(indptr, dtype=np.int64)
    indices = np.asarray(indices, dtype=np.int64)
    if USE_NUMBA:
        o, s, mk = _subset_scan_gray(k, m, indptr, indices, max_size)
        return int(o), int(s), int(mk)
    return _subset_scan_numpy(k, m, indptr, indices, max_size)


# ---------------------------------------------------------------------------
# breadth-first search
# ---------------------------------------------------------------------------

@njit
def bfs_distances(n, indptr, indices, sources, max_depth):
    dist = np.full(n, -1, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    head = 0
    tail = 0
    for s in sources:
        if dist[s] < 0:
            dist[s] = 0
            queue[tail] = s
            tail += 1
    while head < tail:
        v = queue[head]
        head += 1
        if max_depth >= 0 and dist[v] >= max_depth:
            continue
        for e in range(indptr[v], indptr[v + 1]):
            x = indices[e]
            if dist[x] < 0:
                dist[x] = dist[v] + 1
                queue[tail] = x
                tail += 1
    return dist


@njit
def eccentricities(n, indptr, indices):
    ecc = np.zeros(n, dtype=np.int64)
    src = np.zeros(1, dtype=np.int64)
    for v in range(n):
        src[0] = v
        dist = bfs_distances(n, indptr, indices, src, -1)
        worst = 0
        for x in range(n):
            if dist[x] < 0:
                return ecc, False
            if dist[x] > worst:
                worst = dist[x]
        ecc[v] = worst
    return ecc, True


@njit
def tree_like_flags(n, indptr, indices, d, r):
    """Per-vertex locally-tree-like flag at radius ``r`` (multiplicity counts)."""
    flags = np.ones(n, dtype=np.uint8)
    if r <= 0:
        return flags
    stamp = np.full(n, -1, dtype=np.int64)
    depth = np.zeros(n, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    for w in range(n):
        head = 0
        tail = 1
        queue[0] = w
        stamp[w] = w
        depth[w] = 0
        ok = True
        while head < tail:
            v = queue[head]
            head += 1
            if depth[v] >= r:
                continue
            if indptr[v + 1] - indptr[v] != d:
                ok = False
                break
            for e in range(indptr[v], indptr[v + 1]):
                x = indices[e]
                if stamp[x] != w:
                    stamp[x] = w
                    depth[x] = depth[v] + 1
                    queue[tail] = x
                    tail += 1
        if ok:
            # induced edge count with multiplicity must be |ball| - 1
            twice = 0
            for q in range(tail):
                v = queue[q]
                for e in range(indptr[v], indptr[v + 1]):
                    if stamp[indices[e]] == w:
                        twice += 1
            ok = twice == 2 * (tail - 1)
        if not ok:
            flags[w] = 0
    return flags
