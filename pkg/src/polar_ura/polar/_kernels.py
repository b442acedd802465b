"""Numba kernels: polar transform and min-sum successive cancellation list decoding.

The decoder works on the natural-order transform ``v = u F^{(x)n}``; callers
undo the bit reversal and puncturing before handing LLRs in.

Per-path memory is organised by tree depth (depth d holds one vector of length
``N >> d``).  Paths share depth arrays by reference and copy on write, so a
fork costs O(1) and the overall work stays O(L N log N).
"""

import numpy as np
from numba import njit


@njit(cache=True)
def polar_transform(u):
    """v = u F^{(x)n} over GF(2), rows of a 2-D uint8 array."""
    v = u.copy()
    rows, n_len = v.shape
    h = 1
    while h < n_len:
        for r in range(rows):
            for start in range(0, n_len, 2 * h):
                for j in range(start, start + h):
                    v[r, j] ^= v[r, j + h]
        h *= 2
    return v


@njit(cache=True)
def _alloc(free, free_top, ref, d):
    free_top[d] -= 1
    s = free[d, free_top[d]]
    ref[d, s] = 1
    return s


@njit(cache=True)
def _release(free, free_top, ref, d, s):
    ref[d, s] -= 1
    if ref[d, s] == 0:
        free[d, free_top[d]] = s
        free_top[d] += 1


@njit(cache=True)
def scl_decode_kernel(llr, frozen, list_size):
    """Min-sum SCL decoding.

    Parameters
    ----------
    llr : float64[N]
        Channel LLRs in transform order (positive favours 0).
    frozen : bool[N]
        Frozen mask over u indices.
    list_size : int

    Returns
    -------
    u_info : uint8[L, K]
        Information bits of every list slot.
    metrics : float64[L]
        Path metrics (inf for unused slots).
    """
    n_len = llr.size
    n = 0
    while (1 << n) < n_len:
        n += 1
    L = list_size
    k_info = 0
    for i in range(n_len):
        if not frozen[i]:
            k_info += 1

    off = np.zeros(n + 1, np.int64)
    total = 0
    for d in range(n + 1):
        off[d] = total
        total += n_len >> d

    lpool = np.empty((L, total), np.float64)
    bpool = np.zeros((L, total), np.uint8)
    lref = np.zeros((n + 1, L), np.int64)
    bref = np.zeros((n + 1, L), np.int64)
    lfree = np.empty((n + 1, L), np.int64)
    bfree = np.empty((n + 1, L), np.int64)
    ltop = np.full(n + 1, L, np.int64)
    btop = np.full(n + 1, L, np.int64)
    for d in range(n + 1):
        for s in range(L):
            lfree[d, s] = L - 1 - s
            bfree[d, s] = L - 1 - s
    lptr = np.zeros((L, n + 1), np.int64)
    bptr = np.zeros((L, n + 1), np.int64)

    active = np.zeros(L, np.bool_)
    pm = np.full(L, np.inf)
    u_info = np.zeros((L, max(k_info, 1)), np.uint8)
    idle = np.empty(L, np.int64)
    idle_top = 0
    for s in range(L - 1, 0, -1):
        idle[idle_top] = s
        idle_top += 1

    active[0] = True
    pm[0] = 0.0
    for d in range(n + 1):
        lptr[0, d] = _alloc(lfree, ltop, lref, d)
        bptr[0, d] = _alloc(bfree, btop, bref, d)

    leaf_llr = np.zeros(L)
    cand = np.empty(2 * L)
    bits = np.zeros(L, np.uint8)
    info_idx = 0

    for phi in range(n_len):
        # LLR pass down to the leaf
        if phi == 0:
            start = 1
        else:
            t = 0
            while ((phi >> t) & 1) == 0:
                t += 1
            start = n - t
        for l in range(L):
            if not active[l]:
                continue
            for d in range(start, n + 1):
                size = n_len >> d
                s = lptr[l, d]
                if lref[d, s] > 1:
                    lref[d, s] -= 1
                    s = _alloc(lfree, ltop, lref, d)
                    lptr[l, d] = s
                o = off[d]
                if d == 1:
                    so = 0
                    srow = -1
                else:
                    srow = lptr[l, d - 1]
                    so = off[d - 1]
                if d == start and phi != 0:
                    bs = bptr[l, d - 1]
                    bo = off[d - 1]
                    for j in range(size):
                        if srow < 0:
                            a = llr[j]
                            b = llr[j + size]
                        else:
                            a = lpool[srow, so + j]
                            b = lpool[srow, so + j + size]
                        if bpool[bs, bo + j]:
                            lpool[s, o + j] = b - a
                        else:
                            lpool[s, o + j] = b + a
                else:
                    for j in range(size):
                        if srow < 0:
                            a = llr[j]
                            b = llr[j + size]
                        else:
                            a = lpool[srow, so + j]
                            b = lpool[srow, so + j + size]
                        aa = abs(a)
                        ab = abs(b)
                        m = aa if aa < ab else ab
                        if (a < 0) != (b < 0):
                            m = -m
                        lpool[s, o + j] = m
            leaf_llr[l] = lpool[lptr[l, n], off[n]]

        # path metrics and decisions
        if frozen[phi]:
            for l in range(L):
                if active[l]:
                    lam = leaf_llr[l]
                    if lam < 0:
                        pm[l] -= lam
                    bits[l] = 0
        else:
            for l in range(L):
                if active[l]:
                    lam = leaf_llr[l]
                    a = abs(lam)
                    cand[2 * l] = pm[l] + (a if lam < 0 else 0.0)
                    cand[2 * l + 1] = pm[l] + (a if lam > 0 else 0.0)
                else:
                    cand[2 * l] = np.inf
                    cand[2 * l + 1] = np.inf
            order = np.argsort(cand, kind="mergesort")
            keep = np.zeros(2 * L, np.bool_)
            n_keep = 0
            for r in range(2 * L):
                c = order[r]
                if cand[c] == np.inf or n_keep >= L:
                    break
                keep[c] = True
                n_keep += 1
            # kill first so their slots can be reused by forks
            for l in range(L):
                if active[l] and not keep[2 * l] and not keep[2 * l + 1]:
                    active[l] = False
                    pm[l] = np.inf
                    for d in range(n + 1):
                        _release(lfree, ltop, lref, d, lptr[l, d])
                        _release(bfree, btop, bref, d, bptr[l, d])
                    idle[idle_top] = l
                    idle_top += 1
            new_metric = np.empty(L)
            was_active = active.copy()
            for l in range(L):
                new_metric[l] = pm[l]
            for l in range(L):
                if not was_active[l]:
                    continue
                k0 = keep[2 * l]
                k1 = keep[2 * l + 1]
                if k0 and k1:
                    idle_top -= 1
                    l2 = idle[idle_top]
                    active[l2] = True
                    for d in range(n + 1):
                        lptr[l2, d] = lptr[l, d]
                        lref[d, lptr[l, d]] += 1
                        bptr[l2, d] = bptr[l, d]
                        bref[d, bptr[l, d]] += 1
                    for q in range(info_idx):
                        u_info[l2, q] = u_info[l, q]
                    bits[l] = 0
                    bits[l2] = 1
                    new_metric[l] = cand[2 * l]
                    new_metric[l2] = cand[2 * l + 1]
                elif k0:
                    bits[l] = 0
                    new_metric[l] = cand[2 * l]
                else:
                    bits[l] = 1
                    new_metric[l] = cand[2 * l + 1]
            for l in range(L):
                pm[l] = new_metric[l]
                if active[l]:
                    u_info[l, info_idx] = bits[l]
            info_idx += 1

        # partial-sum propagation
        for l in range(L):
            if not active[l]:
                continue
            d = n
            s = bptr[l, d]
            if bref[d, s] > 1:
                bref[d, s] -= 1
                s = _alloc(bfree, btop, bref, d)
                bptr[l, d] = s
            bpool[s, off[d]] = bits[l]
            while d >= 1:
                size = n_len >> d
                node = phi >> (n - d)
                ps = bptr[l, d - 1]
                if bref[d - 1, ps] > 1:
                    bref[d - 1, ps] -= 1
                    ns = _alloc(bfree, btop, bref, d - 1)
                    po = off[d - 1]
                    for j in range(2 * size):
                        bpool[ns, po + j] = bpool[ps, po + j]
                    ps = ns
                    bptr[l, d - 1] = ps
                cs = bptr[l, d]
                co = off[d]
                po = off[d - 1]
                if (node & 1) == 0:
                    for j in range(size):
                        bpool[ps, po + j] = bpool[cs, co + j]
                    break
                for j in range(size):
                    bpool[ps, po + j] ^= bpool[cs, co + j]
                    bpool[ps, po + size + j] = bpool[cs, co + j]
                d -= 1

    if k_info == 0:
        return np.zeros((L, 0), np.uint8), pm
    return u_info, pm
