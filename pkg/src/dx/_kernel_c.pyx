# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled fact-matching kernel.

Typed port of dx._kernel.find_hom; must return bit-identical answers.
See the pure-Python module for the algorithm description.
"""


def find_hom(pattern, target, nvars, injective=False, allowed=None):
    cdef dict index = {}
    cdef list lst
    for rel, args in target:
        lst = index.get(rel)
        if lst is None:
            index[rel] = [args]
        else:
            lst.append(args)
    cdef Py_ssize_t n = len(pattern)
    cdef list cands = []
    cdef list pat_args = []
    for rel, args in pattern:
        lst = index.get(rel)
        if not lst:
            return None
        cands.append(lst)
        pat_args.append(args)
    if n == 0:
        return [-1] * nvars

    cdef list asn = [-1] * nvars
    cdef set used = set()
    cdef list pos = [0] * n
    cdef list trail = [()] * n
    cdef bint inj = bool(injective)
    cdef Py_ssize_t i = 0, ci, j, k, nc
    cdef long a, c, cur, v
    cdef tuple args_t, cand
    cdef list bound
    cdef bint ok, advanced

    while True:
        lst = cands[i]
        args_t = pat_args[i]
        k = len(args_t)
        nc = len(lst)
        ci = pos[i]
        advanced = False
        while ci < nc:
            cand = lst[ci]
            ci += 1
            bound = []
            ok = True
            for j in range(k):
                a = args_t[j]
                c = cand[j]
                if a >= 0:
                    if a != c:
                        ok = False
                        break
                else:
                    v = -1 - a
                    cur = asn[v]
                    if cur < 0:
                        if allowed is not None and c not in allowed:
                            ok = False
                            break
                        if inj and c in used:
                            ok = False
                            break
                        asn[v] = c
                        if inj:
                            used.add(c)
                        bound.append(v)
                    elif cur != c:
                        ok = False
                        break
            if not ok:
                for v in bound:
                    if inj:
                        used.discard(asn[v])
                    asn[v] = -1
                continue
            pos[i] = ci
            trail[i] = tuple(bound)
            advanced = True
            break
        if advanced:
            i += 1
            if i == n:
                return list(asn)
            pos[i] = 0
            continue
        i -= 1
        if i < 0:
            return None
        for v in trail[i]:
            if inj:
                used.discard(asn[v])
            asn[v] = -1
