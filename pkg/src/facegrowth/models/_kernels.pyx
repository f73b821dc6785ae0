# Compiled tree, neighbour and SMO kernels.
#
# Every routine mirrors _kernels_py.py operation for operation (same sort
# order, same accumulation order, same tie rules) so both backends return
# identical results; tests/test_backends.py holds them to that.
import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t, int64_t
from libc.stdlib cimport malloc, free, qsort
from libc.math cimport INFINITY

cnp.import_array()

ctypedef cnp.float64_t f64
ctypedef cnp.int64_t i64

cdef extern from *:
    """
    #include <stdint.h>
    typedef struct { double x; int64_t i; } fg_pair;

    static int fg_pair_cmp(const void *a, const void *b) {
        const fg_pair *p = (const fg_pair *)a, *q = (const fg_pair *)b;
        if (p->x < q->x) return -1;
        if (p->x > q->x) return 1;
        return (p->i > q->i) - (p->i < q->i);
    }

    static inline uint64_t fg_splitmix(uint64_t *s) {
        uint64_t z;
        *s += 0x9E3779B97F4A7C15ULL;
        z = *s;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    static inline uint64_t fg_node_state(uint64_t seed, uint64_t node) {
        return seed ^ (node * 0xD1B54A32D192ED03ULL);
    }
    """
    ctypedef struct fg_pair:
        double x
        int64_t i
    int fg_pair_cmp(const void *a, const void *b) nogil
    uint64_t fg_splitmix(uint64_t *s) nogil
    uint64_t fg_node_state(uint64_t seed, uint64_t node) nogil


BACKEND = "compiled"


cdef inline double _midpoint(double a, double b) nogil:
    cdef double t = (a + b) * 0.5
    if t >= b:
        t = a
    return t


def build_class_tree(const f64[:, ::1] X, const i64[::1] y, const f64[::1] w, int n_classes,
                     int max_features, uint64_t seed, const i64[:, ::1] order):
    """Unpruned Gini CART. ``w`` holds integer case weights (0 = not in sample).

    ``order[f]`` is the stable argsort of column f over all rows.
    Returns (feature, threshold, left, right, value).
    """
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1]
    cdef Py_ssize_t K = n_classes
    cdef Py_ssize_t m = 0, r
    for r in range(n):
        if w[r] > 0:
            m += 1
    if m == 0:
        raise ValueError("empty sample")
    cdef Py_ssize_t cap = 2 * m + 1
    feature_a = np.full(cap, -1, dtype=np.int64)
    threshold_a = np.zeros(cap, dtype=np.float64)
    left_a = np.full(cap, -1, dtype=np.int64)
    right_a = np.full(cap, -1, dtype=np.int64)
    value_a = np.zeros((cap, K), dtype=np.float64)
    cdef i64[::1] feature = feature_a
    cdef f64[::1] threshold = threshold_a
    cdef i64[::1] left = left_a
    cdef i64[::1] right = right_a
    cdef f64[:, ::1] value = value_a

    cdef int64_t *idx = <int64_t *>malloc(m * sizeof(int64_t))
    cdef int64_t *tmp = <int64_t *>malloc(m * sizeof(int64_t))
    cdef fg_pair *pairs = <fg_pair *>malloc(m * sizeof(fg_pair))
    cdef int64_t *mark = <int64_t *>malloc(n * sizeof(int64_t))
    cdef int64_t *perm = <int64_t *>malloc(d * sizeof(int64_t))
    cdef int64_t *stack = <int64_t *>malloc(3 * cap * sizeof(int64_t))
    cdef double *tot = <double *>malloc(K * sizeof(double))
    cdef double *L = <double *>malloc(K * sizeof(double))
    if not (idx and tmp and pairs and mark and perm and stack and tot and L):
        raise MemoryError()

    cdef Py_ssize_t j = 0, k, i, f, jf, cnt, start, end, node, sp = 0, n_nodes = 1, nl, nr
    cdef Py_ssize_t nonzero, visited, best_f, mm
    cdef double W, WL, WR, sL, sR, score, best_score, best_thr, xi, xn, rk
    cdef uint64_t state, rnd
    cdef bint constant, use_scan, use_all = max_features >= d

    try:
        with nogil:
            for r in range(n):
                mark[r] = -1
                if w[r] > 0:
                    idx[j] = r
                    j += 1
            stack[0] = 0; stack[1] = 0; stack[2] = m
            sp = 1
            while sp > 0:
                sp -= 1
                node = stack[3 * sp]; start = stack[3 * sp + 1]; end = stack[3 * sp + 2]
                mm = end - start
                for k in range(K):
                    tot[k] = 0.0
                W = 0.0
                for i in range(start, end):
                    r = idx[i]
                    tot[y[r]] += w[r]
                    W += w[r]
                nonzero = 0
                for k in range(K):
                    value[node, k] = tot[k]
                    if tot[k] > 0:
                        nonzero += 1
                if nonzero <= 1 or mm < 2:
                    continue

                best_score = -INFINITY
                best_f = -1
                best_thr = 0.0
                for f in range(d):
                    perm[f] = f
                use_scan = mm * 16 > n
                if use_scan:
                    for i in range(start, end):
                        mark[idx[i]] = node
                state = fg_node_state(seed, <uint64_t>node)
                visited = 0
                jf = 0
                while jf < d:
                    if not use_all:
                        if visited >= max_features:
                            break
                        rnd = fg_splitmix(&state) % <uint64_t>(d - jf)
                        f = perm[jf + rnd]
                        perm[jf + rnd] = perm[jf]
                        perm[jf] = f
                    else:
                        f = jf
                    jf += 1

                    # gather node rows of feature f in (value, index) order
                    if use_scan:
                        cnt = 0
                        for i in range(n):
                            r = order[f, i]
                            if mark[r] == node:
                                pairs[cnt].x = X[r, f]
                                pairs[cnt].i = r
                                cnt += 1
                    else:
                        for i in range(start, end):
                            r = idx[i]
                            pairs[i - start].x = X[r, f]
                            pairs[i - start].i = r
                        qsort(pairs, mm, sizeof(fg_pair), fg_pair_cmp)
                    constant = pairs[0].x == pairs[mm - 1].x
                    if constant:
                        continue
                    visited += 1

                    for k in range(K):
                        L[k] = 0.0
                    WL = 0.0
                    for i in range(mm - 1):
                        r = pairs[i].i
                        L[y[r]] += w[r]
                        WL += w[r]
                        xi = pairs[i].x
                        xn = pairs[i + 1].x
                        if xn > xi:
                            WR = W - WL
                            sL = 0.0
                            sR = 0.0
                            for k in range(K):
                                sL = sL + L[k] * L[k]
                                rk = tot[k] - L[k]
                                sR = sR + rk * rk
                            score = sL / WL + sR / WR
                            if score > best_score:
                                best_score = score
                                best_f = f
                                best_thr = _midpoint(xi, xn)

                if best_f < 0:
                    continue
                # stable partition of the node rows
                nl = 0
                for i in range(start, end):
                    r = idx[i]
                    if X[r, best_f] <= best_thr:
                        idx[start + nl] = r
                        nl += 1
                    else:
                        tmp[i - start - nl] = r
                nr = mm - nl
                for i in range(nr):
                    idx[start + nl + i] = tmp[i]
                feature[node] = best_f
                threshold[node] = best_thr
                left[node] = n_nodes
                right[node] = n_nodes + 1
                # right pushed first so the left subtree is expanded first
                stack[3 * sp] = n_nodes + 1; stack[3 * sp + 1] = start + nl; stack[3 * sp + 2] = end
                sp += 1
                stack[3 * sp] = n_nodes; stack[3 * sp + 1] = start; stack[3 * sp + 2] = start + nl
                sp += 1
                n_nodes += 2
    finally:
        free(idx); free(tmp); free(pairs); free(mark); free(perm); free(stack); free(tot); free(L)

    return (feature_a[:n_nodes].copy(), threshold_a[:n_nodes].copy(), left_a[:n_nodes].copy(),
            right_a[:n_nodes].copy(), value_a[:n_nodes].copy())


def build_boost_tree(const f64[:, ::1] X, const i64[:, ::1] order, const f64[::1] g, const f64[::1] h,
                     int max_depth, double reg_lambda, double min_child_weight, double gamma,
                     double min_split_gain):
    """Level-wise exact-greedy regression tree on gradient statistics.

    Returns (feature, threshold, left, right, G, H, row_leaf).
    """
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1]
    cdef Py_ssize_t cap = (<Py_ssize_t>1) << (max_depth + 1)
    feature_a = np.full(cap, -1, dtype=np.int64)
    threshold_a = np.zeros(cap, dtype=np.float64)
    left_a = np.full(cap, -1, dtype=np.int64)
    right_a = np.full(cap, -1, dtype=np.int64)
    G_a = np.zeros(cap, dtype=np.float64)
    H_a = np.zeros(cap, dtype=np.float64)
    pos_a = np.zeros(n, dtype=np.int64)
    cdef i64[::1] feature = feature_a
    cdef f64[::1] threshold = threshold_a
    cdef i64[::1] left = left_a
    cdef i64[::1] right = right_a
    cdef f64[::1] G = G_a
    cdef f64[::1] H = H_a
    cdef i64[::1] pos = pos_a

    cdef double *GL = <double *>malloc(cap * sizeof(double))
    cdef double *HL = <double *>malloc(cap * sizeof(double))
    cdef double *last = <double *>malloc(cap * sizeof(double))
    cdef char *has_last = <char *>malloc(cap)
    cdef char *active = <char *>malloc(cap)
    cdef double *best_gain = <double *>malloc(cap * sizeof(double))
    cdef double *best_thr = <double *>malloc(cap * sizeof(double))
    cdef double *best_GL = <double *>malloc(cap * sizeof(double))
    cdef double *best_HL = <double *>malloc(cap * sizeof(double))
    cdef int64_t *best_f = <int64_t *>malloc(cap * sizeof(int64_t))
    cdef int64_t *level = <int64_t *>malloc(cap * sizeof(int64_t))
    cdef int64_t *next_level = <int64_t *>malloc(cap * sizeof(int64_t))
    if not (GL and HL and last and has_last and active and best_gain and best_thr and best_GL
            and best_HL and best_f and level and next_level):
        raise MemoryError()

    cdef Py_ssize_t r, i, f, t, nd, depth, n_level, n_next, n_nodes = 1
    cdef double x, GR, HR, gain, Gt = 0.0, Ht = 0.0
    try:
        with nogil:
            for r in range(n):
                Gt += g[r]
                Ht += h[r]
            G[0] = Gt
            H[0] = Ht
            for t in range(cap):
                active[t] = 0
            level[0] = 0
            n_level = 1
            for depth in range(max_depth):
                if n_level == 0:
                    break
                for t in range(n_level):
                    nd = level[t]
                    active[nd] = 1
                    best_gain[nd] = min_split_gain
                    best_f[nd] = -1
                for f in range(d):
                    for t in range(n_level):
                        nd = level[t]
                        GL[nd] = 0.0
                        HL[nd] = 0.0
                        has_last[nd] = 0
                    for i in range(n):
                        r = order[f, i]
                        nd = pos[r]
                        if not active[nd]:
                            continue
                        x = X[r, f]
                        if has_last[nd] and x > last[nd]:
                            GR = G[nd] - GL[nd]
                            HR = H[nd] - HL[nd]
                            if HL[nd] >= min_child_weight and HR >= min_child_weight:
                                gain = 0.5 * (GL[nd] * GL[nd] / (HL[nd] + reg_lambda)
                                              + GR * GR / (HR + reg_lambda)
                                              - G[nd] * G[nd] / (H[nd] + reg_lambda)) - gamma
                                if gain > best_gain[nd]:
                                    best_gain[nd] = gain
                                    best_f[nd] = f
                                    best_thr[nd] = _midpoint(last[nd], x)
                                    best_GL[nd] = GL[nd]
                                    best_HL[nd] = HL[nd]
                        GL[nd] = GL[nd] + g[r]
                        HL[nd] = HL[nd] + h[r]
                        last[nd] = x
                        has_last[nd] = 1
                n_next = 0
                for t in range(n_level):
                    nd = level[t]
                    active[nd] = 0
                    if best_f[nd] < 0:
                        continue
                    feature[nd] = best_f[nd]
                    threshold[nd] = best_thr[nd]
                    left[nd] = n_nodes
                    right[nd] = n_nodes + 1
                    G[n_nodes] = best_GL[nd]
                    H[n_nodes] = best_HL[nd]
                    G[n_nodes + 1] = G[nd] - best_GL[nd]
                    H[n_nodes + 1] = H[nd] - best_HL[nd]
                    next_level[n_next] = n_nodes
                    next_level[n_next + 1] = n_nodes + 1
                    n_next += 2
                    n_nodes += 2
                for r in range(n):
                    nd = pos[r]
                    if feature[nd] >= 0 and left[nd] >= 0:
                        if X[r, feature[nd]] <= threshold[nd]:
                            pos[r] = left[nd]
                        else:
                            pos[r] = right[nd]
                for t in range(n_next):
                    level[t] = next_level[t]
                n_level = n_next
    finally:
        free(GL); free(HL); free(last); free(has_last); free(active); free(best_gain); free(best_thr)
        free(best_GL); free(best_HL); free(best_f); free(level); free(next_level)

    return (feature_a[:n_nodes].copy(), threshold_a[:n_nodes].copy(), left_a[:n_nodes].copy(),
            right_a[:n_nodes].copy(), G_a[:n_nodes].copy(), H_a[:n_nodes].copy(), pos_a)


def apply_tree(const f64[:, ::1] X, const i64[::1] feature, const f64[::1] threshold,
               const i64[::1] left, const i64[::1] right):
    """Leaf index reached by every row."""
    cdef Py_ssize_t n = X.shape[0], r, nd
    out_a = np.empty(n, dtype=np.int64)
    cdef i64[::1] out = out_a
    with nogil:
        for r in range(n):
            nd = 0
            while feature[nd] >= 0:
                if X[r, feature[nd]] <= threshold[nd]:
                    nd = left[nd]
                else:
                    nd = right[nd]
            out[r] = nd
    return out_a


def knn_neighbors(const f64[:, ::1] train, const f64[:, ::1] query, int k):
    """Indices of the k nearest training rows per query, by (distance, index)."""
    cdef Py_ssize_t n = train.shape[0], d = train.shape[1], q = query.shape[0]
    cdef Py_ssize_t a, r, f, t, kk = min(k, n)
    out_a = np.empty((q, kk), dtype=np.int64)
    cdef i64[:, ::1] out = out_a
    cdef double *bd = <double *>malloc(kk * sizeof(double))
    cdef int64_t *bi = <int64_t *>malloc(kk * sizeof(int64_t))
    cdef double dist, diff
    cdef Py_ssize_t filled
    if not (bd and bi):
        raise MemoryError()
    try:
        with nogil:
            for a in range(q):
                filled = 0
                for r in range(n):
                    dist = 0.0
                    for f in range(d):
                        diff = train[r, f] - query[a, f]
                        dist = dist + diff * diff
                    if filled == kk and dist >= bd[kk - 1]:
                        continue
                    # insertion keeps (distance, index) order; equal distance keeps the earlier row first
                    t = filled if filled < kk else kk - 1
                    while t > 0 and bd[t - 1] > dist:
                        if t < kk:
                            bd[t] = bd[t - 1]
                            bi[t] = bi[t - 1]
                        t -= 1
                    bd[t] = dist
                    bi[t] = r
                    if filled < kk:
                        filled += 1
                for t in range(kk):
                    out[a, t] = bi[t]
    finally:
        free(bd); free(bi)
    return out_a


def smo_solve(const f64[:, ::1] Q, const f64[::1] y, double C, double tol, long max_iter):
    """Dual C-SVM by SMO with second-order working-set selection.

    Q[i, j] = y_i y_j K(x_i, x_j). Returns (alpha, grad, n_iter, converged).
    """
    cdef Py_ssize_t n = Q.shape[0], t, i, j
    alpha_a = np.zeros(n, dtype=np.float64)
    grad_a = np.full(n, -1.0, dtype=np.float64)
    cdef f64[::1] alpha = alpha_a
    cdef f64[::1] G = grad_a
    cdef double Gmax, Gmax2, v, b, a, obj, best_obj, quad, delta, diff, s, old_i, old_j, dai, daj
    cdef double TAU = 1e-12
    cdef long it = 0
    cdef bint converged = False
    cdef bint up, low
    with nogil:
        while it < max_iter:
            Gmax = -INFINITY
            i = -1
            for t in range(n):
                if y[t] > 0:
                    up = alpha[t] < C
                else:
                    up = alpha[t] > 0
                if up:
                    v = -y[t] * G[t]
                    if v > Gmax:
                        Gmax = v
                        i = t
            Gmax2 = -INFINITY
            j = -1
            best_obj = INFINITY
            for t in range(n):
                if y[t] > 0:
                    low = alpha[t] > 0
                else:
                    low = alpha[t] < C
                if not low:
                    continue
                v = y[t] * G[t]
                if v > Gmax2:
                    Gmax2 = v
                if i < 0:
                    continue
                b = Gmax + v
                if b > 0:
                    a = Q[i, i] + Q[t, t] - 2.0 * y[i] * y[t] * Q[i, t]
                    if a <= 0:
                        a = TAU
                    obj = -(b * b) / a
                    if obj < best_obj:
                        best_obj = obj
                        j = t
            if i < 0 or j < 0 or Gmax + Gmax2 < tol:
                converged = True
                break
            it += 1
            old_i = alpha[i]
            old_j = alpha[j]
            if y[i] != y[j]:
                quad = Q[i, i] + Q[j, j] + 2.0 * Q[i, j]
                if quad <= 0:
                    quad = TAU
                delta = (-G[i] - G[j]) / quad
                diff = alpha[i] - alpha[j]
                alpha[i] = alpha[i] + delta
                alpha[j] = alpha[j] + delta
                if diff > 0:
                    if alpha[j] < 0:
                        alpha[j] = 0.0
                        alpha[i] = diff
                else:
                    if alpha[i] < 0:
                        alpha[i] = 0.0
                        alpha[j] = -diff
                if diff > 0:
                    if alpha[i] > C:
                        alpha[i] = C
                        alpha[j] = C - diff
                else:
                    if alpha[j] > C:
                        alpha[j] = C
                        alpha[i] = C + diff
            else:
                quad = Q[i, i] + Q[j, j] - 2.0 * Q[i, j]
                if quad <= 0:
                    quad = TAU
                delta = (G[i] - G[j]) / quad
                s = alpha[i] + alpha[j]
                alpha[i] = alpha[i] - delta
                alpha[j] = alpha[j] + delta
                if s > C:
                    if alpha[i] > C:
                        alpha[i] = C
                        alpha[j] = s - C
                else:
                    if alpha[j] < 0:
                        alpha[j] = 0.0
                        alpha[i] = s
                if s > C:
                    if alpha[j] > C:
                        alpha[j] = C
                        alpha[i] = s - C
                else:
                    if alpha[i] < 0:
                        alpha[i] = 0.0
                        alpha[j] = s
            dai = alpha[i] - old_i
            daj = alpha[j] - old_j
            for t in range(n):
                G[t] = G[t] + (Q[i, t] * dai + Q[j, t] * daj)
    return alpha_a, grad_a, it, converged
