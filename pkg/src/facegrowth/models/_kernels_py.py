"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``.

Same signatures, same results: the order of floating point operations, the
(value, index) sort order and every tie rule follow the compiled code.
"""
from __future__ import annotations

import numpy as np

BACKEND = "python"

_MASK = (1 << 64) - 1


def _splitmix(state: int) -> tuple[int, int]:
    state = (state + 0x9E3779B97F4A7C15) & _MASK
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return state, z ^ (z >> 31)


def _node_state(seed: int, node: int) -> int:
    return (int(seed) ^ ((int(node) * 0xD1B54A32D192ED03) & _MASK)) & _MASK


def _midpoint(a: float, b: float) -> float:
    t = (a + b) * 0.5
    return a if t >= b else t


def build_class_tree(X, y, w, n_classes, max_features, seed, order):
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    w = np.asarray(w, dtype=np.float64)
    n, d = X.shape
    K = int(n_classes)
    members0 = np.flatnonzero(w > 0)
    m = members0.size
    if m == 0:
        raise ValueError("empty sample")
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node():
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(np.zeros(K))
        return len(feature) - 1

    onehot_w = np.zeros((n, K))
    onehot_w[np.arange(n), y] = w
    use_all = max_features >= d
    new_node()
    stack = [(0, members0)]
    while stack:
        node, members = stack.pop()
        tot = np.zeros(K)
        for k in range(K):
            tot[k] = w[members][y[members] == k].sum()
        W = float(w[members].sum())
        value[node] = tot
        if np.count_nonzero(tot > 0) <= 1 or members.size < 2:
            continue
        best_score, best_f, best_thr = -np.inf, -1, 0.0
        perm = list(range(d))
        state = _node_state(seed, node)
        visited = 0
        jf = 0
        while jf < d:
            if not use_all:
                if visited >= max_features:
                    break
                state, rnd = _splitmix(state)
                rnd %= d - jf
                f = perm[jf + rnd]
                perm[jf + rnd] = perm[jf]
                perm[jf] = f
            else:
                f = jf
            jf += 1
            xv = X[members, f]
            srt = np.argsort(xv, kind="stable")
            xs = xv[srt]
            if xs[0] == xs[-1]:
                continue
            visited += 1
            rows = members[srt]
            Lc = np.cumsum(onehot_w[rows], axis=0)[:-1]
            WL = np.cumsum(w[rows])[:-1]
            valid = xs[1:] > xs[:-1]
            WR = W - WL
            Rc = tot - Lc
            sL = np.zeros(len(WL))
            sR = np.zeros(len(WL))
            for k in range(K):
                sL = sL + Lc[:, k] * Lc[:, k]
                sR = sR + Rc[:, k] * Rc[:, k]
            with np.errstate(divide="ignore", invalid="ignore"):
                score = sL / WL + sR / WR
            score = np.where(valid, score, -np.inf)
            p = int(np.argmax(score))
            if score[p] > best_score:
                best_score = score[p]
                best_f = f
                best_thr = _midpoint(float(xs[p]), float(xs[p + 1]))
        if best_f < 0:
            continue
        go_left = X[members, best_f] <= best_thr
        lid, rid = new_node(), new_node()
        feature[node], threshold[node], left[node], right[node] = best_f, best_thr, lid, rid
        stack.append((rid, members[~go_left]))
        stack.append((lid, members[go_left]))
    return (np.array(feature, dtype=np.int64), np.array(threshold), np.array(left, dtype=np.int64),
            np.array(right, dtype=np.int64), np.array(value).reshape(len(feature), K))


def build_boost_tree(X, order, g, h, max_depth, reg_lambda, min_child_weight, gamma, min_split_gain):
    X = np.ascontiguousarray(X, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    n, d = X.shape
    feature, threshold, left, right = [-1], [0.0], [-1], [-1]
    G, H = [float(np.cumsum(g)[-1])], [float(np.cumsum(h)[-1])]
    pos = np.zeros(n, dtype=np.int64)
    level = [0]
    lam = reg_lambda
    for _ in range(max_depth):
        if not level:
            break
        best = {nd: [min_split_gain, -1, 0.0, 0.0, 0.0] for nd in level}
        pos_sorted = pos[order]  # (d, n): node of the i-th row of each feature order
        for f in range(d):
            for nd in level:
                rows = order[f][pos_sorted[f] == nd]
                if rows.size < 2:
                    continue
                xs = X[rows, f]
                GLc = np.cumsum(g[rows])[:-1]
                HLc = np.cumsum(h[rows])[:-1]
                Gn, Hn = G[nd], H[nd]
                GR = Gn - GLc
                HR = Hn - HLc
                ok = (xs[1:] > xs[:-1]) & (HLc >= min_child_weight) & (HR >= min_child_weight)
                gain = 0.5 * (GLc * GLc / (HLc + lam) + GR * GR / (HR + lam) - Gn * Gn / (Hn + lam)) - gamma
                gain = np.where(ok, gain, -np.inf)
                p = int(np.argmax(gain))
                b = best[nd]
                if gain[p] > b[0]:
                    best[nd] = [float(gain[p]), f, _midpoint(float(xs[p]), float(xs[p + 1])),
                                float(GLc[p]), float(HLc[p])]
        nxt = []
        for nd in level:
            gain, f, thr, gl, hl = best[nd]
            if f < 0:
                continue
            lid = len(feature)
            feature[nd], threshold[nd], left[nd], right[nd] = f, thr, lid, lid + 1
            feature += [-1, -1]
            threshold += [0.0, 0.0]
            left += [-1, -1]
            right += [-1, -1]
            G += [gl, G[nd] - gl]
            H += [hl, H[nd] - hl]
            nxt += [lid, lid + 1]
        feat = np.array(feature)
        thr = np.array(threshold)
        split = feat[pos] >= 0
        if split.any():
            rows = np.flatnonzero(split)
            nd = pos[rows]
            go_left = X[rows, feat[nd]] <= thr[nd]
            pos[rows] = np.where(go_left, np.array(left)[nd], np.array(right)[nd])
        level = nxt
    return (np.array(feature, dtype=np.int64), np.array(threshold), np.array(left, dtype=np.int64),
            np.array(right, dtype=np.int64), np.array(G), np.array(H), pos)


def apply_tree(X, feature, threshold, left, right):
    X = np.asarray(X, dtype=np.float64)
    nd = np.zeros(X.shape[0], dtype=np.int64)
    active = feature[nd] >= 0
    while active.any():
        rows = np.flatnonzero(active)
        cur = nd[rows]
        go_left = X[rows, feature[cur]] <= threshold[cur]
        nd[rows] = np.where(go_left, left[cur], right[cur])
        active = feature[nd] >= 0
    return nd


def knn_neighbors(train, query, k):
    train = np.asarray(train, dtype=np.float64)
    query = np.asarray(query, dtype=np.float64)
    n, d = train.shape
    kk = min(int(k), n)
    out = np.empty((query.shape[0], kk), dtype=np.int64)
    for a, q in enumerate(query):
        dist = np.zeros(n)
        for f in range(d):
            diff = train[:, f] - q[f]
            dist = dist + diff * diff
        out[a] = np.argsort(dist, kind="stable")[:kk]
    return out


def smo_solve(Q, y, C, tol, max_iter):
    Q = np.asarray(Q, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = Q.shape[0]
    alpha = np.zeros(n)
    G = np.full(n, -1.0)
    diagQ = np.diag(Q).copy()
    pos = y > 0
    TAU = 1e-12
    it = 0
    converged = False
    while it < max_iter:
        up = np.where(pos, alpha < C, alpha > 0)
        low = np.where(pos, alpha > 0, alpha < C)
        v_up = np.where(up, -y * G, -np.inf)
        i = int(np.argmax(v_up))
        Gmax = v_up[i]
        if not up[i]:
            i = -1
        v_low = y * G
        Gmax2 = np.max(np.where(low, v_low, -np.inf)) if n else -np.inf
        j = -1
        if i >= 0:
            b = Gmax + v_low
            cand = low & (b > 0)
            if cand.any():
                a = diagQ[i] + diagQ - 2.0 * y[i] * y * Q[i]
                a = np.where(a <= 0, TAU, a)
                obj = np.where(cand, -(b * b) / a, np.inf)
                j = int(np.argmin(obj))
                if not cand[j]:
                    j = -1
        if i < 0 or j < 0 or Gmax + Gmax2 < tol:
            converged = True
            break
        it += 1
        old_i, old_j = float(alpha[i]), float(alpha[j])
        ai, aj = old_i, old_j
        if y[i] != y[j]:
            quad = Q[i, i] + Q[j, j] + 2.0 * Q[i, j]
            if quad <= 0:
                quad = TAU
            delta = (-G[i] - G[j]) / quad
            diff = ai - aj
            ai = ai + delta
            aj = aj + delta
            if diff > 0:
                if aj < 0:
                    aj, ai = 0.0, diff
            elif ai < 0:
                ai, aj = 0.0, -diff
            if diff > 0:
                if ai > C:
                    ai, aj = C, C - diff
            elif aj > C:
                aj, ai = C, C + diff
        else:
            quad = Q[i, i] + Q[j, j] - 2.0 * Q[i, j]
            if quad <= 0:
                quad = TAU
            delta = (G[i] - G[j]) / quad
            s = ai + aj
            ai = ai - delta
            aj = aj + delta
            if s > C:
                if ai > C:
                    ai, aj = C, s - C
            elif aj < 0:
                aj, ai = 0.0, s
            if s > C:
                if aj > C:
                    aj, ai = C, s - C
            elif ai < 0:
                ai, aj = 0.0, s
        alpha[i], alpha[j] = ai, aj
        dai = ai - old_i
        daj = aj - old_j
        G = G + (Q[i] * dai + Q[j] * daj)
    return alpha, G, it, converged
