"""Independent reference implementations shared by the unit and acceptance tests.

Each oracle is written the slow, obvious way (explicit loops, sets, extended
precision) and deliberately avoids calling into ``latentqc``.
"""

import mpmath
import numpy as np


def sequential_alpha_bars(betas, dps=50):
    """Running product of (1 - beta) in extended precision."""
    mpmath.mp.dps = dps
    acc = mpmath.mpf(1)
    out = []
    for b in betas:
        acc *= 1 - mpmath.mpf(float(b))
        out.append(acc)
    return out


def naive_conv(x, w, b):
    """Zero-padded 3x3 cross-correlation written as explicit loops."""
    h, wd, _ = x.shape
    out = np.zeros((h, wd, w.shape[3]))
    for i in range(h):
        for j in range(wd):
            acc = b.copy()
            for di in range(3):
                for dj in range(3):
                    ii, jj = i + di - 1, j + dj - 1
                    if 0 <= ii < h and 0 <= jj < wd:
                        acc = acc + x[ii, jj] @ w[di, dj]
            out[i, j] = acc
    return out


def naive_forward(p, z, t):
    from latentqc.denoiser import timestep_embedding

    emb = timestep_embedding(t, p.T, p.time_dim)[0]
    h1 = naive_conv(z, p.w1, p.b1) + emb @ p.time_w
    h2 = naive_conv(np.maximum(h1, 0), p.w2, p.b2)
    return naive_conv(np.maximum(h2, 0), p.w3, p.b3)


def dense_gaussian_oracle(h, sigma):
    """Direct 2-D sum with a truncated, renormalised kernel and mirror padding."""
    r = int(np.ceil(3 * sigma))
    x = np.arange(-r, r + 1)
    k1 = np.exp(-0.5 * (x / sigma) ** 2)
    k2 = np.outer(k1, k1)
    k2 /= k2.sum()
    rows, cols = h.shape

    def mirror(i, n):
        while i < 0 or i >= n:
            i = -i if i < 0 else 2 * (n - 1) - i
        return i

    out = np.zeros_like(h, dtype=float)
    for i in range(rows):
        for j in range(cols):
            out[i, j] = sum(k2[a + r, b + r] * h[mirror(i + a, rows), mirror(j + b, cols)]
                            for a in x for b in x)
    return out


def otsu_oracle(values, v_min, v_max, bins):
    """Try every interior bin edge, computing class stats from scratch."""
    width = (v_max - v_min) / bins
    vals = [min(max(v, v_min), v_max) for v in values]
    idx = [min(int((v - v_min) / width), bins - 1) for v in vals]
    best, best_k = None, None
    for k in range(1, bins):
        c0 = [v_min + (i + 0.5) * width for i in idx if i < k]
        c1 = [v_min + (i + 0.5) * width for i in idx if i >= k]
        if not c0 or not c1:
            continue
        score = len(c0) * len(c1) * (np.mean(c0) - np.mean(c1)) ** 2
        if best is None or score > best * (1 + 1e-12):
            best, best_k = score, k
    return v_max if best_k is None else v_min + best_k * width


def brute_dilate(m, r):
    """Dilation on the infinite plane, evaluated on a generous canvas."""
    rows, cols = m.shape
    pts = {(i, j) for i in range(rows) for j in range(cols) if m[i, j]}
    return {(i + a, j + b) for i, j in pts for a in range(-r, r + 1) for b in range(-r, r + 1)}


def brute_erode(pts, r):
    return {(i, j) for i, j in pts
            if all((i + a, j + b) in pts for a in range(-r, r + 1) for b in range(-r, r + 1))}


def brute_close_open(m, r):
    rows, cols = m.shape
    if r == 0:
        return m.copy()
    closed = brute_erode(brute_dilate(m, r), r)
    opened_er = brute_erode(closed, r)
    opened = {(i + a, j + b) for i, j in opened_er
              for a in range(-r, r + 1) for b in range(-r, r + 1)}
    out = np.zeros_like(m)
    for i, j in opened:
        if 0 <= i < rows and 0 <= j < cols:
            out[i, j] = True
    return out


def accumulate_oracle(items, dims):
    s = [[0.0] * dims[1] for _ in range(dims[0])]
    n = [[0] * dims[1] for _ in range(dims[0])]
    for (r, c), h in items:
        for i in range(h.shape[0]):
            for j in range(h.shape[1]):
                s[r // 8 + i][c // 8 + j] += h[i, j]
                n[r // 8 + i][c // 8 + j] += 1
    return np.array([[s[i][j] / n[i][j] for j in range(dims[1])] for i in range(dims[0])])


def pair_oracle(scores, gt):
    pos = [s for s, g in zip(scores, gt) if g]
    neg = [s for s, g in zip(scores, gt) if not g]
    wins = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p in pos for n in neg)
    return wins / (len(pos) * len(neg))
