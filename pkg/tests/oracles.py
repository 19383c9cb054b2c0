"""Independent brute-force reference implementations used by the tests.

Everything here is written with explicit loops and no shared code with the
package, so metric/loss tests compare two genuinely separate routes.
"""

from __future__ import annotations

import math

import numpy as np


def oracle_composite(fg: np.ndarray, bg: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    H, W, C = fg.shape
    out = np.zeros((H, W, C), dtype=np.float64)
    for i in range(H):
        for j in range(W):
            for c in range(C):
                a = alpha[i, j]
                out[i, j, c] = a * fg[i, j, c] + (1 - a) * bg[i, j, c]
    return out


def oracle_sad(pred: np.ndarray, gt: np.ndarray) -> float:
    total = 0.0
    for i in range(pred.shape[0]):
        for j in range(pred.shape[1]):
            total += abs(float(pred[i, j]) - float(gt[i, j]))
    return total * 1e-3


def oracle_mse(pred: np.ndarray, gt: np.ndarray) -> float:
    total = 0.0
    for i in range(pred.shape[0]):
        for j in range(pred.shape[1]):
            d = float(pred[i, j]) - float(gt[i, j])
            total += d * d
    return total / pred.size * 1e3


def oracle_mae(pred: np.ndarray, gt: np.ndarray) -> float:
    total = 0.0
    for i in range(pred.shape[0]):
        for j in range(pred.shape[1]):
            total += abs(float(pred[i, j]) - float(gt[i, j]))
    return total / pred.size * 1e3


def _reflect(idx: int, n: int) -> int:
    if idx < 0:
        return -idx - 1
    if idx >= n:
        return 2 * n - 1 - idx
    return idx


def oracle_grad_error(pred: np.ndarray, gt: np.ndarray, sigma: float = 1.4) -> float:
    radius = int(math.ceil(3.0 * sigma))
    size = 2 * radius + 1
    kx = np.zeros((size, size))
    for u in range(size):
        for v in range(size):
            du = u - radius
            dv = v - radius
            g = math.exp(-(du * du) / (2 * sigma * sigma))
            dg = -dv * math.exp(-(dv * dv) / (2 * sigma * sigma))
            kx[u, v] = g * dg
    norm = 0.0
    for u in range(size):
        for v in range(size):
            norm += abs(kx[u, v])
    kx = kx / norm
    ky = kx.T

    def correlate(m: np.ndarray, k: np.ndarray) -> np.ndarray:
        H, W = m.shape
        out = np.zeros((H, W))
        for i in range(H):
            for j in range(W):
                acc = 0.0
                for u in range(size):
                    for v in range(size):
                        ii = _reflect(i + u - radius, H)
                        jj = _reflect(j + v - radius, W)
                        acc += k[u, v] * m[ii, jj]
                out[i, j] = acc
        return out

    def amplitude(m: np.ndarray) -> np.ndarray:
        gx = correlate(m, kx)
        gy = correlate(m, ky)
        return np.sqrt(gx * gx + gy * gy)

    qp = amplitude(pred.astype(np.float64))
    qg = amplitude(gt.astype(np.float64))
    total = 0.0
    for i in range(pred.shape[0]):
        for j in range(pred.shape[1]):
            d = qp[i, j] - qg[i, j]
            total += d * d
    return total * 1e-3


def _components_4conn(mask: np.ndarray) -> list[list[tuple[int, int]]]:
    """4-connected components in raster discovery order (BFS)."""
    H, W = mask.shape
    seen = np.zeros((H, W), dtype=bool)
    components = []
    for i in range(H):
        for j in range(W):
            if mask[i, j] and not seen[i, j]:
                queue = [(i, j)]
                seen[i, j] = True
                comp = []
                while queue:
                    r, c = queue.pop()
                    comp.append((r, c))
                    for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                        rr, cc = r + dr, c + dc
                        if 0 <= rr < H and 0 <= cc < W and mask[rr, cc] and not seen[rr, cc]:
                            seen[rr, cc] = True
                            queue.append((rr, cc))
                components.append(comp)
    return components


def oracle_conn_error(pred: np.ndarray, gt: np.ndarray) -> float:
    p = pred.astype(np.float64)
    g = gt.astype(np.float64)
    H, W = p.shape
    thresholds = [k * 0.1 for k in range(1, 11)]
    l_map = np.full((H, W), -1.0)
    for k, theta in enumerate(thresholds):
        inter = (p >= theta) & (g >= theta)
        comps = _components_4conn(inter)
        best: list[tuple[int, int]] = []
        for comp in comps:  # strict > keeps the earliest-discovered on ties
            if len(comp) > len(best):
                best = comp
        omega = np.zeros((H, W), dtype=bool)
        for r, c in best:
            omega[r, c] = True
        prev = 0.0 if k == 0 else thresholds[k - 1]
        for i in range(H):
            for j in range(W):
                if not omega[i, j] and l_map[i, j] == -1.0:
                    l_map[i, j] = prev
    for i in range(H):
        for j in range(W):
            if l_map[i, j] == -1.0:
                l_map[i, j] = 1.0

    total = 0.0
    for i in range(H):
        for j in range(W):
            dp = p[i, j] - l_map[i, j]
            dg = g[i, j] - l_map[i, j]
            phi_p = 1.0 - dp * (1.0 if dp >= 0.15 else 0.0)
            phi_g = 1.0 - dg * (1.0 if dg >= 0.15 else 0.0)
            total += abs(phi_p - phi_g)
    return total * 1e-3


def oracle_l1(pred: np.ndarray, gt: np.ndarray) -> float:
    total = 0.0
    for i in range(pred.shape[0]):
        for j in range(pred.shape[1]):
            total += abs(float(pred[i, j]) - float(gt[i, j]))
    return total / pred.size


def oracle_gradient_loss(pred: np.ndarray, gt: np.ndarray) -> float:
    H, W = pred.shape

    def fdx(m, i, j):
        return float(m[i, j + 1]) - float(m[i, j]) if j + 1 < W else 0.0

    def fdy(m, i, j):
        return float(m[i + 1, j]) - float(m[i, j]) if i + 1 < H else 0.0

    total = 0.0
    for i in range(H):
        for j in range(W):
            total += abs(fdx(pred, i, j) - fdx(gt, i, j))
            total += abs(fdy(pred, i, j) - fdy(gt, i, j))
    return total / pred.size


def oracle_box_mask(box, grid_h, grid_w, image_h, image_w) -> np.ndarray:
    """Per-cell membership test; no degenerate-box handling."""
    out = np.full((grid_h, grid_w), -np.inf)
    for i in range(grid_h):
        for j in range(grid_w):
            cy = (i + 0.5) * image_h / grid_h
            cx = (j + 0.5) * image_w / grid_w
            if box.x0 <= cx <= box.x1 and box.y0 <= cy <= box.y1:
                out[i, j] = 0.0
    return out


def oracle_softmax_attention(q, k, v, num_heads, additive_mask=None):
    """Single-purpose attention reference with explicit per-head loops."""
    nq, dim = q.shape
    nk = k.shape[0]
    dh = dim // num_heads
    out = np.zeros((nq, dim))
    weights = np.zeros((num_heads, nq, nk))
    for h in range(num_heads):
        qs = q[:, h * dh : (h + 1) * dh]
        ks = k[:, h * dh : (h + 1) * dh]
        vs = v[:, h * dh : (h + 1) * dh]
        for a in range(nq):
            logits = np.array(
                [float(np.dot(qs[a], ks[b])) / math.sqrt(dh) for b in range(nk)]
            )
            if additive_mask is not None:
                logits = logits + additive_mask
            m = logits.max()
            e = np.exp(logits - m)
            w = e / e.sum()
            weights[h, a] = w
            out[a, h * dh : (h + 1) * dh] = sum(w[b] * vs[b] for b in range(nk))
    return out, weights


def oracle_arc_positions(vertices: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Points at given cumulative arc lengths along a polyline."""
    out = []
    for t in targets:
        remaining = float(t)
        pos = vertices[0]
        for a, b in zip(vertices[:-1], vertices[1:]):
            seg = math.dist(a, b)
            if remaining <= seg or seg == 0.0:
                if seg == 0.0:
                    pos = a
                else:
                    frac = remaining / seg
                    pos = (a[0] + frac * (b[0] - a[0]), a[1] + frac * (b[1] - a[1]))
                break
            remaining -= seg
        else:
            pos = tuple(vertices[-1])
        out.append(pos)
    return np.array(out)
