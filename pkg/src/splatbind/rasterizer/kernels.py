"""Tile-parallel compositing kernels.

Forward kernels own disjoint pixel tiles, so the parallel loop is
race-free. Backward kernels recompute the forward walk per pixel (nothing
per-fragment is stored between passes apart from final transmittance and
the composited count) and write gradients into per-duplicate slots; the
caller reduces duplicates to fragments in a fixed order, which keeps the
whole pass bit-deterministic under any thread schedule.

All math is float64 and shared constants live in project.py; the naive
reference implements the identical compositing rules.
"""

import numpy as np
from numba import njit, prange

TILE = 16
POWER_CUTOFF = 8.0
ALPHA_MAX = 0.99
T_STOP = 1e-4


def tile_grid(width: int, height: int):
    return (width + TILE - 1) // TILE, (height + TILE - 1) // TILE


def bin_fragments(rects: np.ndarray, width: int, height: int):
    """Assign depth-sorted fragments to tiles.

    Returns (dup_frag, tile_starts): fragment index per duplicate, grouped
    by tile and depth-ordered within each tile, plus the per-tile offsets.
    """
    ntx, nty = tile_grid(width, height)
    n_tiles = ntx * nty
    m = rects.shape[0]
    if m == 0:
        return (np.zeros(0, dtype=np.int64),
                np.zeros(n_tiles + 1, dtype=np.int64))
    tx0 = np.clip(np.floor(rects[:, 0] / TILE).astype(np.int64), 0, ntx - 1)
    tx1 = np.clip(np.floor(rects[:, 1] / TILE).astype(np.int64) + 1, 1, ntx)
    ty0 = np.clip(np.floor(rects[:, 2] / TILE).astype(np.int64), 0, nty - 1)
    ty1 = np.clip(np.floor(rects[:, 3] / TILE).astype(np.int64) + 1, 1, nty)
    wx = tx1 - tx0
    wy = ty1 - ty0
    counts = wx * wy
    offsets = np.concatenate([[0], np.cumsum(counts)])
    total = int(offsets[-1])
    dup_frag = np.repeat(np.arange(m, dtype=np.int64), counts)
    within = np.arange(total, dtype=np.int64) - offsets[dup_frag]
    dx = within % wx[dup_frag]
    dy = within // wx[dup_frag]
    tiles = (ty0[dup_frag] + dy) * ntx + (tx0[dup_frag] + dx)
    order = np.argsort(tiles, kind="stable")  # keeps depth order within a tile
    dup_sorted = dup_frag[order]
    starts = np.zeros(n_tiles + 1, dtype=np.int64)
    np.cumsum(np.bincount(tiles, minlength=n_tiles), out=starts[1:])
    return dup_sorted, starts


@njit(cache=True, parallel=True, fastmath=False)
def forward_3d(means2d, conics, colors, opacities, depths, dup, starts,
               ntx, nty, width, height, background):
    out_color = np.zeros((height, width, 3))
    out_alpha = np.zeros((height, width))
    out_depth = np.zeros((height, width))
    out_tfinal = np.ones((height, width))
    out_ncontrib = np.zeros((height, width), dtype=np.int64)
    for tile in prange(ntx * nty):
        tx = tile % ntx
        ty = tile // ntx
        px0 = tx * TILE
        py0 = ty * TILE
        px1 = min(px0 + TILE, width)
        py1 = min(py0 + TILE, height)
        lo = starts[tile]
        hi = starts[tile + 1]
        for py in range(py0, py1):
            sy = py + 0.5
            for px in range(px0, px1):
                sx = px + 0.5
                t = 1.0
                cr = 0.0
                cg = 0.0
                cb = 0.0
                dsum = 0.0
                ncon = 0
                for k in range(lo, hi):
                    f = dup[k]
                    ddx = sx - means2d[f, 0]
                    ddy = sy - means2d[f, 1]
                    power = (0.5 * (conics[f, 0] * ddx * ddx
                                    + conics[f, 2] * ddy * ddy)
                             + conics[f, 1] * ddx * ddy)
                    if power > POWER_CUTOFF:
                        continue
                    alpha = opacities[f] * np.exp(-power)
                    if alpha > ALPHA_MAX:
                        alpha = ALPHA_MAX
                    w = alpha * t
                    cr += colors[f, 0] * w
                    cg += colors[f, 1] * w
                    cb += colors[f, 2] * w
                    dsum += depths[f] * w
                    t *= 1.0 - alpha
                    ncon += 1
                    if t < T_STOP:
                        break
                out_color[py, px, 0] = cr + background[0] * t
                out_color[py, px, 1] = cg + background[1] * t
                out_color[py, px, 2] = cb + background[2] * t
                out_alpha[py, px] = 1.0 - t
                out_depth[py, px] = dsum
                out_tfinal[py, px] = t
                out_ncontrib[py, px] = ncon
    return out_color, out_alpha, out_depth, out_tfinal, out_ncontrib


@njit(cache=True, parallel=True, fastmath=False)
def backward_3d(means2d, conics, colors, opacities, dup, starts,
                ntx, nty, width, height, background,
                grad_color, grad_alpha, tfinal, ncontrib):
    d_mean2d = np.zeros((dup.shape[0], 2))
    d_conic = np.zeros((dup.shape[0], 3))
    d_opac = np.zeros(dup.shape[0])
    d_color = np.zeros((dup.shape[0], 3))
    for tile in prange(ntx * nty):
        tx = tile % ntx
        ty = tile // ntx
        px0 = tx * TILE
        py0 = ty * TILE
        px1 = min(px0 + TILE, width)
        py1 = min(py0 + TILE, height)
        lo = starts[tile]
        hi = starts[tile + 1]
        if hi == lo:
            continue
        buf_k = np.empty(hi - lo, dtype=np.int64)
        buf_alpha = np.empty(hi - lo)
        for py in range(py0, py1):
            sy = py + 0.5
            for px in range(px0, px1):
                ncon = ncontrib[py, px]
                if ncon == 0:
                    continue
                sx = px + 0.5
                # forward replay: find the composited duplicates and alphas
                n = 0
                for k in range(lo, hi):
                    if n == ncon:
                        break
                    f = dup[k]
                    ddx = sx - means2d[f, 0]
                    ddy = sy - means2d[f, 1]
                    power = (0.5 * (conics[f, 0] * ddx * ddx
                                    + conics[f, 2] * ddy * ddy)
                             + conics[f, 1] * ddx * ddy)
                    if power > POWER_CUTOFF:
                        continue
                    alpha = opacities[f] * np.exp(-power)
                    if alpha > ALPHA_MAX:
                        alpha = ALPHA_MAX
                    buf_k[n] = k
                    buf_alpha[n] = alpha
                    n += 1
                gr = grad_color[py, px, 0]
                gg = grad_color[py, px, 1]
                gb = grad_color[py, px, 2]
                ga = grad_alpha[py, px]
                t_end = tfinal[py, px]
                # suffix flux dotted with the color gradient
                gs = (gr * background[0] + gg * background[1]
                      + gb * background[2]) * t_end
                t_cur = t_end
                for j in range(n - 1, -1, -1):
                    k = buf_k[j]
                    f = dup[k]
                    alpha = buf_alpha[j]
                    one_m = 1.0 - alpha
                    t_before = t_cur / one_m
                    w = alpha * t_before
                    d_color[k, 0] += gr * w
                    d_color[k, 1] += gg * w
                    d_color[k, 2] += gb * w
                    cdotg = (colors[f, 0] * gr + colors[f, 1] * gg
                             + colors[f, 2] * gb)
                    d_alpha = cdotg * t_before - gs / one_m
                    d_alpha += ga * t_end / one_m
                    # alpha = min(ALPHA_MAX, o * exp(-power)); a clamped
                    # fragment passes no gradient to opacity or shape
                    if alpha < ALPHA_MAX:
                        ddx = sx - means2d[f, 0]
                        ddy = sy - means2d[f, 1]
                        d_opac[k] += d_alpha * alpha / opacities[f]
                        d_power = -d_alpha * alpha
                        d_conic[k, 0] += d_power * 0.5 * ddx * ddx
                        d_conic[k, 1] += d_power * ddx * ddy
                        d_conic[k, 2] += d_power * 0.5 * ddy * ddy
                        d_mean2d[k, 0] += -d_power * (conics[f, 0] * ddx
                                                     + conics[f, 1] * ddy)
                        d_mean2d[k, 1] += -d_power * (conics[f, 1] * ddx
                                                     + conics[f, 2] * ddy)
                    gs += cdotg * w
                    t_cur = t_before
    return d_mean2d, d_conic, d_opac, d_color


@njit(cache=True, parallel=True, fastmath=False)
def forward_surfel(centers, frames, scales2, colors, opacities, dup, starts,
                   ntx, nty, width, height, fx, fy, cx, cy, near, background):
    out_color = np.zeros((height, width, 3))
    out_alpha = np.zeros((height, width))
    out_depth = np.zeros((height, width))
    out_tfinal = np.ones((height, width))
    out_ncontrib = np.zeros((height, width), dtype=np.int64)
    for tile in prange(ntx * nty):
        tx = tile % ntx
        ty = tile // ntx
        px0 = tx * TILE
        py0 = ty * TILE
        px1 = min(px0 + TILE, width)
        py1 = min(py0 + TILE, height)
        lo = starts[tile]
        hi = starts[tile + 1]
        for py in range(py0, py1):
            ry = (py + 0.5 - cy) / fy
            for px in range(px0, px1):
                rx = (px + 0.5 - cx) / fx
                t = 1.0
                cr = 0.0
                cg = 0.0
                cb = 0.0
                dsum = 0.0
                ncon = 0
                for k in range(lo, hi):
                    f = dup[k]
                    nx = frames[f, 0, 2]
                    ny = frames[f, 1, 2]
                    nz = frames[f, 2, 2]
                    bden = rx * nx + ry * ny + nz
                    if bden < 1e-12 and bden > -1e-12:
                        continue
                    anum = (centers[f, 0] * nx + centers[f, 1] * ny
                            + centers[f, 2] * nz)
                    tau = anum / bden
                    if tau <= near:
                        continue
                    wx = tau * rx - centers[f, 0]
                    wy = tau * ry - centers[f, 1]
                    wz = tau - centers[f, 2]
                    u = (wx * frames[f, 0, 0] + wy * frames[f, 1, 0]
                         + wz * frames[f, 2, 0]) / scales2[f, 0]
                    v = (wx * frames[f, 0, 1] + wy * frames[f, 1, 1]
                         + wz * frames[f, 2, 1]) / scales2[f, 1]
                    power = 0.5 * (u * u + v * v)
                    if power > POWER_CUTOFF:
                        continue
                    alpha = opacities[f] * np.exp(-power)
                    if alpha > ALPHA_MAX:
                        alpha = ALPHA_MAX
                    w = alpha * t
                    cr += colors[f, 0] * w
                    cg += colors[f, 1] * w
                    cb += colors[f, 2] * w
                    dsum += tau * w
                    t *= 1.0 - alpha
                    ncon += 1
                    if t < T_STOP:
                        break
                out_color[py, px, 0] = cr + background[0] * t
                out_color[py, px, 1] = cg + background[1] * t
                out_color[py, px, 2] = cb + background[2] * t
                out_alpha[py, px] = 1.0 - t
                out_depth[py, px] = dsum
                out_tfinal[py, px] = t
                out_ncontrib[py, px] = ncon
    return out_color, out_alpha, out_depth, out_tfinal, out_ncontrib


@njit(cache=True, parallel=True, fastmath=False)
def backward_surfel(centers, frames, scales2, colors, opacities, dup, starts,
                    ntx, nty, width, height, fx, fy, cx, cy, near, background,
                    grad_color, grad_alpha, tfinal, ncontrib):
    nd = dup.shape[0]
    d_center = np.zeros((nd, 3))
    d_frame = np.zeros((nd, 3, 3))
    d_scale = np.zeros((nd, 2))
    d_opac = np.zeros(nd)
    d_color = np.zeros((nd, 3))
    for tile in prange(ntx * nty):
        tx = tile % ntx
        ty = tile // ntx
        px0 = tx * TILE
        py0 = ty * TILE
        px1 = min(px0 + TILE, width)
        py1 = min(py0 + TILE, height)
        lo = starts[tile]
        hi = starts[tile + 1]
        if hi == lo:
            continue
        buf_k = np.empty(hi - lo, dtype=np.int64)
        buf_alpha = np.empty(hi - lo)
        buf_u = np.empty(hi - lo)
        buf_v = np.empty(hi - lo)
        buf_tau = np.empty(hi - lo)
        buf_bden = np.empty(hi - lo)
        for py in range(py0, py1):
            ry = (py + 0.5 - cy) / fy
            for px in range(px0, px1):
                ncon = ncontrib[py, px]
                if ncon == 0:
                    continue
                rx = (px + 0.5 - cx) / fx
                n = 0
                for k in range(lo, hi):
                    if n == ncon:
                        break
                    f = dup[k]
                    nx = frames[f, 0, 2]
                    ny = frames[f, 1, 2]
                    nz = frames[f, 2, 2]
                    bden = rx * nx + ry * ny + nz
                    if bden < 1e-12 and bden > -1e-12:
                        continue
                    anum = (centers[f, 0] * nx + centers[f, 1] * ny
                            + centers[f, 2] * nz)
                    tau = anum / bden
                    if tau <= near:
                        continue
                    wx = tau * rx - centers[f, 0]
                    wy = tau * ry - centers[f, 1]
                    wz = tau - centers[f, 2]
                    u = (wx * frames[f, 0, 0] + wy * frames[f, 1, 0]
                         + wz * frames[f, 2, 0]) / scales2[f, 0]
                    v = (wx * frames[f, 0, 1] + wy * frames[f, 1, 1]
                         + wz * frames[f, 2, 1]) / scales2[f, 1]
                    power = 0.5 * (u * u + v * v)
                    if power > POWER_CUTOFF:
                        continue
                    alpha = opacities[f] * np.exp(-power)
                    if alpha > ALPHA_MAX:
                        alpha = ALPHA_MAX
                    buf_k[n] = k
                    buf_alpha[n] = alpha
                    buf_u[n] = u
                    buf_v[n] = v
                    buf_tau[n] = tau
                    buf_bden[n] = bden
                    n += 1
                gr = grad_color[py, px, 0]
                gg = grad_color[py, px, 1]
                gb = grad_color[py, px, 2]
                ga = grad_alpha[py, px]
                t_end = tfinal[py, px]
                gs = (gr * background[0] + gg * background[1]
                      + gb * background[2]) * t_end
                t_cur = t_end
                for j in range(n - 1, -1, -1):
                    k = buf_k[j]
                    f = dup[k]
                    alpha = buf_alpha[j]
                    u = buf_u[j]
                    v = buf_v[j]
                    tau = buf_tau[j]
                    bden = buf_bden[j]
                    one_m = 1.0 - alpha
                    t_before = t_cur / one_m
                    w = alpha * t_before
                    d_color[k, 0] += gr * w
                    d_color[k, 1] += gg * w
                    d_color[k, 2] += gb * w
                    cdotg = (colors[f, 0] * gr + colors[f, 1] * gg
                             + colors[f, 2] * gb)
                    d_alpha = cdotg * t_before - gs / one_m
                    d_alpha += ga * t_end / one_m
                    if alpha < ALPHA_MAX:
                        su = scales2[f, 0]
                        sv = scales2[f, 1]
                        d_opac[k] += d_alpha * alpha / opacities[f]
                        d_power = -d_alpha * alpha
                        du = d_power * u
                        dv = d_power * v
                        # w = tau * d - mu; d = (rx, ry, 1)
                        wx = tau * rx - centers[f, 0]
                        wy = tau * ry - centers[f, 1]
                        wz = tau - centers[f, 2]
                        t1x = frames[f, 0, 0]
                        t1y = frames[f, 1, 0]
                        t1z = frames[f, 2, 0]
                        t2x = frames[f, 0, 1]
                        t2y = frames[f, 1, 1]
                        t2z = frames[f, 2, 1]
                        nx = frames[f, 0, 2]
                        ny = frames[f, 1, 2]
                        nz = frames[f, 2, 2]
                        dt1 = rx * t1x + ry * t1y + t1z   # d . t1
                        dt2 = rx * t2x + ry * t2y + t2z   # d . t2
                        # du/dmu = ((d.t1) n / bden - t1) / su, dv alike
                        cu = du / su
                        cv = dv / sv
                        d_center[k, 0] += (cu * (dt1 * nx / bden - t1x)
                                          + cv * (dt2 * nx / bden - t2x))
                        d_center[k, 1] += (cu * (dt1 * ny / bden - t1y)
                                          + cv * (dt2 * ny / bden - t2y))
                        d_center[k, 2] += (cu * (dt1 * nz / bden - t1z)
                                          + cv * (dt2 * nz / bden - t2z))
                        # du/dt1 = w / su; dv/dt2 = w / sv
                        d_frame[k, 0, 0] += cu * wx
                        d_frame[k, 1, 0] += cu * wy
                        d_frame[k, 2, 0] += cu * wz
                        d_frame[k, 0, 1] += cv * wx
                        d_frame[k, 1, 1] += cv * wy
                        d_frame[k, 2, 1] += cv * wz
                        # du/dn = -(d.t1) w / (su * bden), dv alike
                        cn = -(cu * dt1 + cv * dt2) / bden
                        d_frame[k, 0, 2] += cn * wx
                        d_frame[k, 1, 2] += cn * wy
                        d_frame[k, 2, 2] += cn * wz
                        d_scale[k, 0] += -du * u / su
                        d_scale[k, 1] += -dv * v / sv
                    gs += cdotg * w
                    t_cur = t_before
    return d_center, d_frame, d_scale, d_opac, d_color
