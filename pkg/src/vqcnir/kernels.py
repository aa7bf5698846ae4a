"""Hot numeric kernels: standard, transposed, and deformable convolution.

Each kernel has a vectorized numpy implementation and a numba-jitted loop
implementation; `backend.set_backend` selects which one runs. Within one
backend, deformable convolution with all-zero offsets reproduces conv2d
bit-for-bit: the numpy paths share the same column/matmul contraction, and
the numba paths share the same accumulation order.

All arrays are float64, C-contiguous. Weight layout is (C_out, C_in/groups,
kh, kw) for conv, (C_in, C_out, kh, kw) for transposed conv. Deformable
offsets are laid out channel-interleaved: channel 2*t is the row shift and
2*t+1 the column shift of kernel tap t = ki*kw + kj.
"""

import numpy as np

from .backend import NUMBA_AVAILABLE, active_backend, njit


def conv_out_size(size, k, stride, pad, dil):
    return (size + 2 * pad - dil * (k - 1) - 1) // stride + 1


def _dispatch(np_fn, nb_fn):
    def run(*args):
        if active_backend() == "numba" and nb_fn is not None:
            return nb_fn(*args)
        return np_fn(*args)

    return run


# ---------------------------------------------------------------------------
# numpy implementations
# ---------------------------------------------------------------------------


def _im2col(x, kh, kw, stride, pad, dil):
    """Patch matrix of shape (B, Ho, Wo, C, kh, kw), zero padded."""
    B, C, H, W = x.shape
    Ho = conv_out_size(H, kh, stride, pad, dil)
    Wo = conv_out_size(W, kw, stride, pad, dil)
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    sB, sC, sH, sW = xp.strides
    view = np.lib.stride_tricks.as_strided(
        xp,
        (B, C, kh, kw, Ho, Wo),
        (sB, sC, sH * dil, sW * dil, sH * stride, sW * stride),
    )
    return np.ascontiguousarray(view.transpose(0, 4, 5, 1, 2, 3))


def _cols_matmul(cols, w):
    """Contract (B,Ho,Wo,C,kh,kw) columns with (O,C,kh,kw) weights."""
    B, Ho, Wo = cols.shape[:3]
    O = w.shape[0]
    out = cols.reshape(B * Ho * Wo, -1) @ w.reshape(O, -1).T
    return np.ascontiguousarray(out.reshape(B, Ho, Wo, O).transpose(0, 3, 1, 2))


def _conv2d_fwd_group_np(x, w, stride, pad, dil):
    return _cols_matmul(_im2col(x, w.shape[2], w.shape[3], stride, pad, dil), w)


def _conv2d_fwd_np(x, w, stride, pad, dil, groups):
    B, C, H, W = x.shape
    O, Cg, kh, kw = w.shape
    if groups == 1:
        return _conv2d_fwd_group_np(x, w, stride, pad, dil)
    if groups == C and O == C and Cg == 1:
        # depthwise fast path: accumulate per-tap strided slices
        Ho = conv_out_size(H, kh, stride, pad, dil)
        Wo = conv_out_size(W, kw, stride, pad, dil)
        xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
        out = np.zeros((B, C, Ho, Wo))
        for ki in range(kh):
            for kj in range(kw):
                sl = xp[
                    :,
                    :,
                    ki * dil : ki * dil + stride * (Ho - 1) + 1 : stride,
                    kj * dil : kj * dil + stride * (Wo - 1) + 1 : stride,
                ]
                out += sl * w[None, :, 0, ki, kj, None, None]
        return out
    Og = O // groups
    parts = [
        _conv2d_fwd_group_np(
            x[:, g * Cg : (g + 1) * Cg], w[g * Og : (g + 1) * Og], stride, pad, dil
        )
        for g in range(groups)
    ]
    return np.concatenate(parts, axis=1)


def _conv2d_bwd_input_group_np(g, w, H, W, stride, pad, dil):
    B, O, Ho, Wo = g.shape
    _, Cg, kh, kw = w.shape
    gxp = np.zeros((B, Cg, H + 2 * pad, W + 2 * pad))
    for ki in range(kh):
        for kj in range(kw):
            t = np.tensordot(g, w[:, :, ki, kj], axes=([1], [0]))  # (B,Ho,Wo,Cg)
            gxp[
                :,
                :,
                ki * dil : ki * dil + stride * (Ho - 1) + 1 : stride,
                kj * dil : kj * dil + stride * (Wo - 1) + 1 : stride,
            ] += t.transpose(0, 3, 1, 2)
    return np.ascontiguousarray(gxp[:, :, pad : pad + H, pad : pad + W])


def _conv2d_bwd_input_np(g, w, x_shape, stride, pad, dil, groups):
    B, C, H, W = x_shape
    O, Cg, kh, kw = w.shape
    if groups == 1:
        return _conv2d_bwd_input_group_np(g, w, H, W, stride, pad, dil)
    if groups == C and O == C and Cg == 1:
        Ho, Wo = g.shape[2], g.shape[3]
        gxp = np.zeros((B, C, H + 2 * pad, W + 2 * pad))
        for ki in range(kh):
            for kj in range(kw):
                gxp[
                    :,
                    :,
                    ki * dil : ki * dil + stride * (Ho - 1) + 1 : stride,
                    kj * dil : kj * dil + stride * (Wo - 1) + 1 : stride,
                ] += g * w[None, :, 0, ki, kj, None, None]
        return np.ascontiguousarray(gxp[:, :, pad : pad + H, pad : pad + W])
    Og = O // groups
    parts = [
        _conv2d_bwd_input_group_np(
            g[:, k * Og : (k + 1) * Og], w[k * Og : (k + 1) * Og], H, W, stride, pad, dil
        )
        for k in range(groups)
    ]
    return np.concatenate(parts, axis=1)


def _conv2d_bwd_weight_group_np(g, x, kh, kw, stride, pad, dil):
    B, O, Ho, Wo = g.shape
    cols = _im2col(x, kh, kw, stride, pad, dil)
    gw = g.transpose(1, 0, 2, 3).reshape(O, -1) @ cols.reshape(B * Ho * Wo, -1)
    return gw.reshape(O, x.shape[1], kh, kw)


def _conv2d_bwd_weight_np(g, x, w_shape, stride, pad, dil, groups):
    O, Cg, kh, kw = w_shape
    C = x.shape[1]
    if groups == 1:
        return _conv2d_bwd_weight_group_np(g, x, kh, kw, stride, pad, dil)
    if groups == C and O == C and Cg == 1:
        B = x.shape[0]
        Ho, Wo = g.shape[2], g.shape[3]
        xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
        gw = np.zeros((C, 1, kh, kw))
        for ki in range(kh):
            for kj in range(kw):
                sl = xp[
                    :,
                    :,
                    ki * dil : ki * dil + stride * (Ho - 1) + 1 : stride,
                    kj * dil : kj * dil + stride * (Wo - 1) + 1 : stride,
                ]
                gw[:, 0, ki, kj] = np.sum(g * sl, axis=(0, 2, 3))
        return gw
    Og = O // groups
    parts = [
        _conv2d_bwd_weight_group_np(
            g[:, k * Og : (k + 1) * Og],
            x[:, k * Cg : (k + 1) * Cg],
            kh,
            kw,
            stride,
            pad,
            dil,
        )
        for k in range(groups)
    ]
    return np.concatenate(parts, axis=0)


def _deform_coords(x_shape, off, kh, kw):
    """Sampling positions and bilinear pieces shared by deform fwd/bwd."""
    B, C, H, W = x_shape
    pad = (kh - 1) // 2
    T = kh * kw
    Ho, Wo = off.shape[2], off.shape[3]
    ki = (np.arange(T) // kw).reshape(1, T, 1, 1).astype(np.float64)
    kj = (np.arange(T) % kw).reshape(1, T, 1, 1).astype(np.float64)
    base_y = np.arange(Ho).reshape(1, 1, Ho, 1).astype(np.float64)
    base_x = np.arange(Wo).reshape(1, 1, 1, Wo).astype(np.float64)
    py = base_y - pad + ki + off[:, 0::2]
    px = base_x - pad + kj + off[:, 1::2]
    y0 = np.floor(py)
    x0 = np.floor(px)
    fy = py - y0
    fx = px - x0
    return y0.astype(np.int64), x0.astype(np.int64), fy, fx


def _gather_corners(x, y0, x0):
    """Zero-padded corner values v00,v01,v10,v11 as (B,T,Ho,Wo,C) arrays."""
    B, C, H, W = x.shape
    xflat = np.ascontiguousarray(x.transpose(0, 2, 3, 1)).reshape(B * H * W, C)
    bb = np.arange(B).reshape(B, 1, 1, 1) * (H * W)
    vals = []
    for dy in (0, 1):
        for dx in (0, 1):
            yc = y0 + dy
            xc = x0 + dx
            valid = (yc >= 0) & (yc < H) & (xc >= 0) & (xc < W)
            lin = bb + np.clip(yc, 0, H - 1) * W + np.clip(xc, 0, W - 1)
            v = xflat[lin] * valid[..., None]
            vals.append(v)
    return vals


def _deform_cols_np(x, off, kh, kw):
    y0, x0, fy, fx = _deform_coords(x.shape, off, kh, kw)
    v00, v01, v10, v11 = _gather_corners(x, y0, x0)
    wy0 = (1.0 - fy)[..., None]
    wy1 = fy[..., None]
    wx0 = (1.0 - fx)[..., None]
    wx1 = fx[..., None]
    samp = wy0 * wx0 * v00 + wy0 * wx1 * v01 + wy1 * wx0 * v10 + wy1 * wx1 * v11
    B, T, Ho, Wo, C = samp.shape
    cols = np.ascontiguousarray(samp.transpose(0, 2, 3, 4, 1)).reshape(
        B, Ho, Wo, C, kh, kw
    )
    return cols


def _deform_fwd_np(x, off, w):
    return _cols_matmul(_deform_cols_np(x, off, w.shape[2], w.shape[3]), w)


def _deform_bwd_np(g, x, off, w):
    B, C, H, W = x.shape
    O, _, kh, kw = w.shape
    T = kh * kw
    _, _, Ho, Wo = g.shape
    cols = _deform_cols_np(x, off, kh, kw)
    gw = g.transpose(1, 0, 2, 3).reshape(O, -1) @ cols.reshape(B * Ho * Wo, -1)
    gw = gw.reshape(O, C, kh, kw)
    # gradient w.r.t. sampled columns, back to (B,T,Ho,Wo,C)
    gcols = (g.transpose(0, 2, 3, 1).reshape(-1, O) @ w.reshape(O, -1)).reshape(
        B, Ho, Wo, C, T
    )
    gsamp = np.ascontiguousarray(gcols.transpose(0, 4, 1, 2, 3))

    y0, x0, fy, fx = _deform_coords(x.shape, off, kh, kw)
    v00, v01, v10, v11 = _gather_corners(x, y0, x0)
    wy0 = (1.0 - fy)[..., None]
    wy1 = fy[..., None]
    wx0 = (1.0 - fx)[..., None]
    wx1 = fx[..., None]

    gx_flat = np.zeros((B * H * W, C))
    bb = np.arange(B).reshape(B, 1, 1, 1) * (H * W)
    corner_w = {(0, 0): wy0 * wx0, (0, 1): wy0 * wx1, (1, 0): wy1 * wx0, (1, 1): wy1 * wx1}
    for dy in (0, 1):
        for dx in (0, 1):
            yc = y0 + dy
            xc = x0 + dx
            valid = (yc >= 0) & (yc < H) & (xc >= 0) & (xc < W)
            lin = bb + np.clip(yc, 0, H - 1) * W + np.clip(xc, 0, W - 1)
            contrib = gsamp * corner_w[(dy, dx)] * valid[..., None]
            np.add.at(gx_flat, lin.reshape(-1), contrib.reshape(-1, C))
    gx = np.ascontiguousarray(gx_flat.reshape(B, H, W, C).transpose(0, 3, 1, 2))

    # d(sample)/d(fractional shift), summed over channels against gsamp
    ds_dfy = -wx0 * v00 - wx1 * v01 + wx0 * v10 + wx1 * v11
    ds_dfx = -wy0 * v00 + wy0 * v01 - wy1 * v10 + wy1 * v11
    goff = np.zeros((B, 2 * T, Ho, Wo))
    goff[:, 0::2] = (gsamp * ds_dfy).sum(axis=4)
    goff[:, 1::2] = (gsamp * ds_dfx).sum(axis=4)
    return gx, goff, gw


def _tconv_fwd_np(x, w, stride, pad):
    B, C, H, W = x.shape
    _, O, kh, kw = w.shape
    Hf = (H - 1) * stride + kh
    Wf = (W - 1) * stride + kw
    yfull = np.zeros((B, O, Hf, Wf))
    for ki in range(kh):
        for kj in range(kw):
            t = np.tensordot(x, w[:, :, ki, kj], axes=([1], [0]))  # (B,H,W,O)
            yfull[
                :,
                :,
                ki : ki + stride * (H - 1) + 1 : stride,
                kj : kj + stride * (W - 1) + 1 : stride,
            ] += t.transpose(0, 3, 1, 2)
    return np.ascontiguousarray(yfull[:, :, pad : Hf - pad, pad : Wf - pad])


def _tconv_bwd_input_np(g, w, x_shape, stride, pad):
    B, C, H, W = x_shape
    _, O, kh, kw = w.shape
    gfull = np.pad(g, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    gx = np.zeros((B, C, H, W))
    for ki in range(kh):
        for kj in range(kw):
            sl = gfull[
                :,
                :,
                ki : ki + stride * (H - 1) + 1 : stride,
                kj : kj + stride * (W - 1) + 1 : stride,
            ]
            gx += np.tensordot(sl, w[:, :, ki, kj], axes=([1], [1])).transpose(0, 3, 1, 2)
    return gx


def _tconv_bwd_weight_np(g, x, w_shape, stride, pad):
    C, O, kh, kw = w_shape
    B, _, H, W = x.shape
    gfull = np.pad(g, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    gw = np.zeros(w_shape)
    for ki in range(kh):
        for kj in range(kw):
            sl = gfull[
                :,
                :,
                ki : ki + stride * (H - 1) + 1 : stride,
                kj : kj + stride * (W - 1) + 1 : stride,
            ]
            gw[:, :, ki, kj] = np.tensordot(x, sl, axes=([0, 2, 3], [0, 2, 3]))
    return gw


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

if NUMBA_AVAILABLE:

    @njit(cache=True)
    def _conv2d_fwd_nb(x, w, stride, pad, dil, groups):
        B, C, H, W = x.shape
        O, Cg, kh, kw = w.shape
        Og = O // groups
        Ho = (H + 2 * pad - dil * (kh - 1) - 1) // stride + 1
        Wo = (W + 2 * pad - dil * (kw - 1) - 1) // stride + 1
        out = np.zeros((B, O, Ho, Wo))
        for b in range(B):
            for o in range(O):
                cbase = (o // Og) * Cg
                for i in range(Ho):
                    for j in range(Wo):
                        acc = 0.0
                        for cc in range(Cg):
                            c = cbase + cc
                            for ki in range(kh):
                                y = i * stride - pad + ki * dil
                                if y < 0 or y >= H:
                                    continue
                                for kj in range(kw):
                                    xx = j * stride - pad + kj * dil
                                    if 0 <= xx < W:
                                        acc += x[b, c, y, xx] * w[o, cc, ki, kj]
                        out[b, o, i, j] = acc
        return out

    @njit(cache=True)
    def _conv2d_bwd_input_nb(g, w, x_shape, stride, pad, dil, groups):
        B, C, H, W = x_shape
        O, Cg, kh, kw = w.shape
        Og = O // groups
        Ho, Wo = g.shape[2], g.shape[3]
        gx = np.zeros((B, C, H, W))
        for b in range(B):
            for o in range(O):
                cbase = (o // Og) * Cg
                for i in range(Ho):
                    for j in range(Wo):
                        gv = g[b, o, i, j]
                        for cc in range(Cg):
                            c = cbase + cc
                            for ki in range(kh):
                                y = i * stride - pad + ki * dil
                                if y < 0 or y >= H:
                                    continue
                                for kj in range(kw):
                                    xx = j * stride - pad + kj * dil
                                    if 0 <= xx < W:
                                        gx[b, c, y, xx] += gv * w[o, cc, ki, kj]
        return gx

    @njit(cache=True)
    def _conv2d_bwd_weight_nb(g, x, w_shape, stride, pad, dil, groups):
        B, C, H, W = x.shape
        O, Cg, kh, kw = w_shape
        Og = O // groups
        Ho, Wo = g.shape[2], g.shape[3]
        gw = np.zeros((O, Cg, kh, kw))
        for b in range(B):
            for o in range(O):
                cbase = (o // Og) * Cg
                for i in range(Ho):
                    for j in range(Wo):
                        gv = g[b, o, i, j]
                        for cc in range(Cg):
                            c = cbase + cc
                            for ki in range(kh):
                                y = i * stride - pad + ki * dil
                                if y < 0 or y >= H:
                                    continue
                                for kj in range(kw):
                                    xx = j * stride - pad + kj * dil
                                    if 0 <= xx < W:
                                        gw[o, cc, ki, kj] += gv * x[b, c, y, xx]
        return gw

    @njit(cache=True, inline="always")
    def _bilinear_nb(x, b, c, py, px, H, W):
        y0 = int(np.floor(py))
        x0 = int(np.floor(px))
        fy = py - y0
        fx = px - x0
        v = 0.0
        for dy in range(2):
            yc = y0 + dy
            if yc < 0 or yc >= H:
                continue
            wy = fy if dy == 1 else 1.0 - fy
            for dx in range(2):
                xc = x0 + dx
                if xc < 0 or xc >= W:
                    continue
                wx = fx if dx == 1 else 1.0 - fx
                v += wy * wx * x[b, c, yc, xc]
        return v

    @njit(cache=True)
    def _deform_fwd_nb(x, off, w):
        B, C, H, W = x.shape
        O, _, kh, kw = w.shape
        pad = (kh - 1) // 2
        Ho, Wo = off.shape[2], off.shape[3]
        out = np.zeros((B, O, Ho, Wo))
        for b in range(B):
            for o in range(O):
                for i in range(Ho):
                    for j in range(Wo):
                        acc = 0.0
                        for c in range(C):
                            for ki in range(kh):
                                for kj in range(kw):
                                    t = ki * kw + kj
                                    py = i - pad + ki + off[b, 2 * t, i, j]
                                    px = j - pad + kj + off[b, 2 * t + 1, i, j]
                                    y0 = int(np.floor(py))
                                    x0 = int(np.floor(px))
                                    fy = py - y0
                                    fx = px - x0
                                    s = 0.0
                                    if 0 <= y0 < H:
                                        if 0 <= x0 < W:
                                            s += (1.0 - fy) * (1.0 - fx) * x[b, c, y0, x0]
                                        if 0 <= x0 + 1 < W:
                                            s += (1.0 - fy) * fx * x[b, c, y0, x0 + 1]
                                    if 0 <= y0 + 1 < H:
                                        if 0 <= x0 < W:
                                            s += fy * (1.0 - fx) * x[b, c, y0 + 1, x0]
                                        if 0 <= x0 + 1 < W:
                                            s += fy * fx * x[b, c, y0 + 1, x0 + 1]
                                    acc += s * w[o, c, ki, kj]
                        out[b, o, i, j] = acc
        return out

    @njit(cache=True)
    def _deform_bwd_nb(g, x, off, w):
        B, C, H, W = x.shape
        O, _, kh, kw = w.shape
        pad = (kh - 1) // 2
        Ho, Wo = g.shape[2], g.shape[3]
        gx = np.zeros((B, C, H, W))
        goff = np.zeros_like(off)
        gw = np.zeros_like(w)
        for b in range(B):
            for i in range(Ho):
                for j in range(Wo):
                    for ki in range(kh):
                        for kj in range(kw):
                            t = ki * kw + kj
                            py = i - pad + ki + off[b, 2 * t, i, j]
                            px = j - pad + kj + off[b, 2 * t + 1, i, j]
                            y0 = int(np.floor(py))
                            x0 = int(np.floor(px))
                            fy = py - y0
                            fx = px - x0
                            for c in range(C):
                                # upstream for this (c, tap) sample
                                gs = 0.0
                                for o in range(O):
                                    gs += g[b, o, i, j] * w[o, c, ki, kj]
                                v00 = x[b, c, y0, x0] if 0 <= y0 < H and 0 <= x0 < W else 0.0
                                v01 = (
                                    x[b, c, y0, x0 + 1]
                                    if 0 <= y0 < H and 0 <= x0 + 1 < W
                                    else 0.0
                                )
                                v10 = (
                                    x[b, c, y0 + 1, x0]
                                    if 0 <= y0 + 1 < H and 0 <= x0 < W
                                    else 0.0
                                )
                                v11 = (
                                    x[b, c, y0 + 1, x0 + 1]
                                    if 0 <= y0 + 1 < H and 0 <= x0 + 1 < W
                                    else 0.0
                                )
                                s = (
                                    (1.0 - fy) * (1.0 - fx) * v00
                                    + (1.0 - fy) * fx * v01
                                    + fy * (1.0 - fx) * v10
                                    + fy * fx * v11
                                )
                                for o in range(O):
                                    gw[o, c, ki, kj] += g[b, o, i, j] * s
                                if 0 <= y0 < H and 0 <= x0 < W:
                                    gx[b, c, y0, x0] += gs * (1.0 - fy) * (1.0 - fx)
                                if 0 <= y0 < H and 0 <= x0 + 1 < W:
                                    gx[b, c, y0, x0 + 1] += gs * (1.0 - fy) * fx
                                if 0 <= y0 + 1 < H and 0 <= x0 < W:
                                    gx[b, c, y0 + 1, x0] += gs * fy * (1.0 - fx)
                                if 0 <= y0 + 1 < H and 0 <= x0 + 1 < W:
                                    gx[b, c, y0 + 1, x0 + 1] += gs * fy * fx
                                ds_dfy = -(1.0 - fx) * v00 - fx * v01 + (1.0 - fx) * v10 + fx * v11
                                ds_dfx = -(1.0 - fy) * v00 + (1.0 - fy) * v01 - fy * v10 + fy * v11
                                goff[b, 2 * t, i, j] += gs * ds_dfy
                                goff[b, 2 * t + 1, i, j] += gs * ds_dfx
        return gx, goff, gw

    @njit(cache=True)
    def _tconv_fwd_nb(x, w, stride, pad):
        B, C, H, W = x.shape
        _, O, kh, kw = w.shape
        Ho = (H - 1) * stride + kh - 2 * pad
        Wo = (W - 1) * stride + kw - 2 * pad
        out = np.zeros((B, O, Ho, Wo))
        for b in range(B):
            for c in range(C):
                for h in range(H):
                    for ww in range(W):
                        xv = x[b, c, h, ww]
                        for ki in range(kh):
                            y = h * stride + ki - pad
                            if y < 0 or y >= Ho:
                                continue
                            for kj in range(kw):
                                xx = ww * stride + kj - pad
                                if 0 <= xx < Wo:
                                    for o in range(O):
                                        out[b, o, y, xx] += xv * w[c, o, ki, kj]
        return out

    @njit(cache=True)
    def _tconv_bwd_input_nb(g, w, x_shape, stride, pad):
        B, C, H, W = x_shape
        _, O, kh, kw = w.shape
        Ho, Wo = g.shape[2], g.shape[3]
        gx = np.zeros((B, C, H, W))
        for b in range(B):
            for c in range(C):
                for h in range(H):
                    for ww in range(W):
                        acc = 0.0
                        for ki in range(kh):
                            y = h * stride + ki - pad
                            if y < 0 or y >= Ho:
                                continue
                            for kj in range(kw):
                                xx = ww * stride + kj - pad
                                if 0 <= xx < Wo:
                                    for o in range(O):
                                        acc += g[b, o, y, xx] * w[c, o, ki, kj]
                        gx[b, c, h, ww] = acc
        return gx

    @njit(cache=True)
    def _tconv_bwd_weight_nb(g, x, w_shape, stride, pad):
        C, O, kh, kw = w_shape
        B, _, H, W = x.shape
        Ho, Wo = g.shape[2], g.shape[3]
        gw = np.zeros((C, O, kh, kw))
        for b in range(B):
            for c in range(C):
                for h in range(H):
                    for ww in range(W):
                        xv = x[b, c, h, ww]
                        for ki in range(kh):
                            y = h * stride + ki - pad
                            if y < 0 or y >= Ho:
                                continue
                            for kj in range(kw):
                                xx = ww * stride + kj - pad
                                if 0 <= xx < Wo:
                                    for o in range(O):
                                        gw[c, o, ki, kj] += xv * g[b, o, y, xx]
        return gw

else:  # pragma: no cover - numba always present in CI environment
    _conv2d_fwd_nb = None
    _conv2d_bwd_input_nb = None
    _conv2d_bwd_weight_nb = None
    _deform_fwd_nb = None
    _deform_bwd_nb = None
    _tconv_fwd_nb = None
    _tconv_bwd_input_nb = None
    _tconv_bwd_weight_nb = None


conv2d_forward = _dispatch(_conv2d_fwd_np, _conv2d_fwd_nb)
conv2d_backward_input = _dispatch(_conv2d_bwd_input_np, _conv2d_bwd_input_nb)
conv2d_backward_weight = _dispatch(_conv2d_bwd_weight_np, _conv2d_bwd_weight_nb)
deform_forward = _dispatch(_deform_fwd_np, _deform_fwd_nb)
deform_backward = _dispatch(_deform_bwd_np, _deform_bwd_nb)
tconv_forward = _dispatch(_tconv_fwd_np, _tconv_fwd_nb)
tconv_backward_input = _dispatch(_tconv_bwd_input_np, _tconv_bwd_input_nb)
tconv_backward_weight = _dispatch(_tconv_bwd_weight_np, _tconv_bwd_weight_nb)
