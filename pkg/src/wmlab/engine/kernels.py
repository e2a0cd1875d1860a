"""Convolution kernels: numba-jitted hot path with a pure-numpy fallback.

These three kernels (conv2d forward, backward-input, backward-weight)
dominate training time, so they carry ``@njit`` implementations.  Setting
the environment variable ``WMLAB_KERNELS=numpy`` before import forces the
numpy fallback; the default is numba when importable.  Both paths are
deterministic run to run, but they are not bit-identical to each other
(different accumulation orders), so a given experiment should stick to one
backend.  ``benchmarks/bench_kernels.py`` compares the two.

Layout conventions: activations are NCHW float32, weights are OIHW float32.
Padding is applied by the callers in this module, so the jitted loops never
branch on bounds.
"""

from __future__ import annotations

import os

import numpy as np


def _pick_backend() -> str:
    env = os.environ.get("WMLAB_KERNELS", "").strip().lower()
    if env == "numpy":
        return "numpy"
    if env not in ("", "numba"):
        raise ValueError(f"WMLAB_KERNELS must be 'numba' or 'numpy', got {env!r}")
    try:
        import numba  # noqa: F401
    except ImportError:
        return "numpy"
    return "numba"


BACKEND = _pick_backend()


# ---------------------------------------------------------------------------
# numpy fallback (im2col / col2im)
# ---------------------------------------------------------------------------

def _im2col(xp: np.ndarray, kh: int, kw: int, stride: int, oh: int, ow: int) -> np.ndarray:
    """(N, IC, HP, WP) -> (N, IC*KH*KW, OH*OW) patch matrix."""
    n, ic = xp.shape[0], xp.shape[1]
    cols = np.empty((n, ic, kh, kw, oh, ow), dtype=np.float32)
    for ky in range(kh):
        for kx in range(kw):
            cols[:, :, ky, kx] = xp[:, :, ky : ky + stride * oh : stride, kx : kx + stride * ow : stride]
    return cols.reshape(n, ic * kh * kw, oh * ow)


def conv2d_forward_np(xp: np.ndarray, w: np.ndarray, stride: int, oh: int, ow: int) -> np.ndarray:
    n = xp.shape[0]
    oc, ic, kh, kw = w.shape
    cols = _im2col(xp, kh, kw, stride, oh, ow)
    out = np.matmul(w.reshape(oc, ic * kh * kw)[None, :, :], cols)
    return out.reshape(n, oc, oh, ow)


def conv2d_backward_input_np(g: np.ndarray, w: np.ndarray, stride: int, hp: int, wp: int) -> np.ndarray:
    n, oc, oh, ow = g.shape
    ic, kh, kw = w.shape[1], w.shape[2], w.shape[3]
    dcols = np.matmul(w.reshape(oc, -1).T[None, :, :], g.reshape(n, oc, oh * ow))
    dcols = dcols.reshape(n, ic, kh, kw, oh, ow)
    dxp = np.zeros((n, ic, hp, wp), dtype=np.float32)
    for ky in range(kh):
        for kx in range(kw):
            dxp[:, :, ky : ky + stride * oh : stride, kx : kx + stride * ow : stride] += dcols[:, :, ky, kx]
    return dxp


def conv2d_backward_weight_np(g: np.ndarray, xp: np.ndarray, kh: int, kw: int, stride: int) -> np.ndarray:
    n, oc, oh, ow = g.shape
    ic = xp.shape[1]
    cols = _im2col(xp, kh, kw, stride, oh, ow)
    dw = np.einsum("nop,nkp->ok", g.reshape(n, oc, oh * ow), cols, optimize=True)
    return dw.reshape(oc, ic, kh, kw).astype(np.float32, copy=False)


# ---------------------------------------------------------------------------
# numba hot path
# ---------------------------------------------------------------------------

if BACKEND == "numba":
    from numba import njit

    @njit(cache=True, fastmath=False)
    def _mm_acc(a, b, c):  # pragma: no cover - jitted
        """c += a @ b with 4-row register blocking; saxpy inner loop so LLVM
        vectorizes without reassociating float sums (keeps results exact)."""
        m_dim, k_dim = a.shape
        n_dim = b.shape[1]
        m = 0
        while m + 4 <= m_dim:
            for k in range(k_dim):
                a0 = a[m, k]
                a1 = a[m + 1, k]
                a2 = a[m + 2, k]
                a3 = a[m + 3, k]
                for n in range(n_dim):
                    bv = b[k, n]
                    c[m, n] += a0 * bv
                    c[m + 1, n] += a1 * bv
                    c[m + 2, n] += a2 * bv
                    c[m + 3, n] += a3 * bv
            m += 4
        while m < m_dim:
            for k in range(k_dim):
                av = a[m, k]
                for n in range(n_dim):
                    c[m, n] += av * b[k, n]
            m += 1

    @njit(cache=True, fastmath=False)
    def _fill_cols(xp, b, kh, kw, stride, oh, ow, cols):  # pragma: no cover - jitted
        ic = xp.shape[1]
        for c in range(ic):
            for ky in range(kh):
                for kx in range(kw):
                    j = (c * kh + ky) * kw + kx
                    for oy in range(oh):
                        iy = oy * stride + ky
                        for ox in range(ow):
                            cols[j, oy * ow + ox] = xp[b, c, iy, ox * stride + kx]

    @njit(cache=True, fastmath=False)
    def _conv2d_forward_nb(xp, w2, kh, kw, stride, oh, ow):  # pragma: no cover - jitted
        n = xp.shape[0]
        oc = w2.shape[0]
        ic = xp.shape[1]
        out = np.zeros((n, oc, oh * ow), dtype=np.float32)
        cols = np.empty((ic * kh * kw, oh * ow), dtype=np.float32)
        for b in range(n):
            _fill_cols(xp, b, kh, kw, stride, oh, ow, cols)
            _mm_acc(w2, cols, out[b])
        return out

    @njit(cache=True, fastmath=False)
    def _conv2d_backward_input_nb(g2, w2t, ic, kh, kw, stride, hp, wp, oh, ow):  # pragma: no cover
        n = g2.shape[0]
        dxp = np.zeros((n, ic, hp, wp), dtype=np.float32)
        for b in range(n):
            dcols = np.zeros((ic * kh * kw, oh * ow), dtype=np.float32)
            _mm_acc(w2t, g2[b], dcols)
            for c in range(ic):
                for ky in range(kh):
                    for kx in range(kw):
                        j = (c * kh + ky) * kw + kx
                        for oy in range(oh):
                            iy = oy * stride + ky
                            for ox in range(ow):
                                dxp[b, c, iy, ox * stride + kx] += dcols[j, oy * ow + ox]
        return dxp

    @njit(cache=True, fastmath=False)
    def _conv2d_backward_weight_nb(g2, xp, kh, kw, stride, oh, ow):  # pragma: no cover - jitted
        n, oc = g2.shape[0], g2.shape[1]
        ic = xp.shape[1]
        dw2 = np.zeros((oc, ic * kh * kw), dtype=np.float32)
        cols_t = np.empty((oh * ow, ic * kh * kw), dtype=np.float32)
        for b in range(n):
            for c in range(ic):
                for ky in range(kh):
                    for kx in range(kw):
                        j = (c * kh + ky) * kw + kx
                        for oy in range(oh):
                            iy = oy * stride + ky
                            for ox in range(ow):
                                cols_t[oy * ow + ox, j] = xp[b, c, iy, ox * stride + kx]
            _mm_acc(g2[b], cols_t, dw2)
        return dw2


# ---------------------------------------------------------------------------
# dispatching wrappers (handle padding, pick backend)
# ---------------------------------------------------------------------------

def conv_out_size(size: int, kernel: int, stride: int, pad: int) -> int:
    return (size + 2 * pad - kernel) // stride + 1


def _pad_input(x: np.ndarray, pad: int) -> np.ndarray:
    if pad == 0:
        return np.ascontiguousarray(x)
    n, c, h, w = x.shape
    xp = np.zeros((n, c, h + 2 * pad, w + 2 * pad), dtype=np.float32)
    xp[:, :, pad : pad + h, pad : pad + w] = x
    return xp


def conv2d_forward(x: np.ndarray, w: np.ndarray, stride: int, pad: int) -> np.ndarray:
    xp = _pad_input(x, pad)
    oc, _, kh, kw = w.shape
    oh = conv_out_size(x.shape[2], kh, stride, pad)
    ow = conv_out_size(x.shape[3], kw, stride, pad)
    if BACKEND == "numba":
        w2 = np.ascontiguousarray(w.reshape(oc, -1))
        out = _conv2d_forward_nb(xp, w2, kh, kw, stride, oh, ow)
        return out.reshape(x.shape[0], oc, oh, ow)
    return conv2d_forward_np(xp, w, stride, oh, ow)


def conv2d_backward_input(g: np.ndarray, w: np.ndarray, x_shape: tuple, stride: int, pad: int) -> np.ndarray:
    hp = x_shape[2] + 2 * pad
    wp = x_shape[3] + 2 * pad
    g = np.ascontiguousarray(g)
    oc, ic, kh, kw = w.shape
    if BACKEND == "numba":
        n, _, oh, ow = g.shape
        w2t = np.ascontiguousarray(w.reshape(oc, -1).T)
        g2 = g.reshape(n, oc, oh * ow)
        dxp = _conv2d_backward_input_nb(g2, w2t, ic, kh, kw, stride, hp, wp, oh, ow)
    else:
        dxp = conv2d_backward_input_np(g, w, stride, hp, wp)
    if pad == 0:
        return dxp
    return np.ascontiguousarray(dxp[:, :, pad : pad + x_shape[2], pad : pad + x_shape[3]])


def conv2d_backward_weight(g: np.ndarray, x: np.ndarray, w_shape: tuple, stride: int, pad: int) -> np.ndarray:
    xp = _pad_input(x, pad)
    g = np.ascontiguousarray(g)
    kh, kw = w_shape[2], w_shape[3]
    if BACKEND == "numba":
        n, oc, oh, ow = g.shape
        g2 = g.reshape(n, oc, oh * ow)
        dw2 = _conv2d_backward_weight_nb(g2, xp, kh, kw, stride, oh, ow)
        return dw2.reshape(w_shape)
    return conv2d_backward_weight_np(g, xp, kh, kw, stride)
