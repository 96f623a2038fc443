# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled conv2d kernels: direct patch loops, no intermediate patch matrix."""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def conv_forward(double[:, :, :, ::1] x, double[:, :, :, ::1] w,
                 double[::1] bias, int stride):
    """x [B,C,H,W], w [C,O,m,m], bias [O] -> [B,O,oh,ow]."""
    cdef Py_ssize_t B = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3]
    cdef Py_ssize_t O = w.shape[1], m = w.shape[2]
    cdef Py_ssize_t oh = (H - m) // stride + 1, ow = (W - m) // stride + 1
    out_arr = np.empty((B, O, oh, ow))
    cdef double[:, :, :, ::1] out = out_arr
    # [C,m,m,O] copy keeps the o accumulation contiguous and lets each input
    # value be loaded once instead of once per output channel
    cdef double[:, :, :, ::1] wt = np.ascontiguousarray(np.transpose(w, (0, 2, 3, 1)))
    accbuf_arr = np.empty(O)
    cdef double[::1] accbuf = accbuf_arr
    cdef Py_ssize_t b, o, y, xx, c, i, j
    cdef double xval
    with nogil:
        for b in range(B):
            for y in range(oh):
                for xx in range(ow):
                    for o in range(O):
                        accbuf[o] = bias[o]
                    for c in range(C):
                        for i in range(m):
                            for j in range(m):
                                xval = x[b, c, y * stride + i, xx * stride + j]
                                for o in range(O):
                                    accbuf[o] += xval * wt[c, i, j, o]
                    for o in range(O):
                        out[b, o, y, xx] = accbuf[o]
    return out_arr


def conv_grad_weights(double[:, :, :, ::1] x, double[:, :, :, ::1] gz, int m, int stride):
    """x [B,C,H,W], gz [B,O,oh,ow], kernel size m -> (gw [C,O,m,m], gb [O]).

    m cannot be inferred from the shapes: when stride does not divide H - m
    the trailing rows/cols are simply never visited.
    """
    cdef Py_ssize_t B = x.shape[0], C = x.shape[1], H = x.shape[2]
    cdef Py_ssize_t O = gz.shape[1], oh = gz.shape[2], ow = gz.shape[3]
    gw_arr = np.zeros((C, O, m, m))
    gb_arr = np.zeros(O)
    cdef double[:, :, :, ::1] gw = gw_arr
    cdef double[::1] gb = gb_arr
    cdef Py_ssize_t b, o, y, xx, c, i, j
    cdef double g
    with nogil:
        for b in range(B):
            for o in range(O):
                for y in range(oh):
                    for xx in range(ow):
                        g = gz[b, o, y, xx]
                        gb[o] += g
                        for c in range(C):
                            for i in range(m):
                                for j in range(m):
                                    gw[c, o, i, j] += x[b, c, y * stride + i, xx * stride + j] * g
    return gw_arr, gb_arr


def conv_grad_input(double[:, :, :, ::1] w, double[:, :, :, ::1] gz,
                    int H, int W, int stride):
    """w [C,O,m,m], gz [B,O,oh,ow] -> gx [B,C,H,W]."""
    cdef Py_ssize_t C = w.shape[0], O = w.shape[1], m = w.shape[2]
    cdef Py_ssize_t B = gz.shape[0], oh = gz.shape[2], ow = gz.shape[3]
    gx_arr = np.zeros((B, C, H, W))
    cdef double[:, :, :, ::1] gx = gx_arr
    cdef Py_ssize_t b, o, y, xx, c, i, j
    cdef double g
    with nogil:
        for b in range(B):
            for o in range(O):
                for y in range(oh):
                    for xx in range(ow):
                        g = gz[b, o, y, xx]
                        for c in range(C):
                            for i in range(m):
                                for j in range(m):
                                    gx[b, c, y * stride + i, xx * stride + j] += w[c, o, i, j] * g
    return gx_arr
