"""Pure-numpy conv2d kernels (im2col / offset-scatter), the fallback backend.

Patch isolation only: patches are gathered per output position and dotted
with the kernel, which keeps space linear in the input size (times the
constant m*m factor). No Toeplitz matrix is ever materialized.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def _out_hw(H, W, m, stride):
    return (H - m) // stride + 1, (W - m) // stride + 1


def im2col(x, m, stride):
    """[B,C,H,W] -> patch matrix [B, oh*ow, C*m*m] (patch layout c-major, then row, col)."""
    win = sliding_window_view(x, (m, m), axis=(2, 3))[:, :, ::stride, ::stride]
    B, C, oh, ow = win.shape[:4]
    return win.transpose(0, 2, 3, 1, 4, 5).reshape(B, oh * ow, C * m * m), oh, ow


def conv_forward(x, w, bias, stride):
    """x [B,C,H,W], w [C,O,m,m], bias [O] -> [B,O,oh,ow]."""
    C, O, m, _ = w.shape
    cols, oh, ow = im2col(x, m, stride)
    wmat = w.transpose(0, 2, 3, 1).reshape(C * m * m, O)
    out = cols @ wmat + bias
    return out.reshape(x.shape[0], oh, ow, O).transpose(0, 3, 1, 2)


def conv_grad_weights(x, gz, m, stride):
    """Gradients w.r.t. kernel and bias. gz [B,O,oh,ow] -> ([C,O,m,m], [O]).

    The kernel size m is not recoverable from the shapes when stride does
    not divide H - m (the trailing rows/cols are never visited), so it is
    an explicit argument.
    """
    O = gz.shape[1]
    C = x.shape[1]
    cols, oh, ow = im2col(x, m, stride)
    gz_mat = gz.transpose(0, 2, 3, 1).reshape(x.shape[0], oh * ow, O)
    gw = np.einsum("bpk,bpo->ko", cols, gz_mat)
    gb = gz.sum(axis=(0, 2, 3))
    return gw.reshape(C, m, m, O).transpose(0, 3, 1, 2), gb


def conv_grad_input(w, gz, H, W, stride):
    """Gradient w.r.t. the input map. w [C,O,m,m], gz [B,O,oh,ow] -> [B,C,H,W]."""
    C, O, m, _ = w.shape
    B, _, oh, ow = gz.shape
    gx = np.zeros((B, C, H, W))
    for i in range(m):
        for j in range(m):
            contrib = np.einsum("boyx,co->bcyx", gz, w[:, :, i, j])
            gx[:, :, i : i + stride * oh : stride, j : j + stride * ow : stride] += contrib
    return gx
