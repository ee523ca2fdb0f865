# -*- coding: utf-8 -*-
"""
Conv - 2-D convolution by im2col, with the adjoints needed for analytic gradients

Inputs are single images [c, h, w]; weights are [out, in, k, k]; zero padding.
"""
from typing import Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def out_size(size: int, kernel: int, stride: int, pad: int) -> int:
    return (size + 2 * pad - kernel) // stride + 1


def im2col(x: np.ndarray, kernel: int, stride: int, pad: int) -> Tuple[np.ndarray, int, int]:
    """(ho*wo, c*k*k) patch matrix, row-major over output sites"""
    c = x.shape[0]
    padded = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
    windows = sliding_window_view(padded, (kernel, kernel), axis=(1, 2))[:, ::stride, ::stride]
    ho, wo = windows.shape[1], windows.shape[2]
    cols = windows.transpose(1, 2, 0, 3, 4).reshape(ho * wo, c * kernel * kernel)
    return cols, ho, wo


def conv2d(x: np.ndarray, weight: np.ndarray, bias: np.ndarray, stride: int, pad: int) -> np.ndarray:
    out_channels, _, kernel, _ = weight.shape
    cols, ho, wo = im2col(x, kernel, stride, pad)
    out = cols @ weight.reshape(out_channels, -1).T + bias
    return out.T.reshape(out_channels, ho, wo)


def conv2d_input_grad(grad_out: np.ndarray, weight: np.ndarray, in_shape: Tuple[int, int, int],
                      stride: int, pad: int) -> np.ndarray:
    """dL/dx for dL/dy = grad_out"""
    out_channels, in_channels, kernel, _ = weight.shape
    c, h, w = in_shape
    ho, wo = grad_out.shape[1], grad_out.shape[2]
    dcols = grad_out.reshape(out_channels, ho * wo).T @ weight.reshape(out_channels, -1)
    dcols = dcols.reshape(ho, wo, in_channels, kernel, kernel)
    dpadded = np.zeros((c, h + 2 * pad, w + 2 * pad))
    for i in range(kernel):
        for j in range(kernel):
            dpadded[:, i:i + stride * ho:stride, j:j + stride * wo:stride] += dcols[:, :, :, i, j].transpose(2, 0, 1)
    return dpadded[:, pad:pad + h, pad:pad + w]


def conv2d_weight_grad(grad_out: np.ndarray, cols: np.ndarray, weight_shape: Tuple[int, ...]) -> Tuple[np.ndarray, np.ndarray]:
    """(dL/dW, dL/db) given the im2col matrix of the forward input"""
    out_channels = weight_shape[0]
    flat = grad_out.reshape(out_channels, -1)
    return (flat @ cols).reshape(weight_shape), flat.sum(axis=1)
