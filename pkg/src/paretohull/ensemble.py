"""Ensemble parameter storage and convex-hull interpolation.

The ensemble is an M x N matrix with one member parameter vector per
row. Interpolation maps a weighting on the M-simplex to the convex
combination of the rows.
"""

import struct

import numpy as np

from .simplex import check_weighting

# header: magic, then M and N as unsigned 64-bit little-endian
MATRIX_MAGIC = "PMLΘ1".encode("utf-8")


def check_parameter_matrix(theta):
    """Validate an M x N member matrix; returns it as float64."""
    theta = np.asarray(theta, dtype=np.float64)
    if theta.ndim != 2:
        raise ValueError("parameter matrix must be 2-D (members x parameters)")
    if theta.shape[0] < 2:
        raise ValueError("need at least two ensemble members")
    if not np.all(np.isfinite(theta)):
        raise ValueError("parameter matrix has non-finite entries")
    return theta


def interpolate(theta_matrix, alpha):
    """Convex combination alpha^T Theta of the ensemble members.

    ``alpha`` must be a weighting over the M members; the result is a
    parameter vector of length N inside the members' convex hull.
    """
    theta_matrix = np.asarray(theta_matrix, dtype=np.float64)
    alpha = check_weighting(alpha, dim=theta_matrix.shape[0])
    return alpha @ theta_matrix


def identity_task_weights(num_tasks):
    """Task-weight matrix for single-task members (M == T)."""
    return np.eye(num_tasks)


def effective_loss_weighting(alpha, task_weight_matrix):
    """Loss weights alpha^T W induced by interpolation weights alpha.

    With single-task members W is the identity and the interpolation
    weighting doubles as the loss weighting.
    """
    w = np.asarray(task_weight_matrix, dtype=np.float64)
    if w.ndim != 2:
        raise ValueError("task weight matrix must be 2-D (members x tasks)")
    for row in w:
        check_weighting(row)
    alpha = check_weighting(alpha, dim=w.shape[0])
    return alpha @ w


def save_parameter_matrix(path, theta_matrix):
    """Write members as flat binary: header then row-major float64 LE."""
    theta = check_parameter_matrix(theta_matrix)
    m, n = theta.shape
    with open(path, "wb") as fh:
        fh.write(MATRIX_MAGIC)
        fh.write(struct.pack("<QQ", m, n))
        fh.write(theta.astype("<f8").tobytes(order="C"))


def load_parameter_matrix(path):
    """Read a matrix written by :func:`save_parameter_matrix`."""
    with open(path, "rb") as fh:
        magic = fh.read(len(MATRIX_MAGIC))
        if magic != MATRIX_MAGIC:
            raise ValueError(f"{path}: not a parameter matrix file")
        header = fh.read(16)
        if len(header) != 16:
            raise ValueError(f"{path}: truncated header")
        m, n = struct.unpack("<QQ", header)
        payload = fh.read()
    expected = m * n * 8
    if len(payload) != expected:
        raise ValueError(f"{path}: expected {expected} payload bytes, got {len(payload)}")
    theta = np.frombuffer(payload, dtype="<f8").reshape(m, n)
    return check_parameter_matrix(theta)
