"""Pure-numpy ensemble integrators (fallback for the compiled ``_ckernels``).

Both functions advance their arrays in place with classical RK4 and share the
polynomial-coefficient convention of :mod:`qccphase.hamiltonian`.
"""
import numpy as np


def _forces(coef, q1, q2):
    a, b, w1, w2, c = coef
    f1 = -(a * q1 * q2 * q2 + b * q1 * q1 * q1 + w1 * q1 + c * q2)
    f2 = -(a * q1 * q1 * q2 + b * q2 * q2 * q2 + w2 * q2 + c * q1)
    return f1, f2


def _flow(coef, y):
    f1, f2 = _forces(coef, y[:, 0], y[:, 1])
    return np.stack([y[:, 2], y[:, 3], f1, f2], axis=1)


def flow_rk4(coef, gamma, dt, steps):
    """Advance ``gamma`` (n, 4) by ``steps`` RK4 steps of size ``dt``."""
    coef = tuple(float(v) for v in coef)
    y = gamma
    for _ in range(int(steps)):
        k1 = _flow(coef, y)
        k2 = _flow(coef, y + 0.5 * dt * k1)
        k3 = _flow(coef, y + 0.5 * dt * k2)
        k4 = _flow(coef, y + dt * k3)
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    gamma[...] = y


def _tangent(coef, y, m):
    a, b, w1, w2, c = coef
    q1, q2 = y[:, 0], y[:, 1]
    f1, f2 = _forces(coef, q1, q2)
    dy = np.stack([y[:, 2], y[:, 3], f1, f2], axis=1)
    v11 = a * q2 * q2 + 3.0 * b * q1 * q1 + w1
    v22 = a * q1 * q1 + 3.0 * b * q2 * q2 + w2
    v12 = 2.0 * a * q1 * q2 + c
    dm = np.empty_like(m)
    dm[:, 0:2, :] = m[:, 2:4, :]
    dm[:, 2, :] = -(v11[:, None] * m[:, 0, :] + v12[:, None] * m[:, 1, :])
    dm[:, 3, :] = -(v12[:, None] * m[:, 0, :] + v22[:, None] * m[:, 1, :])
    return dy, dm


def tangent_rk4(coef, gamma, M, dt, steps):
    """Advance phase points (n, 4) and stability matrices (n, 4, 4) jointly."""
    coef = tuple(float(v) for v in coef)
    y, m = gamma, M
    h = 0.5 * dt
    for _ in range(int(steps)):
        k1y, k1m = _tangent(coef, y, m)
        k2y, k2m = _tangent(coef, y + h * k1y, m + h * k1m)
        k3y, k3m = _tangent(coef, y + h * k2y, m + h * k2m)
        k4y, k4m = _tangent(coef, y + dt * k3y, m + dt * k3m)
        y = y + (dt / 6.0) * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
        m = m + (dt / 6.0) * (k1m + 2.0 * k2m + 2.0 * k3m + k4m)
    gamma[...] = y
    M[...] = m
