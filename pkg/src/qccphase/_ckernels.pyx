# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled ensemble integrators.

Same contract as ``_kernels_py``: classical RK4, arrays advanced in place,
potential given by the five polynomial coefficients ``(a, b, w1, w2, c)``.
Members are integrated one at a time so the 20-double state stays in registers.
"""
import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef inline void _flow(const double* k, const double* y, double* d) noexcept nogil:
    cdef double q1 = y[0], q2 = y[1]
    d[0] = y[2]
    d[1] = y[3]
    d[2] = -(k[0] * q1 * q2 * q2 + k[1] * q1 * q1 * q1 + k[2] * q1 + k[4] * q2)
    d[3] = -(k[0] * q1 * q1 * q2 + k[1] * q2 * q2 * q2 + k[3] * q2 + k[4] * q1)


cdef inline void _tangent(const double* k, const double* y, double* d) noexcept nogil:
    # y[0:4] phase point, y[4:20] stability matrix (row-major)
    cdef double q1 = y[0], q2 = y[1]
    cdef double v11 = k[0] * q2 * q2 + 3.0 * k[1] * q1 * q1 + k[2]
    cdef double v22 = k[0] * q1 * q1 + 3.0 * k[1] * q2 * q2 + k[3]
    cdef double v12 = 2.0 * k[0] * q1 * q2 + k[4]
    cdef int j
    _flow(k, y, d)
    for j in range(4):
        d[4 + j] = y[12 + j]
        d[8 + j] = y[16 + j]
        d[12 + j] = -(v11 * y[4 + j] + v12 * y[8 + j])
        d[16 + j] = -(v12 * y[4 + j] + v22 * y[8 + j])


cdef void _rk4(void (*f)(const double*, const double*, double*) noexcept nogil,
               const double* k, double* y, int size, double dt, long steps) noexcept nogil:
    cdef double k1[20]
    cdef double k2[20]
    cdef double k3[20]
    cdef double k4[20]
    cdef double tmp[20]
    cdef double h = 0.5 * dt, w = dt / 6.0
    cdef long s
    cdef int i
    for s in range(steps):
        f(k, y, k1)
        for i in range(size):
            tmp[i] = y[i] + h * k1[i]
        f(k, tmp, k2)
        for i in range(size):
            tmp[i] = y[i] + h * k2[i]
        f(k, tmp, k3)
        for i in range(size):
            tmp[i] = y[i] + dt * k3[i]
        f(k, tmp, k4)
        for i in range(size):
            y[i] = y[i] + w * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])


def flow_rk4(coef, double[:, ::1] gamma, double dt, long steps):
    cdef double k[5]
    cdef double y[4]
    cdef Py_ssize_t n, i
    cdef int j
    for j in range(5):
        k[j] = coef[j]
    with nogil:
        for n in range(gamma.shape[0]):
            for j in range(4):
                y[j] = gamma[n, j]
            _rk4(_flow, k, y, 4, dt, steps)
            for j in range(4):
                gamma[n, j] = y[j]


def tangent_rk4(coef, double[:, ::1] gamma, double[:, :, ::1] M, double dt, long steps):
    cdef double k[5]
    cdef double y[20]
    cdef Py_ssize_t n
    cdef int j, r
    if M.shape[0] != gamma.shape[0]:
        raise ValueError("gamma and M hold different ensemble sizes")
    for j in range(5):
        k[j] = coef[j]
    with nogil:
        for n in range(gamma.shape[0]):
            for j in range(4):
                y[j] = gamma[n, j]
                for r in range(4):
                    y[4 + 4 * j + r] = M[n, j, r]
            _rk4(_tangent, k, y, 20, dt, steps)
            for j in range(4):
                gamma[n, j] = y[j]
                for r in range(4):
                    M[n, j, r] = y[4 + 4 * j + r]
