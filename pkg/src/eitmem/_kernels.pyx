# cython: boundscheck=False, wraparound=False, cdivision=True
# cython: embedsignature=True
"""Compiled RK4 stepping kernel for the 16-component real Bloch state.

The state is the Hermitian parametrization of a 4x4 density matrix (4
populations + 6 complex coherences as re/im pairs), so one step is four 16x16
real matrix-vector products.  The generator is assembled on the fly as
a + ep*b + ec*c per stage, which keeps the call signature identical to the
numpy fallback in ``_kernels_py``.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND_NAME = "compiled"

DEF DIM = 16


cdef inline void _matvec(const double[:, ::1] a, const double[:, ::1] b,
                         const double[:, ::1] c, double ep, double ec,
                         const double* v, double* out) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double s
    for i in range(DIM):
        s = 0.0
        for j in range(DIM):
            s += (a[i, j] + ep * b[i, j] + ec * c[i, j]) * v[j]
        out[i] = s


def rk4_envelope_segment(const double[:, ::1] a, const double[:, ::1] b,
                         const double[:, ::1] c, double[::1] y, double h,
                         Py_ssize_t n_steps, const double[::1] env_p,
                         const double[::1] env_c):
    """Advance ``y`` in place through ``n_steps`` RK4 steps of dy/dt = G(t) y.

    G(t) = a + ep(t)*b + ec(t)*c; the envelopes are sampled at the
    2*n_steps+1 half-step nodes in ``env_p``/``env_c``.
    """
    cdef Py_ssize_t i, n
    cdef double half_h = 0.5 * h
    cdef double sixth_h = h / 6.0
    cdef double ep0, ec0, eph, ech, ep1, ec1
    cdef double[DIM] k1, k2, k3, k4, tmp, yy

    if y.shape[0] != DIM or a.shape[0] != DIM or a.shape[1] != DIM:
        raise ValueError("state must have 16 components and matrices must be 16x16")
    if env_p.shape[0] < 2 * n_steps + 1 or env_c.shape[0] < 2 * n_steps + 1:
        raise ValueError("envelope arrays must cover 2*n_steps+1 nodes")

    for i in range(DIM):
        yy[i] = y[i]

    with nogil:
        for n in range(n_steps):
            ep0 = env_p[2 * n]
            ec0 = env_c[2 * n]
            eph = env_p[2 * n + 1]
            ech = env_c[2 * n + 1]
            ep1 = env_p[2 * n + 2]
            ec1 = env_c[2 * n + 2]
            _matvec(a, b, c, ep0, ec0, yy, k1)
            for i in range(DIM):
                tmp[i] = yy[i] + half_h * k1[i]
            _matvec(a, b, c, eph, ech, tmp, k2)
            for i in range(DIM):
                tmp[i] = yy[i] + half_h * k2[i]
            _matvec(a, b, c, eph, ech, tmp, k3)
            for i in range(DIM):
                tmp[i] = yy[i] + h * k3[i]
            _matvec(a, b, c, ep1, ec1, tmp, k4)
            for i in range(DIM):
                yy[i] += sixth_h * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i])

    for i in range(DIM):
        y[i] = yy[i]
    return np.asarray(y)
