"""Pure-numpy fallback for the RK4 stepping kernel.

Same contract as the compiled extension ``eitmem._kernels``; used when the
extension is unavailable.  Kept dependency-free beyond numpy so the package
degrades to "slower", never to "broken".
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "python"


def rk4_envelope_segment(a, b, c, y, h, n_steps, env_p, env_c):
    """Advance ``y`` in place through ``n_steps`` RK4 steps of dy/dt = G(t) y.

    G(t) = a + ep(t)*b + ec(t)*c with all three 16x16 real matrices constant
    and the scalar envelopes sampled at the 2*n_steps+1 half-step nodes
    t0 + j*h/2 in ``env_p``/``env_c``.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    c = np.asarray(c)
    half_h = 0.5 * h
    sixth_h = h / 6.0

    env_const = env_p.min() == env_p.max() and env_c.min() == env_c.max()
    if env_const:
        g_start = g_half = g_end = a + env_p[0] * b + env_c[0] * c
    else:
        g_start = a + env_p[0] * b + env_c[0] * c

    for i in range(n_steps):
        if not env_const:
            j = 2 * i
            g_half = a + env_p[j + 1] * b + env_c[j + 1] * c
            g_end = a + env_p[j + 2] * b + env_c[j + 2] * c
        k1 = g_start @ y
        k2 = g_half @ (y + half_h * k1)
        k3 = g_half @ (y + half_h * k2)
        k4 = g_end @ (y + h * k3)
        y += sixth_h * (k1 + 2.0 * (k2 + k3) + k4)
        g_start = g_end
    return y
