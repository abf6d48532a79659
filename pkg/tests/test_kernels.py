"""Compiled stepping kernel against the numpy fallback."""

import numpy as np
import pytest

from eitmem import kernels


def _random_workload(rng, n_steps, constant=False):
    a = rng.standard_normal((16, 16)) * 0.3
    b = rng.standard_normal((16, 16)) * 0.3
    c = rng.standard_normal((16, 16)) * 0.3
    y0 = rng.standard_normal(16)
    h = 1e-3
    nodes = 2 * n_steps + 1
    if constant:
        env_p = np.full(nodes, 0.7)
        env_c = np.full(nodes, 1.3)
    else:
        t = np.linspace(0.0, 1.0, nodes)
        env_p = 0.5 * (1.0 + np.sin(3.1 * t))
        env_c = np.exp(-t)
    return a, b, c, y0, h, env_p, env_c


def test_active_backend_is_a_known_backend():
    assert kernels.BACKEND in {"compiled", "python"}
    backends = kernels.load_backends()
    assert "python" in backends
    assert kernels.BACKEND in backends
    for mod in backends.values():
        assert callable(mod.rk4_envelope_segment)


@pytest.mark.parametrize("constant", [False, True])
def test_backends_agree_on_random_workloads(constant):
    backends = kernels.load_backends()
    if len(backends) < 2:
        pytest.skip("only one kernel backend importable")
    rng = np.random.default_rng(42 + constant)
    for _ in range(5):
        n_steps = int(rng.integers(3, 60))
        a, b, c, y0, h, env_p, env_c = _random_workload(rng, n_steps, constant)
        results = {}
        for name, mod in backends.items():
            y = y0.copy()
            mod.rk4_envelope_segment(a, b, c, y, h, n_steps, env_p, env_c)
            results[name] = y
        ref = results["python"]
        for name, y in results.items():
            assert np.max(np.abs(y - ref)) < 1e-14 * max(1.0, np.max(np.abs(ref))), name


def test_kernel_advances_in_place_and_returns_the_buffer():
    rng = np.random.default_rng(7)
    a, b, c, y0, h, env_p, env_c = _random_workload(rng, 10)
    y = y0.copy()
    out = kernels.rk4_envelope_segment(a, b, c, y, h, 10, env_p, env_c)
    assert out is y or np.shares_memory(np.asarray(out), y)
    assert not np.array_equal(y, y0)


def test_kernel_matches_dense_rk4_reference():
    # One hand-rolled RK4 sweep, independent of either backend's code path.
    rng = np.random.default_rng(11)
    n_steps = 25
    a, b, c, y0, h, env_p, env_c = _random_workload(rng, n_steps)
    y = y0.copy()
    kernels.rk4_envelope_segment(a, b, c, y, h, n_steps, env_p, env_c)

    ref = y0.copy()
    for i in range(n_steps):
        g0 = a + env_p[2 * i] * b + env_c[2 * i] * c
        gh = a + env_p[2 * i + 1] * b + env_c[2 * i + 1] * c
        g1 = a + env_p[2 * i + 2] * b + env_c[2 * i + 2] * c
        k1 = g0 @ ref
        k2 = gh @ (ref + 0.5 * h * k1)
        k3 = gh @ (ref + 0.5 * h * k2)
        k4 = g1 @ (ref + h * k3)
        ref = ref + (h / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
    assert y == pytest.approx(ref, rel=1e-13, abs=1e-15)


def test_trace_block_is_preserved_for_a_physical_generator(atom, ne_cell,
                                                           coupling_64, weak_probe):
    # The first four vec components are the populations; any trace-preserving
    # generator must keep their sum at 1 through the stepping kernel.
    from eitmem.bloch import DensityMatrix, build_generator, time_evolve

    gen = build_generator(atom, ne_cell, coupling_64, weak_probe)
    times = np.linspace(0.0, 2e-6, 9)
    traj = time_evolve(gen, DensityMatrix.ground_mixture(), times)
    traces = np.einsum("tii->t", traj.states).real
    assert traces == pytest.approx(np.ones(9), abs=1e-11)
