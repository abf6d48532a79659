"""Compare the compiled RK4 kernel against the pure-Python fallback.

Runs the storage write-phase workload (the hot path: a long fixed-step
envelope integration of the 16-real-parameter state) on both backends and
reports wall time plus the maximum state discrepancy.

Usage: python3 benchmarks/bench_kernels.py [n_steps]
"""

import sys
import time

import numpy as np

from eitmem import default_rb85_d1, load_cell, FieldSpec, build_generator
from eitmem.atoms import intensity_of_field
from eitmem.bloch import DensityMatrix, _to_real
from eitmem.kernels import load_backends


def _workload(n_steps: int):
    atom = default_rb85_d1()
    cell = load_cell("ne-5torr")
    coupling = FieldSpec.from_intensity("coupling", intensity_of_field(64.0))
    probe = FieldSpec.from_intensity("probe", 0.028)
    gen = build_generator(atom, cell, coupling, probe)
    a, b, c = gen.real_parts()
    y0 = _to_real(DensityMatrix.ground_mixture().matrix)
    h = 10e-6 / n_steps
    nodes = 0.5 * h * np.arange(2 * n_steps + 1)
    env_p = np.exp((np.minimum(nodes, 10e-6) - 10e-6) / 2.5e-6)
    env_c = np.ones_like(env_p)
    return a, b, c, y0, h, env_p, env_c


def main() -> int:
    n_steps = int(sys.argv[1]) if len(sys.argv) > 1 else 200_000
    backends = load_backends()
    if len(backends) < 2:
        print("only one backend available:", ", ".join(sorted(backends)))
    a, b, c, y0, h, env_p, env_c = _workload(n_steps)

    results = {}
    for name, module in sorted(backends.items()):
        y = y0.copy()
        start = time.perf_counter()
        module.rk4_envelope_segment(a, b, c, y, h, n_steps, env_p, env_c)
        elapsed = time.perf_counter() - start
        results[name] = (elapsed, y)
        rate = n_steps / elapsed
        print(f"{name:>10}: {elapsed:8.3f} s   {rate:12.0f} steps/s")

    if len(results) == 2:
        (t_compiled, y_compiled) = results["compiled"]
        (t_python, y_python) = results["python"]
        diff = float(np.max(np.abs(y_compiled - y_python)))
        print(f"{'speedup':>10}: {t_python / t_compiled:8.1f} x")
        print(f"{'max diff':>10}: {diff:8.2e}")
        if diff > 1e-12:
            print("WARNING: backends disagree beyond 1e-12")
            return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
