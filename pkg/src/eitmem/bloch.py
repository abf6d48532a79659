"""Rotating-frame Bloch equations for the four-level lambda system.

The density matrix evolves as

    d(rho)/dt = -(i/hbar)[H, rho] + relaxation

with the relaxation entering element-wise: every off-diagonal coherence is
damped at its rate gamma_nm from ``coherence_dephasing``, excited populations
decay at Gamma_n, and ground populations collect the branching feed from
``branching_rates``.

Rotating frame.  With the probe at omega_p = omega_14 + delta_p and the
coupling at omega_c = omega_24 + delta_c, the frame rotates level 3 and 4 at
omega_p against level 1, and level 2 at omega_p - omega_c.  The transformed
(slowly varying) coherences then obey an equation with the time-independent
Hamiltonian (units of hbar, angular rad/s)

    H_eff = diag(0, -(delta_p - delta_c), -(delta_p + omega_43), -delta_p)
            - 1/2 * [ Omega_13 |1><3| + Omega_14 |1><4|
                    + Omega_23 |2><3| + Omega_24 |2><4| + h.c. ]

with Rabi frequencies Omega = 2*mu*E/hbar.  Level 4 is detuned by delta_p
from level 1 and by delta_c from level 2; level 3 picks up the extra
hyperfine offset omega_43 in both ladders; the 1-2 ground coherence rotates
at the two-photon detuning delta_p - delta_c.  Counter-rotating terms and
cross-couplings (probe on 2-n, coupling on 1-n) are dropped; they are
detuned by the ~3 GHz ground splitting.

The generator G is the linear operator acting on the row-major vectorization
of rho.  Its action preserves the trace and maps Hermitian matrices to
Hermitian matrices, which lets time evolution run in a 16-component real
parametrization (4 populations + re/im of the 6 upper-triangle coherences)
where Hermiticity is exact by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import kernels
from .atoms import AtomSpec, CellSpec, DomainError, FieldSpec, branching_rates, \
    coherence_dephasing, rabi_frequency

__all__ = [
    "DensityMatrix", "Generator", "EvolutionResult", "SolverError",
    "DegenerateSteadyStateError", "StiffnessError", "build_generator",
    "steady_state", "steady_state_sweep", "mixture_response_sweep",
    "time_evolve", "evolve_constant", "probe_absorption",
]

N_LEVELS = 4
N_VEC = N_LEVELS * N_LEVELS

#: Upper-triangle coherence pairs in the order used by the real parametrization.
_COHERENCE_PAIRS = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))


class SolverError(RuntimeError):
    """A solver produced an invalid state or failed to converge."""


class DegenerateSteadyStateError(SolverError):
    """The stationary set is not a single state; no unique steady state exists."""


class StiffnessError(SolverError):
    """The requested time grid needs more fixed steps than allowed."""


@dataclass(frozen=True)
class DensityMatrix:
    """Validated 4x4 density matrix (Hermitian, unit trace, positive)."""

    matrix: np.ndarray

    TRACE_TOL = 1e-9
    HERMITICITY_TOL = 1e-10
    EIGENVALUE_FLOOR = -1e-8

    def __post_init__(self) -> None:
        mat = np.asarray(self.matrix, dtype=complex)
        if mat.shape != (N_LEVELS, N_LEVELS):
            raise SolverError(f"density matrix must be 4x4, got {mat.shape}")
        object.__setattr__(self, "matrix", mat)
        self.validate()

    def validate(self) -> None:
        mat = self.matrix
        if not np.all(np.isfinite(mat.view(float))):
            raise SolverError("density matrix contains non-finite entries")
        herm = np.abs(mat - mat.conj().T).max()
        if herm > self.HERMITICITY_TOL:
            raise SolverError(f"density matrix not Hermitian: max |rho - rho^+| = {herm:.3e}")
        trace_err = abs(mat.trace() - 1.0)
        if trace_err > self.TRACE_TOL:
            raise SolverError(f"density matrix trace deviates from 1 by {trace_err:.3e}")
        eig_min = scipy.linalg.eigvalsh(mat).min()
        if eig_min < self.EIGENVALUE_FLOOR:
            raise SolverError(f"density matrix not positive: min eigenvalue {eig_min:.3e}")

    @classmethod
    def ground_mixture(cls) -> "DensityMatrix":
        """Equal incoherent mixture of the two ground levels."""
        return cls(np.diag([0.5, 0.5, 0.0, 0.0]).astype(complex))

    @property
    def populations(self) -> np.ndarray:
        return self.matrix.diagonal().real.copy()

    @property
    def sigma12(self) -> complex:
        return complex(self.matrix[0, 1])

    @property
    def sigma14(self) -> complex:
        return complex(self.matrix[0, 3])


def probe_absorption(rho) -> float:
    """Probe absorption observable: -Im(sigma_14), positive means absorption."""
    mat = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho)
    return float(-mat[0, 3].imag)


# --- vectorization helpers -------------------------------------------------

def _vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho, dtype=complex).reshape(N_VEC)


def _unvec(v: np.ndarray) -> np.ndarray:
    return np.asarray(v, dtype=complex).reshape(N_LEVELS, N_LEVELS)


def _to_real(rho: np.ndarray) -> np.ndarray:
    """Hermitian 4x4 -> 16 real parameters (populations, then re/im coherences)."""
    u = np.empty(N_VEC)
    u[:N_LEVELS] = rho.diagonal().real
    for k, (n, m) in enumerate(_COHERENCE_PAIRS):
        u[N_LEVELS + 2 * k] = rho[n, m].real
        u[N_LEVELS + 2 * k + 1] = rho[n, m].imag
    return u


def _from_real(u: np.ndarray) -> np.ndarray:
    rho = np.zeros((N_LEVELS, N_LEVELS), dtype=complex)
    for n in range(N_LEVELS):
        rho[n, n] = u[n]
    for k, (n, m) in enumerate(_COHERENCE_PAIRS):
        val = u[N_LEVELS + 2 * k] + 1j * u[N_LEVELS + 2 * k + 1]
        rho[n, m] = val
        rho[m, n] = val.conjugate()
    return rho


def _real_form(gen_matrix: np.ndarray) -> np.ndarray:
    """16x16 real matrix acting on the Hermitian parametrization.

    Built column by column by pushing each basis direction through the complex
    generator; valid because the generator maps Hermitian to Hermitian.
    """
    m = np.empty((N_VEC, N_VEC))
    for k in range(N_VEC):
        u = np.zeros(N_VEC)
        u[k] = 1.0
        drho = _unvec(gen_matrix @ _vec(_from_real(u)))
        m[:, k] = _to_real(0.5 * (drho + drho.conj().T))
    return m


def _commutator_superop(h: np.ndarray) -> np.ndarray:
    """Superoperator of -i[H, .] on row-major vec(rho)."""
    eye = np.eye(N_LEVELS)
    return -1j * (np.kron(h, eye) - np.kron(eye, h.T))


# --- generator -------------------------------------------------------------

@dataclass(frozen=True)
class Generator:
    """Linear evolution operator on vec(rho), split by field for envelopes.

    ``matrix`` is the full cw operator (both envelopes at 1); ``base`` holds
    the field-independent part (detunings + relaxation) and ``probe_part`` /
    ``coupling_part`` scale linearly with the respective field envelope.
    ``detuning_derivative`` is d(matrix)/d(delta_p), used by spectrum sweeps.
    """

    matrix: np.ndarray
    base: np.ndarray
    probe_part: np.ndarray
    coupling_part: np.ndarray
    detuning_derivative: np.ndarray
    delta_p: float
    delta_c: float
    variant: str
    rabi: dict
    branching: dict
    gamma12: float
    meta: dict = field(default_factory=dict)

    def apply(self, rho: np.ndarray) -> np.ndarray:
        """d(rho)/dt for a 4x4 matrix rho."""
        return _unvec(self.matrix @ _vec(rho))

    def with_probe_detuning(self, delta_p: float) -> np.ndarray:
        """Full 16x16 matrix with the probe detuning replaced by ``delta_p``."""
        return self.matrix + (delta_p - self.delta_p) * self.detuning_derivative

    def real_parts(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(base, probe, coupling) as real matrices on the Hermitian parametrization."""
        return (_real_form(self.base), _real_form(self.probe_part),
                _real_form(self.coupling_part))

    def trace_violation(self) -> float:
        """Max |d(trace)/dt| response over unit basis directions; ~0 for a valid build."""
        trace_row = np.zeros(N_VEC)
        trace_row[:: N_LEVELS + 1] = 1.0
        scale = max(np.abs(self.matrix).max(), 1.0)
        return float(np.abs(trace_row @ self.matrix).max() / scale)


def build_generator(atom: AtomSpec, cell: CellSpec, coupling: FieldSpec,
                    probe: FieldSpec) -> Generator:
    """Assemble the rotating-frame generator for one atom/cell/field setting."""
    if probe.role != "probe" or coupling.role != "coupling":
        raise DomainError("build_generator expects (coupling, probe) FieldSpecs by role")

    delta_p = probe.detuning
    delta_c = coupling.detuning

    rabi = {
        (1, 3): rabi_frequency(atom.dipole_13, probe.amplitude),
        (1, 4): rabi_frequency(atom.dipole_14, probe.amplitude),
        (2, 3): rabi_frequency(atom.dipole_23, coupling.amplitude),
        (2, 4): rabi_frequency(atom.dipole_24, coupling.amplitude),
    }

    # Diagonal of H_eff: level 2 at -(delta_p - delta_c), level 4 at -delta_p,
    # level 3 offset a further omega_43 below level 4.
    h_diag = np.diag([
        0.0,
        -(delta_p - delta_c),
        -(delta_p + atom.excited_splitting),
        -delta_p,
    ]).astype(complex)

    # Field couplings: each RWA matrix element is -mu*E = -hbar*Omega/2.
    h_probe = np.zeros((N_LEVELS, N_LEVELS), dtype=complex)
    h_probe[0, 2] = h_probe[2, 0] = -0.5 * rabi[(1, 3)]
    h_probe[0, 3] = h_probe[3, 0] = -0.5 * rabi[(1, 4)]
    h_coupling = np.zeros((N_LEVELS, N_LEVELS), dtype=complex)
    h_coupling[1, 2] = h_coupling[2, 1] = -0.5 * rabi[(2, 3)]
    h_coupling[1, 3] = h_coupling[3, 1] = -0.5 * rabi[(2, 4)]

    # Relaxation superoperator, element by element:
    #   d(rho_nm)/dt -= gamma_nm * rho_nm            (n != m)
    #   d(rho_nn)/dt -= Gamma_n * rho_nn             (excited n)
    #   d(rho_mm)/dt += Gamma_mn * rho_nn            (feed into ground m)
    gammas = coherence_dephasing(atom, cell)
    branching = branching_rates(atom)
    relax = np.zeros((N_VEC, N_VEC), dtype=complex)
    for n in range(N_LEVELS):
        for m in range(N_LEVELS):
            if n != m:
                idx = n * N_LEVELS + m
                relax[idx, idx] -= gammas[(n + 1, m + 1)]
    for n, gamma_n in ((2, atom.gamma3), (3, atom.gamma4)):
        idx_n = n * N_LEVELS + n
        relax[idx_n, idx_n] -= gamma_n
        for m in (0, 1):
            idx_m = m * N_LEVELS + m
            relax[idx_m, idx_n] += branching[(m + 1, n + 1)]

    base = _commutator_superop(h_diag) + relax
    probe_part = _commutator_superop(h_probe)
    coupling_part = _commutator_superop(h_coupling)

    # d(H_diag)/d(delta_p) = diag(0, -1, -1, -1); relaxation is detuning-free.
    ddp = _commutator_superop(np.diag([0.0, -1.0, -1.0, -1.0]).astype(complex))

    variant = "three-level" if rabi[(1, 3)] == 0.0 and rabi[(2, 3)] == 0.0 else "four-level"
    meta = {
        "atom": atom.name,
        "cell": cell.name,
        "probe_amplitude_v_m": probe.amplitude,
        "coupling_amplitude_v_m": coupling.amplitude,
        "delta_p_rad_s": delta_p,
        "delta_c_rad_s": delta_c,
    }
    return Generator(
        matrix=base + probe_part + coupling_part,
        base=base,
        probe_part=probe_part,
        coupling_part=coupling_part,
        detuning_derivative=ddp,
        delta_p=delta_p,
        delta_c=delta_c,
        variant=variant,
        rabi=rabi,
        branching=branching,
        gamma12=gammas[(1, 2)],
        meta=meta,
    )


# --- steady state ----------------------------------------------------------

def _reduction_plan(gen: Generator) -> tuple[np.ndarray, list[int]]:
    """Indices of vec(rho) kept in the steady-state solve, plus active levels.

    Levels that are structurally disconnected are pinned to zero exactly:
    an excited level no field touches stays empty (it only decays), and a
    ground level with no field coupling and no branching feed from any driven
    excited level holds whatever population it starts with, which makes the
    stationary set degenerate unless it is pinned.  Pinning an empty level's
    coherences is exact by positivity (|rho_nm| <= sqrt(rho_nn * rho_mm)).
    """
    live_excited = [n for n in (3, 4) if gen.rabi[(1, n)] != 0.0 or gen.rabi[(2, n)] != 0.0]
    active = []
    for k in (1, 2):
        drives = any(gen.rabi[(k, n)] != 0.0 for n in (3, 4))
        fed = any(gen.branching[(k, n)] > 0.0 for n in live_excited)
        if drives or fed:
            active.append(k)
    active += live_excited
    if not any(k in active for k in (1, 2)):
        raise DegenerateSteadyStateError(
            "non-unique steady state: no field couples any ground level "
            "(both fields off or all relevant dipoles zero)")
    probe_off = all(gen.rabi[(1, n)] == 0.0 for n in (3, 4))
    coupling_off = all(gen.rabi[(2, n)] == 0.0 for n in (3, 4))
    if 1 in active and 2 in active and gen.gamma12 == 0.0 and (probe_off or coupling_off):
        raise DegenerateSteadyStateError(
            "non-unique steady state: undamped ground coherence "
            "(gamma_12 = 0) with a single driving field")
    keep = [n * N_LEVELS + m for n in range(N_LEVELS) for m in range(N_LEVELS)
            if (n + 1) in active and (m + 1) in active]
    return np.asarray(keep, dtype=int), active


def _constrained_system(matrix: np.ndarray, keep: np.ndarray,
                        active: list[int]) -> tuple[np.ndarray, np.ndarray]:
    """Reduced matrix with the first active population row replaced by the trace row."""
    reduced = matrix[np.ix_(keep, keep)].copy()
    diag_positions = [i for i, idx in enumerate(keep)
                      if idx % (N_LEVELS + 1) == 0]
    rhs = np.zeros(len(keep), dtype=complex)
    row = diag_positions[0]
    reduced[row, :] = 0.0
    reduced[row, diag_positions] = 1.0
    rhs[row] = 1.0
    return reduced, rhs


def steady_state(gen: Generator) -> DensityMatrix:
    """Unique stationary state of the generator, by constrained dense LU.

    One population equation is replaced by the unit-trace constraint.  The
    result is validated (residual, trace, Hermiticity, positivity); a singular
    or inconsistent system raises DegenerateSteadyStateError rather than
    returning an arbitrary member of a stationary family.
    """
    keep, active = _reduction_plan(gen)
    reduced, rhs = _constrained_system(gen.matrix, keep, active)
    try:
        solution = np.linalg.solve(reduced, rhs)
    except np.linalg.LinAlgError as exc:
        raise DegenerateSteadyStateError(
            f"non-unique steady state: constrained system is singular ({exc})") from None
    vec = np.zeros(N_VEC, dtype=complex)
    vec[keep] = solution
    return _validated_steady_state(gen, vec)


def steady_state_sweep(gen: Generator, delta_ps) -> np.ndarray:
    """Steady states for many probe detunings at once.

    Returns the stacked 4x4 matrices, one per entry of ``delta_ps`` (angular
    rad/s).  Same constrained-LU construction and validation as
    ``steady_state``, with the linear algebra batched over the grid; failures
    are re-raised naming the offending detuning.
    """
    delta_ps = np.asarray(delta_ps, dtype=float)
    keep, active = _reduction_plan(gen)
    offsets = delta_ps - gen.delta_p
    sub = np.ix_(keep, keep)
    raw = (gen.matrix[sub][None, :, :]
           + offsets[:, None, None] * gen.detuning_derivative[sub][None, :, :])

    diag_positions = [i for i, idx in enumerate(keep) if idx % (N_LEVELS + 1) == 0]
    row = diag_positions[0]
    constrained = raw.copy()
    constrained[:, row, :] = 0.0
    constrained[:, row, diag_positions] = 1.0
    rhs = np.zeros((len(delta_ps), len(keep)), dtype=complex)
    rhs[:, row] = 1.0

    try:
        # Explicit column axis: a 2-d right-hand side would be read as a
        # single matrix rather than a stack of vectors.
        solutions = np.linalg.solve(constrained, rhs[:, :, None])[:, :, 0]
    except np.linalg.LinAlgError:
        solutions = None
    out = np.empty((len(delta_ps), N_LEVELS, N_LEVELS), dtype=complex)
    if solutions is not None:
        # Residual against the unconstrained operator; reduction is exact, so
        # the reduced residual equals the full one.
        scale = np.linalg.norm(gen.matrix)
        residuals = (np.linalg.norm(np.einsum("nij,nj->ni", raw, solutions), axis=1)
                     / (scale * np.linalg.norm(solutions, axis=1)))
        for i in range(len(delta_ps)):
            if residuals[i] > 1e-10:
                solutions = None
                break
            vec = np.zeros(N_VEC, dtype=complex)
            vec[keep] = solutions[i]
            rho = _unvec(vec)
            rho = 0.5 * (rho + rho.conj().T)
            try:
                out[i] = DensityMatrix(rho).matrix
            except SolverError:
                solutions = None
                break
    if solutions is None:
        # Recover point by point so the error names the detuning responsible.
        for i, dp in enumerate(delta_ps):
            shifted = _shift_probe_detuning(gen, float(dp))
            try:
                out[i] = steady_state(shifted).matrix
            except SolverError as exc:
                raise type(exc)(
                    f"{exc} (at probe detuning {dp / (2 * math.pi)!r} Hz)") from None
    return out


def mixture_response_sweep(gen: Generator, delta_ps) -> np.ndarray:
    """Coherence response of the unpolarized ground mixture, per probe detuning.

    Populations are pinned at the equal ground mixture and only the coherence
    sector is solved to its quasi-steady value.  This models a reference trace
    taken with a single weak field: optical coherences damp out within
    nanoseconds of optical lifetime, while repolarizing the ground levels by
    optical pumping takes many orders of magnitude longer.  The model has no
    repopulation path between the ground levels, so its true cw limit under a
    single field is complete transparency, which no finite-time trace observes.

    Returns stacked 4x4 matrices.  These are linear-response objects rather
    than states: with the populations pinned, positivity bounds on the driven
    coherences do not apply.
    """
    delta_ps = np.asarray(delta_ps, dtype=float)
    diag = np.arange(N_LEVELS) * (N_LEVELS + 1)
    off = np.asarray([k for k in range(N_VEC) if k not in diag])
    p0 = _vec(DensityMatrix.ground_mixture().matrix)[diag]

    # The detuning derivative is a commutator with a diagonal matrix, hence
    # diagonal in vec space: only the coherence block shifts with delta_p and
    # the population-to-coherence drive stays constant over the sweep.
    block = gen.matrix[np.ix_(off, off)]
    shift = gen.detuning_derivative[np.ix_(off, off)]
    source = gen.matrix[np.ix_(off, diag)] @ p0
    offsets = delta_ps - gen.delta_p
    stacked = block[None, :, :] + offsets[:, None, None] * shift[None, :, :]
    rhs = np.broadcast_to(-source, (len(delta_ps), len(off))).copy()
    try:
        coherences = np.linalg.solve(stacked, rhs[:, :, None])[:, :, 0]
    except np.linalg.LinAlgError as exc:
        raise DegenerateSteadyStateError(
            f"coherence sector is singular ({exc}); an undamped ground "
            "coherence has no quasi-steady response") from None

    out = np.empty((len(delta_ps), N_LEVELS, N_LEVELS), dtype=complex)
    for i in range(len(delta_ps)):
        vec = np.zeros(N_VEC, dtype=complex)
        vec[diag] = p0
        vec[off] = coherences[i]
        rho = _unvec(vec)
        out[i] = 0.5 * (rho + rho.conj().T)
    return out


def _shift_probe_detuning(gen: Generator, delta_p: float) -> Generator:
    """Copy of the generator re-anchored at a new probe detuning."""
    shift = delta_p - gen.delta_p
    return Generator(
        matrix=gen.matrix + shift * gen.detuning_derivative,
        base=gen.base + shift * gen.detuning_derivative,
        probe_part=gen.probe_part,
        coupling_part=gen.coupling_part,
        detuning_derivative=gen.detuning_derivative,
        delta_p=delta_p,
        delta_c=gen.delta_c,
        variant=gen.variant,
        rabi=gen.rabi,
        branching=gen.branching,
        gamma12=gen.gamma12,
        meta={**gen.meta, "delta_p_rad_s": delta_p},
    )


def _validated_steady_state(gen: Generator, vec: np.ndarray) -> DensityMatrix:
    norm = np.linalg.norm(vec)
    if not np.all(np.isfinite(vec.view(float))) or norm > 1e3:
        raise DegenerateSteadyStateError(
            "non-unique steady state: solution norm blew up, the constrained "
            "system is numerically singular")
    residual = np.linalg.norm(gen.matrix @ vec) / (np.linalg.norm(gen.matrix) * norm)
    if residual > 1e-10:
        raise DegenerateSteadyStateError(
            f"steady-state residual {residual:.3e} exceeds 1e-10; "
            "the stationary set is degenerate or ill-conditioned")
    rho = _unvec(vec)
    rho = 0.5 * (rho + rho.conj().T)  # scrub roundoff asymmetry, checked below
    try:
        return DensityMatrix(rho)
    except SolverError as exc:
        raise SolverError(f"steady state failed validation: {exc}") from None


# --- time evolution --------------------------------------------------------

#: Fixed-step safety factor: step <= 1 / (50 * fastest rate in the generator).
STEP_RATE_FACTOR = 50.0

#: Hard cap on total RK4 substeps per time_evolve call.
MAX_SUBSTEPS = 20_000_000

#: Substeps per kernel invocation; bounds the envelope scratch arrays.
_CHUNK = 1 << 17


@dataclass(frozen=True)
class EvolutionResult:
    """Trajectory on the requested grid: times (s) and stacked 4x4 matrices."""

    times: np.ndarray
    states: np.ndarray

    def final(self) -> DensityMatrix:
        return DensityMatrix(self.states[-1])

    def observable(self, func) -> np.ndarray:
        return np.asarray([func(self.states[i]) for i in range(len(self.times))])


def _max_rate(parts: tuple[np.ndarray, np.ndarray, np.ndarray],
              env_peak_p: float, env_peak_c: float) -> float:
    a, b, c = parts
    return float(np.abs(a).max()
                 + abs(env_peak_p) * np.abs(b).max()
                 + abs(env_peak_c) * np.abs(c).max())


def _resolve_envelope(env, times: np.ndarray):
    """Normalize an envelope argument to a callable of time returning floats."""
    if env is None:
        return lambda t: np.ones_like(t)
    if callable(env):
        return lambda t: np.asarray(env(t), dtype=float)
    arr = np.asarray(env, dtype=float)
    if arr.shape != times.shape:
        raise DomainError(
            f"envelope array shape {arr.shape} does not match time grid {times.shape}")
    return lambda t: np.interp(t, times, arr)


def time_evolve(gen: Generator, rho0: DensityMatrix, times,
                probe_envelope=None, coupling_envelope=None,
                max_substeps: int = MAX_SUBSTEPS) -> EvolutionResult:
    """Propagate rho0 across ``times`` with fixed-step RK4.

    Envelopes scale the probe/coupling parts of the generator multiplicatively
    and may be callables of time or arrays on the grid (values are sampled at
    substep midpoints via linear interpolation in the array case).  The step
    is the grid spacing divided down until it also satisfies the rate bound
    1/(50 * max rate).  Raises StiffnessError when the total substep count
    would exceed ``max_substeps``.

    The state advances in the real Hermitian parametrization, so Hermiticity
    is exact and the trace is a linear invariant preserved by RK4 to roundoff.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or len(times) < 2:
        raise DomainError("times must be a 1-d grid with at least two points")
    if np.any(np.diff(times) <= 0.0):
        raise DomainError("times must be strictly increasing")

    env_p = _resolve_envelope(probe_envelope, times)
    env_c = _resolve_envelope(coupling_envelope, times)

    a, b, c = gen.real_parts()
    probe_samples = env_p(times)
    coupling_samples = env_c(times)
    rate = _max_rate((a, b, c),
                     float(np.abs(probe_samples).max()),
                     float(np.abs(coupling_samples).max()))
    h_max = 1.0 / (STEP_RATE_FACTOR * rate) if rate > 0.0 else np.inf

    spans = np.diff(times)
    # Each span gets its own integer substep count so grid points are hit exactly.
    steps_per_span = np.ceil(spans / np.minimum(h_max, spans)).astype(np.int64)
    total = int(steps_per_span.sum())
    if total > max_substeps:
        raise StiffnessError(
            f"grid needs {total} RK4 substeps at step <= {h_max:.3e} s, "
            f"over the limit of {max_substeps}; coarsen the grid or raise the cap")

    y = _to_real(rho0.matrix)
    states = np.empty((len(times), N_LEVELS, N_LEVELS), dtype=complex)
    states[0] = rho0.matrix
    for i, (t0, span, n_steps) in enumerate(zip(times[:-1], spans, steps_per_span)):
        h = span / n_steps
        done = 0
        while done < n_steps:
            n_chunk = min(int(n_steps - done), _CHUNK)
            # Envelope values at the RK4 sample nodes: start, midpoint, end
            # of every substep, i.e. half-step resolution plus the endpoint.
            nodes = t0 + (done + 0.5 * np.arange(2 * n_chunk + 1)) * h
            ep = np.ascontiguousarray(env_p(nodes))
            ec = np.ascontiguousarray(env_c(nodes))
            kernels.rk4_envelope_segment(a, b, c, y, h, n_chunk, ep, ec)
            done += n_chunk
        states[i + 1] = _from_real(y)
    result = EvolutionResult(times=times.copy(), states=states)
    result.final()  # validates Hermiticity/trace/positivity of the endpoint
    return result


def evolve_constant(gen: Generator, rho0: DensityMatrix, duration: float,
                    probe_on: bool = True, coupling_on: bool = True,
                    sample_times=None) -> EvolutionResult:
    """Exact propagation under constant envelopes via the matrix exponential.

    For piecewise-constant drive phases this is both faster and exact, so the
    fixed-step integrator is reserved for genuinely time-dependent envelopes.
    ``sample_times`` (offsets in [0, duration]) selects the output grid;
    default is the endpoint only.
    """
    if duration < 0.0:
        raise DomainError("duration must be non-negative")
    matrix = gen.base.copy()
    if probe_on:
        matrix = matrix + gen.probe_part
    if coupling_on:
        matrix = matrix + gen.coupling_part
    if sample_times is None:
        offsets = np.asarray([duration], dtype=float)
    else:
        offsets = np.asarray(sample_times, dtype=float)
        if np.any(offsets < 0.0) or np.any(offsets > duration * (1 + 1e-12)):
            raise DomainError("sample_times must lie within [0, duration]")

    real_mat = _real_form(matrix)
    states = np.empty((len(offsets), N_LEVELS, N_LEVELS), dtype=complex)
    y0 = _to_real(rho0.matrix)
    # One exponential per distinct spacing; consecutive equal gaps reuse it.
    order = np.argsort(offsets, kind="stable")
    y = y0
    prev_t = 0.0
    cache: dict[float, np.ndarray] = {}
    for j in order:
        gap = float(offsets[j]) - prev_t
        if gap > 0.0:
            step = cache.get(gap)
            if step is None:
                step = scipy.linalg.expm(real_mat * gap)
                cache[gap] = step
            y = step @ y
            trace = float(y[:N_LEVELS].sum())
            if abs(trace - 1.0) > 1e-6:
                raise SolverError(
                    f"propagation lost the unit trace (drift {abs(trace - 1.0):.3e})")
            # The exact dynamics preserves the trace; over long gaps the
            # squaring phase of expm drifts it by rounding (~1e-8 at 0.05 s),
            # so divide the noise back out rather than fail validation.
            y = y / trace
            prev_t = float(offsets[j])
        states[j] = _from_real(y)
    result = EvolutionResult(times=offsets.copy(), states=states)
    result.final()
    return result
