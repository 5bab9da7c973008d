"""Reduced-space simulation, recovery of full states, measurement and regimes."""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg

from .amplitude import DEFAULT_TOLERANCE, N_STATE_CAP, DenseState, TolerancePolicy
from .backend import DDBackend, DenseBackend, make_backend
from .circuit import Circuit, Graph, SatFormula, apply_circuit, circuit_matrix, qaoa_problem_step
from .dd import DDState, dd_amplitude
from .errors import CapacityError, DegenerateOutcomeError, DimensionError, DomainError, RunTimeoutError
from .lumping import LumpingBasis, ReducedSystem, SubspaceSpec, construct_begin_hamiltonian, lump_krylov

MODES = ("reduced-dense", "reduced-dd", "full-dense", "full-dd")
#: Reduced runs are checked against a dense full simulation up to this size.
RECOVERY_CHECK_CAP = 10
DEFAULT_TIMEOUT_S = 500.0


def _as_backend_state(state, bk):
    if isinstance(state, np.ndarray):
        return bk.from_dense(state)
    if isinstance(bk, DDBackend):
        if isinstance(state, DDState) and state.manager is bk.manager:
            return state
        return bk.from_dense(state.to_dense())
    return state.to_dense()


@dataclass
class ReducedTrajectory:
    """``states[k]`` is ``U_hat^k L w0`` for the recorded steps."""

    steps: list[int]
    states: list[np.ndarray]
    leak: float
    outside_subspace: bool

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def simulate_reduced(rs: ReducedSystem, w0, steps: int, *, every_step: bool = False) -> ReducedTrajectory:
    """Iterate ``w_hat <- U_hat w_hat`` from ``L w0``.

    ``leak = |(I - P_L) w0|``; when it exceeds ``eps_norm`` the trajectory
    still describes ``L U^k w0`` but ``w0`` cannot be recovered from it, and
    ``outside_subspace`` is set.
    """
    if steps < 0:
        raise DomainError("steps must be nonnegative")
    bk = rs.basis.backend
    w0 = _as_backend_state(w0, bk)
    if w0.n != rs.n:
        raise DimensionError(f"initial state has n={w0.n}, reduced system has n={rs.n}")
    w_hat = rs.basis.coefficients(w0)
    leak = bk.norm(rs.basis.residual(w0))
    recorded_steps = [0]
    recorded = [w_hat.copy()]
    for k in range(1, steps + 1):
        w_hat = rs.U_hat @ w_hat
        if every_step:
            recorded_steps.append(k)
            recorded.append(w_hat.copy())
    if not every_step and steps > 0:
        recorded_steps = [steps]
        recorded = [w_hat]
    return ReducedTrajectory(recorded_steps, recorded, leak, leak > rs.tol.eps_norm)


def recover_full(rs: ReducedSystem, w_hat) -> object:
    """``L^dagger w_hat = sum_i w_hat[i] v_i`` on the basis' backend."""
    w_hat = np.asarray(w_hat, dtype=np.complex128).reshape(-1)
    if w_hat.shape[0] != rs.d:
        raise DimensionError(f"reduced vector has length {w_hat.shape[0]}, expected d={rs.d}")
    return rs.basis.combine(w_hat)


@dataclass
class MeasurementResult:
    projector: str
    probability: float
    _post: object = field(repr=False, default=None)
    _tol: TolerancePolicy = field(repr=False, default=DEFAULT_TOLERANCE)

    @property
    def post_state(self):
        """``P|z> / sqrt(pi)``; undefined when the outcome has zero probability."""
        if self.probability <= self._tol.eps_norm:
            raise DegenerateOutcomeError(f"outcome {self.projector} has probability {self.probability:.3g}")
        return self._post


def measure_projector(state, target, tol: TolerancePolicy = DEFAULT_TOLERANCE) -> tuple[MeasurementResult, MeasurementResult]:
    """Outcomes ``P`` and ``I - P`` where ``P`` projects onto ``target``'s span.

    ``target`` is a :class:`LumpingBasis` or a single state ``w`` (``P = |w><w|``
    after normalization).
    """
    if isinstance(target, LumpingBasis):
        bk = target.backend
        basis = target
    else:
        bk = make_backend("dd" if isinstance(state, DDState) else "dense", tol)
        if isinstance(state, DDState):
            bk.manager = state.manager
        w = _as_backend_state(target, bk)
        nw = bk.norm(w)
        if nw <= tol.eps_norm:
            raise DomainError("projector state is zero")
        basis = LumpingBasis(w.n, [bk.scale(1.0 / nw, w)], bk)
    z = _as_backend_state(state, bk)
    if z.n != basis.n:
        raise DimensionError(f"state has n={z.n}, projector has n={basis.n}")
    if abs(bk.norm(z) - 1.0) > tol.eps_norm:
        raise DomainError("measured state must be normalized")
    coeffs = basis.coefficients(z)
    inside = basis.combine(coeffs)
    outside = bk.axpy(-1.0, inside, z)
    pi_in = float(np.sum(np.abs(coeffs) ** 2))
    pi_out = bk.norm(outside) ** 2
    post_in = bk.scale(1.0 / math.sqrt(pi_in), inside) if pi_in > tol.eps_norm else None
    post_out = bk.scale(1.0 / math.sqrt(pi_out), outside) if pi_out > tol.eps_norm else None
    return (
        MeasurementResult("P", pi_in, post_in, tol),
        MeasurementResult("I-P", pi_out, post_out, tol),
    )


def _nonzero_support(state):
    if isinstance(state, DDState):
        pairs = list(state.manager.nonzero_paths(state.root))
        idx = np.array([i for i, _ in pairs], dtype=np.int64)
        amps = np.array([a for _, a in pairs], dtype=np.complex128)
        return idx, amps
    amps = state.to_dense().amplitudes
    return np.arange(amps.shape[0]), amps


def qaoa_expectation(state, problem: SatFormula | Graph) -> float:
    """``<w|H_P|w> = sum_x nu(x) |w_x|^2``."""
    if state.n != problem.n:
        raise DimensionError(f"state has n={state.n}, problem has n={problem.n}")
    idx, amps = _nonzero_support(state)
    if idx.shape[0] == 0:
        return 0.0
    return float(np.sum(problem.values(idx) * np.abs(amps) ** 2))


def probability_of(state, indices) -> float:
    """Total probability of the basis states ``indices``."""
    total = 0.0
    for i in indices:
        a = dd_amplitude(state, int(i)) if isinstance(state, DDState) else state.to_dense().amplitudes[int(i)]
        total += abs(a) ** 2
    return total


@dataclass
class SimulationRun:
    mode: str
    circuit: str
    n: int
    steps: int
    d: int | None
    reduce_ms: float
    sim_ms: float
    observables: dict[str, float]
    final_state: object = field(repr=False, default=None)
    trajectory: list = field(repr=False, default_factory=list)
    recovery_error: float | None = None
    outside_subspace: bool = False

    @property
    def total_ms(self) -> float:
        return self.reduce_ms + self.sim_ms


def _observe(state, observe_indices, problem) -> dict[str, float]:
    obs = {}
    if observe_indices:
        obs["probability"] = probability_of(state, observe_indices)
    if problem is not None:
        obs["expectation"] = qaoa_expectation(state, problem)
    return obs


def _initial_state(spec: SubspaceSpec, n: int, bk):
    seeds = spec.backend_states(n, bk)
    if len(seeds) != 1:
        raise DomainError("a simulation run needs a single initial state")
    s = seeds[0]
    return bk.scale(1.0 / bk.norm(s), s)


def run_regime(
    c: Circuit,
    spec: SubspaceSpec,
    steps: int,
    mode: str,
    *,
    observe=None,
    problem: SatFormula | Graph | None = None,
    tol: TolerancePolicy = DEFAULT_TOLERANCE,
    timeout_s: float | None = DEFAULT_TIMEOUT_S,
    every_step: bool = False,
    check_recovery: bool = True,
) -> SimulationRun:
    """Run one regime end to end.

    Reduced modes lump first (``reduce_ms``), then iterate ``U_hat`` and
    recover the final full state (``sim_ms``).  Full modes apply the circuit
    ``steps`` times.  When ``every_step`` is set the trajectory holds reduced
    vectors (reduced modes) or observable dicts (full modes).
    """
    if mode not in MODES:
        raise DomainError(f"unknown mode {mode!r}; choose from {', '.join(MODES)}")
    if steps < 0:
        raise DomainError("steps must be nonnegative")
    if mode.endswith("dense") and c.n > N_STATE_CAP:
        raise CapacityError(f"dense states are capped at {N_STATE_CAP} qubits, got n={c.n}")
    deadline = None if timeout_s is None else time.monotonic() + timeout_s
    bk = make_backend("dd" if mode.endswith("dd") else "dense", tol)
    observe = list(observe or [])

    def partial(stage: str, **extra):
        rec = {"mode": mode, "circuit": c.name, "n": c.n, "stage": stage}
        rec.update(extra)
        return rec

    if mode.startswith("full"):
        t0 = time.perf_counter()
        state = _initial_state(spec, c.n, bk)
        trajectory = [_observe(state, observe, problem)] if every_step else []
        for k in range(steps):
            state = bk.apply(c, state)
            if every_step:
                trajectory.append(_observe(state, observe, problem))
            if deadline is not None and time.monotonic() > deadline:
                raise RunTimeoutError(f"{mode} timed out after {k + 1} of {steps} steps", partial("simulate", steps_done=k + 1))
        sim_ms = (time.perf_counter() - t0) * 1e3
        return SimulationRun(mode, c.name, c.n, steps, None, 0.0, sim_ms, _observe(state, observe, problem), state, trajectory)

    t0 = time.perf_counter()
    try:
        rs = lump_krylov(c, spec, tol, backend=bk, deadline=deadline)
    except RunTimeoutError as exc:
        raise RunTimeoutError(str(exc), partial("reduce", **exc.partial)) from exc
    reduce_ms = (time.perf_counter() - t0) * 1e3
    t1 = time.perf_counter()
    w0 = _initial_state(spec, c.n, bk)
    traj = simulate_reduced(rs, w0, steps, every_step=every_step)
    final = recover_full(rs, traj.final)
    sim_ms = (time.perf_counter() - t1) * 1e3
    if deadline is not None and time.monotonic() > deadline:
        raise RunTimeoutError(f"{mode} timed out", partial("simulate", d=rs.d))
    run = SimulationRun(
        mode, c.name, c.n, steps, rs.d, reduce_ms, sim_ms, _observe(final, observe, problem), final,
        traj.states if every_step else [], outside_subspace=traj.outside_subspace,
    )
    if check_recovery and c.n <= RECOVERY_CHECK_CAP:
        ref = _initial_state(spec, c.n, DenseBackend(tol))
        for _ in range(steps):
            ref = apply_circuit(c, ref)
        run.recovery_error = float(np.max(np.abs(final.to_dense().amplitudes - ref.amplitudes), initial=0.0))
    return run


def write_trajectory_csv(run: SimulationRun, path: str | Path | None = None, *, handle=None):
    """Columns ``step`` then ``re_i,im_i`` pairs (reduced) or observable names (full)."""
    rows = run.trajectory
    if not rows:
        rows = [run.observables] if run.d is None else []
    close = False
    if handle is None:
        handle = open(path, "w", newline="")
        close = True
    try:
        writer = csv.writer(handle)
        if run.d is not None and run.trajectory:
            writer.writerow(["step"] + [f"{p}_{i}" for i in range(run.d) for p in ("re", "im")])
            for k, v in enumerate(rows):
                writer.writerow([k] + [x for z in v for x in (repr(float(z.real)), repr(float(z.imag)))])
        else:
            names = sorted(rows[0]) if rows else sorted(run.observables)
            writer.writerow(["step"] + names)
            if run.trajectory:
                for k, obs in enumerate(rows):
                    writer.writerow([k] + [repr(float(obs[nm])) for nm in names])
            else:
                writer.writerow([run.steps] + [repr(float(run.observables[nm])) for nm in names])
    finally:
        if close:
            handle.close()


# -- QAOA stage sequences -----------------------------------------------------------


@dataclass(frozen=True)
class StageCheck:
    full: np.ndarray
    reduced: np.ndarray
    error: float
    d: int


def qaoa_stage_check(problem: SatFormula | Graph, H_hat_B, stages, delta: float = 0.1, tol: TolerancePolicy = DEFAULT_TOLERANCE) -> StageCheck:
    """Run ``prod_i U_B^{k_i} U_P^{l_i} |psi>`` in full and in the reduced space.

    ``stages`` is a list of ``(k_i, l_i)``; ``U_P^{l_i}`` acts first within a
    stage.  ``U_B`` is built from ``H_hat_B`` on the lumping basis of ``U_P``.
    """
    step = qaoa_problem_step(problem, delta)
    rs = lump_krylov(step, SubspaceSpec.psi(), tol)
    u_b = construct_begin_hamiltonian(rs.basis, H_hat_B, delta, tol)
    u_b_hat = scipy.linalg.expm(-1j * delta * np.asarray(H_hat_B, dtype=np.complex128))
    u_p = circuit_matrix(step)
    full = DenseState.uniform(problem.n).amplitudes.copy()
    ldag = rs.basis.column_matrix()
    red = ldag.conj().T @ full
    for k, l in stages:
        full = np.linalg.matrix_power(u_b, k) @ (np.linalg.matrix_power(u_p, l) @ full)
        red = np.linalg.matrix_power(u_b_hat, k) @ (np.linalg.matrix_power(rs.U_hat, l) @ red)
    recovered = ldag @ red
    return StageCheck(full, recovered, float(np.max(np.abs(full - recovered))), rs.d)
