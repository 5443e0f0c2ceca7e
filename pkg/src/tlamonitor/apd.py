"""Realistic photon counting: the three-state avalanche-photodiode
supersystem filter, plus an explicit hidden-reality generator used as a
cross-validation oracle.

The joint detector+atom state is a triple of unnormalized operators
(rho0, rho1, rho2) indexed by the classical APD state: 0 = armed, 1 =
avalanche building at rate gamma_r, 2 = registered / dead for tau_dd.
Between avalanches the triple obeys

    d rho0 = dt [L - gamma_dk - eta Gamma J] rho0
    d rho1 = dt {[L - gamma_r] rho1 + (eta Gamma J + gamma_dk) rho0}
    d rho2 = dt L rho2

with J rho = sigma rho sigma^dag.  An avalanche (Bernoulli with probability
gamma_r dt Tr[rho1]/Tr[rho_c] per step) maps the triple to (0, 0, rho2+rho1)
and schedules a reset (rho0+rho2, rho1, 0) exactly tau_dd later.  The
normalized conditional atom state is (rho0+rho1+rho2)/trace.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import _kernels, tla
from .engine import (DetectionRecord, TrajectoryRecord, as_seed_sequence,
                     validate_step_grid)

CHUNK_STEPS = 1 << 18


@dataclass(frozen=True)
class ApdParams:
    """Avalanche photodiode imperfections, rates in units of Gamma."""

    eta: float          # quantum efficiency
    gamma_r: float      # avalanche response rate (1/response time)
    tau_dd: float       # dead time
    gamma_dk: float     # dark-count rate

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"eta={self.eta} violates 0 <= eta <= 1")
        if not self.gamma_r > 0:
            raise ValueError(f"gamma_r={self.gamma_r} violates gamma_r > 0")
        if self.tau_dd < 0:
            raise ValueError(f"tau_dd={self.tau_dd} violates tau_dd >= 0")
        if self.gamma_dk < 0:
            raise ValueError(f"gamma_dk={self.gamma_dk} violates gamma_dk >= 0")


@dataclass(frozen=True)
class ApdSupersystem:
    """Unnormalized triple plus pending reset times and jump bookkeeping."""

    rho0: np.ndarray
    rho1: np.ndarray
    rho2: np.ndarray
    pending_resets: tuple[float, ...] = ()
    count: int = 0
    log_weight: float = 0.0

    @classmethod
    def initial(cls, atom_rho: np.ndarray | None = None) -> "ApdSupersystem":
        """Detector armed with certainty; atom defaults to the ground state."""
        rho = tla.GROUND if atom_rho is None else np.asarray(atom_rho, dtype=complex)
        zero = np.zeros((2, 2), dtype=complex)
        return cls(rho0=rho.copy(), rho1=zero.copy(), rho2=zero.copy())

    def to_flat(self) -> np.ndarray:
        return np.concatenate(
            [self.rho0.reshape(4), self.rho1.reshape(4), self.rho2.reshape(4)])

    def with_flat(self, flat: np.ndarray, **changes) -> "ApdSupersystem":
        return replace(
            self, rho0=flat[0:4].reshape(2, 2).copy(),
            rho1=flat[4:8].reshape(2, 2).copy(),
            rho2=flat[8:12].reshape(2, 2).copy(), **changes)

    @property
    def total_trace(self) -> float:
        return float((self.rho0 + self.rho1 + self.rho2).trace().real)


def default_dt_max(sys: tla.SystemParams, apd: ApdParams) -> float:
    """First-order accuracy bound: 1e-3 over the fastest rate in play."""
    return 1e-3 / max(sys.gamma, sys.omega, apd.gamma_r, apd.gamma_dk)


def drift_step(state: ApdSupersystem, sys: tla.SystemParams, apd: ApdParams,
               dt: float, dt_max: float | None = None) -> ApdSupersystem:
    """One no-avalanche Euler step; total trace decreases by
    dt gamma_r Tr[rho1] + O(dt^2).  The caller must not span a pending reset."""
    bound = default_dt_max(sys, apd) if dt_max is None else dt_max
    if dt > bound * (1 + 1e-12):
        raise ValueError(f"dt={dt} exceeds step-size bound {bound}")
    flat = state.to_flat()
    _kernels.apd_drift(flat, sys.omega, sys.gamma, apd.eta, apd.gamma_r,
                       apd.gamma_dk, dt)
    return state.with_flat(flat)


def avalanche_probability(state: ApdSupersystem, apd: ApdParams,
                          dt: float) -> float:
    """E[dN] = gamma_r dt Tr[rho1]/Tr[rho_c], clamped to [0, 1]."""
    tot = state.total_trace
    if tot <= 0:
        raise ValueError("avalanche_probability requires positive total trace")
    p = apd.gamma_r * dt * float(state.rho1.trace().real) / tot
    return min(max(p, 0.0), 1.0)


def apply_avalanche(state: ApdSupersystem, t: float,
                    apd: ApdParams) -> ApdSupersystem:
    """Registration: (rho0, rho1, rho2) -> (0, 0, rho2+rho1), count += 1,
    reset scheduled at t + tau_dd."""
    if state.rho1.trace().real <= 0:
        raise ValueError(
            "avalanche fired with Tr[rho1] = 0: probability-zero event, "
            "signals a sampling bug")
    zero = np.zeros((2, 2), dtype=complex)
    return replace(
        state, rho0=zero.copy(), rho1=zero.copy(),
        rho2=state.rho2 + state.rho1,
        pending_resets=state.pending_resets + (t + apd.tau_dd,),
        count=state.count + 1)


def apply_reset(state: ApdSupersystem) -> ApdSupersystem:
    """Dead-time expiry: (rho0, rho1, rho2) -> (rho0+rho2, rho1, 0)."""
    if not state.pending_resets:
        raise ValueError("apply_reset with an empty reset queue")
    zero = np.zeros((2, 2), dtype=complex)
    return replace(
        state, rho0=state.rho0 + state.rho2, rho2=zero.copy(),
        pending_resets=state.pending_resets[1:])


def conditioned_state(state: ApdSupersystem) -> np.ndarray:
    """(rho0+rho1+rho2)/trace; scale invariant."""
    total = state.rho0 + state.rho1 + state.rho2
    tr = total.trace().real
    if tr <= 0:
        raise ValueError("conditioned_state requires positive total trace")
    return total / tr


def _uniform_budget(n_steps: int, dt: float, tau_dd: float) -> int:
    extra = int(n_steps * dt / tau_dd) + 2 if tau_dd > 0 else 0
    return n_steps + extra


def _run_filter(sys: tla.SystemParams, apd: ApdParams, dt: float,
                t_final: float, sample_stride: int,
                initial_rho: np.ndarray | None,
                rng: np.random.Generator | None,
                rec_times: np.ndarray | None,
                mode: str) -> tuple[TrajectoryRecord, DetectionRecord]:
    n_steps, n_samples = validate_step_grid(dt, t_final, sample_stride)
    flat = ApdSupersystem.initial(initial_rho).to_flat()
    aux = np.array([np.nan, 0.0, 0.0, 0.0, 0.0, 0.0])
    samples = np.empty((n_samples, 5))
    x0, y0, z0 = tla.expectations(flat[0:4].reshape(2, 2)
                                  + flat[4:8].reshape(2, 2)
                                  + flat[8:12].reshape(2, 2))
    samples[0] = (x0, y0, z0, 0.5 * (1 + x0**2 + y0**2 + z0**2), 0.0)
    use_record = rec_times is not None
    rec = rec_times if use_record else np.empty(0)
    events: list[np.ndarray] = []
    chunk = sample_stride * max(1, CHUNK_STEPS // sample_stride)
    ev_buf = np.empty(2 * chunk + 2)
    empty_u = np.empty(0)
    step0 = 0
    while step0 < n_steps:
        n_chunk = min(chunk, n_steps - step0)
        if use_record:
            uniforms = empty_u
        else:
            uniforms = rng.random(_uniform_budget(n_chunk, dt, apd.tau_dd))
        first_row = step0 // sample_stride + 1
        iu, ie, err = _kernels.apd_filter_chunk(
            flat, aux, sys.omega, sys.gamma, apd.eta, apd.gamma_r, apd.tau_dd,
            apd.gamma_dk, dt, step0, n_chunk, sample_stride, first_row,
            uniforms, rec, use_record,
            samples[first_row:first_row + n_chunk // sample_stride],
            ev_buf, _kernels.RENORM_THRESHOLD)
        if err == 3:
            raise ValueError(
                "record avalanche arrived while Tr[rho1] = 0 (dead window or "
                "impossible record for these parameters)")
        if err != 0:
            raise RuntimeError(f"APD filter kernel failed with code {err}")
        events.append(ev_buf[:ie].copy())
        step0 += n_chunk
    times = np.arange(n_samples) * (sample_stride * dt)
    avalanche_times = np.concatenate(events) if events else np.empty(0)
    record = TrajectoryRecord(
        times=times, x=samples[:, 0], y=samples[:, 1], z=samples[:, 2],
        purity=samples[:, 3], counts=samples[:, 4], mode=mode, seed=None,
        diagnostics={
            "max_jump_probability_in_dead_window": float(aux[_kernels.APD_MAX_P_DEAD]),
            "log_weight": float(aux[_kernels.APD_LOG_WEIGHT]),
            "integrated_intensity": float(aux[_kernels.APD_SUM_P]),
        })
    return record, DetectionRecord(kind="apd", times=avalanche_times)


def run_apd_filter_on_record(
        sys: tla.SystemParams, apd: ApdParams, dt: float, t_final: float,
        record: DetectionRecord, sample_stride: int = 1,
        initial_rho: np.ndarray | None = None) -> TrajectoryRecord:
    """Condition the filter on an externally measured avalanche record."""
    rec_times = np.asarray(record.times, dtype=float)
    if np.any(np.diff(rec_times) < 0):
        raise ValueError("record times must be sorted")
    traj, _ = _run_filter(sys, apd, dt, t_final, sample_stride, initial_rho,
                          None, rec_times, mode="record-driven")
    return traj


def run_apd_trajectory(
        sys: tla.SystemParams, apd: ApdParams, dt: float, t_final: float,
        seed, sample_stride: int = 1, initial_rho: np.ndarray | None = None,
        mode: str = "self-consistent",
) -> tuple[TrajectoryRecord, DetectionRecord]:
    """One conditioned trajectory.

    self-consistent: the filter samples its own avalanche process.
    truth-driven: a hidden-reality record from truth_oracle_run (same seed)
    drives the filter; the truth series is attached as record.truth.
    """
    seed_seq = as_seed_sequence(seed)
    if mode == "self-consistent":
        rng = np.random.Generator(np.random.PCG64(seed_seq))
        traj, detection = _run_filter(sys, apd, dt, t_final, sample_stride,
                                      initial_rho, rng, None, mode)
    elif mode == "truth-driven":
        detection, truth = truth_oracle_run(sys, apd, dt, t_final, seed_seq,
                                            sample_stride, initial_rho)
        traj = run_apd_filter_on_record(sys, apd, dt, t_final, detection,
                                        sample_stride, initial_rho)
        traj.mode = mode
        traj.truth = truth
    else:
        raise ValueError(f"unknown APD mode {mode!r}")
    traj.seed = seed if isinstance(seed, int) else None
    return traj, detection


def truth_oracle_run(
        sys: tla.SystemParams, apd: ApdParams, dt: float, t_final: float,
        seed, sample_stride: int = 1, initial_rho: np.ndarray | None = None,
) -> tuple[DetectionRecord, TrajectoryRecord]:
    """Simulate an explicit hidden reality: ideal direct-detection quantum
    jumps of the atom plus stochastic detector-state transitions.  Returns
    the avalanche record and the true pure-state trajectory."""
    if initial_rho is not None:
        x, y, z = tla.expectations(np.asarray(initial_rho, dtype=complex))
        if x * x + y * y + z * z < 1 - 1e-9:
            raise ValueError("truth oracle requires a pure initial state")
        psi = np.array([np.sqrt((1 - z) / 2),
                        np.sqrt((1 + z) / 2) * np.exp(
                            -1j * np.arctan2(-y, x if (x or y) else 1.0))],
                       dtype=complex)
    else:
        psi = np.array([1.0, 0.0], dtype=complex)
    rng = np.random.Generator(np.random.PCG64(as_seed_sequence(seed)))
    n_steps, n_samples = validate_step_grid(dt, t_final, sample_stride)
    aux = np.array([np.nan, 0.0, 0.0, 0.0, 0.0, 0.0])
    samples = np.empty((n_samples, 5))
    x0, y0, z0 = tla.expectations(np.outer(psi, psi.conj()))
    samples[0] = (x0, y0, z0, 1.0, 0.0)
    events: list[np.ndarray] = []
    chunk = sample_stride * max(1, CHUNK_STEPS // sample_stride)
    ev_buf = np.empty(2 * chunk + 2)
    step0 = 0
    while step0 < n_steps:
        n_chunk = min(chunk, n_steps - step0)
        uniforms = rng.random(_uniform_budget(n_chunk, dt, apd.tau_dd))
        first_row = step0 // sample_stride + 1
        iu, ie, err = _kernels.apd_truth_chunk(
            psi, aux, sys.omega, sys.gamma, apd.eta, apd.gamma_r, apd.tau_dd,
            apd.gamma_dk, dt, step0, n_chunk, sample_stride, first_row,
            uniforms, samples[first_row:first_row + n_chunk // sample_stride],
            ev_buf)
        if err != 0:
            raise RuntimeError(f"APD truth kernel failed with code {err}")
        events.append(ev_buf[:ie].copy())
        step0 += n_chunk
    times = np.arange(n_samples) * (sample_stride * dt)
    avalanche_times = np.concatenate(events) if events else np.empty(0)
    counts = np.searchsorted(avalanche_times, times, side="right").astype(float)
    truth = TrajectoryRecord(
        times=times, x=samples[:, 0], y=samples[:, 1], z=samples[:, 2],
        purity=samples[:, 3], counts=counts, mode="truth",
        seed=seed if isinstance(seed, int) else None)
    return DetectionRecord(kind="apd", times=avalanche_times), truth
