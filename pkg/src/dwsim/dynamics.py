"""Unitary time evolution in the q=0 Bloch coefficient basis.

Static propagation uses the spectral decomposition of the Bloch
Hamiltonian; field ramps use piecewise-frozen stepping where each step
applies the spectral exponential of the midpoint-field Hamiltonian, so
every step is exactly unitary.  Ramp accuracy is certified by step
doubling and the step is auto-halved until the certification passes.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from .bands import (
    WannierDoublet,
    bloch_to_zgrid,
    fz_coefficient_diag,
    hamiltonian_pieces,
    solve_q0,
    wannier_doublet,
    zgrid_to_bloch,
)
from .errors import ConvergenceError
from .lattice import LatticeConfig

STEP_DOUBLING_TOL = 1e-6
MAX_HALVINGS = 8
SUDDEN_THRESHOLD = 0.5  # duration * epsilon below this counts as sudden
ADIABATIC_THRESHOLD = 0.1  # ground-to-excited rate figure below this counts as adiabatic


@dataclass(frozen=True)
class Segment:
    """One linear-interpolation ramp segment."""

    duration_us: float
    bx_start_mg: float
    bx_end_mg: float
    bz_start_mg: float
    bz_end_mg: float

    def __post_init__(self) -> None:
        if self.duration_us <= 0:
            raise ValueError(f"segment duration must be positive, got {self.duration_us}")

    def fields_at(self, t_us: float) -> tuple[float, float]:
        s = t_us / self.duration_us
        return (
            self.bx_start_mg + (self.bx_end_mg - self.bx_start_mg) * s,
            self.bz_start_mg + (self.bz_end_mg - self.bz_start_mg) * s,
        )

    @property
    def rates_per_us(self) -> tuple[float, float]:
        return (
            (self.bx_end_mg - self.bx_start_mg) / self.duration_us,
            (self.bz_end_mg - self.bz_start_mg) / self.duration_us,
        )


@dataclass(frozen=True)
class RampSchedule:
    segments: tuple[Segment, ...]

    def __post_init__(self) -> None:
        if not self.segments:
            raise ValueError("schedule needs at least one segment")

    @property
    def duration_us(self) -> float:
        return sum(s.duration_us for s in self.segments)

    @property
    def end_fields_mg(self) -> tuple[float, float]:
        last = self.segments[-1]
        return last.bx_end_mg, last.bz_end_mg

    @property
    def start_fields_mg(self) -> tuple[float, float]:
        first = self.segments[0]
        return first.bx_start_mg, first.bz_start_mg


def hold_segment(duration_us: float, bx_mg: float, bz_mg: float) -> Segment:
    return Segment(duration_us, bx_mg, bx_mg, bz_mg, bz_mg)


def preparation_schedule(
    cfg: LatticeConfig,
    bx_ramp_us: float = 250.0,
    bz_ramp_us: float = 70.0,
    bz_start_mg: float = -100.0,
) -> RampSchedule:
    """Two-stage protocol: ramp B_x on while a large holding B_z pins the
    stretched spin state, then ramp B_z to the config value.

    The default holding field is -100 mG: with g_F > 0 the negative sign
    makes m_F = +F the lowest Zeeman manifold, and its magnitude exceeds
    the fictitious-field amplitude so the longitudinal field never
    changes sign across the lattice period.
    """
    return RampSchedule(
        segments=(
            Segment(bx_ramp_us, 0.0, cfg.bx_mg, bz_start_mg, bz_start_mg),
            Segment(bz_ramp_us, cfg.bx_mg, cfg.bx_mg, bz_start_mg, cfg.bz_mg),
        )
    )


@dataclass(frozen=True)
class TimeSeries:
    """Time-indexed observables from one propagation run.

    Projections p_l / p_r are onto the caller-supplied reference
    localized states; leakage = 1 - p_l - p_r.  energy_er is only
    populated for static runs.
    """

    t_us: np.ndarray
    p_l: np.ndarray
    p_r: np.ndarray
    leakage: np.ndarray
    fz: np.ndarray
    p_m: np.ndarray
    norm: np.ndarray
    energy_er: np.ndarray | None
    psi_final: np.ndarray
    dt_us: float | None = None
    step_doubling_infidelity: float | None = None
    snapshot_t_us: np.ndarray | None = None
    density_snapshots: np.ndarray | None = None


def _as_coefficients(cfg: LatticeConfig, psi0: np.ndarray) -> np.ndarray:
    psi0 = np.asarray(psi0)
    d_total = (2 * cfg.n_planewaves + 1) * cfg.spin.dim
    if psi0.ndim == 2 and psi0.shape[1] == cfg.spin.dim:
        psi0 = zgrid_to_bloch(cfg, psi0)
    elif psi0.ndim != 1 or psi0.shape[0] != d_total:
        raise ValueError(
            f"psi0 must be a length-{d_total} coefficient vector or a "
            f"(z_points, {cfg.spin.dim}) wavefunction, got shape {psi0.shape}"
        )
    psi0 = psi0.astype(complex)
    norm = np.linalg.norm(psi0)
    if abs(norm - 1.0) > 1e-6:
        raise ValueError(f"psi0 not normalized: |psi0| = {norm:.8f}")
    return psi0


def _reference_doublet(cfg: LatticeConfig, doublet: WannierDoublet | None) -> WannierDoublet:
    if doublet is not None:
        return doublet
    return wannier_doublet(cfg.replace(bz_mg=0.0))


def _observables(cfg: LatticeConfig, t_us, psi_t, doublet, energy_er=None, dt_us=None, cert=None) -> TimeSeries:
    """Assemble a TimeSeries from states psi_t of shape (D, nt)."""
    dim = cfg.spin.dim
    amp_l = doublet.coef_l.conj() @ psi_t
    amp_r = doublet.coef_r.conj() @ psi_t
    p_l = np.abs(amp_l) ** 2
    p_r = np.abs(amp_r) ** 2
    dens = np.abs(psi_t) ** 2
    norm = dens.sum(axis=0)
    fz = fz_coefficient_diag(cfg) @ dens
    p_m = dens.reshape(-1, dim, dens.shape[1]).sum(axis=0).T
    return TimeSeries(
        t_us=np.asarray(t_us, dtype=float),
        p_l=p_l,
        p_r=p_r,
        leakage=1.0 - p_l - p_r,
        fz=fz,
        p_m=p_m,
        norm=norm,
        energy_er=energy_er,
        psi_final=psi_t[:, -1].copy(),
        dt_us=dt_us,
        step_doubling_infidelity=cert,
    )


def propagate_static(
    cfg: LatticeConfig,
    psi0: np.ndarray,
    t_us: np.ndarray,
    doublet: WannierDoublet | None = None,
    snapshot_t_us: np.ndarray | None = None,
) -> TimeSeries:
    """Evolve psi0 under the static Bloch Hamiltonian of ``cfg``.

    psi0 may be a coefficient vector or a spinor wavefunction on the
    period grid.  Projections use ``doublet`` if given, otherwise the
    symmetric-well doublet of the same config with B_z = 0.  Passing
    ``snapshot_t_us`` additionally records spatial densities P(z, t) at
    those times.
    """
    psi0 = _as_coefficients(cfg, psi0)
    doublet = _reference_doublet(cfg, doublet)
    t_us = np.asarray(t_us, dtype=float)
    vals, vecs = solve_q0(cfg)
    w = cfg.units.rad_per_us_per_er()
    a = vecs.conj().T @ psi0
    phases = np.exp(-1j * np.outer(vals * w, t_us))  # (D, nt)
    psi_t = vecs @ (phases * a[:, None])
    energy = np.real(np.einsum("kt,k,kt->t", phases.conj() * a.conj()[:, None], vals, phases * a[:, None]))
    series = _observables(cfg, t_us, psi_t, doublet, energy_er=energy)
    if snapshot_t_us is None:
        return series
    snapshot_t_us = np.asarray(snapshot_t_us, dtype=float)
    snaps = []
    for t in snapshot_t_us:
        state = vecs @ (np.exp(-1j * vals * w * t) * a)
        psi_z = bloch_to_zgrid(cfg, state)
        snaps.append(np.sum(np.abs(psi_z) ** 2, axis=1))
    return dataclasses.replace(
        series, snapshot_t_us=snapshot_t_us, density_snapshots=np.stack(snaps)
    )


def _schedule_steps(schedule: RampSchedule, dt_us: float):
    """Yield (h, bx_mid, bz_mid, bx_rate, bz_rate) over all segments."""
    steps = []
    for seg in schedule.segments:
        n = max(1, math.ceil(seg.duration_us / dt_us))
        h = seg.duration_us / n
        rx, rz = seg.rates_per_us
        for k in range(n):
            bx, bz = seg.fields_at((k + 0.5) * h)
            steps.append((h, bx, bz, rx, rz))
    return steps


def _run_steps(cfg, steps, psi0, direction=1, record=False):
    h0, x_block, z_block = hamiltonian_pieces(cfg, 0.0)
    w = cfg.units.rad_per_us_per_er()
    psi = psi0.copy()
    recorded = [psi.copy()] if record else None
    times = [0.0] if record else None
    t = 0.0
    ordered = steps if direction == 1 else list(reversed(steps))
    for h, bx, bz, _rx, _rz in ordered:
        ham = h0 + bx * x_block + bz * z_block
        vals, vecs = np.linalg.eigh(ham)
        psi = vecs @ (np.exp(-1j * direction * vals * w * h) * (vecs.conj().T @ psi))
        if record:
            t += h
            times.append(t)
            recorded.append(psi.copy())
    if record:
        return psi, np.asarray(times), np.stack(recorded, axis=1)
    return psi


def propagate_ramp(
    cfg: LatticeConfig,
    schedule: RampSchedule,
    psi0: np.ndarray,
    dt_us: float = 0.5,
    doublet: WannierDoublet | None = None,
    certify: bool = True,
    direction: int = 1,
) -> TimeSeries:
    """Propagate through a field ramp with midpoint-frozen spectral steps.

    Certification reruns the schedule at dt/2 and requires the final
    states to agree to 1e-6 in fidelity, halving dt (up to 8 times)
    until they do.  ``direction=-1`` applies the exact inverse steps in
    reverse order, so a forward run followed by a direction=-1 run
    returns the initial state to solver precision.

    Raises
    ------
    ConvergenceError
        If certification still fails at the smallest step, reporting
        both final states' disagreement.
    """
    if dt_us <= 0:
        raise ValueError(f"dt_us must be positive, got {dt_us}")
    if direction not in (1, -1):
        raise ValueError("direction must be +1 or -1")
    psi0 = _as_coefficients(cfg, psi0)
    doublet = _reference_doublet(cfg, doublet)

    dt = float(dt_us)
    cert_infid = None
    if certify:
        psi_coarse = _run_steps(cfg, _schedule_steps(schedule, dt), psi0, direction)
        for _ in range(MAX_HALVINGS):
            psi_fine = _run_steps(cfg, _schedule_steps(schedule, dt / 2), psi0, direction)
            cert_infid = float(1.0 - np.abs(psi_coarse.conj() @ psi_fine) ** 2)
            if cert_infid < STEP_DOUBLING_TOL:
                break
            dt /= 2
            psi_coarse = psi_fine
        else:
            raise ConvergenceError(
                f"ramp step-doubling certification failed: dt={dt} us and dt/2 "
                f"final states disagree (infidelity {cert_infid:.3e} >= {STEP_DOUBLING_TOL})"
            )
    steps = _schedule_steps(schedule, dt)
    _, times, states = _run_steps(cfg, steps, psi0, direction, record=True)
    return _observables(cfg, times, states, doublet, dt_us=dt, cert=cert_infid)


@dataclass(frozen=True)
class SegmentReport:
    duration_us: float
    eps_times_duration: float
    sudden_internal: bool
    fom_internal: float
    fom_ground_to_excited: float
    fom_upper_to_excited: float
    adiabatic_excited: bool
    min_gap_doublet_excited_er: float


@dataclass(frozen=True)
class AdiabaticityReport:
    """Rate-vs-gap diagnostics along a ramp.

    The Landau-Zener-style figure of merit is max_t |<i| dH/dt |j>| /
    (E_j - E_i)^2 with energies in angular-frequency units.  The
    classification channel for leakage out of the protocol manifold is
    ground band -> next excited band; the upper-doublet channel is
    reported as a diagnostic.  Thresholds are recorded in the report:
    a segment is 'sudden' w.r.t. the doublet when duration * epsilon <
    0.5 and 'adiabatic' w.r.t. excited bands when the ground-channel
    figure is below 0.1.
    """

    segments: tuple[SegmentReport, ...]
    epsilon_hz: float
    min_gap_doublet_excited_er: float
    gap_at_end_er: float
    sudden_threshold: float = SUDDEN_THRESHOLD
    adiabatic_threshold: float = ADIABATIC_THRESHOLD


def adiabaticity_report(
    cfg: LatticeConfig,
    schedule: RampSchedule,
    points_per_segment: int = 50,
    epsilon_hz: float | None = None,
) -> AdiabaticityReport:
    """Instantaneous spectra and rate figures along a schedule."""
    if points_per_segment < 2:
        raise ValueError("need at least 2 sample points per segment")
    h0, x_block, z_block = hamiltonian_pieces(cfg, 0.0)
    w = cfg.units.rad_per_us_per_er()
    if epsilon_hz is None:
        bx_end, _ = schedule.end_fields_mg
        vals = np.linalg.eigvalsh(h0 + bx_end * x_block)  # B_z forced to 0
        epsilon_hz = cfg.units.er_to_hz(float(vals[1] - vals[0]))

    seg_reports = []
    overall_min_gap = np.inf
    gap_at_end = np.nan
    for seg in schedule.segments:
        rx, rz = seg.rates_per_us
        h_dot = (rx * x_block + rz * z_block) * w  # rad/us^2
        fom12 = fom13 = fom23 = 0.0
        min_gap = np.inf
        for t in np.linspace(0.0, seg.duration_us, points_per_segment):
            bx, bz = seg.fields_at(t)
            vals, vecs = np.linalg.eigh(h0 + bx * x_block + bz * z_block)
            e_w = vals * w
            min_gap = min(min_gap, float(vals[2] - vals[1]))
            if rx == 0.0 and rz == 0.0:
                continue
            m12 = abs(vecs[:, 0].conj() @ h_dot @ vecs[:, 1])
            m13 = abs(vecs[:, 0].conj() @ h_dot @ vecs[:, 2])
            m23 = abs(vecs[:, 1].conj() @ h_dot @ vecs[:, 2])
            fom12 = max(fom12, m12 / (e_w[1] - e_w[0]) ** 2)
            fom13 = max(fom13, m13 / (e_w[2] - e_w[0]) ** 2)
            fom23 = max(fom23, m23 / (e_w[2] - e_w[1]) ** 2)
        gap_at_end = float(vals[2] - vals[1])
        overall_min_gap = min(overall_min_gap, min_gap)
        eps_dur = epsilon_hz * seg.duration_us * 1e-6
        seg_reports.append(
            SegmentReport(
                duration_us=seg.duration_us,
                eps_times_duration=eps_dur,
                sudden_internal=bool(eps_dur < SUDDEN_THRESHOLD),
                fom_internal=fom12,
                fom_ground_to_excited=fom13,
                fom_upper_to_excited=fom23,
                adiabatic_excited=bool(fom13 < ADIABATIC_THRESHOLD),
                min_gap_doublet_excited_er=min_gap,
            )
        )
    return AdiabaticityReport(
        segments=tuple(seg_reports),
        epsilon_hz=float(epsilon_hz),
        min_gap_doublet_excited_er=float(overall_min_gap),
        gap_at_end_er=gap_at_end,
    )


@dataclass(frozen=True)
class PreparationResult:
    psi_final: np.ndarray
    fidelity_l: float
    p_r: float
    doublet_population: float
    initial_stretched_population: float
    report: AdiabaticityReport
    series: TimeSeries = field(repr=False)


def stretched_ground_state(cfg: LatticeConfig, bx_mg: float, bz_mg: float) -> np.ndarray:
    """q=0 ground state of the m_F = +F diabatic potential at the given
    fields, embedded in the full coefficient basis."""
    ops = cfg.spin
    units = cfg.units
    n_pw = 2 * cfg.n_planewaves + 1
    n_idx = np.arange(-cfg.n_planewaves, cfg.n_planewaves + 1)
    theta = np.radians(cfg.theta_deg)
    m_top = ops.f
    diag = (2.0 * n_idx) ** 2 + 4.0 * cfg.u1_er / 3.0 + m_top * units.mg_to_er(bz_mg)
    scalar = (2.0 * cfg.u1_er / 3.0) * np.cos(theta)
    fict_amp = -cfg.species.g_f * (2.0 * cfg.u1_er / 3.0) * np.sin(theta)
    if cfg.fictitious_phase == "paper_cos":
        coupling = scalar + 0.5 * fict_amp * m_top
    else:
        coupling = scalar + (-0.5j) * fict_amp * m_top
    ham = np.diag(diag).astype(complex)
    for p in range(n_pw - 1):
        ham[p + 1, p] = coupling
        ham[p, p + 1] = np.conj(coupling)
    _, vecs = np.linalg.eigh(ham)
    psi = np.zeros(n_pw * ops.dim, dtype=complex)
    psi[np.arange(n_pw) * ops.dim + (ops.dim - 1)] = vecs[:, 0]
    return psi


def prepare_ground_l(
    cfg: LatticeConfig,
    schedule: RampSchedule | None = None,
    dt_us: float = 0.5,
    doublet: WannierDoublet | None = None,
) -> PreparationResult:
    """Run the state-preparation protocol and report fidelities.

    The initial state is the q=0 ground state of the stretched-state
    (m_F = +F) potential at the schedule's starting fields; it must also
    be the lowest band of the full Hamiltonian there with >= 0.9
    stretched-spin population, otherwise the holding field is unsuitable
    and a ValueError is raised.
    """
    schedule = preparation_schedule(cfg) if schedule is None else schedule
    bx0, bz0 = schedule.start_fields_mg
    psi0 = stretched_ground_state(cfg, bx0, bz0)

    h0, x_block, z_block = hamiltonian_pieces(cfg, 0.0)
    _, vecs = np.linalg.eigh(h0 + bx0 * x_block + bz0 * z_block)
    dim = cfg.spin.dim
    band0_top = float(np.sum(np.abs(vecs[:, 0].reshape(-1, dim)[:, dim - 1]) ** 2))
    if band0_top < 0.9:
        raise ValueError(
            f"lowest band at the starting fields has only {band0_top:.3f} "
            f"m_F=+{cfg.species.f:g} population; pick a holding B_z that makes "
            "the stretched state the ground manifold"
        )

    doublet = _reference_doublet(cfg, doublet)
    series = propagate_ramp(cfg, schedule, psi0, dt_us=dt_us, doublet=doublet)
    report = adiabaticity_report(cfg, schedule, epsilon_hz=doublet.epsilon_hz)
    return PreparationResult(
        psi_final=series.psi_final,
        fidelity_l=float(series.p_l[-1]),
        p_r=float(series.p_r[-1]),
        doublet_population=float(series.p_l[-1] + series.p_r[-1]),
        initial_stretched_population=band0_top,
        report=report,
        series=series,
    )


def dominant_frequency_hz(t_us: np.ndarray, y: np.ndarray) -> float:
    """Frequency of the strongest spectral peak of a sampled series.

    Hann-windowed, zero-padded discrete spectrum with parabolic
    refinement of the peak bin; the mean is removed first.
    """
    t_us = np.asarray(t_us, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(t_us) < 8:
        raise ValueError("need at least 8 samples")
    dt = t_us[1] - t_us[0]
    if not np.allclose(np.diff(t_us), dt, rtol=1e-9, atol=1e-12):
        raise ValueError("time grid must be uniform")
    yy = (y - y.mean()) * np.hanning(len(y))
    n_fft = 16 * len(y)
    spec = np.abs(np.fft.rfft(yy, n_fft))
    k = int(np.argmax(spec))
    if k == 0 or k >= len(spec) - 1:
        raise ValueError("no interior spectral peak found")
    # parabolic interpolation on log magnitude
    a, b, c = np.log(spec[k - 1 : k + 2] + 1e-300)
    shift = 0.5 * (a - c) / (a - 2 * b + c) if (a - 2 * b + c) != 0 else 0.0
    freq_per_us = (k + shift) / (n_fft * dt)
    return float(freq_per_us * 1e6)
