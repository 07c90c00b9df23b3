"""Bloch Hamiltonian in a plane-wave x spin basis, bands, and the
localized ground-doublet states.

Basis convention: index i = p * (2F+1) + s encodes plane wave
exp(i (q + 2 n k_L) z) with n = p - N, and spin m_F = s - F.  All
Hamiltonians are in recoil units E_R.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .constants import UnitContext
from .errors import ConvergenceError
from .lattice import LatticeConfig, double_well_geometry

log = logging.getLogger("dwsim")

MAX_DIMENSION = 10_000
CERTIFY_EXTRA_PLANEWAVES = 8
CERTIFY_RTOL = 1e-3
FLATNESS_WARN = 0.2


@dataclass(frozen=True)
class BandSolution:
    """Band energies and Bloch spinors over a quasimomentum grid.

    energies[k, b] is the b-th ascending band energy (E_R) at q_grid[k];
    spinors[k, :, b] the matching coefficient vector. ``flatness`` is the
    per-band (max-min over q) width divided by the mean ground-doublet
    gap.
    """

    cfg: LatticeConfig
    q_over_kl: np.ndarray
    energies: np.ndarray
    spinors: np.ndarray
    flatness: np.ndarray


@dataclass(frozen=True)
class DoubletSplitting:
    epsilon_er: float
    epsilon_hz: float
    flatness: tuple[float, float]
    flatness_warning: bool


@dataclass(frozen=True)
class WannierDoublet:
    """Ground-doublet states of one double well, on a spatial grid.

    psi_s/psi_a are the q=0 Bloch spinors of the two lowest bands
    (symmetric/antisymmetric combination), psi_l/psi_r their localized
    superpositions (S +/- A)/sqrt(2) with centroid(L) < centroid(R).
    coef_* are the same states in the plane-wave coefficient basis.
    ``epsilon_*`` is the q=0 doublet gap.
    """

    cfg: LatticeConfig
    z_m: np.ndarray
    psi_s: np.ndarray
    psi_a: np.ndarray
    psi_l: np.ndarray
    psi_r: np.ndarray
    coef_s: np.ndarray
    coef_a: np.ndarray
    coef_l: np.ndarray
    coef_r: np.ndarray
    epsilon_er: float
    epsilon_hz: float
    well_center_nm: float
    barrier_nm: float
    centroid_l_nm: float
    centroid_r_nm: float
    overlap_lr: float


@dataclass(frozen=True)
class LocalizedObservables:
    density: np.ndarray
    populations: np.ndarray
    fz_mean: float
    centroid_nm: float


@dataclass(frozen=True)
class TwoLevelModel:
    """Effective (epsilon, delta) description of the ground doublet.

    epsilon is the splitting with B_z forced to zero, nu(B_z) the actual
    splitting; delta = sqrt(nu^2 - eps^2) * sign(B_z); Omega = nu and the
    Rabi period is T = 1/nu.
    """

    epsilon_hz: float
    delta_hz: float
    omega_hz: float
    rabi_period_us: float
    clamped: bool


def hamiltonian_pieces(cfg: LatticeConfig, q_over_kl: float = 0.0):
    """Field-independent Hamiltonian H0 plus per-mG F_x and F_z blocks.

    The full Bloch Hamiltonian is H0 + bx_mg * X + bz_mg * Z; dynamics
    code reuses the pieces to rebuild H along a field ramp cheaply.
    """
    ops = cfg.spin
    units = cfg.units
    dim = ops.dim
    n_pw = 2 * cfg.n_planewaves + 1
    d_total = n_pw * dim
    if d_total > MAX_DIMENSION:
        raise ValueError(f"basis dimension {d_total} exceeds limit {MAX_DIMENSION}")
    n_idx = np.arange(-cfg.n_planewaves, cfg.n_planewaves + 1)
    theta = np.radians(cfg.theta_deg)

    h0 = np.zeros((d_total, d_total), dtype=complex)
    kinetic = (q_over_kl + 2.0 * n_idx) ** 2 + 4.0 * cfg.u1_er / 3.0
    for p in range(n_pw):
        sl = slice(p * dim, (p + 1) * dim)
        h0[sl, sl] = kinetic[p] * np.eye(dim)

    # cos(2 k_L z) couples n -> n+1 with weight 1/2 on both the scalar
    # and (paper_cos) fictitious terms; the quadrature phase replaces the
    # fictitious weight by -i/2 * e^{+2 i k_L z} + h.c.
    scalar = (2.0 * cfg.u1_er / 3.0) * np.cos(theta)
    fict_amp = -cfg.species.g_f * (2.0 * cfg.u1_er / 3.0) * np.sin(theta)
    if cfg.fictitious_phase == "paper_cos":
        raising = scalar * np.eye(dim) + 0.5 * fict_amp * ops.fz
    else:
        raising = scalar * np.eye(dim) + (-0.5j) * fict_amp * ops.fz
    raising = raising.astype(complex)
    for p in range(n_pw - 1):
        lo = slice(p * dim, (p + 1) * dim)
        hi = slice((p + 1) * dim, (p + 2) * dim)
        h0[hi, lo] = raising
        h0[lo, hi] = raising.conj().T

    per_mg = units.zeeman_er_per_mg()
    x_block = np.kron(np.eye(n_pw), per_mg * ops.fx).astype(complex)
    z_block = np.kron(np.eye(n_pw), per_mg * ops.fz).astype(complex)
    return h0, x_block, z_block


def assemble_bloch_hamiltonian(cfg: LatticeConfig, q_over_kl: float) -> np.ndarray:
    """Full Bloch Hamiltonian at quasimomentum q (units of k_L), in E_R."""
    if abs(q_over_kl) > 1.0 + 1e-12:
        raise ValueError(f"|q| must be <= k_L, got q/k_L = {q_over_kl}")
    h0, x_block, z_block = hamiltonian_pieces(cfg, q_over_kl)
    return h0 + cfg.bx_mg * x_block + cfg.bz_mg * z_block


def q_grid(cfg: LatticeConfig) -> np.ndarray:
    """Quasimomentum samples spanning [-1, 1) in units of k_L."""
    return -1.0 + 2.0 * np.arange(cfg.n_q) / cfg.n_q


def solve_bands(cfg: LatticeConfig, n_bands: int = 6, certify: bool = True) -> BandSolution:
    """Diagonalize the Bloch Hamiltonian over the quasimomentum grid.

    With ``certify=True`` the lowest ``n_bands`` energies are re-solved
    with N+8 plane waves per side and required to agree to 0.1 %
    relative.

    Raises
    ------
    ConvergenceError
        If the certification drift exceeds the tolerance; the message
        carries both values.
    """
    qs = q_grid(cfg)
    dim_total = (2 * cfg.n_planewaves + 1) * cfg.spin.dim
    if n_bands > dim_total:
        raise ValueError(f"n_bands={n_bands} exceeds basis dimension {dim_total}")
    energies = np.empty((len(qs), n_bands))
    spinors = np.empty((len(qs), dim_total, n_bands), dtype=complex)
    for k, q in enumerate(qs):
        vals, vecs = np.linalg.eigh(assemble_bloch_hamiltonian(cfg, q))
        energies[k] = vals[:n_bands]
        spinors[k] = vecs[:, :n_bands]
    if certify:
        big = cfg.replace(n_planewaves=cfg.n_planewaves + CERTIFY_EXTRA_PLANEWAVES)
        for k, q in enumerate(qs):
            ref = np.linalg.eigvalsh(assemble_bloch_hamiltonian(big, q))[:n_bands]
            drift = np.abs(energies[k] - ref) / np.maximum(np.abs(ref), 1e-9)
            if np.any(drift > CERTIFY_RTOL):
                b = int(np.argmax(drift))
                raise ConvergenceError(
                    f"band energies not converged at q={q:.4f} k_L, band {b + 1}: "
                    f"N={cfg.n_planewaves} gives {energies[k, b]:.9g} E_R, "
                    f"N={big.n_planewaves} gives {ref[b]:.9g} E_R "
                    f"(drift {drift[b]:.2e} > {CERTIFY_RTOL})"
                )
    mean_gap = float(np.mean(energies[:, 1] - energies[:, 0])) if n_bands >= 2 else np.nan
    widths = energies.max(axis=0) - energies.min(axis=0)
    flatness = widths / mean_gap if n_bands >= 2 and mean_gap > 0 else np.full(n_bands, np.nan)
    return BandSolution(cfg=cfg, q_over_kl=qs, energies=energies, spinors=spinors, flatness=flatness)


def doublet_splitting(sol: BandSolution) -> DoubletSplitting:
    """Quasimomentum-averaged gap between the two lowest bands.

    A flatness above 0.2 flags the two-level reduction as dubious.
    """
    if sol.energies.shape[1] < 2:
        raise ValueError("need at least 2 solved bands")
    eps_er = float(np.mean(sol.energies[:, 1] - sol.energies[:, 0]))
    units = UnitContext(sol.cfg.species)
    flat = (float(sol.flatness[0]), float(sol.flatness[1]))
    warn = bool(max(flat) > FLATNESS_WARN)
    if warn:
        log.warning("doublet flatness %.3f exceeds %.2f; two-level reduction dubious", max(flat), FLATNESS_WARN)
    return DoubletSplitting(
        epsilon_er=eps_er,
        epsilon_hz=units.er_to_hz(eps_er),
        flatness=flat,
        flatness_warning=warn,
    )


def solve_q0(cfg: LatticeConfig):
    """Eigendecomposition of the q=0 Bloch Hamiltonian."""
    return np.linalg.eigh(assemble_bloch_hamiltonian(cfg, 0.0))


def bloch_to_zgrid(cfg: LatticeConfig, coeffs: np.ndarray, z_points: int | None = None) -> np.ndarray:
    """Transform q=0 coefficient vector(s) to spinor wavefunctions on the
    spatial grid of one period, unit-normalized over the period."""
    n_pts = cfg.z_points if z_points is None else z_points
    dim = cfg.spin.dim
    n_idx = np.arange(-cfg.n_planewaves, cfg.n_planewaves + 1)
    period = cfg.period_m
    # z_j = j * period / n_pts, so 2 n k_L z_j = 2 pi n j / n_pts.
    phases = np.exp(2j * np.pi * np.outer(np.arange(n_pts) / n_pts, n_idx)) / np.sqrt(period)
    c = np.asarray(coeffs)
    single = c.ndim == 1
    if single:
        c = c[:, None]
    out = np.einsum("jn,nmk->jmk", phases, c.reshape(len(n_idx), dim, -1))
    return out[..., 0] if single else out


def zgrid_to_bloch(cfg: LatticeConfig, psi_z: np.ndarray) -> np.ndarray:
    """Project a spinor wavefunction on the period grid back onto the
    q=0 plane-wave coefficients."""
    n_pts, dim = psi_z.shape
    if dim != cfg.spin.dim:
        raise ValueError(f"spin dimension mismatch: {dim} != {cfg.spin.dim}")
    n_idx = np.arange(-cfg.n_planewaves, cfg.n_planewaves + 1)
    period = cfg.period_m
    dz = period / n_pts
    phases = np.exp(-2j * np.pi * np.outer(n_idx, np.arange(n_pts) / n_pts))
    coeffs = (phases @ psi_z) * dz / np.sqrt(period)
    return coeffs.reshape(-1)


def fz_coefficient_diag(cfg: LatticeConfig) -> np.ndarray:
    """Diagonal of the F_z operator in the coefficient basis."""
    m = cfg.spin.m_values
    return np.tile(m, 2 * cfg.n_planewaves + 1)


def _flatness_guard(cfg: LatticeConfig) -> float:
    """Cheap doublet-flatness estimate from 5 quasimomentum samples."""
    qs = (-1.0, -0.5, 0.0, 0.5, 0.999)
    e = np.array([np.linalg.eigvalsh(assemble_bloch_hamiltonian(cfg, q))[:2] for q in qs])
    gap = float(np.mean(e[:, 1] - e[:, 0]))
    widths = e.max(axis=0) - e.min(axis=0)
    return float(widths.max() / gap) if gap > 0 else np.inf


PHASE_FIX_FLOOR = 1e-6


def _fix_phase(psi_z: np.ndarray, j_anchor: int) -> complex:
    """Phase factor making the largest-magnitude spin component at the
    anchor grid point real positive; falls back to the next-largest
    usable component when the leading one is degenerate with zero."""
    row = psi_z[j_anchor]
    floor = PHASE_FIX_FLOOR * np.max(np.abs(psi_z))
    order = np.argsort(np.abs(row))[::-1]
    for rank, k in enumerate(order):
        if np.abs(row[k]) >= floor:
            if rank > 0:
                log.info("phase anchor fell back to spin component %d", int(k))
            return np.exp(-1j * np.angle(row[k]))
    log.info("all spin components below phase-fix floor at anchor; leaving phase unchanged")
    return 1.0 + 0.0j


def wannier_doublet(cfg: LatticeConfig, flatness_guard: bool = True) -> WannierDoublet:
    """Construct |S>, |A>, |L>, |R> from the q=0 ground doublet.

    Global phases: the largest spin component of each state at the
    sigma+ well center is made real positive, then the sign of |A> is
    chosen so that (|S>+|A>)/sqrt(2) sits left of the barrier.  This
    makes |L> the left, predominantly m_F > 0, localized state.
    """
    if flatness_guard:
        flat = _flatness_guard(cfg)
        if flat > FLATNESS_WARN:
            raise ValueError(
                f"lowest bands not flat (flatness {flat:.3f} > {FLATNESS_WARN}); "
                "the doublet does not define localized states"
            )
    vals, vecs = solve_q0(cfg)
    eps_er = float(vals[1] - vals[0])
    units = cfg.units

    geom = double_well_geometry(cfg)
    z_m = cfg.z_grid_m()
    dz = cfg.period_m / len(z_m)
    j_anchor = int(round(geom["sigma_plus_z_m"] / dz)) % len(z_m)

    coef_s = vecs[:, 0].copy()
    coef_a = vecs[:, 1].copy()
    psi_s = bloch_to_zgrid(cfg, coef_s)
    psi_a = bloch_to_zgrid(cfg, coef_a)
    ph_s = _fix_phase(psi_s, j_anchor)
    ph_a = _fix_phase(psi_a, j_anchor)
    coef_s *= ph_s
    coef_a *= ph_a
    psi_s *= ph_s
    psi_a *= ph_a

    def centroid(psi: np.ndarray) -> float:
        return float(np.sum(z_m * np.sum(np.abs(psi) ** 2, axis=1)) * dz)

    psi_l = (psi_s + psi_a) / np.sqrt(2.0)
    if centroid(psi_l) > geom["barrier_z_m"]:
        coef_a = -coef_a
        psi_a = -psi_a
        psi_l = (psi_s + psi_a) / np.sqrt(2.0)
    psi_r = (psi_s - psi_a) / np.sqrt(2.0)
    coef_l = (coef_s + coef_a) / np.sqrt(2.0)
    coef_r = (coef_s - coef_a) / np.sqrt(2.0)

    rho_l = np.sum(np.abs(psi_l) ** 2, axis=1)
    rho_r = np.sum(np.abs(psi_r) ** 2, axis=1)
    overlap = float(np.sum(np.sqrt(rho_l * rho_r)) * dz)

    return WannierDoublet(
        cfg=cfg,
        z_m=z_m,
        psi_s=psi_s,
        psi_a=psi_a,
        psi_l=psi_l,
        psi_r=psi_r,
        coef_s=coef_s,
        coef_a=coef_a,
        coef_l=coef_l,
        coef_r=coef_r,
        epsilon_er=eps_er,
        epsilon_hz=units.er_to_hz(eps_er),
        well_center_nm=geom["sigma_plus_z_m"] * 1e9,
        barrier_nm=geom["barrier_z_m"] * 1e9,
        centroid_l_nm=centroid(psi_l) * 1e9,
        centroid_r_nm=centroid(psi_r) * 1e9,
        overlap_lr=overlap,
    )


def localized_observables(z_m: np.ndarray, psi_z: np.ndarray, f: float | None = None) -> LocalizedObservables:
    """Density, magnetic populations, magnetization and centroid of a
    normalized spinor wavefunction sampled on a uniform period grid.

    Raises
    ------
    ValueError
        If the state norm deviates from 1 by more than 1e-6.
    """
    z_m = np.asarray(z_m)
    psi_z = np.asarray(psi_z)
    n_pts, dim = psi_z.shape
    dz = (z_m[1] - z_m[0]) if n_pts > 1 else 1.0
    density = np.sum(np.abs(psi_z) ** 2, axis=1)
    norm = float(np.sum(density) * dz)
    if abs(norm - 1.0) > 1e-6:
        raise ValueError(f"state not normalized: |psi|^2 integrates to {norm:.8f}")
    populations = np.sum(np.abs(psi_z) ** 2, axis=0) * dz
    f_val = (dim - 1) / 2.0 if f is None else f
    m = np.arange(dim) - f_val
    fz_mean = float(np.sum(m * populations))
    centroid = float(np.sum(z_m * density) * dz)
    return LocalizedObservables(
        density=density,
        populations=populations,
        fz_mean=fz_mean,
        centroid_nm=centroid * 1e9,
    )


def two_level_model(cfg: LatticeConfig, certify: bool = False) -> TwoLevelModel:
    """Extract (epsilon, delta, Omega) from spectral data only.

    epsilon is the q-averaged splitting with B_z forced to zero, nu the
    splitting at the actual B_z; delta = sqrt(nu^2 - eps^2) sign(B_z).
    If nu < eps (numerically), delta is clamped to 0 and flagged.
    """
    sym = doublet_splitting(solve_bands(cfg.replace(bz_mg=0.0), n_bands=2, certify=certify))
    eps_hz = sym.epsilon_hz
    if cfg.bz_mg == 0.0:
        nu_hz = eps_hz
    else:
        act = doublet_splitting(solve_bands(cfg, n_bands=2, certify=certify))
        nu_hz = act.epsilon_hz
    clamped = False
    if nu_hz < eps_hz:
        if (eps_hz - nu_hz) / max(eps_hz, 1e-300) > 1e-9:
            log.warning("nu(Bz)=%.6g Hz below epsilon=%.6g Hz; clamping delta to 0", nu_hz, eps_hz)
        clamped = True
        delta_hz = 0.0
    else:
        delta_hz = float(np.sqrt(nu_hz**2 - eps_hz**2) * np.sign(cfg.bz_mg))
    return TwoLevelModel(
        epsilon_hz=eps_hz,
        delta_hz=delta_hz,
        omega_hz=nu_hz,
        rabi_period_us=1e6 / nu_hz if nu_hz > 0 else np.inf,
        clamped=clamped,
    )
