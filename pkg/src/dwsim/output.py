"""Bit-stable CSV/JSON emission and command dispatch.

Floats are written with fixed significant-digit formatting and rows in
a fixed order, so identical configs reproduce byte-identical bundles.
Sweep and ensemble points fan out to a thread pool; the reduction is an
ordered gather, making results independent of the worker count.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__
from .bands import doublet_splitting, solve_bands, wannier_doublet
from .config import RunConfig
from .dynamics import prepare_ground_l, preparation_schedule, propagate_static
from .ensemble import EnsembleSpec, ensemble_magnetization
from .errors import ConfigError, ConvergenceError
from .fitting import fit_damped_sinusoid
from .lattice import LatticeConfig, potential_curves

COMMANDS = ("potentials", "bands", "wannier", "rabi", "prepare", "sweep", "ensemble", "fit")


@dataclass(frozen=True)
class OutputBundle:
    directory: str
    files: dict
    manifest_path: str


def _fmt(value, precision: int) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return value
    return f"{float(value):.{precision}g}"


def write_csv(path: str, header: list[str], rows, precision: int) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v, precision) for v in row])


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if dataclasses.is_dataclass(obj):
        return dataclasses.asdict(obj)
    raise TypeError(f"not JSON serializable: {type(obj)}")


def write_json(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True, default=_json_default)
        handle.write("\n")


def _sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _finish_bundle(directory: str, command: str, run_cfg: RunConfig, files: list[str]) -> OutputBundle:
    checksums = {name: _sha256(os.path.join(directory, name)) for name in sorted(files)}
    manifest = {
        "version": f"dwsim {__version__}",
        "command": command,
        "basis_order": "m_F = -F..+F ascending",
        "config": run_cfg.resolved,
        "files": checksums,
    }
    manifest_path = os.path.join(directory, "manifest.json")
    write_json(manifest_path, manifest)
    return OutputBundle(
        directory=directory,
        files={name: os.path.join(directory, name) for name in files},
        manifest_path=manifest_path,
    )


def sweep_frequency(
    cfg: LatticeConfig,
    parameter: str,
    values,
    u1_scale: float = 1.0,
    jobs: int = 1,
) -> list[tuple[float, float, float, str]]:
    """Ground-doublet splitting over one parameter axis.

    Returns rows (value, nu_hz, flatness, status) in ascending axis
    order; points whose band solve fails certification are flagged
    'unconverged' and the sweep continues.
    """
    values = sorted(float(v) for v in values)

    def point(value: float):
        if parameter == "u1":
            cfg_i = cfg.replace(u1_er=value * u1_scale)
        else:
            cfg_i = cfg.replace(u1_er=cfg.u1_er * u1_scale)
            if parameter == "bx":
                cfg_i = cfg_i.replace(bx_mg=value)
            elif parameter == "bz":
                cfg_i = cfg_i.replace(bz_mg=value)
            elif parameter == "theta":
                cfg_i = cfg_i.replace(theta_deg=value)
            else:
                raise ValueError(f"unknown sweep parameter {parameter!r}")
        try:
            split = doublet_splitting(solve_bands(cfg_i, n_bands=2))
            return (value, split.epsilon_hz, max(split.flatness), "ok")
        except ConvergenceError:
            return (value, float("nan"), float("nan"), "unconverged")

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(point, values))
    return [point(v) for v in values]


def _axis_values(start: float, stop: float, steps: int) -> np.ndarray:
    return np.linspace(start, stop, steps)


def _cmd_potentials(run_cfg: RunConfig, directory: str, jobs: int) -> list[str]:
    cfg = run_cfg.lattice
    curves = potential_curves(cfg)
    dim = cfg.spin.dim
    f_int = cfg.species.f
    header = (
        ["z_nm"]
        + [f"adiabatic_{k + 1}" for k in range(dim)]
        + [f"diabatic_m{m - f_int:+g}" for m in range(dim)]
    )
    rows = [
        [curves.z_nm[j]] + list(curves.adiabatic[:, j]) + list(curves.diabatic[:, j])
        for j in range(len(curves.z_nm))
    ]
    write_csv(os.path.join(directory, "potentials.csv"), header, rows, run_cfg.output.precision)
    return ["potentials.csv"]


def _cmd_bands(run_cfg: RunConfig, directory: str, jobs: int) -> list[str]:
    sol = solve_bands(run_cfg.lattice, n_bands=6)
    header = ["q_over_kL"] + [f"E{b + 1}" for b in range(6)]
    rows = [[sol.q_over_kl[k]] + list(sol.energies[k]) for k in range(len(sol.q_over_kl))]
    write_csv(os.path.join(directory, "bands.csv"), header, rows, run_cfg.output.precision)
    return ["bands.csv"]


def _cmd_wannier(run_cfg: RunConfig, directory: str, jobs: int) -> list[str]:
    cfg = run_cfg.lattice
    wd = wannier_doublet(cfg)
    dim = cfg.spin.dim
    f_int = cfg.species.f
    header = ["z_nm"]
    for tag in ("s", "a", "l", "r"):
        header += [f"{tag}_m{m - f_int:+g}" for m in range(dim)]
    dens = [np.abs(getattr(wd, f"psi_{tag}")) ** 2 for tag in ("s", "a", "l", "r")]
    rows = []
    for j in range(len(wd.z_m)):
        row = [wd.z_m[j] * 1e9]
        for block in dens:
            row += list(block[j])
        rows.append(row)
    write_csv(os.path.join(directory, "wannier.csv"), header, rows, run_cfg.output.precision)
    sol = solve_bands(cfg, n_bands=2)
    split = doublet_splitting(sol)
    write_json(
        os.path.join(directory, "doublet.json"),
        {
            "epsilon_hz": wd.epsilon_hz,
            "epsilon_er": wd.epsilon_er,
            "epsilon_q_averaged_hz": split.epsilon_hz,
            "centroid_l_nm": wd.centroid_l_nm,
            "centroid_r_nm": wd.centroid_r_nm,
            "separation_nm": wd.centroid_r_nm - wd.centroid_l_nm,
            "overlap_lr": wd.overlap_lr,
            "well_center_nm": wd.well_center_nm,
            "barrier_nm": wd.barrier_nm,
            "flatness": list(split.flatness),
            "basis_order": "m_F = -F..+F ascending",
        },
    )
    return ["wannier.csv", "doublet.json"]


def _cmd_rabi(run_cfg: RunConfig, directory: str, jobs: int) -> list[str]:
    cfg = run_cfg.lattice
    doublet = wannier_doublet(cfg.replace(bz_mg=0.0))
    t = np.arange(0.0, run_cfg.rabi.t_max_us + 0.5 * run_cfg.rabi.dt_out_us, run_cfg.rabi.dt_out_us)
    series = propagate_static(cfg, doublet.coef_l, t, doublet=doublet)
    dim = cfg.spin.dim
    f_int = cfg.species.f
    header = ["t_us", "pL", "pR", "leakage", "fz"] + [f"p_m{m - f_int:+g}" for m in range(dim)]
    rows = [
        [series.t_us[k], series.p_l[k], series.p_r[k], series.leakage[k], series.fz[k]]
        + list(series.p_m[k])
        for k in range(len(series.t_us))
    ]
    write_csv(os.path.join(directory, "rabi.csv"), header, rows, run_cfg.output.precision)
    return ["rabi.csv"]


def _cmd_prepare(run_cfg: RunConfig, directory: str, jobs: int) -> list[str]:
    cfg = run_cfg.lattice
    block = run_cfg.prepare
    schedule = preparation_schedule(
        cfg,
        bx_ramp_us=block.bx_ramp_us,
        bz_ramp_us=block.bz_ramp_us,
        bz_start_mg=block.bz_start_mg,
    )
    result = prepare_ground_l(cfg, schedule, dt_us=block.dt_us)
    report = result.report
    write_json(
        os.path.join(directory, "prep.json"),
        {
            "fidelity_l": result.fidelity_l,
            "p_r": result.p_r,
            "doublet_population": result.doublet_population,
            "initial_stretched_population": result.initial_stretched_population,
            "dt_us": result.series.dt_us,
            "step_doubling_infidelity": result.series.step_doubling_infidelity,
            "adiabaticity": {
                "epsilon_hz": report.epsilon_hz,
                "min_gap_doublet_excited_er": report.min_gap_doublet_excited_er,
                "gap_at_end_er": report.gap_at_end_er,
                "sudden_threshold": report.sudden_threshold,
                "adiabatic_threshold": report.adiabatic_threshold,
                "segments": [dataclasses.asdict(s) for s in report.segments],
            },
        },
    )
    return ["prep.json"]


def _cmd_sweep(run_cfg: RunConfig, directory: str, jobs: int) -> list[str]:
    block = run_cfg.sweep
    values = _axis_values(block.start, block.stop, block.steps)
    rows = sweep_frequency(run_cfg.lattice, block.parameter, values, block.u1_scale, jobs)
    header = ["param_value", "nu_hz", "flatness", "status"]
    write_csv(os.path.join(directory, "sweep.csv"), header, rows, run_cfg.output.precision)
    return ["sweep.csv"]


def _cmd_ensemble(run_cfg: RunConfig, directory: str, jobs: int) -> list[str]:
    block = run_cfg.ensemble
    spec = EnsembleSpec(
        cfg=run_cfg.lattice,
        u1_relative_spread=block.spread,
        n_samples=block.n_samples,
        seed=block.seed,
        distribution=block.distribution,
    )
    t = np.arange(0.0, block.t_max_us + 0.5 * block.dt_out_us, block.dt_out_us)
    result = ensemble_magnetization(spec, t, jobs=jobs)
    write_csv(
        os.path.join(directory, "ensemble.csv"),
        ["t_us", "mean_fz"],
        [[result.t_us[k], result.mean_fz[k]] for k in range(len(result.t_us))],
        run_cfg.output.precision,
    )
    fit = fit_damped_sinusoid(result.t_us, result.mean_fz)
    write_json(os.path.join(directory, "fit.json"), _fit_payload(fit) | {
        "n_samples": block.n_samples,
        "n_skipped": result.n_skipped,
        "seed": block.seed,
        "spread": block.spread,
    })
    return ["ensemble.csv", "fit.json"]


def _fit_payload(fit) -> dict:
    return {
        "amplitude": fit.amplitude,
        "frequency_hz": fit.frequency_hz,
        "decay_rate_per_us": fit.decay_rate_per_us,
        "tau_us": fit.tau_us if np.isfinite(fit.tau_us) else None,
        "phase_rad": fit.phase_rad,
        "offset": fit.offset,
        "residual_rms": fit.residual_rms,
        "n_iterations": fit.n_iterations,
        "stderr": fit.stderr,
    }


def _cmd_fit(run_cfg: RunConfig, directory: str, jobs: int) -> list[str]:
    block = run_cfg.fit
    if not block.input:
        raise ConfigError("the fit command needs [fit] input = <csv path>")
    if not os.path.isfile(block.input):
        raise ConfigError(f"fit input not found: {block.input}")
    with open(block.input, encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None or block.t_column not in reader.fieldnames:
            raise ConfigError(f"column {block.t_column!r} not in {block.input}")
        if block.y_column not in reader.fieldnames:
            raise ConfigError(f"column {block.y_column!r} not in {block.input}")
        t, y = [], []
        for record in reader:
            t.append(float(record[block.t_column]))
            y.append(float(record[block.y_column]))
    fit = fit_damped_sinusoid(np.asarray(t), np.asarray(y))
    write_json(os.path.join(directory, "fit.json"), _fit_payload(fit) | {"input": block.input})
    return ["fit.json"]


_DISPATCH = {
    "potentials": _cmd_potentials,
    "bands": _cmd_bands,
    "wannier": _cmd_wannier,
    "rabi": _cmd_rabi,
    "prepare": _cmd_prepare,
    "sweep": _cmd_sweep,
    "ensemble": _cmd_ensemble,
    "fit": _cmd_fit,
}


def run_command(command: str, run_cfg: RunConfig, jobs: int = 1, out_dir: str | None = None) -> OutputBundle:
    """Execute one CLI command and emit its output bundle."""
    if command not in _DISPATCH:
        raise ConfigError(f"unknown command {command!r}; choose from {', '.join(COMMANDS)}")
    directory = out_dir if out_dir is not None else run_cfg.output.directory
    os.makedirs(directory, exist_ok=True)
    files = _DISPATCH[command](run_cfg, directory, jobs)
    return _finish_bundle(directory, command, run_cfg, files)
