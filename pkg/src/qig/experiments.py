"""Experiment runners that turn a config into CSV/JSON artifacts.

Each runner returns ``{file name: text}``; writing files and the manifest is
left to :func:`write_run`. Runners are deterministic: parallel work is mapped
in a fixed order and assembled single-threaded.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from . import __version__
from .classical_info import cfim, coin_family, shannon_entropy
from .config import ExperimentConfig
from .criticality_witness import (
    direction_averaged_qfi,
    driving_scaling_dimension,
    energy_susceptibility_exponent,
    fs_size_exponent,
    mean_bound,
    producibility_bound,
    scaling_fit,
    ScalingSeries,
    tfim_instance,
)
from .errors import BandDegeneracyError, NumericalError
from .fluctuations_response import fluctuation_report
from .manifold_topology import (
    bloch_family,
    chern_number,
    gauss_bonnet,
    metric_field,
    qwz_family,
    qwz_grid,
    sphere_grid,
    volume_chern_check,
)
from .quantum_core import SIGMA_X, SIGMA_Z, collective_spin, staggered_spin
from .state_geometry import qfi

CSV_DIGITS = ".12g"


def _fmt(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), CSV_DIGITS)
    return str(value)


def to_csv(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _round_json(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {k: _round_json(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_json(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(format(float(obj), CSV_DIGITS))
    return obj


def to_json(obj: Any) -> str:
    return json.dumps(_round_json(obj), indent=2, sort_keys=True) + "\n"


def _pmap(func: Callable, items: Sequence, threads: int) -> list:
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(func, items))
    return [func(x) for x in items]


# --------------------------------------------------------------------------
# runners


def run_coin_info(config: ExperimentConfig, threads: int = 1) -> dict[str, str]:
    p = config.parameters
    family = coin_family()
    rows = []
    for lam in np.linspace(p["lambda_min"], p["lambda_max"], p["points"]):
        rows.append((lam, shannon_entropy([lam, 1.0 - lam]), cfim(family, lam)[0, 0]))
    return {"coin_info.csv": to_csv(["lambda", "shannon_bits", "fisher"], rows)}


def qubit_generator(phi: float) -> np.ndarray:
    """Spin-1/2 Pauli operator along the direction at polar angle ``phi`` in the x-z plane."""
    return np.cos(phi) * SIGMA_Z + np.sin(phi) * SIGMA_X


def qubit_row(delta: float, beta: float, phi: float) -> tuple:
    rep = fluctuation_report(delta * SIGMA_Z, qubit_generator(phi), beta)
    return (beta, phi, rep.total, rep.classical, rep.quantum, rep.qfi)


def run_qubit_info(config: ExperimentConfig, threads: int = 1) -> dict[str, str]:
    p = config.parameters
    betas = np.linspace(p["beta_min"], p["beta_max"], p["points"])
    rows = [qubit_row(p["delta"], b, np.pi * f) for f in p["phi_over_pi"] for b in betas]
    header = ["beta", "phi", "variance", "thermal_variance", "quantum_variance", "qfi"]
    return {"qubit_info.csv": to_csv(header, rows)}


def two_spin_state(kind: str, alpha: float) -> np.ndarray:
    """``psi``: ``cos a |ud> - sin a |du>``; ``phi``: ``cos a |ud> + sin a |dd>``.

    Basis order is ``|uu>, |ud>, |du>, |dd>`` with up the first basis state.
    """
    c, s = np.cos(alpha), np.sin(alpha)
    if kind == "psi":
        return np.array([0.0, c, -s, 0.0], dtype=complex)
    if kind == "phi":
        return np.array([0.0, c, 0.0, s], dtype=complex)
    raise ValueError(f"unknown two-spin state {kind!r}")


def two_spin_generator(kind: str, axis: str) -> np.ndarray:
    """``ferro``: ``S_A + S_B``; ``antiferro``: ``S_A - S_B`` along ``axis``."""
    if kind == "ferro":
        return collective_spin(axis, 2)
    if kind == "antiferro":
        return staggered_spin(axis, 2)
    raise ValueError(f"unknown generator {kind!r}")


def two_spin_rows(alpha: float) -> list[tuple]:
    rows = []
    element = producibility_bound(2, 1) / 2
    mean = mean_bound(2, 1) / 2
    for state in ("psi", "phi"):
        psi = two_spin_state(state, alpha)
        for gen in ("ferro", "antiferro"):
            avg = direction_averaged_qfi(psi, 2, staggered=(gen == "antiferro")) / 2
            for axis in "xyz":
                rows.append((alpha, state, gen, axis, qfi(psi, two_spin_generator(gen, axis)) / 2, avg, element, mean))
    return rows


def run_two_spin(config: ExperimentConfig, threads: int = 1) -> dict[str, str]:
    alphas = np.linspace(0.0, np.pi / 2, config.parameters["points"])
    rows = [r for a in alphas for r in two_spin_rows(a)]
    header = [
        "alpha",
        "state",
        "generator",
        "axis",
        "qfi_density",
        "mean_qfi_density",
        "separable_bound",
        "mean_separable_bound",
    ]
    return {"two_spin.csv": to_csv(header, rows)}


def _fit_block(sizes: np.ndarray, values: np.ndarray) -> dict[str, Any] | None:
    if sizes.size < 4:
        return None
    fit = scaling_fit(ScalingSeries(sizes=sizes, values=values, dimension=1, nu=1.0, zeta=1.0))
    return {"exponent": fit.exponent, "prefactor": fit.prefactor, "residual": fit.residual}


def run_tfim_scaling(config: ExperimentConfig, threads: int = 1) -> dict[str, str]:
    p = config.parameters
    sizes = sorted(p["sizes"])
    jobs = [(g, L) for g in p["couplings"] for L in sizes]

    def one(job: tuple[float, int]) -> tuple[float, float]:
        g, L = job
        try:
            return tfim_instance(L, g, periodic=p["periodic"])
        except NumericalError as exc:
            raise type(exc)(f"TFIM instance L={L}, g={g}: {exc}") from exc

    results = _pmap(one, jobs, threads)
    rows = [(L, g, fs, es) for (g, L), (fs, es) in zip(jobs, results)]
    dim = driving_scaling_dimension(1.0, 1.0, 1)
    fits = []
    for g in p["couplings"]:
        sel = [(L, fs, es) for L, gg, fs, es in rows if gg == g]
        arr = np.array(sel, dtype=float)
        fits.append(
            {
                "g": g,
                "fs_density": _fit_block(arr[:, 0], arr[:, 1]),
                "energy_susceptibility": _fit_block(arr[:, 0], arr[:, 2]),
            }
        )
    fit_doc = {
        "fits": fits,
        "predicted": {
            "fs_density_exponent": fs_size_exponent(dim, dim, 1.0, 1),
            "energy_susceptibility_exponent": energy_susceptibility_exponent(1.0, 1.0, 1),
        },
    }
    return {
        "tfim_scaling.csv": to_csv(["L", "g", "fs_density", "energy_susceptibility"], rows),
        "tfim_fit.json": to_json(fit_doc),
    }


def chern_row(m: float, n: int) -> tuple:
    """One sweep row; a band touching on the grid is marked instead of raising."""
    try:
        check = volume_chern_check(qwz_family(m), qwz_grid(n))
    except BandDegeneracyError:
        return (m, "", "", "degenerate")
    return (m, check.chern, check.volume, check.holds)


def run_chern_sweep(config: ExperimentConfig, threads: int = 1) -> dict[str, str]:
    p = config.parameters
    rows = _pmap(lambda m: chern_row(m, p["grid"]), list(p["masses"]), threads)
    return {"chern_sweep.csv": to_csv(["m", "chern", "volume", "bound_satisfied"], rows)}


def run_bloch_geometry(config: ExperimentConfig, threads: int = 1) -> dict[str, str]:
    p = config.parameters
    family, grid = bloch_family(), sphere_grid(p["n_polar"], p["n_azimuth"])
    report = gauss_bonnet(metric_field(family, grid, threads))
    k = report.K[report.interior]
    doc = {
        "volume": report.volume,
        "chern": chern_number(family, grid, sphere_closure=True, threads=threads),
        "euler": report.euler,
        "K_mean": float(np.mean(k)),
        "K_max_dev": float(np.max(np.abs(k - np.mean(k)))),
    }
    return {"bloch_geometry.json": to_json(doc)}


RUNNERS: dict[str, Callable[[ExperimentConfig, int], dict[str, str]]] = {
    "coin-info": run_coin_info,
    "qubit-info": run_qubit_info,
    "two-spin": run_two_spin,
    "tfim-scaling": run_tfim_scaling,
    "chern-sweep": run_chern_sweep,
    "bloch-geometry": run_bloch_geometry,
}


# --------------------------------------------------------------------------
# output


def sha256(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def write_run(config: ExperimentConfig, out_dir: str | Path, threads: int = 1) -> dict[str, Any]:
    """Run the configured experiment, write its files and ``manifest.json``.

    Returns the manifest. Files are written with LF line endings.
    """
    start = time.perf_counter()
    outputs = RUNNERS[config.experiment](config, threads)
    duration = time.perf_counter() - start
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    listing = []
    for name in sorted(outputs):
        text = outputs[name]
        with open(out / name, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        listing.append({"file": name, "sha256": sha256(text), "bytes": len(text.encode("utf-8"))})
    manifest = {
        "config": config.to_dict(),
        "version": __version__,
        "threads": threads,
        "duration_seconds": duration,
        "outputs": listing,
    }
    with open(out / "manifest.json", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest
