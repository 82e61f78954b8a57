"""
Reporting

Writers for the JSON and CSV artifacts of an experiment and the PNG charts
rendered from them by the ``report`` subcommand.
"""

import json
import logging
import math
from fractions import Fraction
from numbers import Number
from pathlib import Path
from typing import Dict, List, Optional, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def _make_json_safe(value):
    """Recursively convert numpy types, fractions and non-finite floats to JSON-serialisable values."""
    if isinstance(value, dict):
        return {str(key): _make_json_safe(val) for key, val in value.items()}
    if isinstance(value, (list, tuple)):
        return [_make_json_safe(item) for item in value]
    if isinstance(value, np.ndarray):
        return [_make_json_safe(item) for item in value.tolist()]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, bool) or value is None:
        return value
    if isinstance(value, Number):
        if isinstance(value, float):
            if math.isnan(value):
                return "nan"
            if math.isinf(value):
                return "inf" if value > 0 else "-inf"
            return value
        return int(value)
    return value


def write_json(path: PathLike, payload: Dict[str, object]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(_make_json_safe(payload), handle, indent=2, sort_keys=True)
        handle.write("\n")
    logger.info(f"[Report] Wrote {path}")
    return path


def write_table(path: PathLike, table: pd.DataFrame) -> Path:
    """CSV with 17 significant digits so reruns are byte-identical."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(path, index=False, float_format="%.17g")
    logger.info(f"[Report] Wrote {path} ({len(table)} rows)")
    return path


def _finite(value) -> Optional[float]:
    if value is None or isinstance(value, str):
        return None
    value = float(value)
    return value if math.isfinite(value) else None


def plot_sup_norm(trajectory: pd.DataFrame, rate: Dict[str, object], output_path: PathLike) -> Optional[Path]:
    """Log-log sup-norm against T - t with the fitted power law."""
    blowup = rate.get("blowup") or {}
    T_est = _finite(blowup.get("T_est"))
    if T_est is None:
        logger.warning("[Report] No blow-up time in rate.json; skipping sup-norm chart")
        return None
    tau = T_est - trajectory["t"].to_numpy()
    sup = trajectory["sup_norm"].to_numpy()
    keep = (tau > 0) & (sup > 0)

    plt.figure(figsize=(10, 6))
    plt.loglog(tau[keep], sup[keep], label="sup norm", linewidth=2, color="blue")
    fit = rate.get("rate") or {}
    exponent = _finite(fit.get("exponent"))
    plateau = _finite(fit.get("plateau"))
    if exponent is not None and plateau is not None:
        plt.loglog(
            tau[keep],
            plateau * tau[keep] ** (-exponent),
            label=f"fit: {plateau:.4g} (T-t)^-{exponent:.4f}",
            linewidth=2,
            linestyle="--",
            color="black",
        )
    plt.gca().invert_xaxis()
    plt.title(f"Sup-norm growth (T_est = {T_est:.10g})")
    plt.xlabel("T - t")
    plt.ylabel("sup |U|")
    plt.legend(loc="best")
    plt.grid(alpha=0.3)
    plt.tight_layout()
    plt.savefig(output_path, dpi=150)
    plt.close()
    return Path(output_path)


def plot_plateau(trajectory: pd.DataFrame, rate: Dict[str, object], output_path: PathLike) -> Optional[Path]:
    """(T - t)^(1/(p-1)) sup|U| against T - t; flat for a type-I rate."""
    T_est = _finite((rate.get("blowup") or {}).get("T_est"))
    beta = _finite((rate.get("params") or {}).get("beta_exp"))
    if T_est is None or beta is None:
        return None
    tau = T_est - trajectory["t"].to_numpy()
    sup = trajectory["sup_norm"].to_numpy()
    keep = tau > 0

    plt.figure(figsize=(10, 6))
    plt.semilogx(tau[keep], tau[keep] ** beta * sup[keep], linewidth=2, color="blue")
    lower = _finite((rate.get("rate") or {}).get("lower_bound"))
    if lower is not None:
        plt.axhline(lower, linestyle="--", color="red", label="type-I lower bound")
        plt.legend(loc="best")
    plt.gca().invert_xaxis()
    plt.title("Rescaled sup-norm plateau")
    plt.xlabel("T - t")
    plt.ylabel("(T - t)^(1/(p-1)) sup |U|")
    plt.grid(alpha=0.3)
    plt.tight_layout()
    plt.savefig(output_path, dpi=150)
    plt.close()
    return Path(output_path)


def plot_energy(energy: pd.DataFrame, output_path: PathLike) -> Path:
    """E(s) and the dissipation ∫|W_s|^2 ρ against s."""
    fig, (top, bottom) = plt.subplots(2, 1, figsize=(10, 7), sharex=True)
    top.plot(energy["s"], energy["E"], label="E", linewidth=2, color="blue")
    top.plot(energy["s"], energy["E_loc"], label="E_psi", linewidth=1.5, linestyle="--", color="green")
    top.set_ylabel("energy")
    top.legend(loc="best")
    top.grid(alpha=0.3)
    bottom.semilogy(energy["s"], np.maximum(energy["dissipation"], 1e-300), linewidth=2, color="red")
    bottom.set_xlabel("s")
    bottom.set_ylabel("dissipation")
    bottom.grid(alpha=0.3)
    fig.suptitle("Rescaled energy and dissipation")
    plt.tight_layout()
    plt.savefig(output_path, dpi=150)
    plt.close(fig)
    return Path(output_path)


def render_report(directory: PathLike) -> List[Path]:
    """
    Render every chart the artifacts in ``directory`` support.

    Raises:
        FileNotFoundError: if the directory holds neither trajectory.csv nor energy.csv.
    """
    directory = Path(directory)
    trajectory_csv = directory / "trajectory.csv"
    energy_csv = directory / "energy.csv"
    if not trajectory_csv.exists() and not energy_csv.exists():
        raise FileNotFoundError(f"No trajectory.csv or energy.csv in {directory}")

    charts: List[Path] = []
    if trajectory_csv.exists():
        trajectory = pd.read_csv(trajectory_csv)
        rate_json = directory / "rate.json"
        rate = json.loads(rate_json.read_text(encoding="utf-8")) if rate_json.exists() else {}
        for chart in (
            plot_sup_norm(trajectory, rate, directory / "sup_norm.png"),
            plot_plateau(trajectory, rate, directory / "plateau.png"),
        ):
            if chart is not None:
                charts.append(chart)
    if energy_csv.exists():
        charts.append(plot_energy(pd.read_csv(energy_csv), directory / "energy.png"))
    logger.info(f"[Report] Rendered {len(charts)} charts in {directory}")
    return charts
