"""Sweeps and robustness scans built on the protocol."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .atom_cavity import SystemParams, derive_rates, photon_probability
from .errors import DomainError, PreconditionError
from .optics import SplitterAngle
from .protocol import ClickSequence, emission_probability_P2, run_cascade, target_state

DEFAULT_TAU_GRID = (0.0, 0.5, 1000)


@dataclass
class SweepSeries:
    axis: str
    unit: str
    x: np.ndarray
    y: np.ndarray
    ylabel: str = "y"
    params_echo: dict[str, Any] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.x.shape != self.y.shape:
            raise PreconditionError("x and y must have equal length")
        if np.any(np.diff(self.x) <= 0):
            raise PreconditionError("x must be strictly increasing")

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.x.tolist(), self.y.tolist()))

    def argmax(self) -> tuple[float, float]:
        i = int(np.argmax(self.y))
        return float(self.x[i]), float(self.y[i])

    def to_json(self) -> dict[str, Any]:
        return {
            "axis": {"name": self.axis, "unit": self.unit},
            "ylabel": self.ylabel,
            "points": [[x, y] for x, y in self.points],
            "params_echo": self.params_echo,
            "notes": list(self.notes),
        }


def grid(start: float, stop: float, count: int) -> np.ndarray:
    if count < 1:
        raise PreconditionError("grid needs at least one point")
    return np.linspace(start, stop, int(count))


def sweep_ptotal(
    p: SystemParams,
    angle: SplitterAngle,
    tau_grid=None,
    seq: ClickSequence | None = None,
) -> SweepSeries:
    """Total herald probability vs kappa*tau with all four systems evolved for tau."""
    taus = grid(*DEFAULT_TAU_GRID) if tau_grid is None else np.asarray(tau_grid, dtype=float)
    if taus.size == 0:
        raise PreconditionError("empty tau grid")
    if np.any(taus < 0):
        raise PreconditionError("tau must be >= 0")
    # herald weight does not depend on tau; evaluate it once
    p3 = run_cascade(p, angle, seq).probability
    y = np.array([p3 * emission_probability_P2(p, t) for t in taus])
    return SweepSeries(
        "kappa_tau",
        "dimensionless",
        taus * p.kappa,
        y,
        ylabel="p_total",
        params_echo={**p.as_dict(), "theta": angle.theta},
    )


def optimal_tau(p: SystemParams) -> float:
    """Time maximizing each system's photon-emission factor."""
    r = derive_rates(p)
    if not r.underdamped:
        raise DomainError(
            "optimal_tau needs the underdamped regime (Omega^2 > Delta^2/4); "
            "maximize sweep_ptotal over a grid instead"
        )
    wk = r.Omega_k.real
    # arctan of a positive argument already lies in (0, pi/2)
    return math.atan2(2 * wk, r.Gamma) / wk


@dataclass(frozen=True)
class PeakReport:
    tau_closed_form: float
    tau_grid: float
    peak_grid: float
    peak_closed_form: float
    grid_step: float

    @property
    def agrees(self) -> bool:
        return abs(self.tau_grid - self.tau_closed_form) <= self.grid_step


def peak_report(p: SystemParams, angle: SplitterAngle, series: SweepSeries) -> PeakReport:
    tau_star = optimal_tau(p)
    tau_g, peak_g = series.argmax()
    step = float(np.max(np.diff(series.x))) / p.kappa if series.x.size > 1 else math.inf
    p3 = run_cascade(p, angle).probability
    return PeakReport(tau_star, tau_g / p.kappa, peak_g, p3 * photon_probability(p, tau_star) ** 4, step)


def _decoded_fidelity(p: SystemParams, angle: SplitterAngle) -> float | None:
    res = run_cascade(p, angle)
    return res.fidelity_to_target()


def fidelity_vs_theta(p: SystemParams, theta_grid) -> SweepSeries:
    """Fidelity of the heralded state with the target for each splitter angle."""
    xs, ys, notes = [], [], []
    for theta in np.asarray(theta_grid, dtype=float):
        f = _decoded_fidelity(p, SplitterAngle(float(theta)))
        if f is None:
            notes.append(f"theta={theta:.12g}: zero herald probability, point omitted")
            continue
        xs.append(theta)
        ys.append(f)
    return SweepSeries("theta", "rad", xs, ys, ylabel="fidelity", params_echo=p.as_dict(), notes=notes)


def fidelity_vs_lambda_ratio(
    angle: SplitterAngle | None = None,
    ratio_grid=None,
    lambda_R: float = 1.0,
    kappa: float = 1.0,
    gamma_l: float = 0.0,
    gamma_r: float = 0.0,
) -> SweepSeries:
    """Fidelity vs lambda_L/lambda_R (lambda_R fixed); canonical angle by default."""
    angle = angle or SplitterAngle.canonical()
    ratios = np.asarray(ratio_grid, dtype=float)
    if np.any(ratios <= 0):
        raise PreconditionError("coupling ratio must be > 0")
    xs, ys, notes = [], [], []
    for r in ratios:
        p = SystemParams(float(r) * lambda_R, lambda_R, kappa, gamma_l, gamma_r)
        f = _decoded_fidelity(p, angle)
        if f is None:
            notes.append(f"ratio={r:.12g}: zero herald probability, point omitted")
            continue
        xs.append(r)
        ys.append(f)
    echo = {"lambda_R": lambda_R, "kappa": kappa, "gamma_l": gamma_l, "gamma_r": gamma_r, "theta": angle.theta}
    return SweepSeries(
        "lambda_ratio", "dimensionless", xs, ys, ylabel="fidelity", params_echo=echo, notes=notes
    )


@dataclass(frozen=True)
class EfficiencyEffect:
    probability: float
    fidelity: float | None


def detector_efficiency_effect(p: SystemParams, angle: SplitterAngle, taus, eta: float) -> EfficiencyEffect:
    """Herald probability and fidelity with detectors of efficiency eta.

    Missed clicks only discard runs; the state conditioned on four registered
    clicks is the same as with perfect detectors.
    """
    if not 0.0 <= eta <= 1.0:
        raise PreconditionError("eta must lie in [0, 1]")
    res = run_cascade(p, angle)
    prob = eta**4 * res.probability * emission_probability_P2(p, taus)
    fid = res.decoded.fidelity(target_state()) if res.decoded is not None else None
    return EfficiencyEffect(prob, fid)


def series_to_csv(series: list[SweepSeries], echo: dict[str, Any] | None = None) -> str:
    """Wide CSV: '# key=value' comment lines, header, then x,y... rows (12 significant digits).

    All series must share the same x grid.
    """
    if not series:
        raise PreconditionError("nothing to write")
    x = series[0].x
    for s in series[1:]:
        if s.x.shape != x.shape or np.any(s.x != x):
            raise PreconditionError("series do not share an x grid")
    buf = io.StringIO()
    for key, val in (echo or {}).items():
        buf.write(f"# {key}={val}\n")
    for i, s in enumerate(series):
        for key, val in s.params_echo.items():
            buf.write(f"# series{i}.{key}={val}\n")
        for note in s.notes:
            buf.write(f"# series{i}.note={note}\n")
    w = csv.writer(buf, lineterminator="\n")
    names = [s.ylabel if len(series) == 1 else f"{s.ylabel}_{i}" for i, s in enumerate(series)]
    w.writerow([series[0].axis, *names])
    for j in range(x.size):
        w.writerow([f"{x[j]:.12g}", *(f"{s.y[j]:.12g}" for s in series)])
    return buf.getvalue()
