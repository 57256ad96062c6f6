"""Turn a validated config into an instrumented run plus scattering estimates."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import ExperimentConfig
from .grid import Field
from .oracles import gaussian_initial
from .runs import Trajectory, simulate
from .scattering import ScatteringEstimate, extract_scattering_state

NEEDS_NEGATIVE = ("initial_moment_bounds", "moment_order")


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    run: Trajectory
    est: ScatteringEstimate | None
    est_minus: ScatteringEstimate | None


def initial_field(cfg: ExperimentConfig) -> Field:
    return gaussian_initial(cfg.gaussian(), cfg.make_grid())


def keep_times(cfg: ExperimentConfig) -> list[float]:
    """Times whose fields are retained: a regular grid up to ``t_eval``, plus
    the doubled times used by Cauchy differences and the extraction pair."""
    T, te, dk = cfg.time.t_end, cfg.t_eval, cfg.verify.keep_interval
    n = int(math.floor(te / dk + 1e-9))
    regular = [round(i * dk, 12) for i in range(1, n + 1)]
    doubled = [2 * s for s in regular if 2 * s <= T / 2 + 1e-12]
    return sorted(set(regular + doubled + [T / 2, T]))


def _extract(run: Trajectory, cfg: ExperimentConfig, direction: int = 1) -> ScatteringEstimate | None:
    T = cfg.time.t_end
    if T <= 0:
        return None
    snaps = list(run.fields.values())
    return extract_scattering_state(snaps, direction, cfg.physics_params(),
                                    margin=cfg.guard.margin, tol=cfg.guard.tol)


def run_experiment(cfg: ExperimentConfig, observer=None, negative: bool = True) -> ExperimentResult:
    p = cfg.physics_params()
    phi = initial_field(cfg)
    run = simulate(phi, p, cfg.segments(), keep_times(cfg), observer)
    est = _extract(run, cfg)
    est_minus = None
    if negative and est is not None and p.lam != 0 and any(c in cfg.verify.checks for c in NEEDS_NEGATIVE):
        if np.all(phi.values.imag == 0):
            # conj(phi) = phi, so the backward run is the conjugate of the forward one
            est_minus = _extract(run, cfg, -1)
        else:
            back = simulate(phi.conj(), p, cfg.segments(), keep_times(cfg))
            est_minus = _extract(back, cfg, -1)
    return ExperimentResult(cfg, run, est, est_minus)
