"""Instrumented trajectories: observable series plus a few retained fields."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .dynamics import ObservableSeries, PhysicsParams, SolverParams, evolve
from .grid import Field


@dataclass
class Trajectory:
    params: PhysicsParams
    initial: Field
    series: ObservableSeries
    fields: dict[float, Field] = field(default_factory=dict)
    final: Field | None = None
    segments: tuple[SolverParams, ...] = ()

    @property
    def horizon(self) -> float:
        return self.series[-1].t

    def kept_times(self) -> list[float]:
        return sorted(self.fields)

    def field_at(self, t: float) -> Field:
        best = min(self.fields, key=lambda s: abs(s - t))
        if abs(best - t) > 1e-9 * max(1.0, abs(t)):
            raise KeyError(f"no retained field at t={t}")
        return self.fields[best]

    def snapshot_spacing(self, t_lo: float, t_hi: float) -> float:
        t = self.series.t
        sel = t[(t >= t_lo) & (t <= t_hi)]
        return float(np.max(np.diff(sel))) if sel.size > 1 else np.inf


def simulate(
    phi: Field,
    p: PhysicsParams,
    segments: Sequence[SolverParams],
    keep: Iterable[float] = (),
    observer=None,
) -> Trajectory:
    """Evolve through consecutive fixed-step segments.

    Fields at times in ``keep`` (matched against snapshot times) are
    retained, as are the initial and final fields.
    """
    targets = np.array(sorted(set(float(k) for k in keep)))
    kept: dict[float, Field] = {phi.time: phi}
    last = [None]

    def grab(obs, f):
        # segment boundaries are recorded by both segments
        if last[0] is not None and f.time == last[0]:
            return
        last[0] = f.time
        if targets.size:
            i = int(np.argmin(np.abs(targets - f.time)))
            if abs(targets[i] - f.time) <= 1e-9 * max(1.0, abs(f.time)):
                kept[float(targets[i])] = f
        if observer is not None:
            observer(obs, f)

    series = ObservableSeries()
    current = phi
    for seg in segments:
        current, part = evolve(current, seg, p, grab)
        series.extend(part if not series else part[1:])
    kept[current.time] = current
    return Trajectory(p, phi, series, kept, current, tuple(segments))
