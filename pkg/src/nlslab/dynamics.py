"""Split-step time evolution for ``i u_t + Lap u + lam |u|^alpha u = 0``.

The free group ``T(t) = exp(i t Lap)`` is the Fourier multiplier
``exp(-i |k|^2 t)``; the nonlinear substep is solved exactly because
``|u|`` is pointwise conserved by it.  Both pieces are unitary, so the
Strang composition conserves the discrete mass to roundoff.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np

from .errors import ConfigurationError, CrossCheckError, GuardViolation
from .grid import Field, Grid, forward, inverse


@dataclass(frozen=True)
class PhysicsParams:
    """Equation instance: coupling ``lam``, power ``alpha``, dimension ``d``.

    ``lam < 0`` is defocusing under this sign convention.
    """

    lam: float
    alpha: float
    d: int = 1

    def __post_init__(self):
        if not np.isfinite(self.lam):
            raise ConfigurationError("lambda", "coupling must be finite")
        if not np.isfinite(self.alpha) or self.alpha <= 0:
            raise ConfigurationError("alpha", f"power must satisfy alpha > 0, got {self.alpha!r}")
        if self.d < 1:
            raise ConfigurationError("d", f"dimension must be >= 1, got {self.d!r}")

    @property
    def mass_critical(self) -> bool:
        return abs(self.alpha * self.d - 4.0) < 1e-12

    def in_standing_hypothesis(self) -> bool:
        """``2/d < alpha`` and, for ``d > 2``, ``alpha < 4/(d-2)``."""
        if self.alpha <= 2.0 / self.d:
            return False
        return self.d <= 2 or self.alpha < 4.0 / (self.d - 2)

    def require_standing_hypothesis(self) -> None:
        if not self.in_standing_hypothesis():
            upper = "" if self.d <= 2 else f" and alpha < {4.0 / (self.d - 2):.6g}"
            raise ConfigurationError(
                "alpha",
                f"verification runs need 2/d < alpha{upper} (d={self.d}), got alpha={self.alpha!r}",
            )


@dataclass(frozen=True)
class SolverParams:
    dt: float
    t_end: float
    snapshot_stride: int = 1
    boundary_margin: float = 0.1
    boundary_tol: float = 1e-8
    spectral_tol: float = 1e-8

    def __post_init__(self):
        if not np.isfinite(self.dt) or self.dt == 0:
            raise ConfigurationError("dt", "time step must be finite and nonzero")
        if not np.isfinite(self.t_end):
            raise ConfigurationError("t_end", "target time must be finite")
        if int(self.snapshot_stride) != self.snapshot_stride or self.snapshot_stride < 1:
            raise ConfigurationError("snapshot_stride", f"must be an integer >= 1, got {self.snapshot_stride!r}")
        if not 0 < self.boundary_margin < 0.5:
            raise ConfigurationError("boundary_margin", f"must lie in (0, 0.5), got {self.boundary_margin!r}")
        if not self.boundary_tol > 0:
            raise ConfigurationError("boundary_tol", "must be positive")
        if not self.spectral_tol > 0:
            raise ConfigurationError("spectral_tol", "must be positive")


def free_multiplier(grid: Grid, tau: float) -> np.ndarray:
    return np.exp(-1j * grid.k2 * tau)


def free_propagate(f: Field, tau: float) -> Field:
    """Apply ``T(tau)``; the result is tagged with time ``f.time + tau``."""
    if tau == 0:
        return f.with_values(f.values)
    vals = inverse(forward(f.values) * free_multiplier(f.grid, tau))
    return Field(f.grid, vals, f.time + tau)


def abs_pow(u: np.ndarray, alpha: float) -> np.ndarray:
    """``|u|^alpha`` with ``0`` at vacuum points (no log of zero)."""
    a2 = u.real * u.real + u.imag * u.imag
    if alpha == 2.0:
        return a2
    if alpha == 4.0:
        return a2 * a2
    out = np.zeros_like(a2)
    nz = a2 > 0
    out[nz] = np.exp(0.5 * alpha * np.log(a2[nz]))
    return out


def _phase(u: np.ndarray, tau: float, p: PhysicsParams) -> np.ndarray:
    if p.lam == 0 or tau == 0:
        return u
    return u * np.exp(1j * (p.lam * tau) * abs_pow(u, p.alpha))


def nonlinear_phase_step(f: Field, tau: float, p: PhysicsParams) -> Field:
    """Exact flow of ``i u_t + lam |u|^alpha u = 0`` over ``tau``; time tag unchanged."""
    return f.with_values(_phase(f.values, tau, p))


def strang_step(f: Field, dt: float, p: PhysicsParams) -> Field:
    half = free_multiplier(f.grid, 0.5 * dt)
    u = inverse(forward(f.values) * half)
    u = _phase(u, dt, p)
    u = inverse(forward(u) * half)
    return Field(f.grid, u, f.time + dt)


def boundary_mass(f: Field, margin: float) -> float:
    """Fraction of the mass sitting in the outer ``margin * L`` band of any axis."""
    if not 0 < margin < 0.5:
        raise ConfigurationError("margin", f"must lie in (0, 0.5), got {margin!r}")
    dens = np.abs(f.values) ** 2
    total = dens.sum()
    if total == 0:
        return 0.0
    return float(dens[f.grid.guard_mask(margin)].sum() / total)


class ObservableSeries(list):
    """List of :class:`~nlslab.functionals.Observables` with column access."""

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(o, name) for o in self], dtype=float)

    @property
    def t(self) -> np.ndarray:
        return self.column("t")


Observer = Callable[["object", Field], None]


def step_plan(t0: float, sp: SolverParams) -> list[float]:
    """Step sizes taking ``t0`` to ``sp.t_end``; the last one may be shortened."""
    span = sp.t_end - t0
    ratio = span / sp.dt
    if ratio < 0:
        raise ConfigurationError("t_end", f"(t_end - t0)/dt must be >= 0, got {ratio!r}")
    n_full = int(math.floor(ratio + 1e-9))
    steps = [sp.dt] * n_full
    rest = span - n_full * sp.dt
    if abs(rest) > 1e-12 * max(1.0, abs(span)):
        steps.append(rest)
    return steps


def _blocks(steps: Sequence[float], stride: int) -> Iterator[list[float]]:
    for i in range(0, len(steps), stride):
        yield list(steps[i:i + stride])


def _advance(u: np.ndarray, grid: Grid, steps: Sequence[float], p: PhysicsParams, cache: dict) -> np.ndarray:
    """Strang steps with adjacent half free steps fused into one multiplier."""

    def mult(tau):
        key = float(tau)
        m = cache.get(key)
        if m is None:
            m = free_multiplier(grid, tau)
            cache[key] = m
        return m

    if p.lam == 0:
        return inverse(forward(u) * mult(sum(steps)))
    uhat = forward(u) * mult(0.5 * steps[0])
    for i, h in enumerate(steps):
        u = _phase(inverse(uhat), h, p)
        nxt = 0.5 * steps[i + 1] if i + 1 < len(steps) else 0.0
        uhat = forward(u) * mult(0.5 * h + nxt)
    return inverse(uhat)


def evolve(
    f: Field,
    sp: SolverParams,
    p: PhysicsParams,
    observer: Observer | None = None,
) -> tuple[Field, ObservableSeries]:
    """Integrate from ``f.time`` to ``sp.t_end``.

    Observables are recorded at the start, every ``snapshot_stride`` steps,
    and at the final time; the boundary and resolution guards are checked
    at each record and raise :class:`GuardViolation` on failure.  The
    observer receives ``(observables, field)`` and must not mutate either.
    """
    from .functionals import observables

    if p.d != f.grid.d:
        raise ConfigurationError("d", f"physics d={p.d} does not match grid d={f.grid.d}")
    steps = step_plan(f.time, sp)
    series = ObservableSeries()
    cache: dict = {}

    def record(values: np.ndarray, t: float) -> Field:
        if not np.all(np.isfinite(values)):
            raise GuardViolation("non-finite samples in evolving field", t)
        snap = Field(f.grid, values, t)
        frac = boundary_mass(snap, sp.boundary_margin)
        if frac > sp.boundary_tol:
            raise GuardViolation(f"boundary mass fraction {frac:.3e} exceeds {sp.boundary_tol:.3e}", t)
        try:
            obs = observables(snap, p, margin=sp.boundary_margin)
        except CrossCheckError as exc:
            # the two pseudoconformal evaluations only disagree once the field wraps
            raise GuardViolation(f"cross-check failed (field wrapped or unresolved): {exc}", t) from exc
        if obs.hi_spec_frac > sp.spectral_tol:
            raise GuardViolation(
                f"top-third spectral fraction {obs.hi_spec_frac:.3e} exceeds {sp.spectral_tol:.3e}", t
            )
        series.append(obs)
        if observer is not None:
            observer(obs, snap)
        return snap

    u = np.array(f.values)
    current = record(u, f.time)
    t = f.time
    n_done = 0
    for block in _blocks(steps, sp.snapshot_stride):
        u = _advance(u, f.grid, block, p, cache)
        n_done += len(block)
        # time from the step count avoids accumulating roundoff in t
        t = sp.t_end if n_done == len(steps) else f.time + n_done * sp.dt
        current = record(u, t)
    return current, series
