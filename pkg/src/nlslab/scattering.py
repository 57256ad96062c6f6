"""Free-frame pullbacks, scattering-state extraction, deviations and rate fits."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dynamics import PhysicsParams, boundary_mass, free_propagate
from .errors import DomainError, ExtractionError, GuardViolation
from .functionals import Observables, observables
from .grid import Field, forward, inverse
from .oracles import free_variance_norm

UNCONVERGED_FRACTION = 0.1


def pullback(f: Field) -> Field:
    """``T(-t) u(t)``, tagged as a free-frame field at time 0."""
    out = free_propagate(f, -f.time)
    out.meta.update(frame="free", source_time=f.time)
    return out


def _norm_parts(w: Field) -> tuple[float, float, float]:
    """``(|w|^2, |grad w|^2, |x w|^2)`` for a free-frame field."""
    grid = w.grid
    what = forward(w.values)
    mass = grid.integrate(np.abs(w.values) ** 2)
    grad_sq = grid.cell_volume / w.values.size * float(np.sum(grid.k2 * np.abs(what) ** 2))
    h = grid.integrate(grid.r2 * np.abs(w.values) ** 2)
    return mass, grad_sq, h


def x_norm(f: Field) -> float:
    return math.sqrt(sum(_norm_parts(f)))


def h1_norm(f: Field) -> float:
    mass, grad_sq, _ = _norm_parts(f)
    return math.sqrt(mass + grad_sq)


@dataclass
class ScatteringEstimate:
    u_plus: Field
    horizon: float
    residual: float
    observables: Observables
    direction: int = 1
    converged: bool = True
    diagnostics: dict = field(default_factory=dict)

    @property
    def x_norm(self) -> float:
        return math.sqrt(self.observables.xnorm_sq)


def _check_guard(f: Field, margin: float, tol: float, what: str, exc=GuardViolation):
    frac = boundary_mass(f, margin)
    if frac > tol:
        msg = f"{what}: boundary mass fraction {frac:.3e} exceeds {tol:.3e}"
        if exc is GuardViolation:
            raise GuardViolation(msg, f.time)
        raise exc(f"t={f.time:.6g}: {msg}")


def extract_scattering_state(
    snapshots: Sequence[Field],
    direction: int = 1,
    p: PhysicsParams | None = None,
    *,
    margin: float = 0.1,
    tol: float = 1e-8,
    extrapolate_rate: float | None = None,
) -> ScatteringEstimate:
    """Estimate ``u_pm`` from the pullback at the largest available horizon.

    The residual is ``|T(-T)u(T) - T(-T/2)u(T/2)|_X``, using the snapshot
    closest to ``T/2``.  For ``direction=-1`` the snapshots must come from
    the forward run started at ``conj(phi)``; the returned state is
    conjugated back, since ``u_-`` is the conjugate of that run's ``u_+``.

    With ``extrapolate_rate`` set, the two pullbacks are combined assuming
    ``|T(-t)u(t) - u_pm| ~ t^-rate``; the assumed rate is recorded in the
    diagnostics because it presupposes the rate being tested elsewhere.
    """
    if direction not in (1, -1):
        raise ExtractionError(f"direction must be +1 or -1, got {direction!r}")
    if len(snapshots) < 2:
        raise ExtractionError("need at least two snapshots")
    snaps = sorted(snapshots, key=lambda f: f.time)
    last = snaps[-1]
    T = last.time
    if T <= 0:
        raise ExtractionError(f"largest horizon must be positive, got {T}")
    earlier = [f for f in snaps[:-1] if f.time < T]
    if not earlier:
        raise ExtractionError("snapshots must be taken at distinct times")
    half = min(earlier, key=lambda f: abs(f.time - T / 2))
    for f in (half, last):
        _check_guard(f, margin, tol, "extraction snapshot", ExtractionError)

    pb_T = pullback(last)
    pb_half = pullback(half)
    diff = pb_T - pb_half
    residual = x_norm(diff)
    diagnostics = {"half_time": half.time}
    u = pb_T
    if extrapolate_rate is not None:
        ratio = T / half.time
        factor = 1.0 / (ratio**extrapolate_rate - 1.0)
        u = pb_T + diff * factor
        diagnostics["assumed_exponent"] = extrapolate_rate
    if direction == -1:
        u = u.conj()
    u = Field(u.grid, u.values, 0.0, {"frame": "free", "source_time": direction * T})
    params = p if p is not None else PhysicsParams(0.0, 1.0, u.grid.d)
    obs = observables(u, params, margin=margin)
    xn = math.sqrt(obs.xnorm_sq)
    converged = residual <= UNCONVERGED_FRACTION * xn
    diagnostics["relative_residual"] = residual / xn if xn > 0 else 0.0
    if not converged:
        diagnostics["flag"] = "unconverged"
    return ScatteringEstimate(u, T, residual, obs, direction, converged, diagnostics)


def deviation_A(u_t: Field | Observables, est: ScatteringEstimate, *, margin: float = 0.1, tol: float = 1e-8) -> float:
    """``|x u(t)| - |x T(t) u_pm|`` with the second term from the exact polynomial."""
    if isinstance(u_t, Field):
        _check_guard(u_t, margin, tol, "deviation")
        t = u_t.time
        h = float(np.sum(u_t.grid.r2 * np.abs(u_t.values) ** 2)) * u_t.grid.cell_volume
    else:
        t, h = u_t.t, u_t.h
    return math.sqrt(h) - float(free_variance_norm(est.observables, t))


@dataclass(frozen=True)
class Distances:
    forward: float
    pulled: float
    pulled_h1: float


def distances(u_t: Field, est: ScatteringEstimate, *, margin: float = 0.1, tol: float = 1e-8) -> Distances:
    """``|u(t) - T(t)u_pm|_X`` and ``|T(-t)u(t) - u_pm|`` in X and H^1.

    Both are evaluated on the pulled-back difference ``w``: the H^1 parts
    agree because ``T`` is unitary, and ``|x T(t) w| = |(x - 2it grad) w|``.
    """
    _check_guard(u_t, margin, tol, "distance")
    t = u_t.time
    w = pullback(u_t) - est.u_plus
    mass, grad_sq, h = _norm_parts(w)
    grid = w.grid
    what = forward(w.values)
    xs = 0.0
    for c, kk in zip(grid.coords, grid.wavenumbers):
        gw = inverse(1j * kk * what)
        xs += grid.integrate(np.abs(c * w.values - 2j * t * gw) ** 2)
    return Distances(
        forward=math.sqrt(mass + grad_sq + xs),
        pulled=math.sqrt(mass + grad_sq + h),
        pulled_h1=math.sqrt(mass + grad_sq),
    )


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r_squared: float
    window: tuple[float, float]
    n_points: int


MIN_FIT_POINTS = 8


def fit_power_law(t, values, window: tuple[float, float] | None = None) -> RateFit:
    """Least-squares line through ``(log t, log value)`` inside ``window``."""
    t = np.asarray(t, dtype=float)
    v = np.asarray(values, dtype=float)
    if window is None:
        window = (float(t.min()), float(t.max()))
    lo, hi = window
    if not lo < hi:
        raise DomainError(f"empty fit window {window}")
    sel = (t >= lo - 1e-12) & (t <= hi + 1e-12)
    ts, vs = t[sel], v[sel]
    if ts.size < MIN_FIT_POINTS:
        raise DomainError(f"need >= {MIN_FIT_POINTS} points in window {window}, got {ts.size}")
    if np.any(ts <= 0):
        raise DomainError("fit times must be positive")
    if np.any(~(vs > 0)):
        raise DomainError("nonpositive values in fit window (noise floor reached?)")
    X, Y = np.log(ts), np.log(vs)
    slope, intercept = np.polyfit(X, Y, 1)
    resid = Y - (slope * X + intercept)
    ss_tot = float(np.sum((Y - Y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return RateFit(float(slope), float(intercept), min(max(r2, 0.0), 1.0), (lo, hi), int(ts.size))
