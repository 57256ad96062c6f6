"""Scalar functionals of fields and the closed-form exponents.

All integrals are ``dx``-weighted sums over the grid.  The x-weighted
quantities use the centered box coordinate and are only meaningful while
the boundary guard holds.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .dynamics import PhysicsParams, boundary_mass
from .errors import ConfigurationError, CrossCheckError, DomainError
from .grid import Field, forward, inverse

PC_RTOL = 1e-8


@dataclass(frozen=True)
class Observables:
    t: float
    mass: float
    grad_sq: float
    energy: float
    h: float
    m1: float
    lalpha2: float
    linf: float
    xnorm_sq: float
    pc_norm: float
    boundary_frac: float
    hi_spec_frac: float

    @classmethod
    def names(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def as_dict(self) -> dict:
        return asdict(self)


def pairing(f: Field | np.ndarray, g: Field | np.ndarray, grid=None) -> float:
    """``(f, g) = Re int f conj(g)``."""
    if isinstance(f, Field):
        grid = f.grid
        f = f.values
    if isinstance(g, Field):
        g = g.values
    return grid.integrate((f * np.conj(g)).real)


def lr_norm(f: Field, r: float) -> float:
    if r < 1:
        raise ConfigurationError("r", f"L^r norm needs r >= 1, got {r!r}")
    a = np.abs(f.values)
    if math.isinf(r):
        return float(a.max()) if a.size else 0.0
    return f.grid.integrate(a**r) ** (1.0 / r)


def _momentum_moment(f: np.ndarray, grads, coords, grid) -> float:
    """``4 Im int conj(u) x.grad u``."""
    s = sum(c * g for c, g in zip(coords, grads))
    return 4.0 * grid.integrate((np.conj(f) * s).imag)


def momentum_moment(f: Field) -> float:
    fhat = forward(f.values)
    grads = [inverse(1j * kk * fhat) for kk in f.grid.wavenumbers]
    return _momentum_moment(f.values, grads, f.grid.coords, f.grid)


def x_igrad_pairing(f: Field) -> float:
    """``(x u, i grad u)`` summed over axes, computed straight from the pairing."""
    fhat = forward(f.values)
    total = 0.0
    for c, kk in zip(f.grid.coords, f.grid.wavenumbers):
        total += pairing(c * f.values, 1j * inverse(1j * kk * fhat), f.grid)
    return total


def energy(f: Field, p: PhysicsParams) -> float:
    """``E = 1/2 |grad u|^2 - lam/(alpha+2) |u|_{alpha+2}^{alpha+2}``."""
    fhat = forward(f.values)
    grad_sq = f.grid.cell_volume / f.values.size * float(np.sum(f.grid.k2 * np.abs(fhat) ** 2))
    pot = f.grid.integrate(np.abs(f.values) ** (p.alpha + 2)) if p.lam else 0.0
    return 0.5 * grad_sq - p.lam / (p.alpha + 2) * pot


def observables(f: Field, p: PhysicsParams, margin: float = 0.1, pc_rtol: float = PC_RTOL) -> Observables:
    """Every functional of ``f`` in one pass.

    The pseudoconformal norm ``|(x + 2it grad) u|`` is evaluated directly
    and again as ``|x T(-t) u|``; disagreement beyond ``pc_rtol`` means the
    field is unresolved or wrapped and raises :class:`CrossCheckError`.
    """
    grid = f.grid
    u = f.values
    t = f.time
    fhat = forward(u)
    spec2 = np.abs(fhat) ** 2
    spec_total = spec2.sum()
    grads = [inverse(1j * kk * fhat) for kk in grid.wavenumbers]
    dens = np.abs(u) ** 2

    mass = grid.integrate(dens)
    grad_sq = sum(grid.integrate(np.abs(g) ** 2) for g in grads)
    h = grid.integrate(grid.r2 * dens)
    m1 = _momentum_moment(u, grads, grid.coords, grid)
    a = np.sqrt(dens)
    pot = grid.integrate(a ** (p.alpha + 2))
    lalpha2 = pot ** (1.0 / (p.alpha + 2))
    e = 0.5 * grad_sq - p.lam / (p.alpha + 2) * pot

    direct = math.sqrt(sum(grid.integrate(np.abs(c * u + 2j * t * g) ** 2) for c, g in zip(grid.coords, grads)))
    if t != 0:
        pulled = inverse(fhat * np.exp(1j * grid.k2 * t))
        via_pullback = math.sqrt(grid.integrate(grid.r2 * np.abs(pulled) ** 2))
    else:
        via_pullback = math.sqrt(h)
    scale = max(direct, via_pullback)
    if scale > 0 and abs(direct - via_pullback) > pc_rtol * scale:
        raise CrossCheckError(
            f"pseudoconformal norm mismatch at t={t:.6g}: direct {direct:.12g} vs pulled {via_pullback:.12g}"
        )

    return Observables(
        t=t,
        mass=mass,
        grad_sq=grad_sq,
        energy=e,
        h=h,
        m1=m1,
        lalpha2=lalpha2,
        linf=float(a.max()),
        xnorm_sq=mass + grad_sq + h,
        pc_norm=direct,
        boundary_frac=boundary_mass(f, margin),
        hi_spec_frac=float(spec2[grid.high_band].sum() / spec_total) if spec_total > 0 else 0.0,
    )


def admissible_q(r: float, d: int) -> float:
    """Time exponent paired with space exponent ``r``: ``q = 4r / (d (r - 2))``."""
    if d < 1:
        raise DomainError(f"dimension must be >= 1, got {d}")
    if d == 1:
        ok = 2 <= r <= math.inf
    elif d == 2:
        ok = 2 <= r < math.inf
    else:
        ok = 2 <= r <= 2 * d / (d - 2)
    if not ok:
        raise DomainError(f"r={r} is not admissible in dimension {d}")
    if r == 2:
        return math.inf
    if math.isinf(r):
        return 4.0 / d
    return 4 * r / (d * (r - 2))


def gamma_star(alpha: float, d: int) -> float:
    if d == 1:
        return (alpha - 2) / 2
    return (alpha * (d + 2) - 4) / 4


def alpha_zero(d: int) -> float:
    return (-(d - 2) + math.sqrt(d * d + 12 * d + 4)) / (2 * d)


def theorem_limit(phi_obs: Observables, uplus_obs: Observables, direction: int = 1) -> float:
    """Predicted limit of ``|x u(t)| - |x T(t) u_pm|`` at the mass-critical power.

    Uses ``4 (x u, i grad u) = -m1(u)``, so the prediction reads
    ``direction * (m1(phi) - m1(u_pm)) / (4 |grad u_pm|)``.
    """
    if uplus_obs.grad_sq <= 0:
        raise DomainError("scattering state has zero gradient norm")
    return direction * (phi_obs.m1 - uplus_obs.m1) / (4.0 * math.sqrt(uplus_obs.grad_sq))
