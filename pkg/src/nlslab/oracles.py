"""Closed-form ground truth that does not touch the solver.

Generalized Gaussians are closed under free evolution, which makes every
functional of ``T(t) psi`` computable in closed form.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import PhysicsParams
from .errors import DomainError
from .functionals import Observables
from .grid import Field, Grid


@dataclass(frozen=True)
class GaussianSpec:
    """``amp * exp(i v x) * exp(-a (x - x0)^2)``, taken as a product over axes."""

    a: complex = 1.0
    amp: complex = 1.0
    center: float = 0.0
    boost: float = 0.0

    def __post_init__(self):
        vals = (self.a, self.amp, self.center, self.boost)
        if not all(np.isfinite(complex(v)) for v in vals):
            raise DomainError("Gaussian parameters must be finite")
        if complex(self.a).real <= 0:
            raise DomainError(f"width parameter needs Re a > 0, got {self.a!r}")


def _axis_profile(x: np.ndarray, g: GaussianSpec, t: float) -> np.ndarray:
    a = complex(g.a)
    denom = 1 + 4j * a * t
    y = x - g.center - 2 * g.boost * t
    return denom**-0.5 * np.exp(-a * y**2 / denom) * np.exp(1j * (g.boost * x - g.boost**2 * t))


def gaussian_free_evolution(g: GaussianSpec, t: float, grid: Grid) -> Field:
    """Samples of ``T(t)`` applied to the Gaussian ``g``."""
    vals = complex(g.amp) * np.ones(grid.shape, dtype=complex)
    for c in grid.coords:
        vals = vals * _axis_profile(c, g, t)
    return Field(grid, vals, t)


def gaussian_initial(g: GaussianSpec, grid: Grid) -> Field:
    return gaussian_free_evolution(g, 0.0, grid)


def variance_polynomial(psi_obs: Observables) -> tuple[float, float, float]:
    """Coefficients of ``|x T(t) psi|^2 = c0 + c1 t + c2 t^2`` (exact for all t)."""
    return psi_obs.h, psi_obs.m1, 4.0 * psi_obs.grad_sq


def eval_polynomial(coeffs: tuple[float, float, float], t):
    c0, c1, c2 = coeffs
    return c0 + c1 * t + c2 * t * t


def free_variance_norm(psi_obs: Observables, t):
    """``|x T(t) psi|`` from the exact polynomial, never from a grid."""
    return np.sqrt(np.maximum(eval_polynomial(variance_polynomial(psi_obs), t), 0.0))


def mass_critical_variance(phi_obs: Observables, p: PhysicsParams, t):
    """``h(t) = h(0) + m1(phi) t + 8 E(phi) t^2`` along the nonlinear flow.

    Exact only at the mass-critical power ``alpha * d = 4``.
    """
    if abs(p.alpha * p.d - 4.0) >= 1e-12:
        raise DomainError(f"exact variance law needs alpha*d = 4, got alpha={p.alpha}, d={p.d}")
    return phi_obs.h + phi_obs.m1 * t + 8.0 * phi_obs.energy * t * t


def gaussian_moments(g: GaussianSpec) -> dict:
    """Closed-form mass, |grad|^2, h and m1 of a 1-D Gaussian spec.

    Independent of any grid: with ``a = p + iq`` the density is
    ``|amp|^2 exp(-2p y^2)``, ``y = x - x0``.
    """
    a = complex(g.a)
    p, q = a.real, a.imag
    A2 = abs(complex(g.amp)) ** 2
    s = (np.pi / (2 * p)) ** 0.5          # int exp(-2p y^2)
    y2 = s / (4 * p)                      # int y^2 exp(-2p y^2)
    mass = A2 * s
    # grad u = (i v - 2 a y) u
    grad_sq = A2 * (g.boost**2 * s + 4 * abs(a) ** 2 * y2)
    h = A2 * (y2 + g.center**2 * s)
    # conj(u) x u' = x (i v - 2 a y) |u|^2, imaginary part x (v - 2 q y)
    m1 = 4 * A2 * (g.boost * g.center * s - 2 * q * y2)
    return {"mass": mass, "grad_sq": grad_sq, "h": h, "m1": m1}


def free_gaussian_variance(g: GaussianSpec, t: float) -> float:
    """``|x T(t) g|^2`` in 1-D straight from the evolved closed form."""
    a = complex(g.a)
    denom = 1 + 4j * a * t
    a_t = a / denom
    p_t = a_t.real
    A2 = abs(complex(g.amp)) ** 2 / abs(denom)
    c = g.center + 2 * g.boost * t
    s = (np.pi / (2 * p_t)) ** 0.5
    return A2 * (s / (4 * p_t) + c * c * s)
