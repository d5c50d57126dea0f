"""Residual operators of the coupled free-flow / porous-medium system.

Free-flow region: viscous incompressible (Stokes) momentum and mass
balance.  Porous region: nonlinear (quadratic-drag) seepage law and mass
balance.  The two systems couple across the interface through normal-flux
continuity, a normal force balance, and a tangential slip (friction)
condition.

All operators are pure functions of jets evaluated at points, so the same
code path serves closed-form solutions (numpy components) and network
fields inside a taped training step (Var components).  Forcing terms for
manufactured solutions are derived by applying the operators to the exact
fields through the jet engine, which makes "residual of exact solution =
zero" hold by construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import autodiff as ad
from .errors import ConfigError, NumericalError, UsageError
from .geometry import CoupledGeometry, BoundarySegment, check_segments, outward_normal
from .jets import Jet2, jet_var


# -- permeability ---------------------------------------------------------------

class ConstantPermeability:
    """Constant symmetric positive definite permeability tensor."""

    def __init__(self, k_matrix):
        k = np.asarray(k_matrix, dtype=float)
        if k.shape == ():
            k = float(k) * np.eye(2)
        if k.shape != (2, 2):
            raise ConfigError("permeability tensor must be scalar or 2x2")
        if not np.allclose(k, k.T):
            raise ConfigError("permeability tensor must be symmetric")
        if np.any(np.linalg.eigvalsh(k) <= 0):
            raise ConfigError("permeability tensor must be positive definite")
        self.k = k
        self.k_inv = np.linalg.inv(k)

    def apply_inverse(self, x, y, u1, u2):
        ki = self.k_inv
        return (ki[0, 0] * u1 + ki[0, 1] * u2,
                ki[1, 0] * u1 + ki[1, 1] * u2)

    def describe(self) -> str:
        return f"K = {self.k.tolist()}"


class OscillatoryPermeability:
    """Scalar inverse permeability: a ratio of phase-shifted sinusoids
    plus its reciprocal, oscillating on the scale ``epsilon``."""

    def __init__(self, epsilon: float):
        if epsilon <= 0:
            raise ConfigError("oscillation scale must be positive")
        self.epsilon = epsilon

    def inverse_coefficient(self, x, y):
        a = 2.0 + 1.8 * np.sin(2.0 * np.pi * x / self.epsilon)
        b = 2.0 + 1.8 * np.sin(2.0 * np.pi * y / self.epsilon)
        return a / b + b / a

    def apply_inverse(self, x, y, u1, u2):
        rho = self.inverse_coefficient(x, y)
        if not np.all(np.isfinite(rho)):
            raise NumericalError("non-finite inverse permeability")
        return rho * u1, rho * u2

    def describe(self) -> str:
        return f"K^-1 oscillatory, scale {self.epsilon}"


@dataclass(frozen=True)
class PhysicalConstants:
    mu: float = 1.0      # viscosity in the seepage law
    rho: float = 1.0     # fluid density
    beta: float = 1.0    # quadratic drag coefficient
    nu: float = 1.0      # free-flow viscosity
    slip: float = 1.0    # tangential slip coefficient on the interface
    permeability: object = None

    def validate(self) -> "PhysicalConstants":
        if min(self.mu, self.rho, self.nu, self.slip) <= 0 or self.beta < 0:
            raise ConfigError("constants must satisfy mu, rho, nu, slip > 0 and beta >= 0")
        if self.permeability is None:
            object.__setattr__(self, "permeability", ConstantPermeability(np.eye(2)))
        return self


# -- problem description ----------------------------------------------------------

JetField = Callable[[Jet2, Jet2], Jet2]


@dataclass(frozen=True)
class ClosedFormSolution:
    """Jet-evaluable exact fields: free-flow velocity/pressure and porous
    velocity/pressure."""
    u_s1: JetField
    u_s2: JetField
    p_s: JetField
    u_d1: JetField
    u_d2: JetField
    p_d: JetField

    def stokes_at(self, x, y):
        jx, jy = jet_var(np.asarray(x, float), "x"), jet_var(np.asarray(y, float), "y")
        return [self.u_s1(jx, jy), self.u_s2(jx, jy)], self.p_s(jx, jy)

    def darcy_at(self, x, y):
        jx, jy = jet_var(np.asarray(x, float), "x"), jet_var(np.asarray(y, float), "y")
        return [self.u_d1(jx, jy), self.u_d2(jx, jy)], self.p_d(jx, jy)


@dataclass(frozen=True)
class Forcing:
    """Source fields: momentum source f_s, porous mass source f_d, seepage
    source g_d, and the two interface data fields g1 (normal force) and
    g2 (tangential slip)."""
    f_s: Callable    # (x, y) -> (array, array)
    f_d: Callable    # (x, y) -> array
    g_d: Callable    # (x, y) -> (array, array)
    g1: Callable     # interface points -> array
    g2: Callable     # interface points -> array

    @classmethod
    def zero(cls) -> "Forcing":
        z = lambda x, y: np.zeros(np.shape(x))
        zv = lambda x, y: (np.zeros(np.shape(x)), np.zeros(np.shape(x)))
        return cls(f_s=zv, f_d=z, g_d=zv, g1=z, g2=z)


@dataclass
class ProblemSpec:
    name: str
    description: str
    geometry: CoupledGeometry
    constants: PhysicalConstants
    segments: list
    forcing: Forcing
    exact: ClosedFormSolution | None = None

    def __post_init__(self):
        self.constants.validate()
        check_segments(self.geometry, self.segments)


# -- residual operators ------------------------------------------------------------

def stokes_residuals(u_jets, p_jet, pts, spec: ProblemSpec):
    """Momentum residual (2 components) and divergence at interior points."""
    nu = spec.constants.nu
    f1, f2 = spec.forcing.f_s(pts[:, 0], pts[:, 1])
    u1, u2 = u_jets
    m1 = f1 + nu * (u1.hxx + u1.hyy) - p_jet.gx
    m2 = f2 + nu * (u2.hxx + u2.hyy) - p_jet.gy
    div = u1.gx + u2.gy
    return m1, m2, div


def darcy_residuals(u_jets, p_jet, pts, spec: ProblemSpec):
    """Seepage-law residual (2 components) and mass residual at interior points."""
    c = spec.constants
    g1, g2 = spec.forcing.g_d(pts[:, 0], pts[:, 1])
    fd = spec.forcing.f_d(pts[:, 0], pts[:, 1])
    u1, u2 = u_jets
    k1, k2 = c.permeability.apply_inverse(pts[:, 0], pts[:, 1], u1.v, u2.v)
    speed = ad.hypot2(u1.v, u2.v)
    lin = c.mu / c.rho
    quad = c.beta / c.rho
    r1 = lin * k1 + quad * (speed * u1.v) + p_jet.gx - g1
    r2 = lin * k2 + quad * (speed * u2.v) + p_jet.gy - g2
    mass = fd - (u1.gx + u2.gy)
    return r1, r2, mass


def normal_derivative(u_jets, normal):
    """Directional first derivative of each velocity component along ``normal``."""
    nx, ny = float(normal[0]), float(normal[1])
    return tuple(u.gx * nx + u.gy * ny for u in u_jets)


def interface_residuals(us_jets, ud_jets, ps_jet, pd_jet, pts,
                        spec: ProblemSpec, frame=None):
    """The three coupling residuals at interface points: normal-flux
    continuity, normal force balance, tangential slip condition."""
    geom = spec.geometry
    if not np.all(geom.on_interface(pts[:, 0], pts[:, 1])):
        raise UsageError("interface residuals requested off the interface")
    if frame is None:
        normal, tangent = geom.normal_s, geom.tangent
    else:
        normal, tangent = frame
    nx, ny = float(normal[0]), float(normal[1])
    tx, ty = float(tangent[0]), float(tangent[1])
    nu, slip = spec.constants.nu, spec.constants.slip
    g1 = spec.forcing.g1(pts[:, 0], pts[:, 1])
    g2 = spec.forcing.g2(pts[:, 0], pts[:, 1])

    us1, us2 = us_jets
    ud1, ud2 = ud_jets
    dn1, dn2 = normal_derivative(us_jets, normal)

    r1 = (us1.v - ud1.v) * nx + (us2.v - ud2.v) * ny
    r2 = ps_jet.v - nu * (dn1 * nx + dn2 * ny) - pd_jet.v - g1
    r3 = -nu * (dn1 * tx + dn2 * ty) - slip * (us1.v * tx + us2.v * ty) - g2
    return r1, r2, r3


def boundary_residuals(jets, segment: BoundarySegment, pts, spec: ProblemSpec):
    """Residual of one boundary segment's condition at points on it.

    ``jets`` holds the jets of the field the condition constrains:
    free-flow velocity (2 jets), porous pressure (1), or porous velocity (2).
    """
    x, y = pts[:, 0], pts[:, 1]
    if segment.condition == "dirichlet_velocity":
        b1, b2 = segment.data(x, y)
        return jets[0].v - b1, jets[1].v - b2
    if segment.condition == "dirichlet_pressure":
        return (jets[0].v - segment.data(x, y),)
    if segment.condition == "neumann_flux":
        n = outward_normal(segment.side)
        flux = jets[0].v * float(n[0]) + jets[1].v * float(n[1])
        return (flux - segment.data(x, y),)
    raise UsageError(f"unknown condition {segment.condition!r}")


# -- manufactured forcing -----------------------------------------------------------

def derive_forcing(exact: ClosedFormSolution, constants: PhysicalConstants,
                   geometry: CoupledGeometry) -> Forcing:
    """Forcing fields consistent with an exact solution, computed through
    the jet engine by applying the governing operators to the exact fields."""
    nu = constants.nu
    lin = constants.mu / constants.rho
    quad = constants.beta / constants.rho
    normal, tangent = geometry.normal_s, geometry.tangent

    def f_s(x, y):
        (u1, u2), p = exact.stokes_at(x, y)
        return (-nu * (u1.hxx + u1.hyy) + p.gx,
                -nu * (u2.hxx + u2.hyy) + p.gy)

    def f_d(x, y):
        (u1, u2), _ = exact.darcy_at(x, y)
        return u1.gx + u2.gy

    def g_d(x, y):
        (u1, u2), p = exact.darcy_at(x, y)
        k1, k2 = constants.permeability.apply_inverse(x, y, u1.v, u2.v)
        speed = np.hypot(u1.v, u2.v)
        return (lin * k1 + quad * speed * u1.v + p.gx,
                lin * k2 + quad * speed * u2.v + p.gy)

    def g1(x, y):
        u_jets, p_s = exact.stokes_at(x, y)
        _, p_d = exact.darcy_at(x, y)
        dn1, dn2 = normal_derivative(u_jets, normal)
        return (p_s.v - nu * (dn1 * float(normal[0]) + dn2 * float(normal[1]))
                - p_d.v)

    def g2(x, y):
        u_jets, _ = exact.stokes_at(x, y)
        (u1, u2) = u_jets
        dn1, dn2 = normal_derivative(u_jets, normal)
        tx, ty = float(tangent[0]), float(tangent[1])
        return (-nu * (dn1 * tx + dn2 * ty)
                - constants.slip * (u1.v * tx + u2.v * ty))

    return Forcing(f_s=f_s, f_d=f_d, g_d=g_d, g1=g1, g2=g2)
