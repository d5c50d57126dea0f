"""Relative error metrics on evaluation grids and interface residual norms."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, UsageError
from .geometry import Rect
from .network import CoupledParams, forward_jet
from .physics import ProblemSpec, interface_residuals


@dataclass(frozen=True)
class EvalGrid:
    """Uniform tensor grid covering a closed rectangle, per subdomain."""
    nx: int = 101
    ny: int = 101

    def validate(self) -> "EvalGrid":
        if self.nx < 2 or self.ny < 2:
            raise UsageError("grid needs nx, ny >= 2")
        return self

    def points(self, rect: Rect) -> tuple[np.ndarray, np.ndarray]:
        """Flattened (x, y) arrays in row-major order (x fastest)."""
        self.validate()
        gx = np.linspace(rect.xmin, rect.xmax, self.nx)
        gy = np.linspace(rect.ymin, rect.ymax, self.ny)
        yy, xx = np.meshgrid(gy, gx, indexing="ij")
        return xx.ravel(), yy.ravel()


def rel_error(approx: np.ndarray, exact: np.ndarray, norm: str = "L2") -> float:
    """Relative discrete error ||approx - exact|| / ||exact||.

    Vector fields are passed as (n, 2) arrays; the pointwise Euclidean
    magnitude enters the norm.  Raises when the reference norm vanishes.
    """
    approx = np.asarray(approx, dtype=float)
    exact = np.asarray(exact, dtype=float)
    if approx.shape != exact.shape:
        raise UsageError(f"field shapes differ: {approx.shape} vs {exact.shape}")
    diff = approx - exact
    if diff.ndim == 2:
        diff = np.hypot(diff[:, 0], diff[:, 1])
        mag = np.hypot(exact[:, 0], exact[:, 1])
    else:
        diff = np.abs(diff)
        mag = np.abs(exact)
    if norm == "L1":
        denom = np.sum(mag)
        num = np.sum(diff)
    elif norm == "L2":
        denom = np.sqrt(np.sum(mag * mag))
        num = np.sqrt(np.sum(diff * diff))
    else:
        raise UsageError(f"norm must be 'L1' or 'L2', got {norm!r}")
    if denom == 0.0:
        raise DomainError(
            "reference field vanishes on the grid; use an absolute norm instead")
    return float(num / denom)


def _field_values(params: CoupledParams, rect: Rect, grid: EvalGrid, region: str):
    x, y = grid.points(rect)
    umlp = params.u_s if region == "S" else params.u_d
    pmlp = params.p_s if region == "S" else params.p_d
    u = forward_jet(umlp, x, y)
    p = forward_jet(pmlp, x, y)
    return x, y, np.stack([u[0].v, u[1].v], axis=-1), p[0].v


def _exact_values(spec: ProblemSpec, x, y, region: str):
    at = spec.exact.stokes_at if region == "S" else spec.exact.darcy_at
    jets, p = at(x, y)
    return np.stack([jets[0].v + 0 * x, jets[1].v + 0 * x], axis=-1), p.v + 0 * x


@dataclass
class ErrorReport:
    """Relative errors per unknown plus interface residual norms."""
    err_l1: dict[str, float] | None
    err_l2: dict[str, float] | None
    interface_rms: tuple[float, float, float]

    def lines(self) -> list[str]:
        out = []
        if self.err_l2 is not None:
            for key in ("u_s", "p_s", "u_d", "p_d"):
                out.append(f"{key}: errL1 = {self.err_l1[key]:.6e}, "
                           f"errL2 = {self.err_l2[key]:.6e}")
        r1, r2, r3 = self.interface_rms
        out.append(f"interface rms: flux = {r1:.6e}, force = {r2:.6e}, slip = {r3:.6e}")
        return out


def interface_error(params: CoupledParams, spec: ProblemSpec,
                    n_points: int = 1001) -> tuple[float, float, float]:
    """Root-mean-square of the three interface residuals over evenly
    spaced interface points."""
    pts = spec.geometry.interface_points(n_points)
    x, y = pts[:, 0], pts[:, 1]
    us = forward_jet(params.u_s, x, y)
    ud = forward_jet(params.u_d, x, y)
    ps = forward_jet(params.p_s, x, y)
    pd = forward_jet(params.p_d, x, y)
    r1, r2, r3 = interface_residuals(us, ud, ps[0], pd[0], pts, spec)
    rms = lambda r: float(np.sqrt(np.mean(np.square(r))))
    return rms(r1), rms(r2), rms(r3)


def error_report(params: CoupledParams, spec: ProblemSpec,
                 grid: EvalGrid | None = None,
                 interface_points: int = 1001) -> ErrorReport:
    grid = grid or EvalGrid()
    iface = interface_error(params, spec, interface_points)
    if spec.exact is None:
        return ErrorReport(err_l1=None, err_l2=None, interface_rms=iface)

    err_l1: dict[str, float] = {}
    err_l2: dict[str, float] = {}
    for region, ukey, pkey in (("S", "u_s", "p_s"), ("D", "u_d", "p_d")):
        rect = spec.geometry.rect(region)
        x, y, uvals, pvals = _field_values(params, rect, grid, region)
        ue, pe = _exact_values(spec, x, y, region)
        err_l1[ukey] = rel_error(uvals, ue, "L1")
        err_l2[ukey] = rel_error(uvals, ue, "L2")
        err_l1[pkey] = rel_error(pvals, pe, "L1")
        err_l2[pkey] = rel_error(pvals, pe, "L2")
    return ErrorReport(err_l1=err_l1, err_l2=err_l2, interface_rms=iface)
