"""Self-check suites: manufactured-forcing consistency and adjoint exactness.

These back the ``verify`` CLI command and the test suite.  The gradient
check compares the taped adjoint against central finite differences, an
independent derivative route.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .errors import UsageError
from .geometry import BatchSizes, draw_batch
from .network import CoupledArch, init_params
from .physics import (ProblemSpec, boundary_residuals, darcy_residuals,
                      interface_residuals, stokes_residuals)
from .training import TrainConfig, assemble_loss


def forcing_consistency(spec: ProblemSpec, n_points: int = 1000,
                        seed: int = 20240901) -> dict[str, float]:
    """Max absolute residual of the exact solution, with derived forcing,
    over random collocation points in every group."""
    if spec.exact is None:
        raise UsageError(f"problem {spec.name} has no exact solution")
    rng = np.random.default_rng(seed)
    sizes = BatchSizes(n_points, n_points, n_points, n_points, n_points)
    batch = draw_batch(spec.geometry, sizes, rng, spec.segments)
    out: dict[str, float] = {}
    amax = lambda r: float(np.max(np.abs(np.asarray(r))))

    us, ps = spec.exact.stokes_at(batch.interior_s[:, 0], batch.interior_s[:, 1])
    m1, m2, div = stokes_residuals(us, ps, batch.interior_s, spec)
    out["stokes_momentum"] = max(amax(m1), amax(m2))
    out["stokes_div"] = amax(div)

    ud, pd = spec.exact.darcy_at(batch.interior_d[:, 0], batch.interior_d[:, 1])
    r1, r2, mass = darcy_residuals(ud, pd, batch.interior_d, spec)
    out["darcy_forch"] = max(amax(r1), amax(r2))
    out["darcy_mass"] = amax(mass)

    worst = 0.0
    for seg, pts in batch.boundary_s:
        jets, _ = spec.exact.stokes_at(pts[:, 0], pts[:, 1])
        worst = max(worst, *(amax(r) for r in
                             boundary_residuals(jets, seg, pts, spec)))
    out["stokes_bc"] = worst

    worst = 0.0
    for seg, pts in batch.boundary_d:
        jets, p = spec.exact.darcy_at(pts[:, 0], pts[:, 1])
        picked = [p] if seg.condition == "dirichlet_pressure" else jets
        worst = max(worst, *(amax(r) for r in
                             boundary_residuals(picked, seg, pts, spec)))
    out["darcy_bc"] = worst

    pts = batch.interface
    us, ps = spec.exact.stokes_at(pts[:, 0], pts[:, 1])
    ud, pd = spec.exact.darcy_at(pts[:, 0], pts[:, 1])
    r1, r2, r3 = interface_residuals(us, ud, ps, pd, pts, spec)
    out["iface_normal"] = amax(r1)
    out["iface_force"] = amax(r2)
    out["iface_bjs"] = amax(r3)
    return out


def gradient_check(spec: ProblemSpec, archs: CoupledArch | None = None,
                   sizes: BatchSizes | None = None, n_coords: int = 50,
                   h: float = 1.0e-4, seed: int = 0) -> tuple[float, np.ndarray]:
    """Adjoint gradient of the full loss vs central finite differences on
    random parameter coordinates.  Returns (max relative error, per-coordinate
    relative errors)."""
    archs = archs or CoupledArch.standard()
    params = init_params(archs, seed)
    rng = np.random.default_rng(seed + 1)
    sizes = sizes or BatchSizes(60, 60, 30, 30, 30)
    batch = draw_batch(spec.geometry, sizes, rng, spec.segments)
    cfg = TrainConfig()

    tape = ad.Tape()
    taped = params.as_vars(tape)
    breakdown = assemble_loss(taped, batch, spec, cfg.weights)
    grad = ad.gradient_of(breakdown.total, taped)

    flat0 = params.to_flat()
    from .network import CoupledParams

    def loss_at(flat):
        p = CoupledParams.from_flat(archs, flat)
        return float(assemble_loss(p, batch, spec, cfg.weights).total)

    pick = np.random.default_rng(seed + 2).choice(flat0.size,
                                                  size=min(n_coords, flat0.size),
                                                  replace=False)
    rels = np.zeros(len(pick))
    for i, j in enumerate(pick):
        fp = flat0.copy()
        fp[j] += h
        fm = flat0.copy()
        fm[j] -= h
        fd = (loss_at(fp) - loss_at(fm)) / (2.0 * h)
        denom = max(abs(fd), abs(grad[j]), 1.0e-8)
        rels[i] = abs(grad[j] - fd) / denom
    return float(np.max(rels)), rels
