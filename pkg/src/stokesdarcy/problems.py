"""Built-in benchmark problems and the custom-problem builder.

Five named problems are registered: three manufactured solutions (with
forcing derived from the exact fields), a high-permeability bed driven by
laminar-wake inflow data, and a lid-driven cavity over a porous bed.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError
from .geometry import BoundarySegment, CoupledGeometry, Rect
from .jets import Jet2, cos, exp, power, sin
from .physics import (ClosedFormSolution, ConstantPermeability, Forcing,
                      OscillatoryPermeability, PhysicalConstants, ProblemSpec,
                      derive_forcing)

PI = np.pi


# -- boundary data helpers --------------------------------------------------------

def _const_vector(a: float, b: float):
    return lambda x, y: (np.full(np.shape(x), float(a)),
                         np.full(np.shape(x), float(b)))


def _const_scalar(c: float):
    return lambda x, y: np.full(np.shape(x), float(c))


def _exact_velocity(exact: ClosedFormSolution, region: str):
    def data(x, y):
        jets, _ = exact.stokes_at(x, y) if region == "S" else exact.darcy_at(x, y)
        return jets[0].v, jets[1].v
    return data


def _exact_pressure(exact: ClosedFormSolution, region: str):
    def data(x, y):
        _, p = exact.stokes_at(x, y) if region == "S" else exact.darcy_at(x, y)
        return p.v
    return data


def _manufactured_segments(geom: CoupledGeometry, exact: ClosedFormSolution):
    """Velocity data from the exact free-flow field on the outer free-flow
    boundary, pressure data from the exact porous field elsewhere."""
    segs = [BoundarySegment("S", side, "dirichlet_velocity", _exact_velocity(exact, "S"))
            for side in geom.outer_sides("S")]
    segs += [BoundarySegment("D", side, "dirichlet_pressure", _exact_pressure(exact, "D"))
             for side in geom.outer_sides("D")]
    return segs


def _manufactured(name, description, geom, constants, exact) -> ProblemSpec:
    return ProblemSpec(
        name=name, description=description, geometry=geom, constants=constants,
        segments=_manufactured_segments(geom, exact),
        forcing=derive_forcing(exact, constants, geom), exact=exact)


# -- test 1: trig/polynomial fields, inhomogeneous interface data ------------------

def _test1() -> ProblemSpec:
    def u_s1(x: Jet2, y: Jet2) -> Jet2:
        return power(x, 2) * PI * sin(2.0 * PI * y) * power(x - 1.0, 2)

    def u_s2(x, y):
        return -2.0 * x * power(sin(PI * y), 2) * (2.0 * x - 1.0) * (x - 1.0)

    def p_s(x, y):
        return (np.cos(1.0) - 1.0) * np.sin(1.0) + cos(y) * sin(x)

    def u_d1(x, y):
        return sin(PI * x) * sin(PI * y)

    def u_d2(x, y):
        return -2.0 * x * power(sin(PI * y), 2) * (2.0 * x - 1.0)

    def p_d(x, y):
        return sin(PI * x) * cos(PI * y)

    geom = CoupledGeometry(Rect(0.0, 1.0, 0.0, 1.0), Rect(0.0, 1.0, 1.0, 2.0))
    constants = PhysicalConstants(permeability=ConstantPermeability(np.eye(2)))
    exact = ClosedFormSolution(u_s1, u_s2, p_s, u_d1, u_d2, p_d)
    return _manufactured(
        "test1", "manufactured fields with inhomogeneous interface data",
        geom, constants, exact)


# -- test 2: fields compatible with homogeneous interface conditions ---------------

def _test2() -> ProblemSpec:
    def u_s1(x, y):
        return -power(cos(0.5 * PI * y), 2) * sin(0.5 * PI * x)

    def u_s2(x, y):
        return 0.25 * cos(0.5 * PI * x) * (sin(PI * y) + PI * y)

    def p_s(x, y):
        return 0.25 * PI * cos(0.5 * PI * x) * (y - 2.0 * power(cos(0.5 * PI * y), 2))

    def u_d1(x, y):
        return -0.125 * sin(0.5 * PI * x)

    def u_d2(x, y):
        return 0.25 * PI * cos(0.5 * PI * x)

    def p_d(x, y):
        # pressure level chosen so the normal force balance holds on the
        # interface and the porous pressure vanishes on the far boundary
        return -0.25 * PI * cos(0.5 * PI * x) * (y - 2.0)

    geom = CoupledGeometry(Rect(0.0, 1.0, 0.0, 1.0), Rect(0.0, 1.0, 1.0, 2.0))
    constants = PhysicalConstants(permeability=ConstantPermeability(np.eye(2)))
    exact = ClosedFormSolution(u_s1, u_s2, p_s, u_d1, u_d2, p_d)
    return _manufactured(
        "test2", "manufactured fields satisfying the interface conditions",
        geom, constants, exact)


# -- test 3: highly oscillatory inverse permeability --------------------------------

def _test3() -> ProblemSpec:
    def u_s1(x, y):
        return 16.0 * y * power(cos(PI * x), 2) * (power(y, 2) - 0.25)

    def u_s2(x, y):
        return 8.0 * PI * cos(PI * x) * sin(PI * x) * power(power(y, 2) - 0.25, 2)

    def p_s(x, y):
        return power(x, 2)

    def u_d1(x, y):
        return sin(2.0 * PI * x) * cos(2.0 * PI * y)

    def u_d2(x, y):
        return -cos(2.0 * PI * x) * sin(2.0 * PI * y)

    def p_d(x, y):
        return cos(2.0 * PI * x) * cos(2.0 * PI * y)

    geom = CoupledGeometry(Rect(0.0, 1.0, 0.0, 0.5), Rect(0.0, 1.0, 0.5, 1.0))
    constants = PhysicalConstants(permeability=OscillatoryPermeability(1.0 / 16.0))
    exact = ClosedFormSolution(u_s1, u_s2, p_s, u_d1, u_d2, p_d)
    return _manufactured(
        "test3", "manufactured fields with highly oscillatory permeability",
        geom, constants, exact)


# -- test 4: high-contrast permeability, laminar-wake inflow ------------------------

KOVASZNAY_LAMBDA = -8.0 * PI ** 2 / (1.0 + np.sqrt(1.0 + 64.0 * PI ** 2))


def kovasznay_velocity(x, y):
    """Closed-form laminar wake profile used as inflow data."""
    e = np.exp(KOVASZNAY_LAMBDA * x)
    return (1.0 - e * np.cos(2.0 * PI * y),
            KOVASZNAY_LAMBDA / (2.0 * PI) * e * np.sin(2.0 * PI * y))


def _test4() -> ProblemSpec:
    geom = CoupledGeometry(Rect(-0.5, 1.5, 0.0, 2.0), Rect(-0.5, 1.5, -2.0, 0.0))
    constants = PhysicalConstants(
        permeability=ConstantPermeability(1.0e4 * np.eye(2)))
    segments = [
        BoundarySegment("S", side, "dirichlet_velocity",
                        lambda x, y: kovasznay_velocity(x, y))
        for side in geom.outer_sides("S")
    ] + [
        BoundarySegment("D", "bottom", "dirichlet_pressure", _const_scalar(0.0)),
        BoundarySegment("D", "left", "neumann_flux", _const_scalar(0.0)),
        BoundarySegment("D", "right", "neumann_flux", _const_scalar(0.0)),
    ]
    return ProblemSpec(
        name="test4",
        description="high-permeability bed under laminar-wake inflow (no exact solution)",
        geometry=geom, constants=constants, segments=segments,
        forcing=Forcing.zero(), exact=None)


# -- test 5: lid-driven cavity over a porous bed ------------------------------------

def _test5() -> ProblemSpec:
    geom = CoupledGeometry(Rect(0.0, 1.0, 1.0, 2.0), Rect(0.0, 1.0, 0.0, 1.0))
    constants = PhysicalConstants(permeability=ConstantPermeability(np.eye(2)))
    segments = [
        BoundarySegment("S", "left", "dirichlet_velocity", _const_vector(0.0, 0.0)),
        BoundarySegment("S", "right", "dirichlet_velocity", _const_vector(0.0, 0.0)),
        BoundarySegment("S", "top", "dirichlet_velocity", _const_vector(1.0, 0.0)),
        BoundarySegment("D", "left", "neumann_flux", _const_scalar(0.0)),
        BoundarySegment("D", "bottom", "neumann_flux", _const_scalar(0.0)),
        BoundarySegment("D", "right", "dirichlet_pressure", _const_scalar(0.0)),
    ]
    return ProblemSpec(
        name="test5",
        description="lid-driven cavity over a porous bed (no exact solution)",
        geometry=geom, constants=constants, segments=segments,
        forcing=Forcing.zero(), exact=None)


REGISTRY = {
    "test1": _test1,
    "test2": _test2,
    "test3": _test3,
    "test4": _test4,
    "test5": _test5,
}


def list_problems() -> list[tuple[str, str]]:
    return [(name, build().description) for name, build in REGISTRY.items()]


def get_problem(name: str) -> ProblemSpec:
    if name not in REGISTRY:
        raise ConfigError(
            f"unknown problem {name!r}; registered: {sorted(REGISTRY)} or 'custom'")
    return REGISTRY[name]()


# -- custom problems -----------------------------------------------------------------

def _permeability_from_config(value):
    if value is None:
        return ConstantPermeability(np.eye(2))
    if isinstance(value, (int, float, list)):
        return ConstantPermeability(value)
    if isinstance(value, dict):
        extra = set(value) - {"kind", "epsilon"}
        if extra:
            raise ConfigError(f"unknown permeability keys {sorted(extra)}")
        if value.get("kind") != "oscillatory":
            raise ConfigError("permeability kind must be 'oscillatory'")
        return OscillatoryPermeability(float(value.get("epsilon", 1.0)))
    raise ConfigError(f"cannot interpret permeability {value!r}")


def _segment_data(value, condition: str, exact):
    if value == "exact":
        if exact is None:
            raise ConfigError("segment data 'exact' requires an exact solution")
        region = "S" if condition == "dirichlet_velocity" else "D"
        if condition == "dirichlet_velocity":
            return _exact_velocity(exact, region)
        if condition == "dirichlet_pressure":
            return _exact_pressure(exact, "D")
        raise ConfigError("flux segments cannot take 'exact' data")
    if condition == "dirichlet_velocity":
        if not (isinstance(value, (list, tuple)) and len(value) == 2):
            raise ConfigError("velocity segment data must be a 2-vector")
        return _const_vector(*value)
    if not isinstance(value, (int, float)):
        raise ConfigError("scalar segment data must be a number")
    return _const_scalar(value)


def custom_problem(cfg: dict) -> ProblemSpec:
    """Build a problem from an inline config mapping.

    Keys: geometry {rect_s, rect_d}, constants {mu, rho, beta, nu, slip,
    permeability}, segments [{region, side, condition, value}], and either
    forcing: "zero" or exact: one of the manufactured problem names (the
    forcing is then derived from that problem's exact fields).
    """
    allowed = {"name", "geometry", "constants", "segments", "forcing", "exact"}
    extra = set(cfg) - allowed
    if extra:
        raise ConfigError(f"unknown problem keys {sorted(extra)}")

    geo = cfg.get("geometry")
    if not isinstance(geo, dict) or set(geo) != {"rect_s", "rect_d"}:
        raise ConfigError("custom problem needs geometry with rect_s and rect_d")
    geom = CoupledGeometry(Rect(*map(float, geo["rect_s"])),
                           Rect(*map(float, geo["rect_d"])))

    ccfg = dict(cfg.get("constants", {}))
    perm = _permeability_from_config(ccfg.pop("permeability", None))
    extra = set(ccfg) - {"mu", "rho", "beta", "nu", "slip"}
    if extra:
        raise ConfigError(f"unknown constants keys {sorted(extra)}")
    constants = PhysicalConstants(permeability=perm,
                                  **{k: float(v) for k, v in ccfg.items()})

    exact = None
    forcing = None
    if "exact" in cfg:
        ref = get_problem(cfg["exact"])
        if ref.exact is None:
            raise ConfigError(f"problem {cfg['exact']!r} has no exact solution")
        exact = ref.exact
        forcing = derive_forcing(exact, constants, geom)
    if cfg.get("forcing", "zero" if forcing is None else None) == "zero":
        if forcing is not None:
            raise ConfigError("give either forcing: 'zero' or exact:, not both")
        forcing = Forcing.zero()
    if forcing is None:
        raise ConfigError("custom problem needs forcing: 'zero' or an exact: reference")

    segments = []
    for scfg in cfg.get("segments", []):
        extra = set(scfg) - {"region", "side", "condition", "value"}
        if extra:
            raise ConfigError(f"unknown segment keys {sorted(extra)}")
        data = _segment_data(scfg.get("value", 0.0), scfg["condition"], exact)
        segments.append(BoundarySegment(scfg["region"], scfg["side"],
                                        scfg["condition"], data))

    return ProblemSpec(
        name=str(cfg.get("name", "custom")), description="user-defined problem",
        geometry=geom, constants=constants, segments=segments,
        forcing=forcing, exact=exact)
