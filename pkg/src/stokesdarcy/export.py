"""Field export: delimited grid data, with optional rendered figures."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .metrics import EvalGrid, _exact_values, _field_values
from .network import CoupledParams
from .physics import ProblemSpec


@dataclass
class RegionFields:
    region: str
    nx: int
    ny: int
    x: np.ndarray            # flattened, row-major (x fastest)
    y: np.ndarray
    u: np.ndarray            # (n, 2)
    p: np.ndarray            # (n,)
    exact_u: np.ndarray | None = None
    exact_p: np.ndarray | None = None


@dataclass
class ExportData:
    spec_name: str
    has_exact: bool
    regions: list


def sample_fields(params: CoupledParams, spec: ProblemSpec,
                  grid: EvalGrid | None = None) -> ExportData:
    grid = grid or EvalGrid()
    regions = []
    for region in ("S", "D"):
        rect = spec.geometry.rect(region)
        x, y, u, p = _field_values(params, rect, grid, region)
        exact_u = exact_p = None
        if spec.exact is not None:
            exact_u, exact_p = _exact_values(spec, x, y, region)
        regions.append(RegionFields(region, grid.nx, grid.ny, x, y, u, p,
                                    exact_u, exact_p))
    return ExportData(spec.name, spec.exact is not None, regions)


def export_fields(params: CoupledParams, spec: ProblemSpec,
                  grid: EvalGrid | None, path) -> ExportData:
    """Write the sampled fields as CSV: free-flow block first, then the
    porous block, rows in row-major grid order.  Full float precision, so
    a re-parse round-trips bitwise."""
    data = sample_fields(params, spec, grid)
    header = "region,x,y,u1,u2,p"
    if data.has_exact:
        header += ",eu1,eu2,ep"
    lines = [header]
    for reg in data.regions:
        for i in range(len(reg.x)):
            row = [reg.region, repr(float(reg.x[i])), repr(float(reg.y[i])),
                   repr(float(reg.u[i, 0])), repr(float(reg.u[i, 1])),
                   repr(float(reg.p[i]))]
            if data.has_exact:
                row += [repr(float(reg.exact_u[i, 0])),
                        repr(float(reg.exact_u[i, 1])),
                        repr(float(reg.exact_p[i]))]
            lines.append(",".join(row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return data


def read_export(path) -> tuple[list[str], dict[str, np.ndarray]]:
    """Parse a field CSV back into column arrays (plus the region labels)."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        regions = []
        cols = [[] for _ in header[1:]]
        for line in fh:
            parts = line.strip().split(",")
            if not parts or parts == [""]:
                continue
            regions.append(parts[0])
            for c, val in zip(cols, parts[1:]):
                c.append(float(val))
    return regions, {name: np.array(c) for name, c in zip(header[1:], cols)}
