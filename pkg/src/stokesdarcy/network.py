"""Four parallel fully-connected subnetworks and their jet-forward pass.

Each unknown field (Stokes velocity, Darcy velocity, Stokes pressure,
Darcy pressure) gets its own MLP on (x, y).  The forward pass propagates
coordinate jets through the layers, so a single evaluation yields values
together with first and pure second spatial derivatives of every output.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .errors import ConfigError, NumericalError, UsageError
from .jets import Jet2


def _tanh_rule(v):
    t = np.tanh(v)
    d1 = 1.0 - t * t
    return t, d1, -2.0 * t * d1, (6.0 * t * t - 2.0) * d1


def _sin_rule(v):
    t = np.sin(v)
    d1 = np.cos(v)
    return t, d1, -t, -d1


# activations must be C^2; each rule returns value-level
# (f, f', f'', f''') at the pre-activation values
ACTIVATIONS = {
    "tanh": _tanh_rule,
    "sin": _sin_rule,
}


@dataclass(frozen=True)
class MLPArch:
    input_dim: int = 2
    hidden_layers: int = 3
    width: int = 16
    output_dim: int = 1
    activation: str = "tanh"
    # fixed affine preprocessing per coordinate: xi = (x - shift) * scale,
    # mapping the subdomain bounding box onto the centered unit square
    input_shift: tuple = (0.0, 0.0)
    input_scale: tuple = (1.0, 1.0)

    def validate(self) -> "MLPArch":
        if min(self.input_dim, self.hidden_layers, self.width, self.output_dim) < 1:
            raise ConfigError(f"all architecture dimensions must be >= 1: {self}")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(
                f"activation {self.activation!r} is not registered "
                f"(choose from {sorted(ACTIVATIONS)})")
        if (len(self.input_shift) != self.input_dim
                or len(self.input_scale) != self.input_dim
                or any(s <= 0 for s in self.input_scale)):
            raise ConfigError("input map needs one shift and positive scale per input")
        return self

    def layer_shapes(self) -> list[tuple[int, int]]:
        """(fan_out, fan_in) of each linear map, input to output."""
        dims = [self.input_dim] + [self.width] * self.hidden_layers + [self.output_dim]
        return [(dims[i + 1], dims[i]) for i in range(len(dims) - 1)]

    def n_params(self) -> int:
        return sum(o * i + o for o, i in self.layer_shapes())

    def to_dict(self) -> dict:
        return {"input_dim": self.input_dim, "hidden_layers": self.hidden_layers,
                "width": self.width, "output_dim": self.output_dim,
                "activation": self.activation,
                "input_shift": list(self.input_shift),
                "input_scale": list(self.input_scale)}

    @classmethod
    def from_dict(cls, d: dict) -> "MLPArch":
        d = dict(d)
        for key in ("input_shift", "input_scale"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d).validate()


class MLPParams:
    """Weight/bias stack for one subnetwork.

    ``layers`` is a list of (W, b) with W of shape (fan_out, fan_in); the
    entries are numpy arrays, or taped Vars inside a training step.
    """

    def __init__(self, arch: MLPArch, layers):
        self.arch = arch
        self.layers = layers

    def n_params(self) -> int:
        return self.arch.n_params()

    def to_flat(self) -> np.ndarray:
        """Row-major W then b, layer by layer from input to output."""
        parts = []
        for w, b in self.layers:
            parts.append(np.asarray(ad.value_of(w)).ravel())
            parts.append(np.asarray(ad.value_of(b)).ravel())
        return np.concatenate(parts)

    @classmethod
    def from_flat(cls, arch: MLPArch, flat: np.ndarray) -> "MLPParams":
        layers = []
        pos = 0
        for o, i in arch.layer_shapes():
            w = flat[pos:pos + o * i].reshape(o, i).copy()
            pos += o * i
            b = flat[pos:pos + o].copy()
            pos += o
            layers.append((w, b))
        if pos != flat.size:
            raise UsageError(
                f"flat vector has {flat.size} entries, arch needs {pos}")
        return cls(arch, layers)

    def as_vars(self, tape) -> "MLPParams":
        return MLPParams(
            self.arch,
            [(ad.Var(w, tape), ad.Var(b, tape)) for w, b in self.layers])

    def leaf_vars(self):
        for w, b in self.layers:
            yield w
            yield b


@dataclass(frozen=True)
class CoupledArch:
    u_s: MLPArch
    u_d: MLPArch
    p_s: MLPArch
    p_d: MLPArch

    def validate(self) -> "CoupledArch":
        for a in (self.u_s, self.u_d, self.p_s, self.p_d):
            a.validate()
        if self.u_s.output_dim != 2 or self.u_d.output_dim != 2:
            raise ConfigError("velocity subnetworks must have output_dim 2")
        if self.p_s.output_dim != 1 or self.p_d.output_dim != 1:
            raise ConfigError("pressure subnetworks must have output_dim 1")
        return self

    @classmethod
    def standard(cls, hidden_layers: int = 3, width: int = 16,
                 activation: str = "tanh") -> "CoupledArch":
        mk = lambda out: MLPArch(2, hidden_layers, width, out, activation)
        return cls(mk(2), mk(2), mk(1), mk(1)).validate()

    @classmethod
    def for_geometry(cls, geometry, hidden_layers: int = 3, width: int = 16,
                     activation: str = "tanh") -> "CoupledArch":
        """Standard stack with inputs normalized per subdomain bounding box."""
        def mk(rect, out):
            shift = (0.5 * (rect.xmin + rect.xmax), 0.5 * (rect.ymin + rect.ymax))
            scale = (2.0 / (rect.xmax - rect.xmin), 2.0 / (rect.ymax - rect.ymin))
            return MLPArch(2, hidden_layers, width, out, activation,
                           input_shift=shift, input_scale=scale)
        s, d = geometry.rect_s, geometry.rect_d
        return cls(mk(s, 2), mk(d, 2), mk(s, 1), mk(d, 1)).validate()

    def fields(self):
        return (("u_s", self.u_s), ("u_d", self.u_d),
                ("p_s", self.p_s), ("p_d", self.p_d))


class CoupledParams:
    """Parameter stacks of the four subnetworks, in fixed flattening order
    u_s, u_d, p_s, p_d (within each: per layer W row-major, then b)."""

    def __init__(self, u_s: MLPParams, u_d: MLPParams, p_s: MLPParams, p_d: MLPParams):
        self.u_s = u_s
        self.u_d = u_d
        self.p_s = p_s
        self.p_d = p_d

    def nets(self):
        return (("u_s", self.u_s), ("u_d", self.u_d),
                ("p_s", self.p_s), ("p_d", self.p_d))

    @property
    def archs(self) -> CoupledArch:
        return CoupledArch(self.u_s.arch, self.u_d.arch,
                           self.p_s.arch, self.p_d.arch)

    def n_params(self) -> int:
        return sum(p.n_params() for _, p in self.nets())

    def to_flat(self) -> np.ndarray:
        return np.concatenate([p.to_flat() for _, p in self.nets()])

    @classmethod
    def from_flat(cls, archs: CoupledArch, flat: np.ndarray) -> "CoupledParams":
        nets = []
        pos = 0
        for _, arch in archs.fields():
            n = arch.n_params()
            nets.append(MLPParams.from_flat(arch, flat[pos:pos + n]))
            pos += n
        return cls(*nets)

    def as_vars(self, tape) -> "CoupledParams":
        return CoupledParams(*(p.as_vars(tape) for _, p in self.nets()))

    def leaf_vars(self):
        for _, p in self.nets():
            yield from p.leaf_vars()


def init_params(archs: CoupledArch, seed: int) -> CoupledParams:
    """Glorot-uniform weights, zero biases; fully determined by the seed."""
    archs.validate()
    rng = np.random.default_rng(seed)
    nets = []
    for _, arch in archs.fields():
        layers = []
        for o, i in arch.layer_shapes():
            bound = np.sqrt(6.0 / (i + o))
            w = rng.uniform(-bound, bound, size=(o, i))
            layers.append((w, np.zeros(o)))
        nets.append(MLPParams(arch, layers))
    return CoupledParams(*nets)


def _activate_jet(jet: Jet2, rule, order: int) -> Jet2:
    """Apply a C^2 activation to a jet with fused adjoint rules.

    The chain rules per axis are f'(v)*g for gradients and
    f''(v)*g^2 + f'(v)*h for pure second derivatives; the fused tape
    nodes carry the value-level derivative factors directly.
    """
    tape = ad._tape_of(jet.v, jet.gx, jet.gy, jet.hxx, jet.hyy)
    vv = ad.value_of(jet.v)
    t, d1, d2, d3 = rule(vv)
    if tape is None:
        out = Jet2(t, d1 * jet.gx, d1 * jet.gy)
        if order == 2:
            out.hxx = d2 * jet.gx * jet.gx + d1 * jet.hxx
            out.hyy = d2 * jet.gy * jet.gy + d1 * jet.hyy
        return out

    fwd_rule = rule
    unb = ad._unbroadcast
    vsh = np.shape(vv)
    v_out = tape.record(t, (jet.v,), lambda g: (g * d1,),
                        lambda v: fwd_rule(v)[0], "act_v")

    def grad_comp(gc):
        gv = ad.value_of(gc)
        gsh = np.shape(gv)
        return tape.record(
            d1 * gv, (jet.v, gc),
            lambda g: (unb(g * gv * d2, vsh), unb(g * d1, gsh)),
            lambda v, gg: fwd_rule(v)[1] * gg, "act_g")

    out = Jet2(v_out, grad_comp(jet.gx), grad_comp(jet.gy))
    if order == 2:
        def curv_comp(gc, hc):
            gv, hv = ad.value_of(gc), ad.value_of(hc)
            gsh, hsh = np.shape(gv), np.shape(hv)

            def fwd(v, gg, hh):
                _, f1, f2, _ = fwd_rule(v)
                return f2 * gg * gg + f1 * hh

            return tape.record(
                d2 * gv * gv + d1 * hv, (jet.v, gc, hc),
                lambda g: (unb(g * (d3 * gv * gv + d2 * hv), vsh),
                           unb(g * (2.0 * d2 * gv), gsh), unb(g * d1, hsh)),
                fwd, "act_h")

        out.hxx = curv_comp(jet.gx, jet.hxx)
        out.hyy = curv_comp(jet.gy, jet.hyy)
    return out


def forward_jet(params: MLPParams, x, y, order: int = 2) -> list[Jet2]:
    """Evaluate one subnetwork at points (x, y) with spatial jets.

    ``x`` and ``y`` are scalars or equally shaped 1-d arrays.  Returns one
    jet per output component; components are scalars for scalar input,
    otherwise arrays over the points (Vars when params are tape-bound).
    With ``order=1`` the second-derivative components are skipped (left
    zero), which the loss assembly uses for the fields whose curvature
    never enters a residual.
    """
    if order not in (1, 2):
        raise UsageError("order must be 1 or 2")
    scalar_in = np.ndim(x) == 0 and np.ndim(y) == 0
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    ys = np.atleast_1d(np.asarray(y, dtype=float))
    pts = np.stack([xs, ys], axis=-1)

    shift = np.asarray(params.arch.input_shift)
    scale = np.asarray(params.arch.input_scale)
    jet = Jet2((pts - shift) * scale,
               np.array([scale[0], 0.0]), np.array([0.0, scale[1]]),
               np.zeros(2), np.zeros(2))
    rule = ACTIVATIONS[params.arch.activation]
    last = len(params.layers) - 1
    for i, (w, b) in enumerate(params.layers):
        lin = Jet2(ad.add(ad.matmul_t(jet.v, w), b),
                   ad.matmul_t(jet.gx, w),
                   ad.matmul_t(jet.gy, w))
        if order == 2:
            lin.hxx = ad.matmul_t(jet.hxx, w)
            lin.hyy = ad.matmul_t(jet.hyy, w)
        jet = lin if i == last else _activate_jet(lin, rule, order)

    vals = ad.value_of(jet.v)
    if not np.all(np.isfinite(vals)):
        raise NumericalError("non-finite network output")

    outs = []
    for k in range(params.arch.output_dim):
        comps = [ad.col(c, k) if np.ndim(ad.value_of(c)) else c
                 for c in jet.components()]
        if scalar_in and not any(isinstance(c, ad.Var) for c in comps):
            comps = [float(np.asarray(c).reshape(-1)[0]) if np.ndim(c) else c
                     for c in comps]
        outs.append(Jet2(*comps))
    return outs


# -- checkpoints ---------------------------------------------------------------

def save_checkpoint(path, params: CoupledParams, seed: int | None = None) -> None:
    payload = {
        "seed": seed,
        "archs": {name: arch.to_dict() for name, arch in params.archs.fields()},
        "params": params.to_flat().tolist(),
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)


def load_checkpoint(path) -> tuple[CoupledParams, int | None]:
    with open(path) as fh:
        payload = json.load(fh)
    archs = CoupledArch(**{name: MLPArch.from_dict(d)
                           for name, d in payload["archs"].items()})
    flat = np.asarray(payload["params"], dtype=float)
    if flat.size != sum(a.n_params() for _, a in archs.fields()):
        raise ConfigError(f"checkpoint parameter count mismatch in {path}")
    return CoupledParams.from_flat(archs, flat), payload.get("seed")
