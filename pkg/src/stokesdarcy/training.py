"""Composite collocation loss and the stochastic training loop.

Every loss term is the Monte Carlo mean, over its own point group, of a
squared residual (squared Euclidean norm for vector residuals), so the
total is an unbiased estimate of the density-weighted residual norms the
sampler realizes.  One optimizer step per freshly drawn batch.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import autodiff as ad
from .errors import ConfigError, NumericalError, UsageError
from .geometry import BatchSizes, SampleBatch, draw_batch
from .jets import Jet2
from .network import CoupledArch, CoupledParams, forward_jet, init_params
from .physics import (ProblemSpec, boundary_residuals, darcy_residuals,
                      interface_residuals, stokes_residuals)

TERM_NAMES = (
    "stokes_momentum", "stokes_div", "stokes_bc",
    "darcy_forch", "darcy_mass", "darcy_bc",
    "iface_normal", "iface_force", "iface_bjs",
)

HISTORY_HEADER = "iteration," + ",".join(TERM_NAMES) + ",total,grad_norm,seconds"


@dataclass
class LossBreakdown:
    stokes_momentum: float = 0.0
    stokes_div: float = 0.0
    stokes_bc: float = 0.0
    darcy_forch: float = 0.0
    darcy_mass: float = 0.0
    darcy_bc: float = 0.0
    iface_normal: float = 0.0
    iface_force: float = 0.0
    iface_bjs: float = 0.0
    total: object = 0.0   # float, or the taped scalar inside a training step

    def terms(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in TERM_NAMES}


def _weights(weights) -> dict[str, float]:
    w = {name: 1.0 for name in TERM_NAMES}
    if weights is None:
        return w
    if isinstance(weights, dict):
        extra = set(weights) - set(TERM_NAMES)
        if extra:
            raise ConfigError(f"unknown loss-term weights {sorted(extra)}")
        w.update({k: float(v) for k, v in weights.items()})
    else:
        vals = list(weights)
        if len(vals) != len(TERM_NAMES):
            raise ConfigError(f"expected {len(TERM_NAMES)} weights, got {len(vals)}")
        w = dict(zip(TERM_NAMES, map(float, vals)))
    if any(v < 0 for v in w.values()):
        raise ConfigError("loss-term weights must be nonnegative")
    return w


def _slice_jets(jets, i0, i1):
    out = []
    for j in jets:
        out.append(Jet2(*(ad.rows(c, i0, i1) if np.ndim(ad.value_of(c)) else c
                          for c in j.components())))
    return out


class _NetEval:
    """Forward pass of one subnetwork over concatenated point blocks,
    sliceable back into the named blocks."""

    def __init__(self, mlp, blocks: dict[str, np.ndarray], order: int = 2):
        self.offsets = {}
        pts = []
        pos = 0
        for key, block in blocks.items():
            if len(block) == 0:
                continue
            self.offsets[key] = (pos, pos + len(block))
            pts.append(block)
            pos += len(block)
        self.jets = None
        if pts:
            allpts = np.concatenate(pts, axis=0)
            self.jets = forward_jet(mlp, allpts[:, 0], allpts[:, 1], order=order)

    def block(self, key):
        i0, i1 = self.offsets[key]
        return _slice_jets(self.jets, i0, i1)


def _check_finite(residuals, pts, label):
    for r in residuals:
        vals = np.asarray(ad.value_of(r))
        if not np.all(np.isfinite(vals)):
            i = int(np.argmax(~np.isfinite(vals)))
            raise NumericalError(f"non-finite {label} residual", location=pts[i])


def _mean_sq(residuals):
    acc = None
    for r in residuals:
        sq = r * r
        acc = sq if acc is None else acc + sq
    return ad.mean_all(acc)


def assemble_loss(params: CoupledParams, batch: SampleBatch, spec: ProblemSpec,
                  weights=None) -> LossBreakdown:
    """All nine loss terms over one batch; recorded on the adjoint tape
    when ``params`` are tape-bound."""
    w = _weights(weights)
    counts = batch.counts()
    group_of = {
        "stokes_momentum": "interior_s", "stokes_div": "interior_s",
        "stokes_bc": "boundary_s",
        "darcy_forch": "interior_d", "darcy_mass": "interior_d",
        "darcy_bc": "boundary_d",
        "iface_normal": "interface", "iface_force": "interface",
        "iface_bjs": "interface",
    }
    for name in TERM_NAMES:
        if w[name] > 0 and counts[group_of[name]] == 0:
            raise ConfigError(
                f"loss term {name} has weight {w[name]} but its point group "
                f"{group_of[name]} is empty")

    # only the free-flow velocity needs its curvature (the momentum
    # Laplacian); every other field enters through values and gradients
    seg_key = lambda i: f"seg{i}"
    us = _NetEval(params.u_s, {
        "interior": batch.interior_s,
        **{seg_key(i): pts for i, (_, pts) in enumerate(batch.boundary_s)},
        "interface": batch.interface}, order=2)
    ud = _NetEval(params.u_d, {
        "interior": batch.interior_d,
        **{seg_key(i): pts for i, (seg, pts) in enumerate(batch.boundary_d)
           if seg.condition == "neumann_flux"},
        "interface": batch.interface}, order=1)
    ps = _NetEval(params.p_s, {
        "interior": batch.interior_s, "interface": batch.interface}, order=1)
    pd = _NetEval(params.p_d, {
        "interior": batch.interior_d,
        **{seg_key(i): pts for i, (seg, pts) in enumerate(batch.boundary_d)
           if seg.condition == "dirichlet_pressure"},
        "interface": batch.interface}, order=1)

    terms: dict[str, object] = {name: 0.0 for name in TERM_NAMES}

    if counts["interior_s"]:
        pts = batch.interior_s
        m1, m2, div = stokes_residuals(us.block("interior"), ps.block("interior")[0],
                                       pts, spec)
        _check_finite((m1, m2, div), pts, "free-flow interior")
        terms["stokes_momentum"] = _mean_sq((m1, m2))
        terms["stokes_div"] = _mean_sq((div,))

    if counts["interior_d"]:
        pts = batch.interior_d
        r1, r2, mass = darcy_residuals(ud.block("interior"), pd.block("interior")[0],
                                       pts, spec)
        _check_finite((r1, r2, mass), pts, "porous interior")
        terms["darcy_forch"] = _mean_sq((r1, r2))
        terms["darcy_mass"] = _mean_sq((mass,))

    if counts["boundary_s"]:
        acc = None
        for i, (seg, pts) in enumerate(batch.boundary_s):
            res = boundary_residuals(us.block(seg_key(i)), seg, pts, spec)
            _check_finite(res, pts, "free-flow boundary")
            sq = None
            for r in res:
                sq = r * r if sq is None else sq + r * r
            part = ad.sum_all(sq)
            acc = part if acc is None else acc + part
        terms["stokes_bc"] = acc * (1.0 / counts["boundary_s"])

    if counts["boundary_d"]:
        acc = None
        for i, (seg, pts) in enumerate(batch.boundary_d):
            ev = pd if seg.condition == "dirichlet_pressure" else ud
            res = boundary_residuals(ev.block(seg_key(i)), seg, pts, spec)
            _check_finite(res, pts, "porous boundary")
            sq = None
            for r in res:
                sq = r * r if sq is None else sq + r * r
            part = ad.sum_all(sq)
            acc = part if acc is None else acc + part
        terms["darcy_bc"] = acc * (1.0 / counts["boundary_d"])

    if counts["interface"]:
        pts = batch.interface
        r1, r2, r3 = interface_residuals(
            us.block("interface"), ud.block("interface"),
            ps.block("interface")[0], pd.block("interface")[0], pts, spec)
        _check_finite((r1, r2, r3), pts, "interface")
        terms["iface_normal"] = _mean_sq((r1,))
        terms["iface_force"] = _mean_sq((r2,))
        terms["iface_bjs"] = _mean_sq((r3,))

    total = 0.0
    for name in TERM_NAMES:
        if w[name] > 0.0 and counts[group_of[name]]:
            total = total + w[name] * terms[name]

    values = {name: float(terms[name]) for name in TERM_NAMES}
    return LossBreakdown(total=total, **values)


# -- optimizer ---------------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    max_iters: int = 20000
    learning_rate: float = 1.0e-3
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1.0e-8
    batch: BatchSizes = field(default_factory=BatchSizes)
    weights: dict | None = None
    grad_norm_tol: float = 0.0
    seed: int = 0
    log_every: int = 100
    lr_decay_every: int = 10000
    lr_decay_factor: float | None = None   # default: 0.5 for adam, 1.0 for sgd
    average_tail: float = 0.0              # fraction of final iterates to average
    reference_mode: bool | None = None     # default: CDNN_THREADS == "1"

    def validate(self) -> "TrainConfig":
        if self.max_iters < 1:
            raise ConfigError("max_iters must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigError(f"optimizer must be adam or sgd, got {self.optimizer!r}")
        if self.grad_norm_tol < 0:
            raise ConfigError("grad_norm_tol must be >= 0")
        if self.log_every < 1 or self.lr_decay_every < 1:
            raise ConfigError("log_every and lr_decay_every must be >= 1")
        if not 0.0 <= self.average_tail <= 1.0:
            raise ConfigError("average_tail must lie in [0, 1]")
        self.batch.validate()
        _weights(self.weights)
        return self

    @property
    def decay_factor(self) -> float:
        if self.lr_decay_factor is not None:
            return self.lr_decay_factor
        return 0.5 if self.optimizer == "adam" else 1.0

    @property
    def in_reference_mode(self) -> bool:
        if self.reference_mode is not None:
            return self.reference_mode
        return os.environ.get("CDNN_THREADS") == "1"


@dataclass
class OptState:
    t: int = 0
    m: np.ndarray | None = None
    v: np.ndarray | None = None


def step(params: CoupledParams, grad: np.ndarray, config: TrainConfig,
         state: OptState) -> tuple[CoupledParams, OptState]:
    """One descent update; refuses (params unchanged) on a non-finite gradient."""
    grad = np.asarray(grad, dtype=float)
    if grad.size != params.n_params():
        raise UsageError(
            f"gradient has {grad.size} entries, parameters have {params.n_params()}")
    if not np.all(np.isfinite(grad)):
        raise NumericalError("non-finite gradient entry; step refused")

    lr = config.learning_rate * config.decay_factor ** (state.t // config.lr_decay_every)
    flat = params.to_flat()
    if config.optimizer == "sgd":
        new_flat = flat - lr * grad
        new_state = OptState(t=state.t + 1)
    else:
        m = np.zeros_like(flat) if state.m is None else state.m
        v = np.zeros_like(flat) if state.v is None else state.v
        t = state.t + 1
        m = config.beta1 * m + (1.0 - config.beta1) * grad
        v = config.beta2 * v + (1.0 - config.beta2) * grad * grad
        m_hat = m / (1.0 - config.beta1 ** t)
        v_hat = v / (1.0 - config.beta2 ** t)
        new_flat = flat - lr * m_hat / (np.sqrt(v_hat) + config.eps)
        new_state = OptState(t=t, m=m, v=v)
    return CoupledParams.from_flat(params.archs, new_flat), new_state


# -- training loop ------------------------------------------------------------------

@dataclass
class TrainRecord:
    iteration: int
    loss: LossBreakdown
    grad_norm: float
    seconds: float

    def csv_row(self) -> str:
        vals = [repr(float(v)) for v in self.loss.terms().values()]
        return (f"{self.iteration}," + ",".join(vals)
                + f",{float(self.loss.total)!r},{self.grad_norm!r},{self.seconds!r}")


@dataclass
class TrainHistory:
    records: list = field(default_factory=list)
    error: str | None = None

    def totals(self) -> np.ndarray:
        return np.array([float(r.loss.total) for r in self.records])

    def iterations(self) -> np.ndarray:
        return np.array([r.iteration for r in self.records])

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(HISTORY_HEADER + "\n")
            for rec in self.records:
                fh.write(rec.csv_row() + "\n")


def train(spec: ProblemSpec, config: TrainConfig,
          archs: CoupledArch | None = None,
          params: CoupledParams | None = None,
          on_log=None) -> tuple[CoupledParams, TrainHistory]:
    """Run the sampling / loss / adjoint / update loop.

    Stops at ``max_iters`` or when the gradient norm drops to
    ``grad_norm_tol``.  Deterministic for a fixed config seed.  On a
    numerical failure the history collected so far is returned with the
    error attached.

    With ``average_tail`` > 0 the returned parameters are the running
    average of the iterates over that final fraction of the run, a
    stochastic-gradient variance-reduction standard; the update sequence
    itself is untouched.
    """
    config.validate()
    if params is None:
        if archs is None:
            archs = CoupledArch.for_geometry(spec.geometry)
        params = init_params(archs, config.seed)
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 1]))
    history = TrainHistory()
    state = OptState()
    reference = config.in_reference_mode
    avg_from = (config.max_iters - int(config.average_tail * config.max_iters) + 1
                if config.average_tail > 0 else None)
    avg_sum = None
    avg_n = 0
    t0 = time.perf_counter()

    for n in range(1, config.max_iters + 1):
        batch = draw_batch(spec.geometry, config.batch, rng, spec.segments)
        tape = ad.Tape()
        taped = params.as_vars(tape)
        try:
            breakdown = assemble_loss(taped, batch, spec, config.weights)
            grad = ad.gradient_of(breakdown.total, taped)
        except NumericalError as err:
            history.error = str(err)
            break
        grad_norm = float(np.linalg.norm(grad))
        stopping = grad_norm <= config.grad_norm_tol or n == config.max_iters

        if n == 1 or n % config.log_every == 0 or stopping:
            seconds = 0.0 if reference else time.perf_counter() - t0
            record = TrainRecord(n, breakdown, grad_norm, seconds)
            history.records.append(record)
            if on_log is not None:
                on_log(n, params, record)

        if grad_norm <= config.grad_norm_tol:
            break
        try:
            params, state = step(params, grad, config, state)
        except NumericalError as err:
            history.error = str(err)
            break
        if avg_from is not None and n >= avg_from:
            flat = params.to_flat()
            avg_sum = flat if avg_sum is None else avg_sum + flat
            avg_n += 1

    if avg_n > 0 and history.error is None:
        params = CoupledParams.from_flat(params.archs, avg_sum / avg_n)
    return params, history
