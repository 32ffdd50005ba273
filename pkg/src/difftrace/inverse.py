"""Gradient-based recovery of scene parameters from a target image.

Implements the render -> loss -> gradient -> update -> project loop with
Adam (bias-corrected) or plain SGD, box projection for constrained
parameters, and the loss evaluator shared by the optimizer, the gradient
checker and the finite-difference oracle.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import precision
from .autodiff import GradientNaNError, Tape, Var
from .images import Image
from .params import ParamVector, pack_params, unpack_params
from .renderer import build_trace_context, render_channels
from .scene import RenderSettings, SceneFile


@dataclass
class OptimConfig:
    max_iter: int = 100
    tolerance: float = 0.0
    learning_rate: float = 0.01
    optimizer: str = "adam"          # "adam" | "sgd"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    loss: str = "mse"                # "mse" | "ssd"
    projection: list = field(default_factory=list)  # (path-prefix, lo, hi)
    # Per-group step multipliers, torch-style param groups: (path-prefix,
    # scale).  Parameters with very different natural units (light intensity
    # vs position) need different effective step sizes under Adam.
    param_scales: list = field(default_factory=list)
    snapshot_every: int = 0
    depth: int = 2
    tiles: int = 1

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.tolerance < 0.0:
            raise ValueError("tolerance must be >= 0")
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be positive")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.loss not in ("mse", "ssd"):
            raise ValueError(f"unknown loss {self.loss!r}")


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, n: int) -> "AdamState":
        return cls(m=np.zeros(n), v=np.zeros(n), t=0)


# ---------------------------------------------------------------------------
# Losses


def _pixels(img) -> np.ndarray:
    if isinstance(img, Image):
        return np.asarray(img.pixels, dtype=np.float64)
    return np.asarray(img, dtype=np.float64)


def mse_loss(a, b) -> float:
    """Mean over all pixel-channels of the squared difference."""
    pa, pb = _pixels(a), _pixels(b)
    if pa.shape != pb.shape:
        raise ValueError(f"image dimensions differ: {pa.shape} vs {pb.shape}")
    d = pa - pb
    return float(np.mean(d * d))


def ssd_loss(a, b) -> float:
    """Sum over all pixel-channels of the squared difference."""
    pa, pb = _pixels(a), _pixels(b)
    if pa.shape != pb.shape:
        raise ValueError(f"image dimensions differ: {pa.shape} vs {pb.shape}")
    d = pa - pb
    return float(np.sum(d * d))


def _channel_ssd(channels, target_channels):
    """Generic (tape-friendly) sum of squared channel differences."""
    total = None
    for c, t in zip(channels, target_channels):
        d = c - t
        s = (d * d).sum()
        total = s if total is None else total + s
    return total


# ---------------------------------------------------------------------------
# Optimizer steps


def step_scales(params: ParamVector, cfg: OptimConfig) -> np.ndarray:
    """Per-parameter step multiplier from the config's path-prefix groups."""
    n = len(getattr(params, "layout", []) or
            np.asarray(getattr(params, "values", params)))
    s = np.ones(n)
    layout = getattr(params, "layout", None)
    if layout and cfg.param_scales:
        for prefix, scale in cfg.param_scales:
            for i, entry in enumerate(layout):
                if entry.path.startswith(prefix):
                    s[i] = scale
    return s


def adam_step(state: AdamState, params: ParamVector, grads: ParamVector,
              cfg: OptimConfig) -> ParamVector:
    """Standard Adam with bias correction; errors on NaN gradients."""
    g = np.asarray(getattr(grads, "values", grads), dtype=np.float64)
    p = np.asarray(getattr(params, "values", params), dtype=np.float64)
    if g.shape != p.shape:
        raise ValueError("gradient/parameter shape mismatch")
    bad = np.nonzero(np.isnan(g))[0]
    if bad.size:
        path = (params.layout[bad[0]].path
                if getattr(params, "layout", None) else f"index {bad[0]}")
        raise GradientNaNError(f"gradient of {path}", int(bad[0]))
    state.t += 1
    state.m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * g
    state.v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * g * g
    m_hat = state.m / (1.0 - cfg.beta1 ** state.t)
    v_hat = state.v / (1.0 - cfg.beta2 ** state.t)
    lr = cfg.learning_rate * step_scales(params, cfg)
    new = p - lr * m_hat / (np.sqrt(v_hat) + cfg.eps)
    return params.with_values(new) if hasattr(params, "with_values") else new


def sgd_step(params: ParamVector, grads: ParamVector,
             cfg: OptimConfig) -> ParamVector:
    g = np.asarray(getattr(grads, "values", grads), dtype=np.float64)
    p = np.asarray(getattr(params, "values", params), dtype=np.float64)
    lr = cfg.learning_rate * step_scales(params, cfg)
    new = p - lr * g
    return params.with_values(new) if hasattr(params, "with_values") else new


def project(params: ParamVector, clamp_spec) -> ParamVector:
    """Clamp parameters whose path matches a (prefix, lo, hi) spec entry."""
    if not clamp_spec:
        return params
    vals = np.array(np.asarray(params.values, dtype=np.float64), copy=True)
    for prefix, lo, hi in clamp_spec:
        if lo > hi:
            raise ValueError(f"clamp bounds inverted for {prefix!r}")
        for i, entry in enumerate(params.layout):
            if entry.path.startswith(prefix):
                vals[i] = min(max(vals[i], lo), hi)
    return params.with_values(vals)


# ---------------------------------------------------------------------------
# Loss evaluator


class LossEvaluator:
    """Scalar loss of the rendered frame vs a target, callable on a
    ParamVector holding either plain values (forward/FD) or a tape Var (AD)."""

    def __init__(self, bundle: SceneFile, target: Image,
                 loss_kind: str = "mse", depth: int = 2,
                 settings: RenderSettings | None = None, use_bvh: bool = False,
                 backend=None):
        if (target.width != bundle.camera.width
                or target.height != bundle.camera.height):
            raise ValueError(
                f"target image {target.width}x{target.height} does not match "
                f"camera {bundle.camera.width}x{bundle.camera.height}")
        self.bundle = bundle
        self.loss_kind = loss_kind
        self.depth = depth
        self.settings = settings or bundle.settings
        self.backend = backend
        self.use_bvh = use_bvh
        px = np.asarray(target.pixels, dtype=precision.active_dtype())
        self.target_channels = (px[:, :, 0].ravel(), px[:, :, 1].ravel(),
                                px[:, :, 2].ravel())
        self.n_values = px.size
        self.forward_evals = 0

    def _scene_for_trace(self):
        if self.use_bvh:
            from .bvh import build
            return build(self.bundle.scene.objects)
        return self.bundle.scene

    def _channels(self, pv: ParamVector | None):
        cam = self.bundle.camera
        ctx = build_trace_context(cam, self._scene_for_trace(),
                                  self.bundle.lights, self.settings, pv=pv,
                                  backend=self.backend)
        return render_channels(ctx, cam.width, cam.height, self.depth)

    def _finish(self, ssd):
        if self.loss_kind == "mse":
            return ssd / float(self.n_values)
        return ssd

    def __call__(self, pv: ParamVector):
        self.forward_evals += 1
        if isinstance(pv.values, Var):
            channels = self._channels(pv)
        else:
            unpack_params(pv)
            channels = self._channels(None)
        return self._finish(_channel_ssd(channels, self.target_channels))

    def loss_and_grad(self, pv: ParamVector, tiles: int = 1):
        """(loss value, gradient ParamVector) from one tape per tile."""
        if tiles <= 1:
            tape = Tape()
            leaf = tape.leaf(precision.asarray(np.asarray(pv.values,
                                                          dtype=np.float64)))
            out = self(pv.with_values(leaf))
            if not isinstance(out, Var):
                return float(out), pv.with_values(np.zeros(len(pv)))
            loss = float(out.value)
            if np.isnan(loss):
                idx, kind = tape.first_nan()
                raise GradientNaNError(kind, idx)
            adj = tape.backward(out)
            g = adj[leaf.index]
            g = np.zeros(len(pv)) if g is None else np.asarray(g,
                                                               dtype=np.float64)
            return loss, pv.with_values(g)
        return self._tiled_loss_and_grad(pv, tiles)

    def _tiled_loss_and_grad(self, pv: ParamVector, tiles: int):
        # One tape per pixel band; adjoints summed in band order.
        cam = self.bundle.camera
        n = cam.width * cam.height
        bounds = np.linspace(0, n, tiles + 1, dtype=int)
        total_ssd = 0.0
        grads = np.zeros(len(pv))
        for a, b in zip(bounds[:-1], bounds[1:]):
            if b <= a:
                continue
            tape = Tape()
            leaf = tape.leaf(precision.asarray(np.asarray(pv.values,
                                                          dtype=np.float64)))
            ctx = build_trace_context(cam, self._scene_for_trace(),
                                      self.bundle.lights, self.settings,
                                      pv=pv.with_values(leaf),
                                      backend=self.backend)
            r, g_, b_ = render_channels(ctx, cam.width, cam.height, self.depth)
            band = np.arange(a, b)
            channels = tuple(c.take(band) if isinstance(c, Var)
                             else np.asarray(c).take(band)
                             for c in (r, g_, b_))
            targets = tuple(t[a:b] for t in self.target_channels)
            out = _channel_ssd(channels, targets)
            if not isinstance(out, Var):
                total_ssd += float(out)
                continue
            if np.isnan(float(out.value)):
                idx, kind = tape.first_nan()
                raise GradientNaNError(kind, idx)
            total_ssd += float(out.value)
            adj = tape.backward(out)
            g = adj[leaf.index]
            if g is not None:
                grads += np.asarray(g, dtype=np.float64)
        if self.loss_kind == "mse":
            return (total_ssd / float(self.n_values),
                    pv.with_values(grads / float(self.n_values)))
        return total_ssd, pv.with_values(grads)


# ---------------------------------------------------------------------------
# Optimization loop


@dataclass
class OptimResult:
    params: ParamVector
    history: list                 # (iteration, loss, wall_ms)
    converged: bool
    iterations: int
    aborted: str | None = None


def optimize(bundle: SceneFile, selection, target: Image, cfg: OptimConfig,
             settings: RenderSettings | None = None, on_iteration=None,
             use_bvh: bool = False, backend=None) -> OptimResult:
    """Run the optimization loop until loss < tolerance or max_iter."""
    evaluator = LossEvaluator(bundle, target, loss_kind=cfg.loss,
                              depth=cfg.depth, settings=settings,
                              use_bvh=use_bvh, backend=backend)
    pv = pack_params(bundle, selection)
    adam = AdamState.zeros(len(pv))
    history: list = []
    converged = False
    aborted = None
    it = 0
    for it in range(1, cfg.max_iter + 1):
        t0 = time.perf_counter()
        try:
            loss, grads = evaluator.loss_and_grad(pv, tiles=cfg.tiles)
        except GradientNaNError as e:
            aborted = str(e)
            break
        if np.isnan(loss):
            aborted = "NaN loss"
            break
        if cfg.optimizer == "adam":
            try:
                pv = adam_step(adam, pv, grads, cfg)
            except GradientNaNError as e:
                aborted = str(e)
                break
        else:
            pv = sgd_step(pv, grads, cfg)
        pv = project(pv, cfg.projection)
        unpack_params(pv)
        wall_ms = (time.perf_counter() - t0) * 1000.0
        history.append((it, loss, wall_ms))
        if on_iteration is not None:
            on_iteration(it, loss, pv)
        if loss < cfg.tolerance:
            converged = True
            break
    unpack_params(pv)
    return OptimResult(params=pv, history=history, converged=converged,
                       iterations=it, aborted=aborted)
