"""AD-vs-finite-difference comparison over a parameter selection.

Parameters whose perturbation by the finite-difference step changes any
primary-ray hit id are flagged as boundary-crossing and excluded from the
pass/fail verdict: the loss is discontinuous across silhouette and
triangle-triangle boundaries, so neither estimate is trustworthy there.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import precision
from .autodiff import GradConfig, finite_difference_gradient, gradient
from .images import Image
from .inverse import LossEvaluator
from .params import ParamVector, pack_params, unpack_params
from .renderer import build_trace_context
from .scene import SceneFile, get_primary_rays


def default_rtol() -> float:
    return 1e-2 if precision.dtype_name() == "float32" else 1e-4


@dataclass
class GradcheckRow:
    path: str
    ad: float
    fd: float
    abs_err: float
    rel_err: float
    boundary: bool
    passed: bool


@dataclass
class GradcheckReport:
    rows: list
    rtol: float
    delta: float

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows if not r.boundary)

    @property
    def n_boundary(self) -> int:
        return sum(1 for r in self.rows if r.boundary)

    def csv_lines(self) -> list:
        out = ["path,ad,fd,abs_err,rel_err,boundary,passed"]
        for r in self.rows:
            out.append(f"{r.path},{r.ad:.8g},{r.fd:.8g},{r.abs_err:.8g},"
                       f"{r.rel_err:.8g},{int(r.boundary)},{int(r.passed)}")
        return out


def primary_hit_ids(bundle: SceneFile) -> np.ndarray:
    """Winning primitive id per primary ray (-1 for miss)."""
    ctx = build_trace_context(bundle.camera, bundle.scene, bundle.lights,
                              bundle.settings)
    origins, dirs = get_primary_rays(bundle.camera)
    dt = precision.active_dtype()
    ov = tuple(np.ascontiguousarray(np.asarray(c, dtype=dt)) for c in origins)
    dv = tuple(np.ascontiguousarray(np.asarray(c, dtype=dt)) for c in dirs)
    return ctx.find_hits(ov, dv)


def boundary_mask(bundle: SceneFile, pv: ParamVector, delta: float) -> np.ndarray:
    """True where perturbing the parameter by +-delta changes any hit id."""
    base = np.asarray(pv.values, dtype=np.float64)
    out = np.zeros(base.size, dtype=bool)
    for i in range(base.size):
        maps = []
        for sign in (+1.0, -1.0):
            vals = base.copy()
            vals[i] += sign * delta
            unpack_params(pv.with_values(vals))
            maps.append(primary_hit_ids(bundle))
        out[i] = not np.array_equal(maps[0], maps[1])
    unpack_params(pv.with_values(base))
    return out


def run_gradcheck(bundle: SceneFile, selection, target: Image | None = None,
                  delta: float | None = None, rtol: float | None = None,
                  depth: int = 2, loss_kind: str = "mse") -> GradcheckReport:
    """Compare tape gradients against central differences per parameter."""
    rtol = rtol if rtol is not None else default_rtol()
    cfg = GradConfig(delta=delta)
    step = cfg.step()
    if target is None:
        # Dimmed self-render: a nontrivial residual without moving geometry.
        from .renderer import render
        img = render(bundle.camera, bundle.scene, bundle.lights,
                     depth=depth, settings=bundle.settings)
        target = Image(img.width, img.height, img.pixels * 0.9 + 0.01)
    evaluator = LossEvaluator(bundle, target, loss_kind=loss_kind,
                              depth=depth, settings=bundle.settings)
    pv = pack_params(bundle, selection)
    ad = np.asarray(gradient(evaluator, pv).values, dtype=np.float64)
    fd = np.asarray(finite_difference_gradient(evaluator, pv, cfg).values,
                    dtype=np.float64)
    boundary = boundary_mask(bundle, pv, step)
    rows = []
    for i, entry in enumerate(pv.layout):
        abs_err = abs(ad[i] - fd[i])
        scale = max(1.0, abs(fd[i]))
        rel_err = abs_err / scale
        rows.append(GradcheckRow(path=entry.path, ad=float(ad[i]),
                                 fd=float(fd[i]), abs_err=float(abs_err),
                                 rel_err=float(rel_err),
                                 boundary=bool(boundary[i]),
                                 passed=bool(abs_err <= rtol * scale)))
    return GradcheckReport(rows=rows, rtol=rtol, delta=step)
