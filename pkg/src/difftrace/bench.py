"""Benchmark suites: BVH vs linear scan, AD vs finite differencing, and
compiled vs pure-python hit-finding backends.

Each suite runs a fixed number of independent trials and reports mean and
standard deviation of wall times, primitive-intersection counts and peak
allocation (tracemalloc) as CSV rows.
"""

from __future__ import annotations

import math
import time
import tracemalloc
from dataclasses import dataclass

import numpy as np

from . import precision
from .autodiff import GradConfig, Tape, finite_difference_gradient
from .bvh import build
from .inverse import LossEvaluator
from .kernels import available_backends, get_backend
from .mathcore import Vec3
from .params import pack_params
from .renderer import TraceStats, render
from .scene import Camera, DistantLight, Material, PointLight, Scene, SceneFile, Triangle

BVH_SIZES = (32, 64, 128, 256, 512)
AD_TRIANGLE_COUNTS = (1, 2, 5, 10, 15, 20)
DEFAULT_TRIALS = 5
DEFAULT_SEED = 20240601


def benchmark_mesh() -> list:
    """Deterministic 137-triangle mesh centered at the origin.

    A 17-segment, 5-stack sphere (136 faces) plus one small interior
    triangle to land exactly on 137.
    """
    segments, stacks = 17, 5
    radius = 1.5
    mat = Material(color_diffuse=Vec3(0.7, 0.7, 0.9))
    rings = []
    for s in range(1, stacks):
        phi = math.pi * s / stacks
        ring = []
        for k in range(segments):
            theta = 2.0 * math.pi * k / segments
            ring.append(Vec3(radius * math.sin(phi) * math.cos(theta),
                             radius * math.cos(phi),
                             radius * math.sin(phi) * math.sin(theta)))
        rings.append(ring)
    top = Vec3(0.0, radius, 0.0)
    bottom = Vec3(0.0, -radius, 0.0)
    tris = []
    first, last = rings[0], rings[-1]
    for k in range(segments):
        j = (k + 1) % segments
        tris.append(Triangle(top, first[k], first[j], material=mat))
        tris.append(Triangle(bottom, last[j], last[k], material=mat))
    for a, b in zip(rings[:-1], rings[1:]):
        for k in range(segments):
            j = (k + 1) % segments
            tris.append(Triangle(a[k], b[k], b[j], material=mat))
            tris.append(Triangle(a[k], b[j], a[j], material=mat))
    tris.append(Triangle(Vec3(-0.1, 0.0, 0.0), Vec3(0.1, 0.0, 0.0),
                         Vec3(0.0, 0.12, 0.0), material=mat))
    assert len(tris) == 137
    return tris


def bench_camera(size: int) -> Camera:
    return Camera(lookfrom=Vec3(0.0, 0.0, -4.0), lookat=Vec3(0.0, 0.0, 0.0),
                  vup=Vec3(0.0, 1.0, 0.0), vfov=45.0, focus=1.0,
                  width=size, height=size)


BENCH_LIGHT = DistantLight(color=Vec3(1.0, 1.0, 1.0), intensity=1.0,
                           direction=Vec3(0.3, 1.0, -0.5))


@dataclass
class BenchRow:
    suite: str
    case: str
    method: str
    trial: int
    seconds: float
    prim_tests: int
    peak_bytes: int
    extra: str = ""

    HEADER = "suite,case,method,trial,seconds,prim_tests,peak_bytes,extra"

    def csv(self) -> str:
        return (f"{self.suite},{self.case},{self.method},{self.trial},"
                f"{self.seconds:.6f},{self.prim_tests},{self.peak_bytes},"
                f"{self.extra}")


def _timed_render(camera, scene, light, backend=None):
    stats = TraceStats()
    tracemalloc.start()
    t0 = time.perf_counter()
    render(camera, scene, light, depth=2, backend=backend, stats=stats)
    dt = time.perf_counter() - t0
    _, peak = tracemalloc.get_traced_memory()
    tracemalloc.stop()
    return dt, stats.prim_tests, peak


def run_bvh_suite(sizes=BVH_SIZES, trials: int = DEFAULT_TRIALS,
                  backend=None) -> list:
    """Full-frame renders of the 137-triangle mesh with and without BVH."""
    mesh = benchmark_mesh()
    tree = build(mesh)
    rows = []
    for size in sizes:
        cam = bench_camera(size)
        for method, scene in (("linear", mesh), ("bvh", tree)):
            for trial in range(trials):
                secs, tests, peak = _timed_render(cam, scene, BENCH_LIGHT,
                                                  backend=backend)
                rows.append(BenchRow("bvh", f"{size}x{size}", method, trial,
                                     secs, tests, peak))
    return rows


def random_triangles(n: int, rng) -> list:
    """Random triangles in front of the benchmark camera (default material)."""
    out = []
    while len(out) < n:
        base = rng.uniform(-2.0, 2.0, 3)
        base[2] = rng.uniform(-0.5, 2.0)
        v = [Vec3(*(base + rng.uniform(-1.0, 1.0, 3))) for _ in range(3)]
        try:
            out.append(Triangle(v[0], v[1], v[2], material=Material()))
        except Exception:
            continue
    return out


def run_ad_suite(counts=AD_TRIANGLE_COUNTS, trials: int = DEFAULT_TRIALS,
                 seed: int = DEFAULT_SEED, size: int = 16) -> list:
    """Backward-pass time vs central-differencing time as parameters grow.

    Camera and light stay fixed; every added triangle contributes 20
    parameters (9 vertex coordinates + 11 material scalars).
    """
    rng = np.random.default_rng(seed)
    cam = Camera(lookfrom=Vec3(0.0, 0.0, -6.0), lookat=Vec3(0.0, 0.0, 0.0),
                 vup=Vec3(0.0, 1.0, 0.0), vfov=60.0, focus=1.0,
                 width=size, height=size)
    light = PointLight(color=Vec3(1.0, 1.0, 1.0), intensity=500.0,
                       position=Vec3(2.0, 5.0, -5.0))
    rows = []
    for n in counts:
        tris = random_triangles(n, rng)
        bundle = SceneFile(camera=cam, scene=Scene(objects=tris),
                           lights=[light])
        target = render(cam, bundle.scene, light, depth=2)
        target.pixels = target.pixels * 0.9  # nonzero residual
        evaluator = LossEvaluator(bundle, target, loss_kind="mse", depth=2)
        pv = pack_params(bundle, [f"objects[{i}]" for i in range(n)])
        case = f"{len(pv)}params"
        for trial in range(trials):
            tape = Tape()
            leaf = tape.leaf(precision.asarray(pv.values))
            t0 = time.perf_counter()
            out = evaluator(pv.with_values(leaf))
            t_fwd = time.perf_counter() - t0
            t0 = time.perf_counter()
            tape.backward(out)
            t_bwd = time.perf_counter() - t0
            t0 = time.perf_counter()
            finite_difference_gradient(evaluator, pv, GradConfig())
            t_fd = time.perf_counter() - t0
            rows.append(BenchRow("ad", case, "ad_forward", trial, t_fwd, 0, 0,
                                 extra=f"tape={len(tape)}"))
            rows.append(BenchRow("ad", case, "ad_backward", trial, t_bwd, 0, 0,
                                 extra=f"tape={len(tape)}"))
            rows.append(BenchRow("ad", case, "fd", trial, t_fd, 0, 0,
                                 extra=f"evals={2 * len(pv)}"))
    return rows


LR_SWEEP = (0.01, 0.05, 0.1, 0.5)


def run_lr_suite(rates=LR_SWEEP, iterations: int = 100,
                 size: int = 50) -> list:
    """Loss trajectories of the camera-recovery problem across optimizers
    and learning rates (one row per iteration; no pass/fail thresholds)."""
    from .inverse import OptimConfig, optimize
    from .scene import SceneFile

    height = max(2, (size * 3) // 4)
    light = PointLight(color=Vec3(1.0, 0.0, 0.0), intensity=100000.0,
                       position=Vec3(0.0, 0.0, -10.0))

    def rectangle():
        mat = Material(color_diffuse=Vec3(0.0, 1.0, 0.0))
        return Scene(objects=[
            Triangle(Vec3(20.0, 10.0, 0.0), Vec3(20.0, -10.0, 0.0),
                     Vec3(-20.0, 10.0, 0.0), material=mat),
            Triangle(Vec3(-20.0, -10.0, 0.0), Vec3(20.0, -10.0, 0.0),
                     Vec3(-20.0, 10.0, 0.0), material=mat)])

    cam_target = Camera(lookfrom=Vec3(0.0, 0.0, -30.0),
                        lookat=Vec3(0.0, 0.0, 0.0), vup=Vec3(0.0, 1.0, 0.0),
                        vfov=90.0, focus=1.0, width=size, height=height)
    target = render(cam_target, rectangle(), light, depth=2)

    rows = []
    for optimizer in ("adam", "sgd"):
        for lr in rates:
            cam_guess = Camera(lookfrom=Vec3(5.0, -4.0, -20.0),
                               lookat=Vec3(0.0, 0.0, 0.0),
                               vup=Vec3(0.0, 1.0, 0.0), vfov=90.0, focus=3.0,
                               width=size, height=height)
            bundle = SceneFile(camera=cam_guess, scene=rectangle(),
                               lights=[light])
            cfg = OptimConfig(max_iter=iterations, tolerance=0.0,
                              learning_rate=lr, optimizer=optimizer,
                              loss="mse", depth=2)
            result = optimize(bundle, ["camera.lookfrom", "camera.focus"],
                              target, cfg)
            for it, loss, ms in result.history:
                rows.append(BenchRow("lr", f"{optimizer}@{lr:g}", "loss", it,
                                     ms / 1e3, 0, 0, extra=f"{loss:.8g}"))
    return rows


def run_backend_suite(size: int = 128, trials: int = DEFAULT_TRIALS) -> list:
    """Same renders through each available hit-finding backend."""
    mesh = benchmark_mesh()
    tree = build(mesh)
    cam = bench_camera(size)
    rows = []
    for name in available_backends():
        be = get_backend(name)
        for method, scene in (("linear", mesh), ("bvh", tree)):
            for trial in range(trials):
                secs, tests, peak = _timed_render(cam, scene, BENCH_LIGHT,
                                                  backend=be)
                rows.append(BenchRow("backend", f"{size}x{size}",
                                     f"{name}_{method}", trial, secs, tests,
                                     peak))
    return rows


def summarize(rows) -> list:
    """(suite, case, method) -> mean/std seconds, mean prim_tests."""
    groups: dict = {}
    for r in rows:
        groups.setdefault((r.suite, r.case, r.method), []).append(r)
    out = []
    for (suite, case, method), rs in sorted(groups.items()):
        secs = np.array([r.seconds for r in rs])
        out.append({"suite": suite, "case": case, "method": method,
                    "mean_s": float(secs.mean()), "std_s": float(secs.std()),
                    "trials": len(rs),
                    "prim_tests": float(np.mean([r.prim_tests for r in rs]))})
    return out
