"""Command-line interface: render, invert, gradcheck and bench.

Every run writes a JSON manifest (inputs hash, config, seed, float width,
git revision, wall times) sufficient to reproduce it single-threaded.

Exit codes: 0 ok/converged, 2 input error, 3 non-convergence,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import subprocess
import sys
import time
from dataclasses import asdict, dataclass, field

from . import __version__, bench, precision
from .autodiff import GradientNaNError, set_corrupt_partial
from .gradcheck import run_gradcheck
from .images import (Image, read_target, write_png, write_ppm, write_raw)
from .inverse import OptimConfig, optimize
from .kernels import backend_name, set_backend
from .params import pack_params
from .renderer import TraceStats, render
from .scene import SceneError, load_scene_json

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NOT_CONVERGED = 3
EXIT_NUMERICAL = 4

DEFAULT_SEED = bench.DEFAULT_SEED


@dataclass
class RunManifest:
    command: str
    scene_file: str | None
    scene_sha256: str | None
    config: dict
    seed: int
    float_width: str
    backend: str
    git_describe: str | None
    wall_times: dict = field(default_factory=dict)
    version: str = __version__

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(asdict(self), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _sha256(path) -> str | None:
    try:
        with open(path, "rb") as fh:
            return hashlib.sha256(fh.read()).hexdigest()
    except OSError:
        return None


def _git_describe() -> str | None:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"],
                             capture_output=True, text=True, timeout=10,
                             cwd=os.path.dirname(os.path.abspath(__file__)))
        return out.stdout.strip() or None
    except Exception:
        return None


def _manifest(args, command: str, scene_path, config: dict,
              wall_times: dict) -> RunManifest:
    return RunManifest(
        command=command,
        scene_file=str(scene_path) if scene_path else None,
        scene_sha256=_sha256(scene_path) if scene_path else None,
        config=config, seed=args.seed,
        float_width=precision.dtype_name(), backend=backend_name(),
        git_describe=_git_describe(), wall_times=wall_times)


def _write_image(img: Image, out: str) -> None:
    if out.endswith(".png"):
        write_png(img, out)
    elif out.endswith(".npy"):
        write_raw(img, out)
    else:
        write_ppm(img, out)


# ---------------------------------------------------------------------------
# Subcommands


def cmd_render(args) -> int:
    bundle = load_scene_json(args.scene)
    depth = args.depth if args.depth is not None else bundle.settings.depth
    stats = TraceStats()
    t0 = time.perf_counter()
    img = render(bundle.camera, bundle.scene, bundle.lights, depth=depth,
                 settings=bundle.settings, threads=args.threads, stats=stats)
    render_s = time.perf_counter() - t0
    _write_image(img, args.out)
    _manifest(args, "render", args.scene,
              {"out": args.out, "depth": depth, "threads": args.threads},
              {"render_s": render_s}).write(args.out + ".manifest.json")
    print(f"rendered {img.width}x{img.height} in {render_s:.3f}s "
          f"({stats.prim_tests} primitive tests) -> {args.out}")
    return EXIT_OK


def _parse_clamps(specs) -> list:
    out = []
    for spec in specs or []:
        try:
            prefix, lo, hi = spec.rsplit(":", 2)
            out.append((prefix, float(lo), float(hi)))
        except ValueError:
            raise SceneError(f"bad --clamp spec {spec!r}; want path:lo:hi")
    return out


def _parse_scales(specs) -> list:
    out = []
    for spec in specs or []:
        try:
            prefix, factor = spec.rsplit(":", 1)
            out.append((prefix, float(factor)))
        except ValueError:
            raise SceneError(f"bad --scale spec {spec!r}; want path:factor")
    return out


def _selection(args) -> list:
    sel = []
    for chunk in args.select or []:
        sel.extend(s.strip() for s in chunk.split(",") if s.strip())
    if not sel:
        raise SceneError("no parameters selected (use --select)")
    return sel


def cmd_invert(args) -> int:
    bundle = load_scene_json(args.scene)
    selection = _selection(args)
    if not args.unsafe_geometry:
        geometry = [s for s in selection
                    if any(tok in s for tok in (".v1", ".v2", ".v3", ".center",
                                                ".radius"))
                    or (s.startswith("objects[") and "." not in s)]
        if geometry:
            print("error: geometry parameters generally diverge under "
                  "image-loss gradients; pass --unsafe-geometry to optimize "
                  f"{geometry} anyway", file=sys.stderr)
            return EXIT_INPUT
    target = read_target(args.target)
    cfg = OptimConfig(max_iter=args.max_iter, tolerance=args.tolerance,
                      learning_rate=args.lr, optimizer=args.optimizer,
                      loss=args.loss, projection=_parse_clamps(args.clamp),
                      param_scales=_parse_scales(args.scale),
                      snapshot_every=args.snapshot_every,
                      depth=(args.depth if args.depth is not None
                             else bundle.settings.depth),
                      tiles=args.tiles)
    os.makedirs(args.out_dir, exist_ok=True)

    def snapshot(it, loss, pv):
        if cfg.snapshot_every and it % cfg.snapshot_every == 0:
            img = render(bundle.camera, bundle.scene, bundle.lights,
                         depth=cfg.depth, settings=bundle.settings)
            write_ppm(img, os.path.join(args.out_dir, f"snap_{it:06d}.ppm"))
            with open(os.path.join(args.out_dir, f"params_{it:06d}.json"),
                      "w", encoding="utf-8") as fh:
                json.dump({"iteration": it, "loss": loss,
                           "params": dict(zip(pv.paths(),
                                              map(float, pv.values)))},
                          fh, indent=2)

    t0 = time.perf_counter()
    result = optimize(bundle, selection, target, cfg,
                      settings=bundle.settings, on_iteration=snapshot)
    total_s = time.perf_counter() - t0

    with open(os.path.join(args.out_dir, "loss.csv"), "w", newline="",
              encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "loss", "wall_ms"])
        for it, loss, ms in result.history:
            w.writerow([it, f"{loss:.8g}", f"{ms:.3f}"])
    with open(os.path.join(args.out_dir, "params.json"), "w",
              encoding="utf-8") as fh:
        json.dump({"converged": result.converged,
                   "iterations": result.iterations,
                   "aborted": result.aborted,
                   "final_loss": result.history[-1][1] if result.history
                   else None,
                   "params": dict(zip(result.params.paths(),
                                      map(float, result.params.values)))},
                  fh, indent=2)
    img = render(bundle.camera, bundle.scene, bundle.lights, depth=cfg.depth,
                 settings=bundle.settings)
    write_ppm(img, os.path.join(args.out_dir, "final_render.ppm"))
    _manifest(args, "invert", args.scene,
              {"select": selection, "target": args.target,
               "optim": {k: v for k, v in vars(cfg).items()
                         if not k.startswith("_")}},
              {"total_s": total_s}).write(
        os.path.join(args.out_dir, "manifest.json"))

    if result.aborted:
        print(f"aborted: {result.aborted}", file=sys.stderr)
        return EXIT_NUMERICAL
    status = "converged" if result.converged else "max-iter"
    final = result.history[-1][1] if result.history else float("nan")
    print(f"{status} after {result.iterations} iterations, "
          f"final loss {final:.6g} ({total_s:.1f}s) -> {args.out_dir}")
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def cmd_gradcheck(args) -> int:
    bundle = load_scene_json(args.scene)
    selection = _selection(args)
    pv = pack_params(bundle, selection)
    if len(pv) > 500:
        print(f"warning: finite differencing over {len(pv)} parameters "
              "needs 2 renders per parameter; this may be slow",
              file=sys.stderr)
    if args.self_test_corrupt:
        set_corrupt_partial(args.self_test_corrupt)
    try:
        target = read_target(args.target) if args.target else None
        t0 = time.perf_counter()
        report = run_gradcheck(bundle, selection, target=target,
                               delta=args.delta, rtol=args.rtol,
                               depth=(args.depth if args.depth is not None
                                      else bundle.settings.depth))
        total_s = time.perf_counter() - t0
    finally:
        set_corrupt_partial(None)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("\n".join(report.csv_lines()) + "\n")
    _manifest(args, "gradcheck", args.scene,
              {"select": selection, "delta": report.delta,
               "rtol": report.rtol},
              {"total_s": total_s}).write(args.out + ".manifest.json")
    n_checked = len(report.rows) - report.n_boundary
    n_failed = sum(1 for r in report.rows
                   if not r.boundary and not r.passed)
    print(f"gradcheck: {n_checked} checked, {report.n_boundary} boundary-"
          f"excluded, {n_failed} failed (rtol {report.rtol:g}, "
          f"delta {report.delta:g}) -> {args.out}")
    return EXIT_OK if report.passed else 1


def cmd_bench(args) -> int:
    sizes = tuple(int(s) for s in args.sizes.split(",")) if args.sizes else None
    counts = tuple(int(s) for s in args.counts.split(",")) if args.counts \
        else None
    t0 = time.perf_counter()
    if args.suite == "bvh":
        rows = bench.run_bvh_suite(sizes=sizes or bench.BVH_SIZES,
                                   trials=args.trials)
    elif args.suite == "ad":
        rows = bench.run_ad_suite(counts=counts or bench.AD_TRIANGLE_COUNTS,
                                  trials=args.trials, seed=args.seed)
    elif args.suite == "lr":
        rows = bench.run_lr_suite(size=(sizes[0] if sizes else 50))
    else:
        rows = bench.run_backend_suite(size=(sizes[0] if sizes else 128),
                                       trials=args.trials)
    total_s = time.perf_counter() - t0
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(bench.BenchRow.HEADER + "\n")
        for r in rows:
            fh.write(r.csv() + "\n")
    for s in bench.summarize(rows):
        print(f"{s['suite']:8s} {s['case']:12s} {s['method']:16s} "
              f"mean {s['mean_s'] * 1e3:9.2f} ms  std {s['std_s'] * 1e3:7.2f}"
              f" ms  ({s['trials']} trials)")
    _manifest(args, f"bench:{args.suite}", None,
              {"suite": args.suite, "trials": args.trials,
               "sizes": args.sizes, "counts": args.counts},
              {"total_s": total_s}).write(args.out + ".manifest.json")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="difftrace",
        description="differentiable ray tracer: forward rendering and "
                    "gradient-based inverse rendering")
    p.add_argument("--float64", action="store_true",
                   help="run all arithmetic in 64-bit (default 32-bit)")
    p.add_argument("--backend", choices=("auto", "python", "compiled"),
                   default="auto", help="hit-finding backend")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED,
                   help="PRNG seed for benchmark scenes")
    sub = p.add_subparsers(dest="cmd", required=True)

    r = sub.add_parser("render", help="render a scene file to an image")
    r.add_argument("scene")
    r.add_argument("--out", default="out.ppm")
    r.add_argument("--depth", type=int, default=None)
    r.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    r.set_defaults(func=cmd_render)

    i = sub.add_parser("invert",
                       help="recover selected parameters from a target image")
    i.add_argument("scene")
    i.add_argument("--target", required=True,
                   help="target image (.ppm quantized or .npy raw floats)")
    i.add_argument("--select", action="append", required=True,
                   help="parameter paths, comma separated; repeatable")
    i.add_argument("--out-dir", default="invert_out")
    i.add_argument("--max-iter", type=int, default=200)
    i.add_argument("--lr", type=float, default=0.1)
    i.add_argument("--tolerance", type=float, default=0.0)
    i.add_argument("--optimizer", choices=("adam", "sgd"), default="adam")
    i.add_argument("--loss", choices=("mse", "ssd"), default="mse")
    i.add_argument("--clamp", action="append",
                   help="projection box path:lo:hi; repeatable")
    i.add_argument("--scale", action="append",
                   help="per-group step scale path:factor; repeatable")
    i.add_argument("--snapshot-every", type=int, default=0)
    i.add_argument("--depth", type=int, default=None)
    i.add_argument("--tiles", type=int, default=1)
    i.add_argument("--unsafe-geometry", action="store_true",
                   help="allow vertex/center/radius parameters")
    i.set_defaults(func=cmd_invert)

    g = sub.add_parser("gradcheck",
                       help="compare tape gradients vs central differences")
    g.add_argument("scene")
    g.add_argument("--select", action="append", required=True)
    g.add_argument("--delta", type=float, default=None)
    g.add_argument("--rtol", type=float, default=None)
    g.add_argument("--target", default=None)
    g.add_argument("--depth", type=int, default=None)
    g.add_argument("--out", default="gradcheck.csv")
    g.add_argument("--self-test-corrupt", default=None, metavar="OPKIND",
                   help="corrupt one recorded partial to verify the harness "
                        "fails (e.g. mul)")
    g.set_defaults(func=cmd_gradcheck)

    b = sub.add_parser("bench", help="timing suites (CSV output)")
    b.add_argument("--suite", choices=("bvh", "ad", "backend", "lr"),
                   required=True)
    b.add_argument("--sizes", default=None,
                   help="comma-separated image sizes (bvh/backend suites)")
    b.add_argument("--counts", default=None,
                   help="comma-separated triangle counts (ad suite)")
    b.add_argument("--trials", type=int, default=bench.DEFAULT_TRIALS)
    b.add_argument("--out", default="bench.csv")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.float64:
        precision.set_dtype("float64")
    else:
        precision.set_dtype("float32")
    if args.backend != "auto":
        try:
            set_backend(args.backend)
        except RuntimeError as e:
            print(f"error: {e}", file=sys.stderr)
            return EXIT_INPUT
    try:
        return args.func(args)
    except GradientNaNError as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (SceneError, ValueError, OSError, RuntimeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
