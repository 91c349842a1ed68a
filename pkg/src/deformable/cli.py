"""Command-line front end: ``synth``, ``field``, ``segment`` and ``bench``.

Exit codes: 0 success (or converged), 1 not converged, 2 configuration
error, 3 input/output error.  Configuration is validated and inputs are
read before any output file is written.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import bench
from .config import ConfigError, edge_params, force_params, load_config, solver_params
from .forces import build_force_source
from .geometry import circle_polygon
from .grid import (GrayImage, PGMError, ShapeError, edge_map, field_to_csv, load_pgm, save_pgm,
                   synth_circle, synth_t_shape)
from .levelset import (EvolutionTerminated, OpenContourError, evolve_gac, extract_zero_contour,
                       init_from_contour)
from .snakes import Contour, ContourCollapsed, evolve_snake

EXIT_OK, EXIT_NOT_CONVERGED, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3


class InputError(OSError):
    """Unreadable or malformed input file."""


def _floats(text: str, n: int, what: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise ConfigError(f"{what} must be {n} comma-separated numbers, got {text!r}") from None
    if len(vals) != n:
        raise ConfigError(f"{what} must be {n} comma-separated numbers, got {text!r}")
    return vals


def _write_files(out: str, files: dict[str, str | bytes]) -> None:
    os.makedirs(out, exist_ok=True)
    for name, data in files.items():
        path = os.path.join(out, name)
        os.makedirs(os.path.dirname(path), exist_ok=True)
        with open(path, "wb" if isinstance(data, bytes) else "w") as fh:
            fh.write(data)


def _read_image(path: str) -> GrayImage:
    try:
        with open(path, "rb") as fh:
            return load_pgm(fh.read())
    except PGMError as exc:
        raise InputError(f"{path}: {exc}") from None


def _read_contour(path: str) -> Contour:
    try:
        with open(path) as fh:
            return Contour.from_json(fh.read())
    except (ValueError, KeyError) as exc:
        raise InputError(f"{path}: not a contour file ({exc})") from None


def _input_image(cfg: dict) -> tuple[GrayImage, Contour | None]:
    """Image named by the ``input`` block plus its truth contour when known."""
    desc = cfg.get("input")
    if not isinstance(desc, dict):
        raise ConfigError("input must be an object")
    truth = None
    if "path" in desc:
        img = _read_image(desc["path"])
        if desc.get("truth"):
            truth = _read_contour(desc["truth"])
        return img, truth
    shape = desc.get("shape")
    try:
        if shape == "circle":
            size = int(desc.get("size", 64))
            center = tuple(desc.get("center", (size / 2, size / 2)))
            radius = float(desc.get("radius", 15))
            img = synth_circle(size, size, center, radius)
            truth = Contour(circle_polygon(center, radius, 720))
        elif shape == "tshape":
            size = int(desc.get("size", 128))
            kw = {k: tuple(desc[k]) for k in ("stem", "bar") if k in desc}
            img, poly = synth_t_shape(size, size, **kw)
            truth = Contour(poly)
        else:
            raise ConfigError(f"input.shape must be 'circle' or 'tshape', got {shape!r}")
    except (ShapeError, TypeError) as exc:
        raise ConfigError(f"input: {exc}") from None
    return img, truth


def _seed(cfg: dict) -> Contour:
    desc = cfg.get("seed_contour")
    if not isinstance(desc, dict):
        raise ConfigError("seed_contour must be an object")
    if "path" in desc:
        return _read_contour(desc["path"])
    if "circle" in desc:
        try:
            cx, cy, r = (float(v) for v in desc["circle"])
        except (TypeError, ValueError):
            raise ConfigError("seed_contour.circle must be [cx, cy, r]") from None
        if r <= 0:
            raise ConfigError("seed circle radius must be positive")
        return bench.seed_circle(cx, cy, r)
    raise ConfigError("seed_contour needs 'circle' or 'path'")


# ---------------------------------------------------------------------------
# commands


def cmd_synth(args) -> int:
    if args.shape == "circle":
        size = args.size or 64
        center = _floats(args.center, 2, "--center") if args.center else (size / 2, size / 2)
        try:
            img = synth_circle(size, size, tuple(center), args.radius)
        except ShapeError as exc:
            raise ConfigError(str(exc)) from None
        truth = Contour(circle_polygon(center, args.radius, args.truth_vertices))
    else:
        size = args.size or 128
        try:
            img, poly = synth_t_shape(size, size)
        except ShapeError as exc:
            raise ConfigError(str(exc)) from None
        truth = Contour(poly)
    _write_files(args.out, {"image.pgm": save_pgm(img, args.format),
                            "truth.json": truth.to_json()})
    return EXIT_OK


def cmd_field(args) -> int:
    cfg = load_config(args.config, args.set)
    if args.force:
        cfg["force"]["kind"] = args.force
    kind, fp = force_params(cfg["force"])
    ep = edge_params(cfg["edge"])
    if args.iteration < 1:
        raise ConfigError("--iteration must be >= 1")
    img = _read_image(args.image)
    edge = edge_map(img, **ep)
    source, pots = build_force_source(edge, kind, **fp)
    f = source(args.iteration)
    files = {"edge.csv": field_to_csv(edge)}
    for name, pot in pots.items():
        files[f"potential_{name}.csv"] = field_to_csv(pot)
    files["fx.csv"] = field_to_csv(f.fx)
    files["fy.csv"] = field_to_csv(f.fy)
    _write_files(args.out, files)
    return EXIT_OK


def cmd_segment(args) -> int:
    cfg = load_config(args.config, args.set)
    if args.seed_circle:
        cfg["seed_contour"] = {"circle": _floats(args.seed_circle, 3, "--seed-circle")}
    kind, fp = force_params(cfg["force"])
    solver, sp = solver_params(cfg["solver"])
    ep = edge_params(cfg["edge"])
    if args.snapshot_every is not None and args.snapshot_every < 1:
        raise ConfigError("--snapshot-every must be >= 1")
    img, truth = _input_image(cfg)
    seed = _seed(cfg)
    edge = edge_map(img, **ep)
    source, _ = build_force_source(edge, kind, **fp)

    snaps: dict[str, str] = {}
    every = args.snapshot_every

    def keep(it, contour):
        if every and it % every == 0:
            snaps[f"snapshots/contour_{it:05d}.json"] = contour.to_json()

    if solver == "snakes":
        callback = keep if every else None
        contour, report = evolve_snake(seed, source, sp, callback=callback)
    else:
        ls0 = init_from_contour(seed, img.pixels.shape, sp.band_width)

        def keep_ls(it, ls):
            if it % every == 0:
                keep(it, extract_zero_contour(ls))

        contour, report = evolve_gac(ls0, source, sp, callback=keep_ls if every else None)

    doc = {"solver": solver, "force": kind, **report.to_dict()}
    if truth is not None:
        mean, mx, bias = bench.boundary_error(contour, truth)
        doc.update(mean_error=mean, max_error=mx, signed_bias=bias)
    files = {"contour.json": contour.to_json(), "report.json": json.dumps(doc, indent=2)}
    files.update(snaps)
    _write_files(args.out, files)
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


def cmd_bench(args) -> int:
    cfg = load_config(args.config, args.set)
    # touch every parameter block up front so bad values fail before any run
    bench._force_blocks(cfg)
    cfg["edge"] = edge_params(cfg["edge"])
    files: dict[str, str] = {}
    if args.which == "circle":
        results = bench.run_circle_experiment(cfg)
        profiles = bench.circle_profiles(cfg)
        peaks = {name: bench.profile_peak(p) for name, p in profiles.items()}
        files["circle.json"] = bench.results_to_json(results, {"profile_peaks": peaks,
                                                               "truth_radius": cfg["circle"]["radius"]})
        files["circle.csv"] = bench.results_to_csv(results)
        for name, prof in profiles.items():
            files[f"profile_{name}.csv"] = bench.profile_to_csv(prof)
    elif args.which == "tshape":
        results = bench.run_tshape_experiment(cfg)
        files["tshape.json"] = bench.results_to_json(results)
        files["tshape.csv"] = bench.results_to_csv(results)
    else:
        rep = bench.run_equivalence_experiment(cfg)
        files["equivalence.json"] = json.dumps(rep, indent=2)
        rows = ["step,time,snake_radius,gac_radius"]
        for i, (t, rs, rg) in enumerate(zip(rep["times"], rep["snake_radius"], rep["gac_radius"])):
            rows.append(f"{i},{t:.6f},{rs:.10g},{rg:.10g}")
        files["equivalence.csv"] = "\n".join(rows) + "\n"
    _write_files(args.out, files)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="deformable", description="Active-contour segmentation toolkit.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        p.add_argument("--out", default="out", help="output directory (default: out)")
        if config:
            p.add_argument("--config", help="JSON configuration file")
            p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                           help="override a config key by dotted path; repeatable")

    p = sub.add_parser("synth", help="write a synthetic test image and its truth contour")
    p.add_argument("shape", choices=["circle", "tshape"])
    p.add_argument("--size", type=int)
    p.add_argument("--radius", type=float, default=15.0)
    p.add_argument("--center", help="cx,cy (default: image centre)")
    p.add_argument("--truth-vertices", type=int, default=720)
    p.add_argument("--format", choices=["binary", "ascii"], default="binary")
    common(p, config=False)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("field", help="export edge map, potentials and force components as CSV")
    p.add_argument("image", help="input PGM")
    p.add_argument("--force", choices=["electrostatic", "heat", "united"])
    p.add_argument("--iteration", type=int, default=1, help="iteration for the united schedule")
    common(p)
    p.set_defaults(func=cmd_field)

    p = sub.add_parser("segment", help="evolve a contour on an image")
    p.add_argument("--snapshot-every", type=int, metavar="N")
    p.add_argument("--seed-circle", metavar="CX,CY,R")
    common(p)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("bench", help="run a benchmark experiment")
    p.add_argument("which", choices=["circle", "tshape", "equivalence"])
    common(p)
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InputError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (EvolutionTerminated, ContourCollapsed, OpenContourError) as exc:
        print(f"evolution failed: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED


if __name__ == "__main__":
    sys.exit(main())
