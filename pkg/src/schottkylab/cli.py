"""Command line front end.

Exit codes: 0 success, 1 validation failure, 2 runtime evaluation failure,
3 usage error. Reports are written to ``--out`` or stdout and carry the scene
hash; they contain no wall-clock data unless ``--timestamp`` is given.
"""

from __future__ import annotations

import argparse
import datetime
import json
import math
import os
import sys

import numpy as np

from . import __version__, kernels
from . import denjoy as dj
from . import extension as ext
from . import qc
from .moebius import GeometryError
from .scene import Scene, SceneError, format_float, load_scene, scene_from_dict
from .schottky import SchottkyError, UnfoldError, orbit_packing, validate

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2, 3
MAX_ORBIT_DEPTH = 24
EQUIVARIANCE_TOL = 1e-6
THREADS_ENV = "SCHOTTKYLAB_THREADS"

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


# -- output helpers -----------------------------------------------------------

def fmt(x) -> str:
    """17 significant digits; integral floats keep a trailing '.0'."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    s = format_float(x)
    if not any(c in s for c in ".en"):
        s += ".0"
    return s


def _json(obj, indent=0) -> str:
    pad, step = "  " * indent, "  " * (indent + 1)
    if isinstance(obj, (bool, np.bool_)) or obj is None:
        return "null" if obj is None else ("true" if obj else "false")
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        # JSON has no non-finite numbers
        return fmt(x) if math.isfinite(x) else f'"{fmt(x)}"'
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (list, tuple, dict, np.ndarray)) for v in obj):
            return "[" + ", ".join(_json(v) for v in obj) + "]"
        return "[\n" + ",\n".join(step + _json(v, indent + 1) for v in obj) + "\n" + pad + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = (step + _json(str(k)) + ": " + _json(obj[k], indent + 1) for k in sorted(obj))
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def json_text(obj) -> str:
    return _json(obj) + "\n"


def meta(args, scene_hash: str, command: str) -> dict:
    out = {"tool": "schottkylab", "version": __version__, "scene_hash": scene_hash, "command": command}
    if getattr(args, "timestamp", False):
        out["timestamp"] = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
    return out


def emit(args, text: str):
    out = getattr(args, "out", None)
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="\n") as fh:
            fh.write(text)


def parse_floats(text: str, what: str) -> list[float]:
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"{what}: expected comma-separated numbers, got {text!r}") from None
    if not vals:
        raise UsageError(f"{what}: empty list")
    return vals


def _load(path) -> Scene:
    try:
        return load_scene(path)
    except OSError as exc:
        raise SceneError(f"cannot read {path}: {exc.strerror}") from None


def _checked_set(scene: Scene):
    s = scene.schottky_set()
    rep = validate(s)
    if not rep.valid:
        raise SchottkyError(rep.message)
    return s


# -- validate -------------------------------------------------------------------

def cmd_validate(args) -> int:
    try:
        scene = _load(args.scene)
    except SceneError as exc:
        sys.stderr.write(f"invalid scene: {exc}\n")
        return EXIT_INVALID
    report = {"meta": meta(args, scene.hash, "validate"), "checks": {}}
    ok = True
    if scene.doc.get("balls"):
        rep = validate(scene.schottky_set())
        report["schottky"] = {
            "valid": rep.valid,
            "ball_count": rep.ball_count,
            "min_gap": rep.min_gap,
            "violations": [{"balls": [i, j], "gap": g} for i, j, g in rep.violations],
            "message": rep.message,
        }
        ok &= rep.valid
    if "correspondence" in scene.doc:
        try:
            scene.equivariant_map()
            report["checks"]["correspondence"] = "ok"
        except (SceneError, SchottkyError, GeometryError, ValueError) as exc:
            report["checks"]["correspondence"] = str(exc)
            ok = False
    if "torus" in scene.doc:
        rho = scene.doc["torus"].get("rho")
        if rho is not None:
            minimal = dj.is_minimal_surrogate(rho)
            report["checks"]["torus_minimal"] = "ok" if minimal else "translation fails the minimality surrogate"
            ok &= minimal
    report["valid"] = bool(ok)
    emit(args, json_text(report))
    if not ok:
        msg = report.get("schottky", {}).get("message", "")
        bad = [f"{k}: {v}" for k, v in report["checks"].items() if v != "ok"]
        sys.stderr.write("invalid scene: " + "; ".join([m for m in [msg] if m and m != "ok"] + bad) + "\n")
    return EXIT_OK if ok else EXIT_INVALID


# -- orbit ----------------------------------------------------------------------

DEPTH_COLORS = ("#1f3b73", "#2e6f9e", "#3f9c8f", "#7bb662", "#c8b33c", "#d9822b", "#c0392b", "#8e44ad")


def _ball_fields(ob):
    b = ob.ball
    s = b.sphere
    if b.is_round:
        return s.center, s.radius, b.side
    return s.normal, s.offset, "halfspace" if b.side == "interior" else "halfspace_exterior"


def orbit_csv(scene: Scene, packing) -> str:
    n = scene.dim
    lines = [f"# scene_hash={scene.hash}",
             ",".join(["word", "source"] + [f"center_{d}" for d in range(n)] + ["radius", "depth", "kind"])]
    for ob in packing:
        c, r, kind = _ball_fields(ob)
        word = "-".join(str(a) for a in ob.word)
        lines.append(",".join([word, str(ob.source)] + [fmt(v) for v in c] + [fmt(r), str(ob.depth), kind]))
    return "\n".join(lines) + "\n"


def orbit_points_csv(scene: Scene, packing, per_ball: int) -> str:
    """Point cloud on every orbit sphere, for viewers outside this package."""
    n = scene.dim
    dirs = qc.sphere_directions(n, per_ball)
    lines = [f"# scene_hash={scene.hash}",
             ",".join(["word", "source", "depth"] + [f"x_{d}" for d in range(n)])]
    for ob in packing:
        if not ob.ball.is_round:
            continue
        pts = ob.ball.sphere.center + ob.ball.sphere.radius * dirs
        word = "-".join(str(a) for a in ob.word)
        for p in pts:
            lines.append(",".join([word, str(ob.source), str(ob.depth)] + [fmt(v) for v in p]))
    return "\n".join(lines) + "\n"


def orbit_svg(scene: Scene, packing, size: int = 800) -> str:
    base = [ob for ob in packing if ob.depth == 0 and ob.ball.is_round]
    if not base:
        raise SceneError("SVG rendering needs at least one round ball")
    lo = np.min([ob.ball.sphere.center - ob.ball.sphere.radius for ob in base], axis=0)
    hi = np.max([ob.ball.sphere.center + ob.ball.sphere.radius for ob in base], axis=0)
    pad = 0.05 * float((hi - lo).max())
    lo, hi = lo - pad, hi + pad
    w, h = float(hi[0] - lo[0]), float(hi[1] - lo[1])
    height = max(1, int(round(size * h / w)))
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{height}" '
        f'viewBox="{fmt(lo[0])} {fmt(-hi[1])} {fmt(w)} {fmt(h)}">',
        f"<!-- scene_hash={scene.hash} -->",
        '<g fill="none" transform="scale(1,-1)">',
    ]
    skipped = 0
    for ob in packing:
        if not ob.ball.is_round:
            skipped += 1
            continue
        c, r = ob.ball.sphere.center, ob.ball.sphere.radius
        color = DEPTH_COLORS[ob.depth % len(DEPTH_COLORS)]
        width = 1.5 * 0.8 ** ob.depth
        out.append(
            f'<circle cx="{fmt(c[0])}" cy="{fmt(c[1])}" r="{fmt(r)}" stroke="{color}" '
            f'stroke-width="{fmt(width)}" vector-effect="non-scaling-stroke" '
            f'data-word="{"-".join(map(str, ob.word))}" data-source="{ob.source}" data-depth="{ob.depth}"/>'
        )
    out.append("</g>")
    if skipped:
        out.append(f"<!-- {skipped} half-space balls not drawn -->")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def cmd_orbit(args) -> int:
    scene = _load(args.scene)
    depth = args.depth if args.depth is not None else scene.experiment.get("depth", 3)
    if depth > MAX_ORBIT_DEPTH:
        raise UsageError(f"--depth {depth} exceeds the limit of {MAX_ORBIT_DEPTH}")
    if depth < 0:
        raise UsageError("--depth must be non-negative")
    fmt_ = args.format or "csv"
    if fmt_ == "svg" and scene.dim != 2:
        raise UsageError("SVG output is only available for planar scenes; use --format csv --points K")
    s = _checked_set(scene)
    packing = orbit_packing(s, depth)
    if fmt_ == "svg":
        text = orbit_svg(scene, packing)
    elif fmt_ == "json":
        balls = []
        for ob in packing:
            c, r, kind = _ball_fields(ob)
            balls.append({"word": list(ob.word), "source": ob.source, "center": c, "radius": r,
                          "depth": ob.depth, "kind": kind})
        counts = [sum(1 for ob in packing if ob.depth == d) for d in range(depth + 1)]
        text = json_text({"meta": meta(args, scene.hash, "orbit"), "depth": depth,
                          "counts_by_depth": counts, "balls": balls})
    elif args.points:
        text = orbit_points_csv(scene, packing, args.points)
    else:
        text = orbit_csv(scene, packing)
    emit(args, text)
    return EXIT_OK


# -- extend ---------------------------------------------------------------------

def _radii(args, scene: Scene, default):
    if args.radii:
        return parse_floats(args.radii, "--radii")
    return list(scene.experiment.get("radii", default))


def cmd_extend(args) -> int:
    scene = _load(args.scene)
    if "correspondence" not in scene.doc:
        raise SceneError("extend needs a scene with a correspondence")
    source = _checked_set(scene)
    exp = scene.experiment
    grid_n = args.grid if args.grid is not None else exp.get("grid", 64)
    max_depth = args.depth if args.depth is not None else exp.get("max_depth", 20)
    radii = _radii(args, scene, [1e-3, 1e-4])
    samples = exp.get("samples", 300)
    seed = exp.get("seed", 0)
    em = scene.equivariant_map(max_depth)
    target_rep = validate(em.correspondence.target)
    if not target_rep.valid:
        raise SchottkyError(f"target balls: {target_rep.message}")

    grid = ext.scene_grid(source, grid_n)
    batch = ext.evaluate_many(em, grid, on_error="nan")

    residuals = []
    for i in range(len(source)):
        pts = ext.equivariance_samples(source, i, samples, seed + i)
        res = ext.check_equivariance(em, i, pts)
        residuals.append({"generator": i, "paired": int(em.correspondence.pairing[i]), "residual": res})
    max_res = max(r["residual"] for r in residuals)

    survey = ext.dilatation_survey(em, grid, radii, exp.get("directions"))
    errors = [{"point": grid[p].tolist(), "message": batch.messages.get(int(p), "evaluation failed")}
              for p in np.nonzero(batch.error)[0][:20]]

    if args.format == "csv":
        n = scene.dim
        head = [f"x_{d}" for d in range(n)] + ["word_length", "capped", "error"] + \
               [f"f_{d}" for d in range(n)] + ["f_inf"] + [f"H_{fmt(r)}" for r in radii]
        lines = [f"# scene_hash={scene.hash}", ",".join(head)]
        for p in range(grid.shape[0]):
            row = [fmt(v) for v in grid[p]] + [str(int(batch.word_lengths[p])), str(int(batch.capped[p])),
                                               str(int(batch.error[p]))]
            row += [fmt(v) for v in batch.coords[p]] + [str(int(batch.inf[p]))]
            row += [fmt(v) for v in survey.H[p]]
            lines.append(",".join(row))
        emit(args, "\n".join(lines) + "\n")
        return EXIT_OK

    report = {
        "meta": meta(args, scene.hash, "extend"),
        "parameters": {"grid": grid_n, "max_depth": max_depth, "radii": radii, "samples": samples,
                       "seed": seed, "base_strategy": em.base_strategy},
        "grid_points": int(grid.shape[0]),
        "depth_capped": int(batch.capped.sum()),
        "max_word_length": int(batch.word_lengths.max()) if batch.word_lengths.size else 0,
        "evaluation_errors": int(batch.error.sum()),
        "errors": errors,
        "equivariance": residuals,
        "max_residual": max_res,
        "verdict": "EQUIVARIANT" if max_res <= EQUIVARIANCE_TOL else "NONEQUIVARIANT",
        "dilatation": survey.summary(),
    }
    emit(args, json_text(report))
    return EXIT_OK


# -- dilatation -----------------------------------------------------------------

def cmd_dilatation(args) -> int:
    scene = _load(args.scene)
    if args.point is None:
        raise UsageError("--point is required")
    p = np.array(parse_floats(args.point, "--point"))
    if p.size != scene.dim:
        raise UsageError(f"--point has {p.size} coordinates, scene dimension is {scene.dim}")
    _checked_set(scene)
    if "correspondence" not in scene.doc:
        raise SceneError("dilatation needs a scene with a correspondence")
    max_depth = args.depth if args.depth is not None else scene.experiment.get("max_depth", 20)
    em = scene.equivariant_map(max_depth)
    ext.evaluate(em, p)                  # raises EvaluationError when f(p) is undefined
    m = scene.experiment.get("directions")
    radii = _radii(args, scene, [10.0 ** -k for k in range(1, 6)])
    prof = qc.local_dilatation(em, p, radii, m)
    if args.format == "json":
        balls = [(p, 2.0 ** -k) for k in range(1, 11)]
        nested = qc.nested_ball_conformality_test(em, p, balls, m)
        report = {
            "meta": meta(args, scene.hash, "dilatation"),
            "point": p,
            "profile": [{"radius": r, "L": a, "l": b, "H": h} for r, a, b, h in prof.rows()],
            "K": prof.K, "trend": prof.trend, "extrapolated": prof.extrapolated,
            "nested_balls": nested.as_dict(),
        }
        emit(args, json_text(report))
        return EXIT_OK
    lines = [f"# scene_hash={scene.hash}", "radius,L,l,H"]
    lines += [",".join(fmt(v) for v in row) for row in prof.rows()]
    emit(args, "\n".join(lines) + "\n")
    return EXIT_OK


# -- denjoy ---------------------------------------------------------------------

def _denjoy_doc(args, key, params):
    if args.scene:
        scene = _load(args.scene)
        if key not in scene.doc:
            raise SceneError(f"scene has no '{key}' descriptor")
        merged = dict(scene.doc[key])
        merged.update({k: v for k, v in params.items() if v is not None})
        doc = dict(scene.doc)
        doc[key] = merged
    else:
        dim = len(params["rho"]) if key == "torus" and params.get("rho") else 1
        doc = {"version": 1, "dimension": dim, key: {k: v for k, v in params.items() if v is not None}}
    return scene_from_dict(doc)


def cmd_denjoy_circle(args) -> int:
    scene = _denjoy_doc(args, "denjoy", {"alpha": args.alpha, "weights": args.weights, "N": args.N,
                                         "total": args.total})
    d = scene.doc["denjoy"]
    alpha, weights, N = d.get("alpha", GOLDEN), d.get("weights", "geometric"), d.get("N", 20)
    try:
        dc = dj.build_denjoy_circle(alpha, weights, N, d.get("total"))
    except dj.ConstructionError as exc:
        raise dj.ConstructionError(f"{exc} (alpha={alpha!r}, weights={weights!r}, N={N})") from None
    grid = args.grid if args.grid is not None else 10 ** 4
    defect = dj.semiconjugacy_defect(dc, grid)
    defect_all = dj.semiconjugacy_defect(dc, grid, exclude_artifacts=False)
    wand = dj.wandering_check(dc)
    ok = defect <= 1e-9 and wand.wandering
    report = {
        "meta": meta(args, scene.hash, "denjoy circle"),
        "parameters": {"alpha": alpha, "weights": weights, "N": N, "grid": grid},
        "inserted_length": dc.inserted,
        "degenerate": dc.degenerate,
        "semiconjugacy_defect": defect,
        "defect_including_artifacts": defect_all,
        "wandering": {"horizon": wand.horizon, "returns": wand.returns, "verdict": "PASS" if wand.wandering else "FAIL"},
        "verdict": "PASS" if ok else "FAIL",
    }
    emit(args, json_text(report))
    return EXIT_OK


def _rule(text):
    if text is None or text == "decreasing":
        return text
    try:
        return float(text)
    except ValueError:
        raise UsageError(f"--radius-rule must be 'decreasing' or a number, got {text!r}") from None


def cmd_denjoy_torus(args) -> int:
    rho = parse_floats(args.rho, "--rho") if args.rho else None
    p0 = parse_floats(args.p0, "--p0") if args.p0 else None
    scene = _denjoy_doc(args, "torus", {"rho": rho, "p0": p0, "N": args.N, "radius_rule": _rule(args.radius_rule)})
    t = scene.doc["torus"]
    rho = np.asarray(t.get("rho", [GOLDEN, math.sqrt(2.0) - 1.0]), dtype=np.float64)
    p0 = np.asarray(t.get("p0", np.zeros(rho.size)), dtype=np.float64)
    N, rule = t.get("N", 50), t.get("radius_rule", "decreasing")
    report = {
        "meta": meta(args, scene.hash, "denjoy torus"),
        "parameters": {"rho": rho, "p0": p0, "N": N, "radius_rule": rule},
    }
    if not isinstance(rule, str):
        vol = dj.volume_obstruction(rho.size, float(rule), 1.0, N + 1)
        report["volume"] = vol.as_dict()
        if vol.verdict == "CONTRADICTION":
            report["verdict"] = "CONTRADICTION"
            emit(args, json_text(report))
            return EXIT_OK
    try:
        rs = dj.build_round_scene(rho, p0, N, rule)
    except dj.ConstructionError as exc:
        raise dj.ConstructionError(f"{exc} (rho={rho.tolist()}, p0={p0.tolist()}, N={N}, rule={rule!r})") from None
    iso = dj.isometry_forcing_check(rs)
    report["scene"] = {"disks": int(N + 1), "shrink_count": rs.shrink_count, "min_gap": rs.min_gap(),
                       "total_volume": rs.total_volume(), "radii_min": float(rs.radii.min()),
                       "radii_max": float(rs.radii.max())}
    report["isometry"] = iso.as_dict()
    report["verdict"] = iso.verdict
    emit(args, json_text(report))
    return EXIT_OK


# -- entry point ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="schottkylab", description="Schottky sets, equivariant extensions and Denjoy scenes.")
    p.add_argument("--version", action="version", version=f"schottkylab {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, scene=True):
        if scene:
            sp.add_argument("scene", help="scene file (JSON)")
        sp.add_argument("--out", help="output file (default stdout)")
        sp.add_argument("--timestamp", action="store_true", help="add a wall-clock timestamp to report metadata")

    sp = sub.add_parser("validate", help="check a scene file")
    common(sp)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("orbit", help="orbit packing of the removed balls")
    common(sp)
    sp.add_argument("--depth", type=int)
    sp.add_argument("--format", choices=("csv", "json", "svg"))
    sp.add_argument("--points", type=int, metavar="K", help="CSV point cloud with K points per sphere")
    sp.set_defaults(func=cmd_orbit)

    sp = sub.add_parser("extend", help="evaluate the equivariant extension on a grid")
    common(sp)
    sp.add_argument("--grid", type=int)
    sp.add_argument("--depth", type=int, help="unfolding depth cap")
    sp.add_argument("--radii", help="comma-separated sampling radii")
    sp.add_argument("--format", choices=("json", "csv"), default="json")
    sp.set_defaults(func=cmd_extend)

    sp = sub.add_parser("dilatation", help="local dilatation profile of the extension at a point")
    common(sp)
    sp.add_argument("--point", help="comma-separated coordinates")
    sp.add_argument("--radii", help="comma-separated sampling radii")
    sp.add_argument("--depth", type=int, help="unfolding depth cap")
    sp.add_argument("--format", choices=("csv", "json"), default="csv")
    sp.set_defaults(func=cmd_dilatation)

    dp = sub.add_parser("denjoy", help="Denjoy circle and torus experiments")
    dsub = dp.add_subparsers(dest="which", required=True, parser_class=_Parser)
    sp = dsub.add_parser("circle")
    common(sp, scene=False)
    sp.add_argument("--scene", help="scene file with a 'denjoy' descriptor")
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--weights", choices=tuple(dj.WEIGHT_RULES))
    sp.add_argument("-N", type=int)
    sp.add_argument("--total", type=float)
    sp.add_argument("--grid", type=int)
    sp.set_defaults(func=cmd_denjoy_circle)
    sp = dsub.add_parser("torus")
    common(sp, scene=False)
    sp.add_argument("--scene", help="scene file with a 'torus' descriptor")
    sp.add_argument("--rho", help="comma-separated translation vector")
    sp.add_argument("--p0", help="comma-separated base point")
    sp.add_argument("-N", type=int)
    sp.add_argument("--radius-rule", help="'decreasing' or a constant radius")
    sp.set_defaults(func=cmd_denjoy_torus)
    return p


def _threads():
    val = os.environ.get(THREADS_ENV)
    if not val:
        return
    try:
        kernels.set_threads(int(val))
    except ValueError:
        raise UsageError(f"{THREADS_ENV} must be an integer, got {val!r}") from None


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _threads()
        return args.func(args)
    except UsageError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        return EXIT_USAGE
    except (ext.EvaluationError, UnfoldError) as exc:
        sys.stderr.write(f"evaluation failed: {exc}\n")
        return EXIT_RUNTIME
    except (SceneError, SchottkyError, GeometryError, dj.ConstructionError) as exc:
        sys.stderr.write(f"invalid input: {exc}\n")
        return EXIT_INVALID
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        sys.stderr.write(f"runtime failure: {exc}\n")
        return EXIT_RUNTIME
    except ValueError as exc:
        # remaining ValueErrors come from data checks (pairings, boundary maps, ball containment)
        sys.stderr.write(f"invalid input: {exc}\n")
        return EXIT_INVALID


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
