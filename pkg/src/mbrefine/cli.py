"""Command-line front end: ``mbrefine {detect,refine,eval,curves,synth}``.

Parameters are layered, later layers winning: profile defaults, a
``--config`` file, a ``--manifest`` from an earlier run, explicit flags.
Every run writes ``manifest.json`` into its output directory; passing that
file back with ``--manifest`` repeats the run.

Exit codes: 0 success, 2 usage error, 3 data or format error.
"""

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import PARAM_TYPES, read_config, resolve_params
from .core import ShapeMismatchError
from .detect import detect_with_params
from .evaluation import (
    DECOMPOSITION_HEADER,
    DISTANCE_HEADER,
    SIDE_PAIR_HEADER,
    PRStats,
    asymmetry_stats,
    boundary_f1,
    epe,
    epe_vs_distance,
    error_decomposition,
    replacement_report,
    side_epe_pairs,
)
from .io import (
    FormatError,
    load_flow,
    load_image,
    read_binary_map,
    read_csv,
    save_flow,
    save_image,
    write_binary_map,
    write_csv,
)
from .refine import refine_flow, replaced_mask, replacement_set
from .synth import SynthSceneSpec, synth_scene

log = logging.getLogger("mbrefine")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 2, 3

ASSIGNMENT_HEADER = ("bx", "by", "ux", "uy", "d_star", "d", "px", "py",
                     "target_x", "target_y", "qx", "qy", "flow_u", "flow_v")

INPUT_HELP = {
    "frame1": "previous frame I1 (PNG/PPM), enables the backward cost",
    "frame2": "reference frame I2 (PNG/PPM)",
    "frame3": "next frame I3 (PNG/PPM)",
    "flow_fwd": "forward flow I2->I3 (.flo or KITTI .png)",
    "flow_bwd": "backward flow I2->I1 (.flo or KITTI .png)",
    "edge_map": "external edge map (8-bit grayscale PNG, >= 128 is an edge)",
    "gt_mb": "ground-truth motion boundary map (PNG, nonzero = boundary)",
    "gt_flow": "ground-truth flow I2->I3 (.flo or KITTI .png)",
    "boundaries": "precomputed boundary map (PNG); detected when omitted",
    "pred_mb": "predicted boundary map (PNG)",
    "flow": "estimated flow to evaluate (.flo or KITTI .png)",
    "refined_flow": "refined flow to evaluate (.flo or KITTI .png)",
    "assignments": "assignment CSV written by 'refine'",
}


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


# -- argument parsing --------------------------------------------------------

def _add_inputs(parser, names):
    for name in names:
        parser.add_argument("--" + name.replace("_", "-"), dest=name, metavar="PATH", help=INPUT_HELP[name])


def _add_common(parser, with_params=True):
    parser.add_argument("--out-dir", dest="out_dir", metavar="DIR", help="output directory (default: current)")
    parser.add_argument("--manifest", metavar="FILE", help="repeat a run from its manifest.json")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    if with_params:
        parser.add_argument("--config", metavar="FILE", help="'key = value' parameter file")
        parser.add_argument("--jobs", type=int, metavar="N", help="worker threads (results do not depend on N)")
        group = parser.add_argument_group("pipeline parameters")
        group.add_argument("--profile", choices=["sintel", "kitti"], help="default parameter set")
        for name, typ in PARAM_TYPES.items():
            if name == "profile":
                continue
            group.add_argument("--" + name.replace("_", "-"), dest=name, type=typ, metavar="X")


def build_parser():
    parser = argparse.ArgumentParser(prog="mbrefine", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True
    kw = {"argument_default": argparse.SUPPRESS}

    p = sub.add_parser("detect", help="detect motion boundaries", **kw)
    _add_inputs(p, ["frame1", "frame2", "frame3", "flow_fwd", "flow_bwd", "edge_map", "gt_mb"])
    _add_common(p)
    p.set_defaults(handler=cmd_detect)

    p = sub.add_parser("refine", help="refine flow near motion boundaries", **kw)
    _add_inputs(p, ["frame1", "frame2", "frame3", "flow_fwd", "flow_bwd", "edge_map", "boundaries", "gt_flow"])
    _add_common(p)
    p.set_defaults(handler=cmd_refine)

    p = sub.add_parser("eval", help="boundary F1, EPE and analysis curves", **kw)
    p.add_argument("--which", nargs="+", choices=["mb", "flow", "curves", "scatter"],
                   help="what to evaluate (default: everything the inputs allow)")
    _add_inputs(p, ["pred_mb", "gt_mb", "flow", "refined_flow", "gt_flow", "assignments", "frame2"])
    _add_common(p)
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("curves", help="EPE-vs-distance, error decomposition and side-pair CSVs", **kw)
    _add_inputs(p, ["flow", "gt_flow", "gt_mb", "frame2"])
    _add_common(p)
    p.set_defaults(handler=cmd_curves)

    p = sub.add_parser("synth", help="write a synthetic scene bundle", **kw)
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    p.add_argument("--fg-rect", dest="fg_rect", metavar="X,Y,W,H", help="foreground rectangle in frame 2")
    p.add_argument("--displacement", metavar="DX,DY", help="foreground motion per frame")
    p.add_argument("--seed", dest="texture_seed", type=int)
    p.add_argument("--blur-sigma", dest="estimate_blur_sigma", type=float)
    p.add_argument("--corruption-band", dest="corruption_band", type=int)
    _add_common(p, with_params=False)
    p.set_defaults(handler=cmd_synth)
    return parser


# -- run context -------------------------------------------------------------

class Run:
    """Merged settings of one invocation plus manifest bookkeeping."""

    def __init__(self, args, input_names, option_names=()):
        given = vars(args)
        manifest = {}
        if "manifest" in given:
            try:
                manifest = json.loads(Path(given["manifest"]).read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise DataError(f"{given['manifest']}: cannot read manifest ({exc})") from None
            if manifest.get("command") != args.command:
                raise UsageError(f"manifest is for {manifest.get('command')!r}, not {args.command!r}")
        self.command = args.command
        self.inputs = dict(manifest.get("inputs", {}))
        self.inputs.update({k: str(Path(given[k]).resolve()) for k in input_names if k in given})
        self.options = dict(manifest.get("options", {}))
        self.options.update({k: given[k] for k in option_names if k in given})
        self.out_dir = Path(given.get("out_dir", "."))
        self.jobs = int(given.get("jobs", 1))
        if "jobs" in given and self.jobs < 1:
            raise UsageError("--jobs must be >= 1")
        layers = [manifest.get("params", {})]
        if "config" in given:
            try:
                layers.append(read_config(given["config"]))
            except OSError as exc:
                raise DataError(f"{given['config']}: {exc}") from None
        layers.append({k: given[k] for k in PARAM_TYPES if k in given})
        self.params = resolve_params(*layers) if input_names and self.command != "synth" else None
        if manifest.get("input_sha256"):
            for name, digest in manifest["input_sha256"].items():
                path = self.inputs.get(name)
                if path and Path(path).is_file() and _sha256(path) != digest:
                    log.warning("input %s (%s) differs from the manifest's digest", name, path)
        self.outputs = []

    def require(self, *names):
        for name in names:
            if name not in self.inputs:
                flag = "--" + name.replace("_", "-")
                raise UsageError(f"missing required input {flag} ({INPUT_HELP[name]})")

    def has(self, name):
        return name in self.inputs

    def path(self, name):
        return self.inputs[name]

    def output(self, name):
        self.out_dir.mkdir(parents=True, exist_ok=True)
        path = self.out_dir / name
        self.outputs.append(path)
        return path

    def write_manifest(self):
        manifest = {
            "tool": "mbrefine",
            "version": __version__,
            "command": self.command,
            "inputs": dict(sorted(self.inputs.items())),
            "input_sha256": {k: _sha256(v) for k, v in sorted(self.inputs.items())},
            "options": self.options,
            "params": self.params.as_dict() if self.params is not None else {},
            "outputs": {p.name: _sha256(p) for p in self.outputs},
        }
        self.out_dir.mkdir(parents=True, exist_ok=True)
        (self.out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# -- loading with shape checks -----------------------------------------------

def _flag(name):
    return "--" + name.replace("_", "-")


def _load_image(run, name, shape=None):
    path = run.path(name)
    try:
        img = load_image(path)
    except FileNotFoundError:
        raise DataError(f"{path}: file not found ({_flag(name)})") from None
    _check_shape(path, name, img.shape[:2], shape)
    return img


def _load_flow(run, name, shape=None):
    path = run.path(name)
    try:
        flow, valid = load_flow(path)
    except FileNotFoundError:
        raise DataError(f"{path}: file not found ({_flag(name)})") from None
    _check_shape(path, name, flow.shape[:2], shape)
    return flow, valid


def _load_map(run, name, shape=None):
    path = run.path(name)
    try:
        bmap = read_binary_map(path)
    except FileNotFoundError:
        raise DataError(f"{path}: file not found ({_flag(name)})") from None
    _check_shape(path, name, bmap.shape, shape)
    return bmap


def _check_shape(path, name, got, expected):
    if expected is not None and tuple(got) != tuple(expected[:2]):
        raise DataError(
            f"{path} ({_flag(name)}) is {got[1]}x{got[0]} pixels; expected {expected[1]}x{expected[0]} "
            f"(width x height of the reference input)"
        )


def _load_detection_inputs(run, need_frame3=True):
    frame2 = _load_image(run, "frame2")
    shape = frame2.shape
    frame3 = _load_image(run, "frame3", shape) if (need_frame3 or run.has("frame3")) else None
    flow23, _ = _load_flow(run, "flow_fwd", shape)
    frame1 = _load_image(run, "frame1", shape) if run.has("frame1") else None
    flow21 = _load_flow(run, "flow_bwd", shape)[0] if run.has("flow_bwd") else None
    if (frame1 is None) != (flow21 is None):
        log.warning("backward term dropped: both --frame1 and --flow-bwd are needed for it")
        frame1 = flow21 = None
    external = None
    if run.has("edge_map"):
        external = _load_image(run, "edge_map", shape)
    return frame1, frame2, frame3, flow21, flow23, external


# -- commands ----------------------------------------------------------------

def cmd_detect(args):
    run = Run(args, ["frame1", "frame2", "frame3", "flow_fwd", "flow_bwd", "edge_map", "gt_mb"])
    run.require("frame2", "frame3", "flow_fwd")
    frame1, frame2, frame3, flow21, flow23, external = _load_detection_inputs(run)
    det = detect_with_params(frame2, frame3, flow23, run.params, frame1=frame1, flow21=flow21,
                             external_edges=external, jobs=run.jobs)
    for name, bmap in (("boundaries.png", det.boundaries), ("m_e.png", det.m_e),
                       ("m_md.png", det.m_md), ("m_ism.png", det.m_ism)):
        write_binary_map(bmap, run.output(name))
    print(f"boundary pixels: {int(det.boundaries.sum())}")
    if run.has("gt_mb"):
        gt = _load_map(run, "gt_mb", frame2.shape)
        scores = [("full", boundary_f1(det.boundaries, gt, run.params.f1_rel_tol)),
                  ("baseline_md", boundary_f1(det.m_md, gt, run.params.f1_rel_tol))]
        write_csv(run.output("mb_scores.csv"), ("detector",) + PRStats.HEADER,
                  [(name,) + st.row() for name, st in scores])
        for name, st in scores:
            print(f"{name}: precision {st.precision:.4f} recall {st.recall:.4f} F1 {st.f1:.4f}")
    run.write_manifest()
    return EXIT_OK


def cmd_refine(args):
    names = ["frame1", "frame2", "frame3", "flow_fwd", "flow_bwd", "edge_map", "boundaries", "gt_flow"]
    run = Run(args, names)
    run.require("frame2", "flow_fwd")
    if not run.has("boundaries"):
        run.require("frame3")
    frame1, frame2, frame3, flow21, flow23, external = _load_detection_inputs(
        run, need_frame3=not run.has("boundaries"))
    if run.has("boundaries"):
        boundaries = _load_map(run, "boundaries", frame2.shape)
    else:
        boundaries = detect_with_params(frame2, frame3, flow23, run.params, frame1=frame1, flow21=flow21,
                                        external_edges=external, jobs=run.jobs).boundaries
        write_binary_map(boundaries, run.output("boundaries.png"))
    assignments = replacement_set(flow23, boundaries, frame2, run.params.refine_params(), jobs=run.jobs)
    refined = refine_flow(flow23, assignments)
    save_flow(run.output("refined.flo"), refined)
    rows = [(a.b[0], a.b[1], a.u[0], a.u[1], a.d_star, a.d, a.p[0], a.p[1],
             a.target[0], a.target[1], a.q[0], a.q[1], a.replacement_flow[0], a.replacement_flow[1])
            for a in assignments]
    write_csv(run.output("assignments.csv"), ASSIGNMENT_HEADER, rows)
    mask = replaced_mask(flow23.shape, assignments)
    print(f"assignments: {len(assignments)}, replaced pixels: {int(mask.sum())}")
    if run.has("gt_flow"):
        gt, valid = _load_flow(run, "gt_flow", frame2.shape)
        rep = replacement_report(flow23, refined, gt, mask, valid)
        write_csv(run.output("replacement_scores.csv"), tuple(rep), [tuple(rep.values())])
        print(f"replaced points: init AEPE {rep['init_aepe']:.4f}, refined AEPE {rep['refined_aepe']:.4f}, "
              f"reduction {rep['reduction_pct']:.2f}%")
    run.write_manifest()
    return EXIT_OK


def _read_assignment_targets(run, shape):
    path = run.path("assignments")
    try:
        header, rows = read_csv(path)
    except (OSError, StopIteration) as exc:
        raise DataError(f"{path}: cannot read assignment CSV ({exc})") from None
    try:
        ix, iy = header.index("target_x"), header.index("target_y")
    except ValueError:
        raise DataError(f"{path}: assignment CSV lacks target_x/target_y columns") from None
    mask = np.zeros(shape[:2], dtype=bool)
    for row in rows:
        x, y = int(row[ix]), int(row[iy])
        if not (0 <= x < shape[1] and 0 <= y < shape[0]):
            raise DataError(f"{path}: target ({x}, {y}) lies outside the {shape[1]}x{shape[0]} frame")
        mask[y, x] = True
    return mask


def _write_curves(run, est, gt, gt_mb, valid, frame2=None):
    params = run.params
    curve = epe_vs_distance(est, gt, gt_mb, params.max_dist, valid)
    write_csv(run.output("epe_vs_distance.csv"), DISTANCE_HEADER, curve)
    dec = error_decomposition(est, gt, gt_mb, params.c_max, valid=valid)
    write_csv(run.output("error_decomposition.csv"), DECOMPOSITION_HEADER, dec)
    print(f"epe_vs_distance: {len(curve)} bins; error_decomposition: {len(dec)} offsets")
    if frame2 is not None:
        pairs = side_epe_pairs(est, gt, gt_mb, frame2, params.sigma, params.grad_eps, valid)
        write_csv(run.output("side_epe_pairs.csv"), SIDE_PAIR_HEADER,
                  [(int(r[0]), int(r[1]), r[2], r[3]) for r in pairs])
        stats = asymmetry_stats(pairs)
        print(f"side pairs: {stats['n']}, sub-pixel on one side only: {100 * stats['one_sided']:.1f}%")


def cmd_eval(args):
    names = ["pred_mb", "gt_mb", "flow", "refined_flow", "gt_flow", "assignments", "frame2"]
    run = Run(args, names, option_names=["which"])
    which = run.options.get("which")
    if not which:
        which = [w for w, need in (("mb", ("pred_mb", "gt_mb")), ("flow", ("flow", "gt_flow")),
                                   ("curves", ("flow", "gt_flow", "gt_mb")),
                                   ("scatter", ("flow", "gt_flow", "gt_mb", "frame2")))
                 if all(run.has(n) for n in need)]
        if not which:
            raise UsageError("nothing to evaluate; pass --pred-mb/--gt-mb or --flow/--gt-flow")
        run.options["which"] = which
    if "mb" in which:
        run.require("pred_mb", "gt_mb")
        pred = _load_map(run, "pred_mb")
        gt_mb = _load_map(run, "gt_mb", pred.shape)
        stats = boundary_f1(pred, gt_mb, run.params.f1_rel_tol)
        write_csv(run.output("mb_scores.csv"), PRStats.HEADER, [stats.row()])
        print(f"MB: precision {stats.precision:.4f} recall {stats.recall:.4f} F1 {stats.f1:.4f}")
    if {"flow", "curves", "scatter"} & set(which):
        run.require("flow", "gt_flow")
        est, _ = _load_flow(run, "flow")
        gt, valid = _load_flow(run, "gt_flow", est.shape)
    if "flow" in which:
        header = ["frame_aepe"]
        row = [epe(est, gt, valid)[0]]
        if run.has("refined_flow"):
            refined, _ = _load_flow(run, "refined_flow", est.shape)
            header.append("frame_refined_aepe")
            row.append(epe(refined, gt, valid)[0])
            if run.has("assignments"):
                rep = replacement_report(est, refined, gt, _read_assignment_targets(run, est.shape), valid)
                header += list(rep)
                row += list(rep.values())
        write_csv(run.output("flow_scores.csv"), header, [row])
        print(", ".join(f"{h} {v:.4f}" if isinstance(v, float) else f"{h} {v}" for h, v in zip(header, row)))
    if "curves" in which or "scatter" in which:
        run.require("gt_mb")
        gt_mb = _load_map(run, "gt_mb", est.shape)
        frame2 = None
        if "scatter" in which:
            run.require("frame2")
            frame2 = _load_image(run, "frame2", est.shape)
        if "curves" in which:
            _write_curves(run, est, gt, gt_mb, valid, frame2)
        elif frame2 is not None:
            pairs = side_epe_pairs(est, gt, gt_mb, frame2, run.params.sigma, run.params.grad_eps, valid)
            write_csv(run.output("side_epe_pairs.csv"), SIDE_PAIR_HEADER,
                      [(int(r[0]), int(r[1]), r[2], r[3]) for r in pairs])
    run.write_manifest()
    return EXIT_OK


def cmd_curves(args):
    run = Run(args, ["flow", "gt_flow", "gt_mb", "frame2"])
    run.require("flow", "gt_flow", "gt_mb")
    est, _ = _load_flow(run, "flow")
    gt, valid = _load_flow(run, "gt_flow", est.shape)
    gt_mb = _load_map(run, "gt_mb", est.shape)
    frame2 = _load_image(run, "frame2", est.shape) if run.has("frame2") else None
    _write_curves(run, est, gt, gt_mb, valid, frame2)
    run.write_manifest()
    return EXIT_OK


def _pair(text, kind, n):
    try:
        values = [kind(v) for v in str(text).split(",")]
    except ValueError:
        raise UsageError(f"cannot parse {text!r} as {n} comma-separated numbers") from None
    if len(values) != n:
        raise UsageError(f"expected {n} comma-separated numbers, got {text!r}")
    return tuple(values)


def cmd_synth(args):
    run = Run(args, [], option_names=["width", "height", "fg_rect", "displacement", "texture_seed",
                                      "estimate_blur_sigma", "corruption_band"])
    opts = dict(run.options)
    if "fg_rect" in opts:
        opts["fg_rect"] = _pair(opts["fg_rect"], int, 4)
    if "displacement" in opts:
        opts["displacement"] = _pair(opts["displacement"], float, 2)
    spec = SynthSceneSpec(**opts)
    try:
        scene = synth_scene(spec)
    except ValueError as exc:
        raise UsageError(f"invalid scene: {exc}") from None
    for name, img in (("frame1.png", scene.frame1), ("frame2.png", scene.frame2), ("frame3.png", scene.frame3)):
        save_image(run.output(name), img)
    for name, flow in (("flow_gt.flo", scene.flow_gt), ("flow_est.flo", scene.flow_est),
                       ("flow_gt_bwd.flo", scene.flow_gt_bwd), ("flow_est_bwd.flo", scene.flow_est_bwd)):
        save_flow(run.output(name), flow)
    write_binary_map(scene.boundary_gt, run.output("boundary_gt.png"))
    write_binary_map(scene.fg_mask, run.output("fg_mask.png"))
    print(f"wrote synthetic scene ({spec.width}x{spec.height}, seed {spec.texture_seed}) to {run.out_dir}")
    run.write_manifest()
    return EXIT_OK


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(name)s: %(levelname)s: %(message)s")
    try:
        return args.handler(args)
    except UsageError as exc:
        print(f"mbrefine {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FormatError, ShapeMismatchError, ValueError, OSError) as exc:
        print(f"mbrefine {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
