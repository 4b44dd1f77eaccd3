"""Command-line entry point.

Every subcommand reads ``SAL1`` rasters and ``user,idx,u,v,t`` CSV files and
writes rasters or ``image_id,metric,value`` CSV reports.  Exit status is 0 on
success, 1 on usage errors and 2 on data errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from pathlib import Path

import numpy as np

from . import config as config_mod
from .data import (Scene, load_image, load_raster, make_split, read_scanpaths, save_image,
                   save_raster, synthesize_scene, write_scanpaths)
from .errors import DomainError, FormatError, OmnisalError
from .fusion import FusionConfig, joint_merge, unbias
from .heatmap import (EquatorBiasConfig, KernelConfig, aggregate_scanpaths, equator_bias,
                      fixation_map)
from .metrics import hybrid_nss, jarodzka, one_way_anova, saliency_report

log = logging.getLogger("omnisal")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _settings(args):
    file_values = {}
    try:
        if getattr(args, "config", None):
            file_values = config_mod.parse_config(Path(args.config).read_text(encoding="utf-8"))
        flags = {k: getattr(args, k, None) for k in config_mod.DEFAULTS}
        return config_mod.resolve(flags, file_values)
    except (DomainError, FormatError) as exc:
        raise UsageError(f"{args.command}: invalid setting: {exc}") from None


def _check_dims(args, shape):
    """Input rasters fix the output size; an explicit --width/--height must agree."""
    height, width = shape
    if (args.width is not None and args.width != width) or (args.height is not None and args.height != height):
        raise UsageError(f"{args.command}: --width/--height conflict with the {width}x{height} input raster")


def _fusion(s):
    return FusionConfig(alpha=s["alpha"], k=s["k"])


def _kernel(s):
    return KernelConfig(sigma_deg=s["sigma_deg"])


def _bias(s):
    return EquatorBiasConfig(sigma_lat_deg=s["sigma_lat_deg"])


def _require_out(args):
    if not args.out:
        raise UsageError(f"{args.command}: --out is required")
    return Path(args.out)


def _select(scanpaths, user):
    if user is None:
        return scanpaths
    chosen = [sp for sp in scanpaths if sp.user_id == user]
    if not chosen:
        raise OmnisalError(f"no scanpath for user {user!r}")
    return chosen


def _write_report(rows, out):
    """Write ``(image_id, metric, value)`` rows sorted by image id, metric order kept."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("image_id", "metric", "value"))
    for image_id, metric, value in sorted(rows, key=lambda r: str(r[0])):
        writer.writerow((image_id, metric, repr(float(value))))
    text = buf.getvalue()
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _pairs(pred, gt, pred_ext=".sal", gt_ext=".sal"):
    """Yield ``(image_id, pred_path, gt_path)`` for file or directory arguments."""
    pred, gt = Path(pred), Path(gt)
    if pred.is_dir() != gt.is_dir():
        raise UsageError("prediction and ground truth must both be files or both be directories")
    if not pred.is_dir():
        yield pred.name.split(".")[0], pred, gt
        return
    for p in sorted(pred.glob(f"*{pred_ext}")):
        image_id = p.name[: -len(pred_ext)]
        g = gt / f"{image_id}{gt_ext}"
        if not g.exists():
            raise OmnisalError(f"missing ground truth {g}")
        yield image_id, p, g


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_scanpath2map(args, s):
    sps = _select(read_scanpaths(args.scanpaths), args.user)
    save_raster(_require_out(args), aggregate_scanpaths(sps, s["width"], s["height"], _kernel(s)))


def cmd_equator_bias(args, s):
    save_raster(_require_out(args), equator_bias(s["width"], s["height"], _bias(s)))


def cmd_merge(args, s):
    t = load_raster(args.primary)
    sm = load_raster(args.scanpath_map)
    _check_dims(args, t.shape)
    save_raster(_require_out(args), joint_merge(t, sm, _fusion(s)))


def cmd_pipeline(args, s):
    t = load_raster(args.primary)
    _check_dims(args, t.shape)
    height, width = t.shape
    sps = _select(read_scanpaths(args.scanpaths), args.user)
    sm = aggregate_scanpaths(sps, width, height, _kernel(s))
    j = joint_merge(t, sm, _fusion(s))
    save_raster(_require_out(args), unbias(j, equator_bias(width, height, _bias(s))))


def cmd_eval_sal(args, s):
    rows = []
    for image_id, pred_path, gt_path in _pairs(args.pred, args.gt):
        pred, gt = load_raster(pred_path), load_raster(gt_path)
        fix = None
        if args.fixations:
            fp = Path(args.fixations)
            if fp.is_dir():
                fp = fp / f"{image_id}.csv"
            h, w = gt.shape
            fix = fixation_map(read_scanpaths(fp), w, h)
        for metric, value in saliency_report(pred, gt, fix, seed=s["seed"]).items():
            rows.append((image_id, metric, value))
    _write_report(rows, args.out)


def cmd_eval_scan(args, s):
    rows = []
    for image_id, pred_path, gt_path in _pairs(args.pred, args.gt, ".csv", ".csv"):
        preds, gts = read_scanpaths(pred_path), read_scanpaths(gt_path)
        scores = [jarodzka(p, g) for p in preds for g in gts]
        rows.append((image_id, "jarodzka", float(np.mean(scores))))
        if args.gt_map:
            mp = Path(args.gt_map)
            if mp.is_dir():
                mp = mp / f"{image_id}.sal"
            gt_map = load_raster(mp)
            rows.append((image_id, "hybrid_nss", float(np.mean([hybrid_nss(p, gt_map) for p in preds]))))
    _write_report(rows, args.out)


def cmd_anova(args, s):
    groups = {}
    with open(args.values, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"group", "value"} <= set(reader.fieldnames):
            raise OmnisalError("anova input needs 'group' and 'value' columns")
        for row in reader:
            try:
                groups.setdefault(row["group"], []).append(float(row["value"]))
            except ValueError:
                raise OmnisalError(f"bad value {row['value']!r} at line {reader.line_num}") from None
    res = one_way_anova(list(groups.values()))
    _write_report([("anova", "f_stat", res.f_stat), ("anova", "p_value", res.p_value),
                   ("anova", "df_between", res.df_between), ("anova", "df_within", res.df_within)],
                  args.out)


def cmd_synth(args, s):
    out = _require_out(args)
    out.mkdir(parents=True, exist_ok=True)
    ids = []
    for k in range(s["n_scenes"]):
        image_id = f"scene{k:03d}"
        scene = synthesize_scene(s["seed"] * 1_000_003 + k, s["width"], s["height"],
                                 n_blobs=s["n_blobs"], n_scanpaths=s["n_scanpaths"])
        save_image(out / f"{image_id}.img.sal", scene.image)
        save_raster(out / f"{image_id}.sal", scene.gt_map)
        write_scanpaths(out / f"{image_id}.csv", scene.scanpaths)
        ids.append(image_id)
    split = make_split(ids, seed=s["seed"])
    with open(out / "split.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write("image_id,set\n")
        for i in split.train:
            fh.write(f"{i},train\n")
        for i in split.test:
            fh.write(f"{i},test\n")


def _load_scenes(directory):
    directory = Path(directory)
    scenes = []
    for img in sorted(directory.glob("*.img.sal")):
        image_id = img.name[: -len(".img.sal")]
        scenes.append(Scene(image=load_image(img), gt_map=load_raster(directory / f"{image_id}.sal"),
                            scanpaths=read_scanpaths(directory / f"{image_id}.csv"),
                            blob_centers=np.empty((0, 2))))
    if not scenes:
        raise OmnisalError(f"no *.img.sal scenes in {directory}")
    return scenes


def cmd_train(args, s):
    from .nn import ModelConfig, OptimizerConfig, TrainingBatch, init_params, train_stage1, train_stage2
    from .nn import checkpoint

    out = _require_out(args)
    scenes = _load_scenes(args.data)
    height, width = scenes[0].gt_map.shape
    cfg = ModelConfig(width=width, height=height, beta=s["beta"],
                      n_fixations=len(scenes[0].scanpaths[0]))
    batch = TrainingBatch.from_scenes(scenes, cfg.n_fixations)
    params = init_params(cfg, seed=s["seed"])
    opt = OptimizerConfig(lr=s["lr"], steps=s["steps"])
    h1, h2 = [], []
    train_stage1(params, batch, cfg, opt, history=h1)
    train_stage2(params, batch, cfg, opt, history=h2)
    checkpoint.save(out, params, cfg)
    rows = [("stage1", i, v) for i, v in enumerate(h1)] + [("stage2", i, v) for i, v in enumerate(h2)]
    with open(out.with_suffix(".loss.csv"), "w", encoding="utf-8", newline="") as fh:
        fh.write("stage,step,loss\n")
        for stage, i, v in rows:
            fh.write(f"{stage},{i},{v!r}\n")


def cmd_predict(args, s):
    from .nn import checkpoint, predict

    out = _require_out(args)
    params, cfg = checkpoint.load(args.checkpoint)
    image = load_image(args.image)
    sal, sp = predict(params, image, cfg)
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(args.image).name.split(".")[0]
    save_raster(out / f"{stem}.primary.sal", sal)
    write_scanpaths(out / f"{stem}.pred.csv", [sp])
    height, width = sal.shape
    sm = aggregate_scanpaths([sp], width, height, _kernel(s))
    fused = unbias(joint_merge(sal, sm, _fusion(s)), equator_bias(width, height, _bias(s)))
    save_raster(out / f"{stem}.final.sal", fused)


def cmd_gradcheck(args, s):
    from .nn.checks import run_all

    rows = [("gradcheck", name, err) for name, err in run_all(seed=s["seed"])]
    _write_report(rows, args.out)
    worst = max(err for _, _, err in rows)
    log.info("worst relative error %.3g", worst)
    if worst >= 1e-4:
        raise OmnisalError(f"gradient check failed: max relative error {worst:.3g} >= 1e-4")


COMMANDS = {
    "scanpath2map": cmd_scanpath2map,
    "equator-bias": cmd_equator_bias,
    "merge": cmd_merge,
    "pipeline": cmd_pipeline,
    "eval-sal": cmd_eval_sal,
    "eval-scan": cmd_eval_scan,
    "anova": cmd_anova,
    "synth": cmd_synth,
    "train": cmd_train,
    "predict": cmd_predict,
    "gradcheck": cmd_gradcheck,
}


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--alpha", type=float, help="weight of the primary map (default 0.7)")
    common.add_argument("--k", type=float, help="power of the weighted mean (default 1)")
    common.add_argument("--sigma-deg", dest="sigma_deg", type=float,
                        help="fixation kernel width in degrees (default 11.75)")
    common.add_argument("--sigma-lat-deg", dest="sigma_lat_deg", type=float,
                        help="equator-bias width in degrees (default 25)")
    common.add_argument("--beta", type=float, help="soft-argmax temperature (default 25)")
    common.add_argument("--seed", type=int, help="seed for every random choice (default 0)")
    common.add_argument("--width", type=int, help="raster width in pixels (default 256)")
    common.add_argument("--height", type=int, help="raster height in pixels (default 128)")
    common.add_argument("--config", help="key = value settings file; flags override it")
    common.add_argument("--out", help="output file or directory")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="omnisal", description="Omnidirectional saliency and scanpath toolkit")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("scanpath2map", parents=[common], help="scanpath CSV -> heatmap raster")
    p.add_argument("scanpaths")
    p.add_argument("--user", help="only use this user's scanpath")

    sub.add_parser("equator-bias", parents=[common], help="write the equator-bias raster")

    p = sub.add_parser("merge", parents=[common], help="joint merge of a primary and a scanpath map")
    p.add_argument("primary")
    p.add_argument("scanpath_map")

    p = sub.add_parser("pipeline", parents=[common], help="primary map + scanpath -> unbiased fused map")
    p.add_argument("primary")
    p.add_argument("scanpaths")
    p.add_argument("--user", help="only use this user's scanpath")

    p = sub.add_parser("eval-sal", parents=[common], help="saliency metrics report")
    p.add_argument("pred", help="predicted raster or directory of <id>.sal")
    p.add_argument("gt", help="ground-truth raster or directory of <id>.sal")
    p.add_argument("--fixations", help="scanpath CSV (or directory of <id>.csv) for location metrics")

    p = sub.add_parser("eval-scan", parents=[common], help="scanpath metrics report")
    p.add_argument("pred", help="predicted scanpath CSV or directory of <id>.csv")
    p.add_argument("gt", help="ground-truth scanpath CSV or directory of <id>.csv")
    p.add_argument("--gt-map", dest="gt_map", help="ground-truth raster (or directory) for hybrid NSS")

    p = sub.add_parser("anova", parents=[common], help="one-way ANOVA over a group,value CSV")
    p.add_argument("values")

    p = sub.add_parser("synth", parents=[common], help="write synthetic scenes")
    p.add_argument("--n-scenes", dest="n_scenes", type=int)
    p.add_argument("--n-blobs", dest="n_blobs", type=int)
    p.add_argument("--n-scanpaths", dest="n_scanpaths", type=int)

    p = sub.add_parser("train", parents=[common], help="two-stage training on a synth directory")
    p.add_argument("data")
    p.add_argument("--lr", type=float)
    p.add_argument("--steps", type=int, help="steps per stage (default 200)")

    p = sub.add_parser("predict", parents=[common], help="run a checkpoint on an image raster")
    p.add_argument("checkpoint")
    p.add_argument("image")

    sub.add_parser("gradcheck", parents=[common], help="finite-difference check of every backward pass")
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_help())
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        settings = _settings(args)
        COMMANDS[args.command](args, settings)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (OmnisalError, OSError) as exc:
        print(f"omnisal: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
