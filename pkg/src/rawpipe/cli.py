"""``rawpipe`` command-line front end.

Exit status: 0 on success, 1 on expected failures (bad data, missing or
untrained checkpoints, excluded images), 2 on usage errors.  Every command
that writes into ``--out`` also writes ``manifest.json`` there.
"""

from __future__ import annotations

import argparse
import datetime as dt
import hashlib
import json
import logging
import sys
from pathlib import Path


from . import __version__, classical
from .cfa import BayerPattern, NoiseSpec, add_noise, mosaic
from .data import (DatasetError, even_crop, ingest_dataset_report, read_cfa_png, read_image,
                   write_cfa_png, write_rgb_png)
from .evaluate import EvalMethod, default_jobs, evaluate_dataset, noise_seed
from .metrics import EvalProtocol
from .nn.checkpoint import CheckpointError
from .nn.specs import BlockSpec, NetworkSpec, param_count
from .pipeline import (DemosaicStage, DenoiseStage, JointStage, UntrainedStageError,
                       demosaic_cnn, denoise_cnn, full_pipeline)
from .training import (TrainConfig, TrainingDiverged, load_stage, save_stage, train_demosaic,
                       train_denoise, train_joint_ablation, write_trace)

log = logging.getLogger("rawpipe")

EXPECTED_ERRORS = (DatasetError, CheckpointError, UntrainedStageError, TrainingDiverged,
                   FileNotFoundError, ValueError)


class Failure(Exception):
    """Expected failure: message on stderr, exit status 1."""


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class Manifest:
    def __init__(self, argv, args):
        self.started = dt.datetime.now(dt.timezone.utc)
        self.argv = list(argv)
        cfg = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
        self.config = json.loads(json.dumps(cfg, default=lambda o: getattr(o, "value", str(o))))
        self.checkpoints = {}
        self.outputs = []
        self.extra = {}

    def add_checkpoint(self, role, path):
        self.checkpoints[role] = {"path": str(path), "sha256": sha256_file(path)}

    def to_dict(self):
        blob = json.dumps(self.config, sort_keys=True).encode()
        return {
            "command_line": self.argv,
            "config": self.config,
            "config_hash": hashlib.sha256(blob).hexdigest(),
            "seed": self.config.get("seed"),
            "version": __version__,
            "checkpoints": self.checkpoints,
            "outputs": self.outputs,
            "started": self.started.isoformat(),
            "finished": dt.datetime.now(dt.timezone.utc).isoformat(),
            **self.extra,
        }

    def write(self, out_dir) -> Path:
        path = Path(out_dir) / "manifest.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2) + "\n")
        return path


# ---------------------------------------------------------------- inputs

def _is_cfa(path: Path) -> bool:
    return path.with_name(path.stem + ".cfa.txt").exists()


def _inputs(path) -> list[Path]:
    path = Path(path)
    if path.is_file():
        return [path]
    if not path.is_dir():
        raise FileNotFoundError(f"{path} does not exist")
    files = sorted(p for p in path.iterdir()
                   if p.is_file() and p.suffix.lower() in (".png", ".tif", ".tiff"))
    if not files:
        raise DatasetError(f"no images in {path}")
    return files


def _cfa_inputs(args, sigma: float = 0.0):
    """``[(stem, CfaImage)]`` from CFA containers, or from RGB images mosaicked with --pattern.

    RGB inputs get seeded noise of level ``sigma`` after mosaicking.
    """
    out = []
    rgb_k = 0
    for p in _inputs(args.input):
        try:
            if _is_cfa(p):
                out.append((p.stem, read_cfa_png(p)))
                continue
            y = mosaic(_read_rgb(p), args.pattern)
        except DatasetError as err:
            log.warning("skipping %s: %s", p.name, err)
            continue
        if sigma > 0:
            y = add_noise(y, NoiseSpec(sigma, noise_seed(args.seed, rgb_k)))
        rgb_k += 1
        out.append((p.stem, y))
    if not out:
        raise DatasetError(f"no usable inputs in {args.input}")
    return out


def _read_rgb(path):
    return even_crop(read_image(path), path.name)


def _rgb_inputs(path):
    out = []
    for p in _inputs(path):
        try:
            out.append((p.stem, _read_rgb(p)))
        except DatasetError as err:
            log.warning("skipping %s: %s", p.name, err)
    if not out:
        raise DatasetError(f"no usable images in {path}")
    return out


def _stage(path, cls, role, manifest):
    if path is None:
        raise Failure(f"--{role} checkpoint is required")
    stage = load_stage(path)
    if not isinstance(stage, cls):
        raise Failure(f"{path} holds a {type(stage).__name__}, expected {cls.__name__}")
    manifest.add_checkpoint(role, path)
    return stage


# --------------------------------------------------------------- commands

def cmd_mosaic(args, man):
    out = Path(args.out)
    for name, x in _rgb_inputs(args.input):
        man.outputs.append(str(write_cfa_png(out / f"{name}.png", mosaic(x, args.pattern))))


def cmd_noise(args, man):
    out = Path(args.out)
    for k, (name, y) in enumerate(_cfa_inputs(args)):
        z = add_noise(y, NoiseSpec(args.sigma, noise_seed(args.seed, k)))
        man.outputs.append(str(write_cfa_png(out / f"{name}.png", z)))


def cmd_demosaic(args, man):
    out = Path(args.out)
    method = args.method
    stage = _stage(args.checkpoint, DemosaicStage, "checkpoint", man) if method == "cnn" else None
    for name, y in _cfa_inputs(args, args.sigma):
        x = demosaic_cnn(y, stage) if stage else classical.demosaic(y, method)
        man.outputs.append(str(write_rgb_png(out / f"{name}.png", x)))


def cmd_denoise(args, man):
    out = Path(args.out)
    stage = _stage(args.checkpoint, DenoiseStage, "checkpoint", man)
    for name, x in _rgb_inputs(args.input):
        man.outputs.append(str(write_rgb_png(out / f"{name}.png", denoise_cnn(x, stage))))


def cmd_pipeline(args, man):
    out = Path(args.out)
    dm = _stage(args.dm, DemosaicStage, "dm", man)
    dn = _stage(args.dn, DenoiseStage, "dn", man)
    for name, y in _cfa_inputs(args, args.sigma):
        x = full_pipeline(y, dm, dn, args.sigma or None)
        man.outputs.append(str(write_rgb_png(out / f"{name}.png", x)))


def _train_config(args) -> TrainConfig:
    overrides = {
        "seed": args.seed, "pattern": args.pattern.value, "patch_size": args.patch, "batch": args.batch,
        "lr0": args.lr, "epochs": args.epochs, "max_iters": args.iters, "n_blocks": args.blocks,
        "block": args.block, "preprocess": args.preprocess, "tail_init": args.tail_init,
        "stop_ratio": args.stop_ratio,
    }
    if args.no_augment:
        overrides["augment"] = False
    overrides["checkpoint_dir"] = str(Path(args.out) / "checkpoints")
    if args.config:
        return TrainConfig.from_file(args.config, **overrides)
    return TrainConfig.from_strings({k: v for k, v in overrides.items() if v is not None})


def _train_images(args):
    images, skipped = ingest_dataset_report(args.data)
    for name, why in skipped:
        log.warning("skipped %s: %s", name, why)
    return [x for _, x in images]


def _finish_training(args, man, stage, kind):
    out = Path(args.out)
    path = save_stage(out / f"{kind}.npz", stage)
    man.add_checkpoint(kind, path)
    man.outputs += [str(path), str(write_trace(out / f"{kind}_trace.csv", stage.trace))]
    if stage.trace:
        man.extra["final_loss"] = stage.trace[-1][2]
        man.extra["iterations"] = len(stage.trace)
    print(f"{kind}: {len(stage.trace)} iterations, final loss {stage.trace[-1][2]:.6g}"
          if stage.trace else f"{kind}: no iterations run")


def cmd_train_dm(args, man):
    cfg = _train_config(args)
    man.extra["train_config"] = cfg.to_dict()
    _finish_training(args, man, train_demosaic(_train_images(args), cfg), "dm")


def cmd_train_dn(args, man):
    cfg = _train_config(args)
    man.extra["train_config"] = cfg.to_dict()
    dm = _stage(args.dm, DemosaicStage, "dm", man)
    _finish_training(args, man, train_denoise(_train_images(args), args.sigma, dm, cfg), "dn")


def cmd_train_joint(args, man):
    cfg = _train_config(args)
    man.extra["train_config"] = cfg.to_dict()
    stage = train_joint_ablation(_train_images(args), args.sigma, cfg, args.joint_blocks)
    _finish_training(args, man, stage, "joint")


def cmd_eval(args, man):
    method = EvalMethod.parse(args.method)
    dm = _stage(args.dm, DemosaicStage, "dm", man) if method in (EvalMethod.CNN, EvalMethod.PIPELINE) else None
    dn = _stage(args.dn, DenoiseStage, "dn", man) if method is EvalMethod.PIPELINE else None
    joint = _stage(args.joint, JointStage, "joint", man) if method is EvalMethod.JOINT else None
    report = evaluate_dataset(method, args.dataset, EvalProtocol(border_crop=args.crop),
                              args.pattern, args.sigma, args.seed, args.jobs, dm, dn, joint)
    sys.stdout.write(report.to_table())
    man.extra["mean_psnr"] = report.mean_psnr
    man.extra["mean_ssim"] = report.mean_ssim
    man.extra["errors"] = report.errors
    if args.out:
        man.outputs += [str(p) for p in report.write(args.out, f"eval_{method.value}")]
    if report.errors:
        raise Failure(f"{len(report.errors)} file(s) could not be read and were excluded")


def cmd_param_count(args, man):
    if args.blocks is None:
        n = param_count(BlockSpec(args.block))
    else:
        n = param_count(NetworkSpec(args.block, args.blocks), body_only=args.body_only)
    man.extra["param_count"] = n
    print(n)


def cmd_gradcheck(args, man):
    from .gradsuite import CASES, TOLERANCE, run_suite

    cases = args.case or CASES
    worst = run_suite(range(args.seeds), cases)
    man.extra["gradcheck"] = worst
    bad = []
    for name, err in worst.items():
        ok = err < TOLERANCE
        print(f"{'PASS' if ok else 'FAIL'}  {name:<20} max rel err {err:.3e}")
        if not ok:
            bad.append(name)
    if bad:
        raise Failure(f"gradient check failed for {', '.join(bad)}")


# ----------------------------------------------------------------- parser

def _common(p, out_required=True):
    p.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")
    p.add_argument("--pattern", type=BayerPattern.parse, default=BayerPattern.RGGB,
                   help="Bayer phase: rggb, grbg, gbrg or bggr (default rggb)")
    p.add_argument("--out", required=out_required, help="output directory")


def _train_flags(p):
    p.add_argument("--data", required=True, help="directory of training images")
    p.add_argument("--config", help="key = value config file; flags override it")
    p.add_argument("--patch", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--iters", type=int, help="stop after this many iterations")
    p.add_argument("--stop-ratio", type=float, help="stop once loss < ratio * first loss")
    p.add_argument("--blocks", type=int, help="blocks per network")
    p.add_argument("--block", help="inception, inception- or conv-bn-relu")
    p.add_argument("--preprocess", choices=[m.value for m in classical.DemosaicMethod])
    p.add_argument("--tail-init", choices=["he", "zero"])
    p.add_argument("--no-augment", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rawpipe", description="Residual demosaicking and denoising.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("mosaic", help="RGB images -> CFA containers")
    p.add_argument("--in", dest="input", required=True)
    _common(p)
    p.set_defaults(func=cmd_mosaic)

    p = sub.add_parser("noise", help="add seeded Gaussian noise to CFA containers")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--sigma", type=float, required=True)
    _common(p)
    p.set_defaults(func=cmd_noise)

    p = sub.add_parser("demosaic", help="CFA (or RGB, mosaicked first) -> RGB PNGs")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--method", choices=["bilinear", "ha", "gbtf", "cnn"], default="gbtf")
    p.add_argument("--checkpoint", help="Stage 1 checkpoint for --method cnn")
    p.add_argument("--sigma", type=float, default=0.0, help="noise added to RGB inputs after mosaicking")
    _common(p)
    p.set_defaults(func=cmd_demosaic)

    p = sub.add_parser("denoise", help="Stage 2 on demosaicked RGB images")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--checkpoint", required=True)
    _common(p)
    p.set_defaults(func=cmd_denoise)

    p = sub.add_parser("pipeline", help="Stage 1 then Stage 2")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--dm", required=True)
    p.add_argument("--dn", required=True)
    p.add_argument("--sigma", type=float, default=0.0, help="noise added to RGB inputs after mosaicking")
    _common(p)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("train-dm", help="train Stage 1")
    _train_flags(p)
    _common(p)
    p.set_defaults(func=cmd_train_dm)

    p = sub.add_parser("train-dn", help="train Stage 2 behind a frozen Stage 1")
    _train_flags(p)
    p.add_argument("--dm", required=True)
    p.add_argument("--sigma", type=float, required=True)
    _common(p)
    p.set_defaults(func=cmd_train_dn)

    p = sub.add_parser("train-joint", help="train the single joint network")
    _train_flags(p)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--joint-blocks", type=int, help="body depth (default 2 x --blocks)")
    _common(p)
    p.set_defaults(func=cmd_train_joint)

    p = sub.add_parser("eval", help="score a method on a dataset directory")
    p.add_argument("--method", choices=[m.value for m in EvalMethod], required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--crop", type=int, default=10)
    p.add_argument("--dm")
    p.add_argument("--dn")
    p.add_argument("--joint")
    p.add_argument("--jobs", type=int, default=default_jobs(),
                   help="parallel images (default $RAWPIPE_JOBS or the core count)")
    _common(p, out_required=False)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("param-count", help="learnable parameters of a block or network")
    p.add_argument("--block", default="inception")
    p.add_argument("--blocks", type=int, help="count a network with this many blocks")
    p.add_argument("--body-only", action="store_true")
    _common(p, out_required=False)
    p.set_defaults(func=cmd_param_count)

    p = sub.add_parser("gradcheck", help="finite-difference gradient suite")
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--case", action="append", help="restrict to a case (repeatable)")
    _common(p, out_required=False)
    p.set_defaults(func=cmd_gradcheck)
    return ap


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    man = Manifest(["rawpipe", *argv], args)
    status = 0
    try:
        args.func(args, man)
    except Failure as err:
        print(f"rawpipe {args.command}: {err}", file=sys.stderr)
        status = 1
    except EXPECTED_ERRORS as err:
        print(f"rawpipe {args.command}: {type(err).__name__}: {err}", file=sys.stderr)
        status = 1
    man.extra["exit_status"] = status
    if getattr(args, "out", None):
        man.write(args.out)
    return status


if __name__ == "__main__":
    sys.exit(main())
