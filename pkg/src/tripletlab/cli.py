"""Command-line surface: data generation, field simulation, trajectory
rollout, training, and diagram export.

Every command resolves relative output paths against $TRIPLETLAB_OUT
(default: the working directory), writes its artifacts plus a JSON run
manifest with sha256 checksums, and is byte-deterministic given its flags.
``tripletlab rerun <manifest>`` re-executes a recorded run next to the
manifest and verifies the checksums still match.

Exit codes: 0 success, 1 usage error, 2 data/IO error, 3 numeric failure
(degenerate vectors).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dynamics import GridSpec, StepParams, step, trajectory, vector_field
from .evaluation import diagram_extract
from .geometry import DegenerateVectorError, TripletCoord, UndefinedGammaError
from .losses import LossKind, LossSpec, is_hard
from .mining import Batch, MiningStrategy, NoNegativesError
from .svg import diagram_scatter, field_quiver, line_chart, trajectory_path
from .synthdata import (
    FLOAT_FMT,
    DatasetConfig,
    DatasetParseError,
    generate,
    load,
    save,
)
from .trainer import GradMode, ModelParams, TrainConfig, embed, train

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

OUT_DIR_ENV = "TRIPLETLAB_OUT"


class UsageError(Exception):
    """Invalid flag values caught after argparse."""


@dataclass(frozen=True)
class PathContext:
    """Where relative outputs and inputs resolve to."""

    out_base: Path
    in_base: Path

    @staticmethod
    def from_env() -> "PathContext":
        return PathContext(
            out_base=Path(os.environ.get(OUT_DIR_ENV, ".")),
            in_base=Path("."),
        )

    def out_path(self, name: str) -> Path:
        p = Path(name)
        return p if p.is_absolute() else self.out_base / p

    def in_path(self, name: str) -> Path:
        p = Path(name)
        return p if p.is_absolute() else self.in_base / p


def _round12(obj):
    """Round floats to 12 significant digits, recursively."""
    if isinstance(obj, float):
        return float(f"{obj:.12g}")
    if isinstance(obj, dict):
        return {k: _round12(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round12(v) for v in obj]
    return obj


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_csv(path: Path, header: list[str], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(
                ",".join(
                    FLOAT_FMT % v if isinstance(v, float) else str(v)
                    for v in row
                )
                + "\n"
            )


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_round12(obj), indent=2) + "\n")


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _write_manifest(
    ctx: PathContext,
    prefix: str,
    command: str,
    config: dict,
    seed,
    outputs: dict[str, str],
) -> Path:
    """Record command, resolved config, and artifact checksums.

    Output names are stored relative to the manifest's own directory and
    the stored config carries basename prefixes, so a manifest plus its
    sibling files is a relocatable, re-runnable unit and a rerun rewrites
    the manifest byte-identically.
    """
    manifest_path = ctx.out_path(f"{prefix}.manifest.json")
    out_dir = manifest_path.parent
    checksums = {name: _sha256(out_dir / name) for name in outputs.values()}
    config = {
        key: (Path(value).name if key in ("out", "out_prefix") else value)
        for key, value in config.items()
    }
    _write_json(
        manifest_path,
        {
            "command": command,
            "config": config,
            "seed": seed,
            "outputs": outputs,
            "checksums": checksums,
        },
    )
    return manifest_path


def _prefix_basename(prefix: str) -> tuple[str, str]:
    """Split an --out-prefix into (directory part, name part)."""
    p = Path(prefix)
    return str(p.parent), p.name


# ---------------------------------------------------------------- commands


def run_gen_data(cfg: dict, ctx: PathContext) -> dict:
    try:
        dataset_cfg = DatasetConfig(
            num_classes=cfg["classes"],
            per_class=cfg["per_class"],
            input_dim=cfg["dim"],
            intra_spread=cfg["spread"],
            seed=cfg["seed"],
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    ds = generate(dataset_cfg)
    out_name = cfg["out"]
    out_path = ctx.out_path(out_name)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    save(ds, out_path)
    prefix = out_name[:-4] if out_name.endswith(".csv") else out_name
    manifest = _write_manifest(
        ctx,
        prefix,
        "gen-data",
        cfg,
        cfg["seed"],
        {"dataset": Path(out_name).name},
    )
    print(f"wrote {out_path} ({len(ds)} rows) and {manifest}")
    return cfg


def _step_params(cfg: dict) -> StepParams:
    kind = LossKind(cfg["loss"])
    if kind == LossKind.SCT:
        raise UsageError("diagram dynamics support nca and margin only")
    try:
        return StepParams(
            learning_rate=cfg["beta_scale"],
            gamma=cfg["gamma"],
            entanglement_p=cfg["p"],
            loss=LossSpec(kind=kind, margin=cfg["margin"]),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def run_simulate(cfg: dict, ctx: PathContext) -> dict:
    params = _step_params(cfg)
    try:
        grid = GridSpec(resolution=cfg["resolution"])
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    field = vector_field(grid, params)
    prefix = cfg["out_prefix"]
    rows = zip(
        field.s_ap,
        field.s_an,
        field.d_sap,
        field.d_san,
        field.d_sap_total,
        field.d_san_total,
    )
    _write_csv(
        ctx.out_path(f"{prefix}.field.csv"),
        ["s_ap", "s_an", "d_sap", "d_san", "d_sap_total", "d_san_total"],
        ([float(v) for v in row] for row in rows),
    )
    title = (
        f"{cfg['loss']} field (p={cfg['p']:g}, gamma={cfg['gamma']:g}, "
        f"beta_scale={cfg['beta_scale']:g})"
    )
    _write_text(
        ctx.out_path(f"{prefix}.field.svg"),
        field_quiver(
            field.s_ap, field.s_an, field.d_sap_total, field.d_san_total,
            title,
        ),
    )
    _, name = _prefix_basename(prefix)
    manifest = _write_manifest(
        ctx,
        prefix,
        "simulate",
        cfg,
        None,
        {"field_csv": f"{name}.field.csv", "field_svg": f"{name}.field.svg"},
    )
    print(f"wrote {len(field)} cells under {ctx.out_path(prefix)}.* "
          f"and {manifest}")
    return cfg


def run_trajectory(cfg: dict, ctx: PathContext) -> dict:
    params = _step_params(cfg)
    if cfg["steps"] < 1:
        raise UsageError("--steps must be >= 1")
    if not (-1 <= cfg["start_sap"] <= 1 and -1 <= cfg["start_san"] <= 1):
        raise UsageError("trajectory start must lie in [-1, 1]^2")
    points = trajectory(
        TripletCoord(cfg["start_sap"], cfg["start_san"]),
        params,
        cfg["steps"],
    )
    prefix = cfg["out_prefix"]
    rows = []
    for pt in points:
        upd = step(pt, params)
        rows.append(
            [pt.s_ap, pt.s_an, float(upd.d_sap_total), float(upd.d_san_total)]
        )
    _write_csv(
        ctx.out_path(f"{prefix}.trajectory.csv"),
        ["s_ap", "s_an", "d_sap", "d_san"],
        rows,
    )
    _write_text(
        ctx.out_path(f"{prefix}.trajectory.svg"),
        trajectory_path(
            [(pt.s_ap, pt.s_an) for pt in points],
            f"{cfg['loss']} trajectory from "
            f"({cfg['start_sap']:g}, {cfg['start_san']:g})",
        ),
    )
    _, name = _prefix_basename(prefix)
    manifest = _write_manifest(
        ctx,
        prefix,
        "trajectory",
        cfg,
        None,
        {
            "trajectory_csv": f"{name}.trajectory.csv",
            "trajectory_svg": f"{name}.trajectory.svg",
        },
    )
    print(f"rolled {cfg['steps']} steps; wrote {manifest}")
    return cfg


def _loss_spec(cfg: dict) -> LossSpec:
    try:
        return LossSpec(
            kind=LossKind(cfg["loss"]),
            lam=cfg["lam"],
            margin=cfg["margin"],
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _save_weights(path: Path, params: ModelParams) -> None:
    _write_csv(
        path,
        [f"w{j}" for j in range(params.embed_dim)],
        ([float(v) for v in row] for row in params.weight),
    )


def _load_weights(path: Path) -> ModelParams:
    if not path.exists():
        raise DatasetParseError(f"{path}: no such file")
    rows = path.read_text().splitlines()
    if len(rows) < 2:
        raise DatasetParseError(f"{path}: empty weights file")
    width = len(rows[0].split(","))
    weight = []
    for lineno, line in enumerate(rows[1:], start=2):
        cells = line.split(",")
        if len(cells) != width:
            raise DatasetParseError(
                f"{path}: line {lineno}: expected {width} columns"
            )
        try:
            weight.append([float(c) for c in cells])
        except ValueError as exc:
            raise DatasetParseError(
                f"{path}: line {lineno}: {exc}"
            ) from exc
    return ModelParams(weight=np.asarray(weight))


def run_train(cfg: dict, ctx: PathContext) -> dict:
    try:
        config = TrainConfig(
            loss=_loss_spec(cfg),
            strategy=MiningStrategy(cfg["miner"]),
            grad_mode=GradMode(cfg["grad_mode"]),
            learning_rate=cfg["lr"],
            epochs=cfg["epochs"],
            classes_per_batch=cfg["classes_per_batch"],
            embed_dim=cfg["embed_dim"],
            seed=cfg["seed"],
            snapshot_every=cfg["snapshot_every"],
            batches_per_epoch=cfg["batches_per_epoch"],
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    dataset = load(ctx.in_path(cfg["data"]))
    params, logs = train(dataset, config)
    prefix = cfg["out_prefix"]
    _, name = _prefix_basename(prefix)
    outputs = {
        "epochs_json": f"{name}.epochs.json",
        "epochs_csv": f"{name}.epochs.csv",
        "weights_csv": f"{name}.weights.csv",
        "curves_svg": f"{name}.curves.svg",
    }
    records = [
        {
            "epoch": log.epoch,
            "mean_loss": log.mean_loss,
            "hard_fraction": log.hard_fraction,
            "recall_at_1": log.recall_at_1,
            "collapse": log.collapse,
        }
        for log in logs
    ]
    _write_json(ctx.out_path(f"{prefix}.epochs.json"), records)
    _write_csv(
        ctx.out_path(f"{prefix}.epochs.csv"),
        ["epoch", "mean_loss", "hard_fraction", "recall_at_1", "collapse"],
        (
            [
                log.epoch,
                log.mean_loss,
                log.hard_fraction,
                log.recall_at_1,
                log.collapse,
            ]
            for log in logs
        ),
    )
    _save_weights(ctx.out_path(f"{prefix}.weights.csv"), params)
    for log in logs:
        if log.snapshot is None:
            continue
        snap_name = f"{name}.snap{log.epoch:04d}.csv"
        _write_csv(
            ctx.out_path(f"{prefix}.snap{log.epoch:04d}.csv"),
            ["anchor", "positive", "negative", "s_ap", "s_an"],
            (
                [t.anchor, t.positive, t.negative,
                 float(t.coord.s_ap), float(t.coord.s_an)]
                for t in log.snapshot
            ),
        )
        outputs[f"snap_{log.epoch:04d}"] = snap_name
    _write_text(
        ctx.out_path(f"{prefix}.curves.svg"),
        line_chart(
            [
                ("recall@1", [log.recall_at_1 for log in logs]),
                ("hard_fraction", [log.hard_fraction for log in logs]),
            ],
            f"{cfg['loss']}+{cfg['miner']} (lr={cfg['lr']:g}, "
            f"seed={cfg['seed']})",
        ),
    )
    manifest = _write_manifest(
        ctx, prefix, "train", cfg, cfg["seed"], outputs
    )
    final = logs[-1]
    print(
        f"trained {cfg['epochs']} epochs: recall@1={final.recall_at_1:.4f} "
        f"hard_fraction={final.hard_fraction:.4f} "
        f"collapse={final.collapse:.4f}; wrote {manifest}"
    )
    return cfg


def run_diagram(cfg: dict, ctx: PathContext) -> dict:
    dataset = load(ctx.in_path(cfg["data"]))
    if cfg["weights"] is not None:
        params = _load_weights(ctx.in_path(cfg["weights"]))
        if params.input_dim != dataset.dim:
            raise DatasetParseError(
                f"weights expect input_dim {params.input_dim}, "
                f"dataset has {dataset.dim}"
            )
        feats = embed(params, dataset.points)
    else:
        norms = np.linalg.norm(dataset.points, axis=1, keepdims=True)
        if np.any(norms <= 1e-12):
            raise DegenerateVectorError("dataset contains a zero vector")
        feats = dataset.points / norms
    batch = Batch(embeddings=feats, labels=dataset.labels)
    triplets = diagram_extract(batch)
    prefix = cfg["out_prefix"]
    _write_csv(
        ctx.out_path(f"{prefix}.diagram.csv"),
        ["anchor", "positive", "negative", "s_ap", "s_an", "hard"],
        (
            [
                t.anchor,
                t.positive,
                t.negative,
                float(t.coord.s_ap),
                float(t.coord.s_an),
                int(is_hard(t.coord)),
            ]
            for t in triplets
        ),
    )
    _write_text(
        ctx.out_path(f"{prefix}.diagram.svg"),
        diagram_scatter(
            [
                (t.coord.s_ap, t.coord.s_an, is_hard(t.coord))
                for t in triplets
            ],
            "easiest-positive / hardest-negative diagram",
        ),
    )
    _, name = _prefix_basename(prefix)
    manifest = _write_manifest(
        ctx,
        prefix,
        "diagram",
        cfg,
        None,
        {
            "diagram_csv": f"{name}.diagram.csv",
            "diagram_svg": f"{name}.diagram.svg",
        },
    )
    n_hard = sum(is_hard(t.coord) for t in triplets)
    print(
        f"extracted {len(triplets)} diagram points ({n_hard} hard); "
        f"wrote {manifest}"
    )
    return cfg


RUNNERS = {
    "gen-data": run_gen_data,
    "simulate": run_simulate,
    "trajectory": run_trajectory,
    "train": run_train,
    "diagram": run_diagram,
}


def run_rerun(manifest_name: str, ctx: PathContext) -> int:
    manifest_path = ctx.in_path(manifest_name)
    if not manifest_path.exists():
        raise DatasetParseError(f"{manifest_path}: no such manifest")
    try:
        manifest = json.loads(manifest_path.read_text())
        command = manifest["command"]
        cfg = dict(manifest["config"])
        recorded = manifest["checksums"]
    except (json.JSONDecodeError, KeyError) as exc:
        raise DatasetParseError(
            f"{manifest_path}: malformed manifest ({exc})"
        ) from exc
    if command not in RUNNERS:
        raise DatasetParseError(
            f"{manifest_path}: unknown command {command!r}"
        )
    base = manifest_path.parent
    # outputs land next to the manifest; inputs resolve relative to it too
    rerun_ctx = PathContext(out_base=base, in_base=base)
    for key in ("out", "out_prefix"):
        if key in cfg:
            cfg[key] = Path(cfg[key]).name
    RUNNERS[command](cfg, rerun_ctx)
    mismatched = []
    for out_name, digest in sorted(recorded.items()):
        actual = _sha256(base / Path(out_name).name)
        status = "ok" if actual == digest else "MISMATCH"
        if actual != digest:
            mismatched.append(out_name)
        print(f"  {out_name}: {status}")
    if mismatched:
        print(f"rerun: {len(mismatched)} artifact(s) diverged")
        return EXIT_DATA
    print("rerun: all checksums match")
    return EXIT_OK


# ------------------------------------------------------------------ parser


class _Parser(argparse.ArgumentParser):
    """argparse with the package's exit-code contract (usage errors: 1)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> _Parser:
    parser = _Parser(
        prog="tripletlab",
        description=(
            "Triplet-loss geometry lab: synthetic sphere data, diagram "
            "dynamics, mining, training, and retrieval evaluation."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a labeled sphere dataset")
    p.add_argument("--classes", type=int, required=True)
    p.add_argument("--per-class", type=int, required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--spread", type=float, required=True,
                   help="noise magnitude relative to the unit class center")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output CSV path")

    p = sub.add_parser("simulate", help="vector field over the diagram")
    p.add_argument("--loss", choices=["nca", "margin"], default="nca")
    p.add_argument("--p", type=float, default=0.0,
                   help="entanglement strength")
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--beta-scale", type=float, default=0.05,
                   help="step size (beta = scale*sigma for nca, 2*scale "
                        "for margin)")
    p.add_argument("--resolution", type=int, default=41)
    p.add_argument("--margin", type=float, default=0.2)
    p.add_argument("--out-prefix", required=True)

    p = sub.add_parser("trajectory", help="multi-step diagram rollout")
    p.add_argument("--loss", choices=["nca", "margin"], default="nca")
    p.add_argument("--start-sap", type=float, required=True)
    p.add_argument("--start-san", type=float, required=True)
    p.add_argument("--steps", type=int, default=50)
    p.add_argument("--p", type=float, default=0.0)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--beta-scale", type=float, default=0.1)
    p.add_argument("--margin", type=float, default=0.2)
    p.add_argument("--out-prefix", required=True)

    p = sub.add_parser("train", help="train the linear embedding")
    p.add_argument("--data", required=True, help="dataset CSV")
    p.add_argument("--loss", choices=["nca", "margin", "sct"], default="nca")
    p.add_argument("--miner",
                   choices=["random", "hn", "shn", "ep", "ephn"],
                   default="hn")
    p.add_argument("--grad-mode", choices=["post", "through"],
                   default="through")
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--classes-per-batch", type=int, default=8)
    p.add_argument("--embed-dim", type=int, default=8)
    p.add_argument("--lambda", dest="lam", type=float, default=1.0,
                   help="selective-loss contrastive weight")
    p.add_argument("--margin", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--snapshot-every", type=int, default=10)
    p.add_argument("--batches-per-epoch", type=int, default=None,
                   help="default: one pass over the data")
    p.add_argument("--out-prefix", required=True)

    p = sub.add_parser("diagram",
                       help="easiest-positive/hardest-negative diagram")
    p.add_argument("--data", required=True, help="dataset CSV")
    p.add_argument("--weights", default=None,
                   help="trained weights CSV (default: raw points)")
    p.add_argument("--out-prefix", required=True)

    p = sub.add_parser("rerun", help="re-execute a manifest and verify")
    p.add_argument("manifest", help="path to a run manifest JSON")

    return parser


_CONFIG_KEYS = {
    "gen-data": ["classes", "per_class", "dim", "spread", "seed", "out"],
    "simulate": ["loss", "p", "gamma", "beta_scale", "resolution", "margin",
                 "out_prefix"],
    "trajectory": ["loss", "start_sap", "start_san", "steps", "p", "gamma",
                   "beta_scale", "margin", "out_prefix"],
    "train": ["data", "loss", "miner", "grad_mode", "lr", "epochs",
              "classes_per_batch", "embed_dim", "lam", "margin", "seed",
              "snapshot_every", "batches_per_epoch", "out_prefix"],
    "diagram": ["data", "weights", "out_prefix"],
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    ctx = PathContext.from_env()
    try:
        if args.command == "rerun":
            return run_rerun(args.manifest, ctx)
        cfg = {key: getattr(args, key) for key in _CONFIG_KEYS[args.command]}
        RUNNERS[args.command](cfg, ctx)
        return EXIT_OK
    except UsageError as exc:
        print(f"tripletlab: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DatasetParseError, NoNegativesError, OSError) as exc:
        print(f"tripletlab: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (DegenerateVectorError, UndefinedGammaError) as exc:
        print(f"tripletlab: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
