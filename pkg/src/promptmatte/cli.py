"""Command-line surface for the full pipeline.

Subcommands: gen-data | train-converter | convert | train | eval | ablate |
amg | serve. Each takes --config <json> plus optional --seed / --out
overrides. Exit codes: 0 success, 2 config error, 1 anything else.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import converter as conv
from . import metrics as met
from . import synth
from .amg import auto_mask_generation
from .core import Manifest, load_image, load_manifest, load_matte, save_matte
from .losses import LossConfig
from .model import MattingModel, ModelConfig, load_model, save_model, train_matting_model
from .prompts import BoxPrompt, PointPrompt, Prompt


class ConfigError(ValueError):
    """Bad run configuration (unknown keys, missing fields, bad values)."""


def _build_config(cls, raw: dict):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(raw) - names
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        return cls(**raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


# --------------------------------------------------------------------------
# Per-command configs
# --------------------------------------------------------------------------

@dataclass
class GenDataConfig:
    out: str
    n_samples: int = 20
    canvas: int = 128
    seed: int = 0
    prompt_seed: int = 1
    n_coarse: list[int] = field(default_factory=lambda: [1, 3])
    n_fine: list[int] = field(default_factory=lambda: [1, 3])
    strand_count: list[int] = field(default_factory=lambda: [5, 30])
    feather_width: list[int] = field(default_factory=lambda: [1, 4])

    def scene_spec(self) -> synth.SceneSpec:
        return synth.SceneSpec(
            canvas=self.canvas,
            n_coarse=tuple(self.n_coarse),
            n_fine=tuple(self.n_fine),
            strand_count=tuple(self.strand_count),
            feather_width=tuple(self.feather_width),
            seed=self.seed,
        )


@dataclass
class TrainConverterConfig:
    manifest: str
    out: str
    steps: int = 400
    batch_size: int = 4
    lr: float = 1e-3
    seed: int = 0
    use_sga: bool = True
    use_stl: bool = True
    sga_probability: float = 0.5
    coarse_source_frac: float = 0.3
    lambda_grad: float = 10.0
    input_size: int = 128
    channels: list[int] = field(default_factory=lambda: [8, 16, 32, 64])


@dataclass
class ConvertConfig:
    manifest: str
    checkpoint: str
    out: str
    degrade_first: bool = True


@dataclass
class TrainConfig:
    manifest: str
    out: str
    steps: int = 300
    batch_size: int = 4
    lr: float = 1e-3
    seed: int = 0
    lambda_grad: float = 10.0
    input_size: int = 128
    embed_dim: int = 64
    heads: int = 4
    encoder_blocks: int = 2
    decoder_layers: int = 2
    pixel_dims: list[int] = field(default_factory=lambda: [32, 16, 8])
    mask_token_count: int = 1
    sigma: float = 21.0
    use_masked_attention: bool = True
    use_hierarchical_decoder: bool = True

    def model_config(self) -> ModelConfig:
        return ModelConfig(
            input_size=self.input_size,
            embed_dim=self.embed_dim,
            heads=self.heads,
            encoder_blocks=self.encoder_blocks,
            decoder_layers=self.decoder_layers,
            pixel_dims=tuple(self.pixel_dims),
            mask_token_count=self.mask_token_count,
            sigma=self.sigma,
            seed=self.seed,
            use_masked_attention=self.use_masked_attention,
            use_hierarchical_decoder=self.use_hierarchical_decoder,
        )


@dataclass
class EvalConfig:
    manifest: str
    checkpoint: str
    out: str
    prompt_modes: list[str] = field(default_factory=lambda: ["point", "box"])

    def __post_init__(self) -> None:
        bad = set(self.prompt_modes) - {"point", "box"}
        if bad:
            raise ValueError(f"unknown prompt modes: {sorted(bad)}")


@dataclass
class AblateConfig:
    grid: str
    train_manifest: str
    eval_manifest: str
    out: str
    seeds: list[int] = field(default_factory=lambda: [0, 1, 2])
    steps: int = 300
    batch_size: int = 4
    lr: float = 1e-3
    lambda_grad: float = 10.0
    sga_probability: float = 0.5
    coarse_source_frac: float = 0.3
    input_size: int = 128

    def __post_init__(self) -> None:
        if self.grid not in ("model", "converter"):
            raise ValueError(f"grid must be 'model' or 'converter', got {self.grid!r}")


@dataclass
class AmgConfig:
    image: str
    checkpoint: str
    out: str
    grid_n: int = 8
    score_thresh: float = 0.7
    nms_iou: float = 0.7


@dataclass
class ServeConfig:
    checkpoint: str
    host: str = "127.0.0.1"
    port: int = 8000
    cors_origin: str | None = None


# --------------------------------------------------------------------------
# Shared helpers
# --------------------------------------------------------------------------

def object_training_pairs(manifest: Manifest, manifest_path) -> list[tuple[np.ndarray, np.ndarray]]:
    """One (image, gt_matte) pair per annotated object."""
    root = Path(manifest_path).parent
    pairs = []
    for sample in manifest.samples:
        image = load_image(root / sample.image_path)
        for obj in sample.objects:
            pairs.append((image, load_matte(root / obj.matte_path)))
    return pairs


def predict_with_predefined(
    model: MattingModel, manifest: Manifest, manifest_path, prompt_mode: str
) -> dict[tuple[str, int], np.ndarray]:
    root = Path(manifest_path).parent
    predictions = {}
    for sample in manifest.samples:
        image = load_image(root / sample.image_path)
        for obj in sample.objects:
            if prompt_mode == "box":
                if obj.predefined_box is None:
                    raise ValueError(f"sample {sample.id!r} object {obj.id}: no predefined box")
                prompt = Prompt(box=BoxPrompt(*obj.predefined_box))
            else:
                if not obj.predefined_points:
                    raise ValueError(f"sample {sample.id!r} object {obj.id}: no predefined points")
                prompt = Prompt(
                    points=[PointPrompt(x=p["x"], y=p["y"], label=p["label"]) for p in obj.predefined_points]
                )
            predictions[(sample.id, obj.id)] = model.predict(image, prompt)
    return predictions


def _converter_trainset(cfg: TrainConverterConfig, manifest: Manifest):
    frac = cfg.coarse_source_frac if cfg.use_stl else 0.0
    return synth.derive_converter_trainset(
        manifest, cfg.manifest, conv.DegradeSpec(seed=cfg.seed), coarse_source_frac=frac,
        seed=cfg.seed,
    )


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------

def cmd_gen_data(cfg: GenDataConfig) -> None:
    manifest = synth.build_split(cfg.n_samples, cfg.scene_spec(), cfg.prompt_seed, cfg.out)
    n_objects = sum(len(s.objects) for s in manifest.samples)
    print(f"wrote {len(manifest.samples)} samples ({n_objects} objects) to {cfg.out}")


def cmd_train_converter(cfg: TrainConverterConfig) -> None:
    manifest = load_manifest(cfg.manifest)
    trainset = _converter_trainset(cfg, manifest)
    net_cfg = conv.ConverterConfig(
        input_size=cfg.input_size, channels=tuple(cfg.channels), seed=cfg.seed
    )
    train_cfg = conv.ConverterTrainConfig(
        steps=cfg.steps,
        batch_size=cfg.batch_size,
        lr=cfg.lr,
        sga_probability=cfg.sga_probability,
        use_sga=cfg.use_sga,
        lambda_grad=cfg.lambda_grad,
        degrade=conv.DegradeSpec(seed=cfg.seed),
        seed=cfg.seed,
    )
    model, stats = conv.train_converter(trainset, net_cfg, train_cfg, log=print)
    conv.save_converter(cfg.out, model, step=cfg.steps)
    print(f"converter checkpoint: {cfg.out} (final loss {stats[-1]['loss']:.4f})")


def cmd_convert(cfg: ConvertConfig) -> None:
    manifest = load_manifest(cfg.manifest)
    model, _ = conv.load_converter(cfg.checkpoint)
    out_manifest = conv.convert_dataset(
        manifest, cfg.manifest, model, cfg.out, degrade_first=cfg.degrade_first
    )
    n = sum(len(s.objects) for s in out_manifest.samples)
    print(f"converted {n} labels into {cfg.out}")


def cmd_train(cfg: TrainConfig) -> None:
    manifest = load_manifest(cfg.manifest)
    pairs = object_training_pairs(manifest, cfg.manifest)
    model, stats = train_matting_model(
        pairs,
        cfg.model_config(),
        steps=cfg.steps,
        batch_size=cfg.batch_size,
        lr=cfg.lr,
        loss_cfg=LossConfig(lambda_grad=cfg.lambda_grad),
        log=print,
    )
    save_model(cfg.out, model, step=cfg.steps)
    print(f"model checkpoint: {cfg.out} (final loss {stats[-1]['loss']:.4f})")


def cmd_eval(cfg: EvalConfig) -> None:
    manifest = load_manifest(cfg.manifest)
    model, _ = load_model(cfg.checkpoint)
    reports = []
    for mode in cfg.prompt_modes:
        predictions = predict_with_predefined(model, manifest, cfg.manifest, mode)
        reports.extend(met.evaluate_dataset(predictions, manifest, mode, cfg.manifest))
    out = Path(cfg.out)
    met.write_reports_csv(reports, out / "metrics.csv")
    met.write_reports_json(reports, out / "metrics.json")
    print(f"wrote {len(reports)} metric rows to {out / 'metrics.csv'}")


def _eval_converter_cell(
    model: conv.ConverterNet, eval_manifest: Manifest, eval_path, degrade_seed: int
) -> dict[str, float]:
    """Converted-output MSE per granularity plus coarse pass-through deviation."""
    root = Path(eval_path).parent
    spec = conv.DegradeSpec(seed=degrade_seed)
    fine_mse, coarse_mse, coarse_dev = [], [], []
    idx = 0
    for sample in eval_manifest.samples:
        image = load_image(root / sample.image_path)
        for obj in sample.objects:
            gt = load_matte(root / obj.matte_path)
            seg = conv.degrade_matte(gt, spec.with_seed(degrade_seed + idx))
            out = conv.converter_forward(image, seg, model)
            if obj.granularity == "fine":
                fine_mse.append(met.mse(out, gt))
            else:
                coarse_mse.append(met.mse(out, gt))
                coarse_dev.append(float(np.abs(out - seg.astype(np.float32)).mean()))
            idx += 1
    return {
        "fine_mse": float(np.mean(fine_mse)) if fine_mse else float("nan"),
        "coarse_mse": float(np.mean(coarse_mse)) if coarse_mse else float("nan"),
        "coarse_seg_deviation": float(np.mean(coarse_dev)) if coarse_dev else float("nan"),
    }


def _model_cell_mse(
    model: MattingModel, eval_manifest: Manifest, eval_path
) -> dict[str, float]:
    predictions = predict_with_predefined(model, eval_manifest, eval_path, "box")
    reports = met.evaluate_dataset(predictions, eval_manifest, "box", eval_path)
    out = {"fine_mse": float("nan"), "coarse_mse": float("nan")}
    for r in reports:
        out[f"{r.granularity}_mse"] = r.mse
    return out


def cmd_ablate(cfg: AblateConfig) -> None:
    train_manifest = load_manifest(cfg.train_manifest)
    eval_manifest = load_manifest(cfg.eval_manifest)
    rows = []
    detail = []
    cells = [(False, False), (True, False), (False, True), (True, True)]
    for a, b in cells:
        per_seed = []
        for seed in cfg.seeds:
            if cfg.grid == "model":
                mc = ModelConfig(
                    input_size=cfg.input_size, seed=seed,
                    use_masked_attention=a, use_hierarchical_decoder=b,
                )
                pairs = object_training_pairs(train_manifest, cfg.train_manifest)
                model, _ = train_matting_model(
                    pairs, mc, steps=cfg.steps, batch_size=cfg.batch_size, lr=cfg.lr,
                    loss_cfg=LossConfig(lambda_grad=cfg.lambda_grad),
                )
                per_seed.append(_model_cell_mse(model, eval_manifest, cfg.eval_manifest))
            else:
                tc = TrainConverterConfig(
                    manifest=cfg.train_manifest, out="", steps=cfg.steps,
                    batch_size=cfg.batch_size, lr=cfg.lr, seed=seed,
                    use_sga=a, use_stl=b,
                    sga_probability=cfg.sga_probability,
                    coarse_source_frac=cfg.coarse_source_frac,
                    lambda_grad=cfg.lambda_grad, input_size=cfg.input_size,
                )
                trainset = _converter_trainset(tc, train_manifest)
                net, _ = conv.train_converter(
                    trainset,
                    conv.ConverterConfig(input_size=cfg.input_size, seed=seed),
                    conv.ConverterTrainConfig(
                        steps=cfg.steps, batch_size=cfg.batch_size, lr=cfg.lr,
                        sga_probability=cfg.sga_probability, use_sga=a,
                        lambda_grad=cfg.lambda_grad,
                        degrade=conv.DegradeSpec(seed=seed), seed=seed,
                    ),
                )
                per_seed.append(
                    _eval_converter_cell(net, eval_manifest, cfg.eval_manifest, degrade_seed=9000)
                )
        mean_row = {k: float(np.mean([s[k] for s in per_seed])) for k in per_seed[0]}
        toggles = (
            {"use_masked_attention": a, "use_hierarchical_decoder": b}
            if cfg.grid == "model"
            else {"use_sga": a, "use_stl": b}
        )
        rows.append({**toggles, **mean_row})
        detail.append({**toggles, "per_seed": per_seed})
        print(f"cell {toggles}: {mean_row}")

    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    import csv as _csv

    with (out / f"ablation_{cfg.grid}.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = _csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
    (out / f"ablation_{cfg.grid}.json").write_text(
        json.dumps({"grid": cfg.grid, "seeds": cfg.seeds, "rows": rows, "detail": detail}, indent=2)
        + "\n",
        encoding="utf-8",
    )
    print(f"wrote ablation table to {out / f'ablation_{cfg.grid}.csv'}")


def cmd_amg(cfg: AmgConfig) -> None:
    image = load_image(cfg.image)
    model, _ = load_model(cfg.checkpoint)
    kept = auto_mask_generation(
        image, model, cfg.grid_n, cfg.score_thresh, cfg.nms_iou, return_candidates=True
    )
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    records = []
    for i, cand in enumerate(kept):
        rel = f"amg_{i:03d}.png"
        save_matte(out / rel, cand.matte)
        records.append({"matte": rel, "score": cand.score, "grid_index": cand.grid_index})
    (out / "amg.json").write_text(json.dumps({"masks": records}, indent=2) + "\n", encoding="utf-8")
    print(f"kept {len(kept)} masks in {out}")


def cmd_serve(cfg: ServeConfig) -> None:
    import uvicorn

    from .service import create_app

    app = create_app(
        checkpoint_path=cfg.checkpoint,
        cors_origins=[cfg.cors_origin] if cfg.cors_origin else [],
    )
    uvicorn.run(app, host=cfg.host, port=cfg.port, log_level="warning")


# --------------------------------------------------------------------------
# Entry point
# --------------------------------------------------------------------------

COMMANDS = {
    "gen-data": (GenDataConfig, cmd_gen_data),
    "train-converter": (TrainConverterConfig, cmd_train_converter),
    "convert": (ConvertConfig, cmd_convert),
    "train": (TrainConfig, cmd_train),
    "eval": (EvalConfig, cmd_eval),
    "ablate": (AblateConfig, cmd_ablate),
    "amg": (AmgConfig, cmd_amg),
    "serve": (ServeConfig, cmd_serve),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="promptmatte")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=str, default=None, help="JSON config file")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--out", type=str, default=None, help="override output path")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    config_cls, command = COMMANDS[args.command]
    try:
        raw = {}
        if args.config:
            config_path = Path(args.config)
            if not config_path.exists():
                raise ConfigError(f"config file not found: {config_path}")
            try:
                raw = json.loads(config_path.read_text(encoding="utf-8"))
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{config_path}: invalid JSON: {exc}") from exc
        if args.seed is not None:
            if "seed" not in {f.name for f in dataclasses.fields(config_cls)}:
                raise ConfigError(f"--seed is not applicable to {args.command}")
            raw["seed"] = args.seed
        if args.out is not None:
            raw["out"] = args.out
        cfg = _build_config(config_cls, raw)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    try:
        command(cfg)
        return 0
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
