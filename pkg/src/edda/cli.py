"""Command-line interface: train, eval, explain, compare."""

from __future__ import annotations

import dataclasses
import os
import sys

import click
import numpy as np

from .checkpoint import checkpoint_provenance, load_checkpoint, save_checkpoint
from .config import build_model, load_config, plan_to_dict, write_config
from .datasets import load_dataset, parse_spec
from .errors import EddaError
from .explainers import GRADCAM, VANILLA, ExplainerSpec, explain as explain_image
from .metrics import METRIC_FIELDS, compare_runs, evaluate_faithfulness, read_reports, write_reports
from .trainer import train as run_training
from .visualize import load_image, overlay_heatmap, save_png

EXPLAINER_NAMES = {"gradcam": GRADCAM, "saliency": VANILLA}


def _fail(message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(1)


def _dataset_from_spec(spec_text: str, seed_override: int | None):
    spec = parse_spec(spec_text)
    if seed_override is not None and "seed=" not in spec_text:
        spec = dataclasses.replace(spec, seed=seed_override)
    return load_dataset(spec)


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.option("--seed", type=int, default=None, help="Override the configured seed (train) and the default dataset seed (eval).")
@click.pass_context
def main(ctx, seed):
    """Explanation-driven data augmentation toolkit."""
    ctx.ensure_object(dict)
    ctx.obj["seed"] = seed


@main.command("train")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False), help="JSON run configuration.")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False), help="Output directory for checkpoint, run log and config snapshot.")
@click.pass_context
def cmd_train(ctx, config_path, out_dir):
    """Train a model and write checkpoint, run log and effective config."""
    try:
        plan = load_config(config_path)
        seed = ctx.obj.get("seed")
        if seed is not None:
            plan = dataclasses.replace(
                plan,
                train=dataclasses.replace(plan.train, seed=seed),
                dataset=dataclasses.replace(plan.dataset, seed=seed),
            )
        os.makedirs(out_dir, exist_ok=True)
        dataset = load_dataset(plan.dataset)
        model = build_model(plan, dataset)
        log_path = os.path.join(out_dir, "run_log.jsonl")
        open(log_path, "w", encoding="utf-8").close()  # rerun replaces, not appends
        model, records = run_training(plan.train, dataset, model, log_path=log_path)
        save_checkpoint(
            model,
            os.path.join(out_dir, "checkpoint.npz"),
            provenance={"strategy": plan.train.strategy, "config": plan_to_dict(plan)},
        )
        write_config(plan, os.path.join(out_dir, "config.json"))
        final = records[-1]
        click.echo(
            f"trained {plan.train.epochs} epochs; final loss {final.loss:.6f}, "
            f"accuracy {final.accuracy:.4f}"
        )
    except (EddaError, OSError, ValueError) as exc:
        _fail(str(exc))


@main.command("eval")
@click.option("--checkpoint", "checkpoint_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--data", "data_spec", required=True, help="Dataset spec, e.g. synthetic_mc,n=500,seed=7.")
@click.option("--explainer", "explainer_name", type=click.Choice(sorted(EXPLAINER_NAMES)), default="gradcam", show_default=True)
@click.option("--keep-fraction", type=float, default=0.15, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.pass_context
def cmd_eval(ctx, checkpoint_path, data_spec, explainer_name, keep_fraction, out_path):
    """Evaluate explanation faithfulness and write one report record."""
    try:
        model = load_checkpoint(checkpoint_path)
        dataset = _dataset_from_spec(data_spec, ctx.obj.get("seed"))
        if dataset.task != model.task:
            _fail(
                f"checkpoint task {model.task} does not match dataset task {dataset.task}"
            )
        spec = ExplainerSpec(method=EXPLAINER_NAMES[explainer_name])
        provenance = checkpoint_provenance(checkpoint_path)
        label = provenance.get("strategy") or os.path.splitext(os.path.basename(checkpoint_path))[0]
        report = evaluate_faithfulness(
            model, dataset, spec, keep_fraction, run_label=str(label)
        )
        write_reports(out_path, [report])
        for name in ("drop_prop", "increase_prop", "drop_mag", "increase_mag"):
            click.echo(f"{name} = {getattr(report, name):.4f}")
    except (EddaError, OSError, ValueError) as exc:
        _fail(str(exc))


@main.command("explain")
@click.option("--checkpoint", "checkpoint_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--image", "image_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--class", "class_index", required=True, type=int)
@click.option("--method", "method_name", type=click.Choice(sorted(EXPLAINER_NAMES)), default="gradcam", show_default=True)
@click.option("--signed", is_flag=True, help="Skip Grad-CAM rectification (visualization only).")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def cmd_explain(checkpoint_path, image_path, class_index, method_name, signed, out_path):
    """Render a heatmap overlay for one image and class."""
    try:
        model = load_checkpoint(checkpoint_path)
        image = load_image(image_path)
        spec = ExplainerSpec(method=EXPLAINER_NAMES[method_name], signed_output=signed)
        saliency = explain_image(spec, model, image, class_index)
        overlay = overlay_heatmap(image, saliency, alpha=0.5)
        save_png(out_path, overlay)
        click.echo(f"wrote {out_path}")
    except (EddaError, OSError, ValueError) as exc:
        _fail(str(exc))


def _format_table(rows: list[dict]) -> str:
    headers = ["run_label", *METRIC_FIELDS, "n_examples"]
    lines = ["  ".join(f"{h:>14}" for h in headers)]
    for row in rows:
        cells = [f"{row['run_label'] or '-':>14}"]
        for metric in METRIC_FIELDS:
            mark = "*" if metric in row["best_on"] else " "
            cells.append(f"{row[metric]:>13.4f}{mark}")
        cells.append(f"{row['n_examples']:>14d}")
        lines.append("  ".join(cells))
    lines.append("")
    lines.append("* best per metric (lowest drop, highest increase)")
    return "\n".join(lines) + "\n"


@main.command("compare")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.argument("reports", nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False))
def cmd_compare(out_path, reports):
    """Tabulate faithfulness reports with best-per-metric markers."""
    try:
        loaded = []
        for path in reports:
            loaded.extend(read_reports(path))
        rows = compare_runs(loaded)
        table = _format_table(rows)
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(table)
        click.echo(table, nl=False)
    except (EddaError, OSError, ValueError) as exc:
        _fail(str(exc))


if __name__ == "__main__":
    main()
