"""Faithfulness metrics: Drop%/Increase% in proportion and magnitude.

Evaluation masks each image down to its most salient pixels and compares
the model's confidence before and after. A good explanation keeps the
evidence, so confidence should survive: lower drop and higher increase
mean a more faithful explainer/model pair.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import FormatError
from .explainers import ExplainerSpec, explain_batch
from .model import Model
from .occlusion import keep_top_fraction
from .types import MULTICLASS

METRIC_FIELDS = ("drop_prop", "increase_prop", "tie_prop", "drop_mag", "increase_mag")


@dataclass(frozen=True)
class FaithfulnessReport:
    drop_prop: float
    increase_prop: float
    tie_prop: float
    drop_mag: float
    increase_mag: float
    n_examples: int
    keep_fraction: float
    explainer: str
    n_zero_score_excluded: int = 0
    run_label: str = ""

    def to_record(self) -> dict:
        return asdict(self)

    @classmethod
    def from_record(cls, record: dict) -> "FaithfulnessReport":
        try:
            return cls(**record)
        except TypeError as exc:
            raise FormatError(f"bad report record: {exc}") from exc


def explainer_id(spec: ExplainerSpec) -> str:
    if spec.method == "gradcam" and spec.target_layer:
        return f"gradcam[{spec.target_layer}]"
    return spec.method


def scores_from_pairs(pairs) -> dict:
    """Straight-line computation of the five metric values from
    (s_orig, s_mask) pairs. Shared by evaluate_faithfulness and usable as
    a cross-check against independent implementations."""
    pairs = [(float(a), float(b)) for a, b in pairs]
    n = len(pairs)
    if n == 0:
        raise ValueError("no evaluation pairs")
    n_drop = sum(1 for a, b in pairs if b < a)
    n_inc = sum(1 for a, b in pairs if b > a)
    n_tie = n - n_drop - n_inc
    drop_terms = [max(0.0, a - b) / a for a, b in pairs if a != 0.0]
    inc_terms = [max(0.0, b - a) / a for a, b in pairs if a != 0.0]
    excluded = n - len(drop_terms)
    # compensated summation keeps the magnitude means order-independent
    drop_mag = 100.0 * math.fsum(drop_terms) / len(drop_terms) if drop_terms else 0.0
    inc_mag = 100.0 * math.fsum(inc_terms) / len(inc_terms) if inc_terms else 0.0
    return {
        "drop_prop": 100.0 * n_drop / n,
        "increase_prop": 100.0 * n_inc / n,
        "tie_prop": 100.0 * n_tie / n,
        "drop_mag": drop_mag,
        "increase_mag": inc_mag,
        "n_examples": n,
        "n_zero_score_excluded": excluded,
    }


def _iter_examples(dataset):
    examples = getattr(dataset, "examples", dataset)
    return list(examples)


def evaluate_faithfulness(
    model: Model,
    dataset,
    explainer: ExplainerSpec,
    keep_fraction: float = 0.15,
    *,
    positive_threshold: float = 0.5,
    run_label: str = "",
    batch_size: int = 64,
) -> FaithfulnessReport:
    """Score explanation faithfulness over a dataset.

    Multiclass: one (s_orig, s_mask) pair per example at its predicted
    class. Multilabel: one pair per true-positive (example, class) pair,
    gated by positive_threshold. Examples with s_orig = 0 are excluded
    from the magnitude averages and tallied in the report.
    """
    examples = _iter_examples(dataset)
    if not examples:
        raise ValueError("dataset is empty")

    pair_scores = []
    for start in range(0, len(examples), batch_size):
        chunk = examples[start : start + batch_size]
        images = np.stack([np.asarray(img, dtype=np.float64) for img, _ in chunk])
        scores = model.predict_batch(images)
        if model.task == MULTICLASS:
            idx = np.arange(images.shape[0])
            cls = np.argmax(scores, axis=1)
        else:
            rows = []
            cols = []
            for i, (_, target) in enumerate(chunk):
                for z in target.positive_classes():
                    if scores[i, z] >= positive_threshold:
                        rows.append(i)
                        cols.append(z)
            if not rows:
                continue
            idx = np.array(rows, dtype=np.int64)
            cls = np.array(cols, dtype=np.int64)
        sel = images[idx]
        saliency = explain_batch(explainer, model, sel, cls)
        masked = keep_top_fraction(sel, saliency, keep_fraction)
        masked_scores = model.predict_batch(masked)
        take = np.arange(sel.shape[0])
        s_orig = scores[idx, cls]
        s_mask = masked_scores[take, cls]
        pair_scores.extend(zip(s_orig.tolist(), s_mask.tolist()))

    values = scores_from_pairs(pair_scores)
    return FaithfulnessReport(
        keep_fraction=float(keep_fraction),
        explainer=explainer_id(explainer),
        run_label=run_label,
        **values,
    )


def compare_runs(reports: list[FaithfulnessReport]) -> list[dict]:
    """Tabulate runs and mark the best value per metric.

    Lower is better for the drop metrics, higher for the increase
    metrics; ties mark every holder. Requires at least two reports with
    one shared keep_fraction.
    """
    if len(reports) < 2:
        raise ValueError("need at least two reports to compare")
    fractions = {r.keep_fraction for r in reports}
    if len(fractions) != 1:
        raise ValueError(f"reports mix keep_fraction values: {sorted(fractions)}")

    best = {
        "drop_prop": min(r.drop_prop for r in reports),
        "drop_mag": min(r.drop_mag for r in reports),
        "increase_prop": max(r.increase_prop for r in reports),
        "increase_mag": max(r.increase_mag for r in reports),
    }
    rows = []
    for r in reports:
        row = r.to_record()
        row["best_on"] = [m for m, v in best.items() if getattr(r, m) == v]
        rows.append(row)
    return rows


def write_reports(path, reports) -> None:
    """Write reports as JSON lines, one record per run."""
    with open(path, "w", encoding="utf-8") as fh:
        for report in reports:
            fh.write(json.dumps(report.to_record(), sort_keys=True) + "\n")


def read_reports(path) -> list[FaithfulnessReport]:
    reports = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{line_no}: not a JSON record: {exc}") from exc
            reports.append(FaithfulnessReport.from_record(record))
    if not reports:
        raise FormatError(f"{path}: no report records found")
    return reports
