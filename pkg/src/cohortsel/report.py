"""Evaluation and tuning reports: stdout table, JSON, TSV, and figures.

Figures are rendered headless to PNG next to the delimited output; metadata
is stripped so report files stay byte-reproducible across identical runs.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .model_io import atomic_write_text, canonical_dumps
from .tuner import EvalReport, eval_report_to_dict

_PNG_META = {"Software": None}  # drop the default matplotlib stamp


def format_eval_table(report: EvalReport) -> str:
    """Human-readable per-label P/R/F1 table with the pooled micro row."""
    width = max([len("label")] + [len(label) for label in report.per_label])
    lines = [
        f"{'label':<{width}}  {'P':>6}  {'R':>6}  {'F1':>6}  {'tp':>5} {'fp':>5} {'fn':>5} {'tn':>5}"
    ]
    for label in sorted(report.per_label):
        m = report.per_label[label]
        lines.append(
            f"{label:<{width}}  {m.precision:>6.2f}  {m.recall:>6.2f}  {m.f1:>6.2f}"
            f"  {m.tp:>5} {m.fp:>5} {m.fn:>5} {m.tn:>5}"
        )
    lines.append(
        f"{'micro':<{width}}  {report.micro_precision:>6.2f}  {report.micro_recall:>6.2f}"
        f"  {report.micro_f1:>6.2f}"
    )
    return "\n".join(lines)


def eval_metrics_tsv(report: EvalReport) -> str:
    rows = ["label\tprecision\trecall\tf1\ttp\tfp\tfn\ttn"]
    for label in sorted(report.per_label):
        m = report.per_label[label]
        rows.append(
            f"{label}\t{m.precision:.6f}\t{m.recall:.6f}\t{m.f1:.6f}"
            f"\t{m.tp}\t{m.fp}\t{m.fn}\t{m.tn}"
        )
    rows.append(
        f"micro\t{report.micro_precision:.6f}\t{report.micro_recall:.6f}"
        f"\t{report.micro_f1:.6f}\t\t\t\t"
    )
    return "".join(row + "\n" for row in rows)


def _save_fig(fig, path: Path) -> None:
    fig.savefig(path, dpi=120, metadata=_PNG_META)
    plt.close(fig)


def render_eval_figure(report: EvalReport, path: Path) -> None:
    labels = sorted(report.per_label)
    f1s = [report.per_label[label].f1 for label in labels]
    fig, ax = plt.subplots(figsize=(max(6.0, 0.55 * len(labels)), 4.0))
    ax.bar(range(len(labels)), f1s, color="#4878a8")
    ax.axhline(report.micro_f1, color="#b03a2e", linestyle="--", linewidth=1.2,
               label=f"micro-F1 = {report.micro_f1:.2f}")
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=60, ha="right", fontsize=8)
    ax.set_ylim(0.0, 1.05)
    ax.set_ylabel("F1")
    ax.set_title("Per-label F1")
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    _save_fig(fig, path)


def write_eval_outputs(report: EvalReport, out_dir: str | Path) -> list[Path]:
    """Write eval_report.json, per_label_metrics.tsv, and per_label_f1.png."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    json_path = out_dir / "eval_report.json"
    tsv_path = out_dir / "per_label_metrics.tsv"
    fig_path = out_dir / "per_label_f1.png"
    atomic_write_text(json_path, canonical_dumps(eval_report_to_dict(report)) + "\n")
    atomic_write_text(tsv_path, eval_metrics_tsv(report))
    render_eval_figure(report, fig_path)
    return [json_path, tsv_path, fig_path]


def tune_scores_tsv(report: dict) -> str:
    rows = ["w_lr\tw_svm\tw_gbdt\tmicro_f1\tl1_to_uniform"]
    for cand in report["component_stage"]["candidates"]:
        w = cand["weights"]
        rows.append(
            f"{w[0]}\t{w[1]}\t{w[2]}\t{cand['micro_f1']:.6f}\t{cand['l1_to_uniform']}"
        )
    return "".join(row + "\n" for row in rows)


def render_tune_figure(report: dict, path: Path) -> None:
    candidates = report["component_stage"]["candidates"]
    scores = [cand["micro_f1"] for cand in candidates]
    selected = report["component_stage"]["selected"]
    best = max(range(len(candidates)),
               key=lambda i: (candidates[i]["weights"] == selected, ))
    fig, ax = plt.subplots(figsize=(7.0, 4.0))
    ax.plot(range(len(scores)), scores, ".", color="#4878a8", markersize=4)
    ax.plot([best], [scores[best]], "o", color="#b03a2e",
            label=f"selected {tuple(selected)}")
    ax.set_xlabel("component-weight candidate")
    ax.set_ylabel("pooled out-of-fold micro-F1")
    ax.set_title("Ensemble weight search")
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    _save_fig(fig, path)


def write_tune_outputs(report: dict, out_dir: str | Path) -> list[Path]:
    """Write cv_report.json, component_scores.tsv, and tune_scores.png."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    json_path = out_dir / "cv_report.json"
    tsv_path = out_dir / "component_scores.tsv"
    fig_path = out_dir / "tune_scores.png"
    atomic_write_text(json_path, canonical_dumps(report) + "\n")
    atomic_write_text(tsv_path, tune_scores_tsv(report))
    render_tune_figure(report, fig_path)
    return [json_path, tsv_path, fig_path]
