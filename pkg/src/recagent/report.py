"""Tabular report emission, text and machine-readable.

Rows are methods/strategies; columns are grouped per dataset with the
standard metric layout (RMSE, MAE | HR@5, NDCG@5, HR@10, NDCG@10 |
BLEU2, ROUGE1, ROUGE2, ROUGEL). BLEU/ROUGE cells are scaled by 100 at
render time; all other metrics render as stored.
"""

from __future__ import annotations

import json

TEXT_METRICS = ("BLEU1", "BLEU2", "BLEU3", "BLEU4",
                "ROUGE1", "ROUGE2", "ROUGEL")


def _display_value(metric: str, value: float) -> str:
    if value is None:
        return "-"
    if metric.upper() in TEXT_METRICS:
        value = value * 100.0
    return f"{value:.4f}"


def render_table(
    rows: list[tuple[str, dict]],
    groups: list[tuple[str, list[str]]],
    title: str | None = None,
) -> str:
    """Fixed-width text table.

    ``rows``   — (label, {(group, metric): value}) in display order.
    ``groups`` — (group name, [metric names]) column blocks.
    """
    columns: list[tuple[str, str]] = [
        (group, metric) for group, metrics in groups for metric in metrics
    ]
    header_cells = [f"{g}:{m}" if g else m for g, m in columns]

    body: list[list[str]] = []
    for label, values in rows:
        body.append(
            [label]
            + [_display_value(m, values.get((g, m))) for g, m in columns]
        )

    widths = [max(len("Method"), *(len(r[0]) for r in body))] if body else [len("Method")]
    for i, cell in enumerate(header_cells, start=1):
        col = [cell] + [r[i] for r in body]
        widths.append(max(len(c) for c in col))

    def fmt_row(cells: list[str]) -> str:
        return "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()

    lines = []
    if title:
        lines.append(title)
    lines.append(fmt_row(["Method"] + header_cells))
    lines.append("-" * len(lines[-1]))
    lines.extend(fmt_row(r) for r in body)
    return "\n".join(lines)


def report_json(
    rows: list[tuple[str, dict]],
    groups: list[tuple[str, list[str]]],
    title: str | None = None,
) -> str:
    """Machine-readable mirror of the rendered table (same scaled values)."""
    payload = {
        "title": title,
        "columns": [f"{g}:{m}" if g else m for g, ms in groups for m in ms],
        "rows": {
            label: {
                (f"{g}:{m}" if g else m): (
                    None if values.get((g, m)) is None
                    else float(_display_value(m, values.get((g, m))))
                )
                for g, ms in groups for m in ms
            }
            for label, values in rows
        },
    }
    return json.dumps(payload, sort_keys=True, indent=2)


METRIC_LAYOUT = {
    "rating": ["RMSE", "MAE"],
    "direct": ["HR@5", "NDCG@5", "HR@10", "NDCG@10"],
    "sequential": ["HR@5", "NDCG@5", "HR@10", "NDCG@10"],
    "explanation": ["BLEU2", "ROUGE1", "ROUGE2", "ROUGEL"],
    "summarization": ["BLEU2", "ROUGE1", "ROUGE2", "ROUGEL"],
}


def render_metric_report(report, label: str, domain: str) -> str:
    """Render one aggregate report as a single-row table."""
    metrics = METRIC_LAYOUT.get(report.task, sorted(report.metric_values))
    rows = [(label, {(domain, m): report.metric_values.get(m) for m in metrics})]
    table = render_table(rows, [(domain, metrics)])
    return (
        table
        + f"\nn_evaluated={report.n_evaluated} n_failed={report.n_failed}"
    )
