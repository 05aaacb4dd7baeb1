"""Static per-layer parameter and multiply-add accounting.

Counting conventions:
  * one multiply-add = one op (not two FLOPs);
  * conv ops = out_h * out_w * out_ch * in_ch * kh * kw, linear ops =
    out * in; bias adds, pooling comparisons, relu, softmax cost nothing;
  * parameters are reported both with and without biases; diffs against
    the published table use the bias-inclusive count.

Auxiliary-head blocks are tallied separately and excluded from the
inference totals (they are discarded at inference time).
"""

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from . import reference
from .errors import FormatError


@dataclass
class CostRow:
    block: str
    label: str
    params_with_bias: int
    params_weights_only: int
    mult_adds: int
    train_only: bool = False
    table1_params: int | None = None
    table1_ops: int | None = None
    rel_diff_params: float | None = None
    rel_diff_ops: float | None = None
    verdict_params: str | None = None
    verdict_ops: str | None = None


@dataclass
class CostReport:
    rows: list
    aux_rows: list
    meta: dict = field(default_factory=dict)
    compared: bool = False

    @property
    def total_params_with_bias(self):
        return sum(r.params_with_bias for r in self.rows)

    @property
    def total_params_weights_only(self):
        return sum(r.params_weights_only for r in self.rows)

    @property
    def total_mult_adds(self):
        return sum(r.mult_adds for r in self.rows)

    @property
    def aux_params_with_bias(self):
        return sum(r.params_with_bias for r in self.aux_rows)


def _node_costs(node, shapes):
    s = node.spec
    if s.kind == "conv":
        weights = s.out_channels * s.in_channels * s.k * s.k
        _, oh, ow = shapes[node.name]
        return weights, s.out_channels, weights * oh * ow
    if s.kind == "linear":
        weights = s.out_channels * s.in_channels
        return weights, s.out_channels, weights
    return 0, 0, 0


def count_params(graph):
    """Per-block (weights_only, with_bias) parameter counts."""
    shapes = graph.infer_shapes()
    out = {}
    for node in graph.nodes:
        weights, biases, _ = _node_costs(node, shapes)
        w, b = out.get(node.block, (0, 0))
        out[node.block] = (w + weights, b + weights + biases)
    return {blk: {"weights_only": w, "with_bias": b} for blk, (w, b) in out.items()}


def count_ops(graph):
    """Per-block multiply-add counts for one forward pass at batch 1."""
    shapes = graph.infer_shapes()
    out = {}
    for node in graph.nodes:
        _, _, macs = _node_costs(node, shapes)
        out[node.block] = out.get(node.block, 0) + macs
    return out


def cost_report(graph):
    params = count_params(graph)
    macs = count_ops(graph)
    rows, aux_rows = [], []
    for block in graph.blocks():
        if block == "input":
            continue
        aux = block.startswith("aux")
        row = CostRow(
            block=block,
            label=reference.ROW_LABELS.get(block, block),
            params_with_bias=params[block]["with_bias"],
            params_weights_only=params[block]["weights_only"],
            mult_adds=macs[block],
            train_only=aux,
        )
        (aux_rows if aux else rows).append(row)
    return CostReport(rows=rows, aux_rows=aux_rows, meta=dict(graph.meta))


def _classify(rel):
    if rel <= 0.05:
        return "match"
    if rel <= 0.15:
        return "near"
    return "discrepant"


def diff_against_table1(report):
    """Attach the published reference values row by row.

    The report's inference rows must line up with the reference table
    block for block; a mismatch means the topology drifted and is an error.
    """
    blocks = [r.block for r in report.rows]
    expected = [b for b, _, _, _ in reference.TABLE1]
    if blocks != expected:
        raise FormatError(
            f"report rows {blocks} do not line up with the reference table {expected}"
        )
    for row, (_, _, ref_params, ref_ops) in zip(report.rows, reference.TABLE1):
        row.table1_params, row.table1_ops = ref_params, ref_ops
        if ref_params is not None:
            row.rel_diff_params = abs(row.params_with_bias - ref_params) / ref_params
            row.verdict_params = _classify(row.rel_diff_params)
        if ref_ops is not None:
            row.rel_diff_ops = abs(row.mult_adds - ref_ops) / ref_ops
            row.verdict_ops = _classify(row.rel_diff_ops)
    report.compared = True
    return report


def unexpected_discrepancies(report):
    """Rows classified discrepant that are not the known erratum rows."""
    bad = []
    for row in report.rows:
        if "discrepant" in (row.verdict_params, row.verdict_ops):
            if row.block not in reference.EXPECTED_DISCREPANT:
                bad.append(row.block)
    return bad


@dataclass
class BudgetVerdicts:
    applicable: bool
    total_mult_adds: int = 0
    ops_within_budget: bool = False
    total_params: int = 0
    params_within_budget: bool = False
    param_ratio_vs_60m: float = 0.0
    ratio_at_least_8x: bool = False


def budget_check(report):
    """Check the headline budgets: ~1.5e9 multiply-adds at inference and
    parameters small enough to undercut a 60M-parameter baseline by >= 8x.

    Only defined for the full-width network; width-divided minis report
    not-applicable.
    """
    if report.meta.get("divisor") != "1" or report.meta.get("classes") != "1000":
        return BudgetVerdicts(applicable=False)
    ops_total = report.total_mult_adds
    params_total = report.total_params_with_bias
    ratio = 60e6 / params_total
    return BudgetVerdicts(
        applicable=True,
        total_mult_adds=ops_total,
        ops_within_budget=1.4e9 <= ops_total <= 1.7e9,
        total_params=params_total,
        params_within_budget=6.0e6 <= params_total <= 7.5e6,
        param_ratio_vs_60m=ratio,
        ratio_at_least_8x=ratio >= 8.0,
    )


def _fmt_count(n):
    if n >= 1_000_000:
        return f"{n / 1e6:.1f}M"
    if n >= 1_000:
        return f"{n / 1e3:.1f}K"
    return str(n)


def format_report(report, fmt="table"):
    """Render as an aligned text table or CSV."""
    header = [
        "layer", "params", "params(w/o bias)", "ops",
        "table1 params", "table1 ops", "d(params)", "d(ops)", "verdict",
    ]
    body = []
    for row in report.rows + report.aux_rows:
        verdict = ""
        if row.verdict_params or row.verdict_ops:
            worst = max(
                (v for v in (row.verdict_params, row.verdict_ops) if v),
                key=("match", "near", "discrepant").index,
            )
            verdict = worst
        if row.train_only:
            verdict = "train-only"
        body.append([
            row.label if not row.train_only else f"{row.block} (train only)",
            str(row.params_with_bias),
            str(row.params_weights_only),
            str(row.mult_adds),
            "" if row.table1_params is None else _fmt_count(row.table1_params),
            "" if row.table1_ops is None else _fmt_count(row.table1_ops),
            "" if row.rel_diff_params is None else f"{row.rel_diff_params:+.1%}"[1:],
            "" if row.rel_diff_ops is None else f"{row.rel_diff_ops:+.1%}"[1:],
            verdict,
        ])
    body.append([
        "total (inference)",
        str(report.total_params_with_bias),
        str(report.total_params_weights_only),
        str(report.total_mult_adds),
        "", "", "", "", "",
    ])
    if report.aux_rows:
        body.append(["total (aux, excluded)", str(report.aux_params_with_bias), "", "", "", "", "", "", ""])
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(header)
        writer.writerows(body)
        return buf.getvalue()
    widths = [max(len(h), *(len(r[i]) for r in body)) for i, h in enumerate(header)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip()]
    lines += ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in body]
    return "\n".join(lines) + "\n"


def instantiated_param_count(params):
    """Element count of actual parameter arrays (independent check path)."""
    return int(sum(np.prod(p.shape) for p in params.values()))
