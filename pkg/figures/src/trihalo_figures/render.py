"""Figure rendering from harness CSV data.

Three kinds:
  convergence        log error vs log h, one panel per scheme, dashed h^g
                     guide lines anchored at the first non-plateau point
  runtime            mean apply time vs patch size, one series per scheme
  construction-share construction vs total time per scheme and patch size

Axis limits come from the data, so a fixed input renders identically.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .io import FigureInputError, read_bench, read_convergence

FIGURE_KINDS = ("convergence", "runtime", "construction-share")

_SCHEME_ORDER = ("tensor_linear", "matrix_linear", "order2", "order3")
_SCHEME_LABELS = {
    "tensor_linear": "per-axis linear",
    "matrix_linear": "matrix linear",
    "order2": "second order",
    "order3": "third order",
}


@dataclass(frozen=True)
class FigureSpec:
    csv_paths: tuple[str, ...]
    kind: str
    output: str
    guide_orders: tuple[int, ...] = field(default=(2, 3, 4))

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise FigureInputError(f"kind must be one of {FIGURE_KINDS}, got {self.kind!r}")
        if not self.csv_paths:
            raise FigureInputError("at least one input CSV is required")


def _scheme_sort_key(scheme: str):
    return (_SCHEME_ORDER.index(scheme) if scheme in _SCHEME_ORDER else len(_SCHEME_ORDER), scheme)


def _label(scheme: str) -> str:
    return _SCHEME_LABELS.get(scheme, scheme)


def _render_convergence(spec: FigureSpec):
    rows = [r for path in spec.csv_paths for r in read_convergence(path)]
    schemes = sorted({r.scheme for r in rows}, key=_scheme_sort_key)
    fig, axes = plt.subplots(
        1, len(schemes), figsize=(4.0 * len(schemes), 3.4), squeeze=False, sharey=True
    )
    for ax, scheme in zip(axes[0], schemes):
        sub = sorted((r for r in rows if r.scheme == scheme), key=lambda r: -r.h)
        h = np.array([r.h for r in sub])
        ax.loglog(h, [r.err_max for r in sub], "o-", label="max norm")
        ax.loglog(h, [r.err_l2 for r in sub], "s--", label="l2 norm")

        anchors = [r for r in sub if not r.plateau] or sub
        a = anchors[0]
        for g in spec.guide_orders:
            ax.loglog(h, a.err_max * (h / a.h) ** g, ":", color="grey",
                      label=f"h^{g}", linewidth=1.0)
        errs = [r.err_max for r in sub] + [r.err_l2 for r in sub]
        ax.set_xlim(h.max() * 1.3, h.min() / 1.3)  # h decreasing to the right
        ax.set_ylim(min(errs) / 5.0, max(errs) * 5.0)
        ax.set_title(_label(scheme))
        ax.set_xlabel("h")
        ax.grid(True, which="both", alpha=0.25)
    axes[0][0].set_ylabel("error")
    axes[0][-1].legend(fontsize=8)
    fig.tight_layout()
    return fig


def _render_runtime(spec: FigureSpec):
    rows = [r for path in spec.csv_paths for r in read_bench(path)]
    rows = [r for r in rows if r.phase == "apply"]
    if not rows:
        raise FigureInputError("no rows with phase=apply")
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    for scheme in sorted({r.scheme for r in rows}, key=_scheme_sort_key):
        sub = sorted((r for r in rows if r.scheme == scheme), key=lambda r: r.p)
        ax.plot([r.p for r in sub], [r.mean_ns / 1e3 for r in sub], "o-", label=_label(scheme))
    ax.set_yscale("log")
    ps = sorted({r.p for r in rows})
    ax.set_xticks(ps)
    ax.set_xlabel("patch size p")
    ax.set_ylabel("mean apply time [us]")
    ax.grid(True, which="both", alpha=0.25)
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


def _render_construction_share(spec: FigureSpec):
    rows = [r for path in spec.csv_paths for r in read_bench(path)]
    apply_rows = {(r.scheme, r.p): r.mean_ns for r in rows if r.phase == "apply"}
    construct_rows = {(r.scheme, r.p): r.mean_ns for r in rows if r.phase == "construct"}
    keys = sorted(set(apply_rows) & set(construct_rows),
                  key=lambda sp: (_scheme_sort_key(sp[0]), sp[1]))
    if not keys:
        raise FigureInputError("no (scheme, p) pairs with both apply and construct phases")
    fig, ax = plt.subplots(figsize=(max(5.0, 1.1 * len(keys)), 3.6))
    x = np.arange(len(keys))
    construct = np.array([construct_rows[kk] / 1e6 for kk in keys])
    total = construct + np.array([apply_rows[kk] / 1e6 for kk in keys])
    ax.bar(x - 0.2, total, width=0.4, label="construction + apply")
    ax.bar(x + 0.2, construct, width=0.4, label="construction")
    ax.set_yscale("log")
    ax.set_xticks(x)
    ax.set_xticklabels([f"{_label(s)}\np={p}" for s, p in keys], fontsize=7)
    ax.set_ylabel("time [ms]")
    share = ax.twinx()
    share.plot(x, 100.0 * construct / total, "k.--", label="construction share")
    share.set_ylabel("construction share [%]")
    share.set_ylim(0.0, 105.0)
    ax.legend(fontsize=8, loc="upper left")
    fig.tight_layout()
    return fig


_RENDERERS = {
    "convergence": _render_convergence,
    "runtime": _render_runtime,
    "construction-share": _render_construction_share,
}


def render(spec: FigureSpec):
    """Render the figure and write it to spec.output; returns the Figure."""
    fig = _RENDERERS[spec.kind](spec)
    out = Path(spec.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=150)
    return fig
