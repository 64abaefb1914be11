"""Report stage: summary tables, curve data, and plots over completed runs.

Input config lists completed eval runs by config reference:

    stage: report
    pck:
      - {label: slot-4block, config: ../eval/pck_slot4.yaml, series: slot}
    policy:
      - {label: slot-s0, config: ../eval/policy_slot_s0.yaml, group: slot_masks}
    sweep: ../sweep/k_sweep.yaml

Everything emitted is a pure function of the referenced artifacts; wall-clock
lives only in the ledger so reports stay byte-stable.
"""
import json

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from ..policy import aggregate_eval
from .config import resolve_ref
from .runner import write_json_atomic


def _completed(entry, cfg, stage):
    run = resolve_ref(entry if isinstance(entry, str) else entry["config"], cfg,
                      expect_stage=stage)
    if not (run / "status.json").exists():
        raise FileNotFoundError(f"missing inputs: {run} has no completed result")
    return run


def _pck_rows(cfg):
    rows = []
    for entry in cfg.get("pck", []):
        run = _completed(entry, cfg, "eval-pck")
        rep = json.loads((run / "pck.json").read_text())
        rows.append(
            {
                "label": entry["label"],
                "series": entry.get("series", entry["label"]),
                "n_blocks": len(rep["labels"]) - 1,  # labels = blocks + effector
                "mean_pck": rep["mean"],
                "per_object": dict(zip(rep["labels"], rep["per_object"])),
                "hash": run.name,
            }
        )
    return rows


def _policy_rows(cfg):
    rows = []
    for entry in cfg.get("policy", []):
        run = _completed(entry, cfg, "eval-policy")
        rep = json.loads((run / "eval.json").read_text())
        rows.append(
            {
                "label": entry["label"],
                "group": entry.get("group", rep["variant"]),
                "variant": rep["variant"],
                "episodes": entry.get("episodes", rep.get("episodes")),
                "seed": rep["seed"],
                "rate": rep["rate"],
                "success_pct": 100.0 * rep["rate"],
                "hash": run.name,
                "_raw": rep,
            }
        )
    return rows


def _policy_aggregate(rows):
    """Per (group, episodes): success aggregated over seeds."""
    agg = []
    keys = sorted({(r["group"], r["episodes"]) for r in rows}, key=str)
    for group, episodes in keys:
        members = [r for r in rows if (r["group"], r["episodes"]) == (group, episodes)]
        report = aggregate_eval({r["seed"]: r["_raw"] for r in members})
        agg.append(
            {
                "group": group,
                "episodes": episodes,
                "n_seeds": len(members),
                **report.to_dict(),
            }
        )
    return agg


def _success_curves(agg):
    """Per group, rates over the episode regimes in ascending order."""
    curves = []
    for group in sorted({a["group"] for a in agg}):
        pts = sorted(
            (a for a in agg if a["group"] == group and a["episodes"] is not None),
            key=lambda a: a["episodes"],
        )
        if pts:
            curves.append(
                {
                    "group": group,
                    "episodes": [p["episodes"] for p in pts],
                    "mean": [p["mean"] for p in pts],
                    "sd": [p["sd"] for p in pts],
                }
            )
    return curves


def _plot_pck(rows, path):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for series in sorted({r["series"] for r in rows}):
        pts = sorted((r for r in rows if r["series"] == series),
                     key=lambda r: r["n_blocks"])
        ax.plot([r["n_blocks"] for r in pts], [r["mean_pck"] for r in pts],
                marker="o", label=series)
    ax.set_xlabel("blocks in scene")
    ax.set_ylabel("mean PCK@0.1")
    ax.set_ylim(0, 100)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _plot_success(curves, path):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for c in curves:
        means = [100 * m for m in c["mean"]]
        sds = [100 * s for s in c["sd"]]
        ax.errorbar(c["episodes"], means, yerr=sds, marker="o", capsize=3,
                    label=c["group"])
    ax.set_xlabel("episodes in training data")
    ax.set_ylabel("success (%)")
    ax.set_ylim(0, 100)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _plot_sweep(sweep, path):
    rows = sweep["rows"]
    param = sweep["param"]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    xs = [r[param] for r in rows]
    ax.plot(xs, [r["mean_pck"] for r in rows], marker="s", color="tab:purple")
    ax.set_xlabel(param)
    ax.set_xticks(xs)
    ax.set_ylabel("mean PCK@0.1")
    ax.set_ylim(0, 100)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def build_report(cfg, run_dir):
    pck_rows = _pck_rows(cfg)
    policy_rows = _policy_rows(cfg)
    sweep = None
    if cfg.get("sweep"):
        run = _completed(cfg["sweep"], cfg, "sweep")
        sweep = json.loads((run / "sweep.json").read_text())
    if not (pck_rows or policy_rows or sweep):
        raise ValueError("report needs at least one completed result")

    agg = _policy_aggregate(policy_rows) if policy_rows else []
    curves = _success_curves(agg)
    for r in policy_rows:
        r.pop("_raw")

    report = {
        "pck": pck_rows,
        "policy": {"runs": policy_rows, "aggregate": agg, "curves": curves},
        "sweep": sweep,
    }
    write_json_atomic(run_dir / "report.json", report)

    lines = ["section,label,x,value"]
    for r in pck_rows:
        lines.append(f"pck,{r['label']},{r['n_blocks']},{r['mean_pck']!r}")
    for r in policy_rows:
        lines.append(f"policy,{r['label']},{r['episodes']},{r['rate']!r}")
    for a in agg:
        lines.append(f"policy-mean,{a['group']},{a['episodes']},{a['mean']!r}")
    if sweep:
        for r in sweep["rows"]:
            lines.append(f"sweep,{sweep['param']},{r[sweep['param']]},{r['mean_pck']!r}")
    (run_dir / "summary.csv").write_text("\n".join(lines) + "\n")

    if pck_rows:
        _plot_pck(pck_rows, run_dir / "pck_vs_blocks.png")
    if curves:
        _plot_success(curves, run_dir / "success_vs_episodes.png")
    if sweep:
        _plot_sweep(sweep, run_dir / "sweep.png")

    return {
        "n_pck": len(pck_rows),
        "n_policy": len(policy_rows),
        "has_sweep": bool(sweep),
    }
