"""Probability of Correct Keypoint: percentage of predictions within a
threshold (a fraction of the table length) of the ground truth."""
from dataclasses import dataclass, field

import numpy as np


@dataclass
class PCKReport:
    per_object: list
    mean: float
    threshold: float
    n_eval: int
    labels: list = field(default_factory=list)

    def to_dict(self):
        return {
            "per_object": [float(v) for v in self.per_object],
            "mean": float(self.mean),
            "threshold": float(self.threshold),
            "n_eval": int(self.n_eval),
            "labels": list(self.labels),
        }


def pck(predictions, ground_truth, threshold, table_length=1.0, labels=None):
    """predictions/ground_truth (N, M, 2) -> PCKReport with per-object rows."""
    pred = np.asarray(predictions, dtype=np.float64)
    gt = np.asarray(ground_truth, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ValueError("prediction/ground-truth shape mismatch")
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    err = np.linalg.norm(pred - gt, axis=-1)  # (N, M)
    hit = err <= threshold * table_length
    per_object = 100.0 * hit.mean(axis=0)
    return PCKReport(
        per_object=[float(v) for v in per_object],
        mean=float(per_object.mean()),
        threshold=float(threshold),
        n_eval=int(pred.shape[0]),
        labels=list(labels) if labels else [f"object{i}" for i in range(pred.shape[1])],
    )


def pck_csv(report):
    lines = ["object,pck"]
    for name, val in zip(report.labels, report.per_object):
        lines.append(f"{name},{val!r}")
    lines.append(f"mean,{report.mean!r}")
    return "\n".join(lines) + "\n"
