"""Confusion matrix, OA/AA/kappa metrics, and report serialization."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from btckit.errors import ConfigError, DataFormatError


@dataclass(frozen=True)
class EvalReport:
    """Confusion counts (rows = truth) plus summary accuracy statistics."""

    confusion: np.ndarray
    per_class_acc: np.ndarray
    oa: float
    aa: float
    kappa: float
    elapsed_s: float = 0.0
    config: dict = field(default_factory=dict)

    def to_text(self) -> str:
        lines = [
            f"oa={self.oa:.6f}",
            f"aa={self.aa:.6f}",
            f"kappa={self.kappa:.6f}",
            f"elapsed_s={self.elapsed_s:.3f}",
            "per_class_acc=" + ",".join(f"{a:.6f}" for a in self.per_class_acc),
        ]
        for i, row in enumerate(self.confusion, start=1):
            lines.append(f"confusion_row_{i}=" + ",".join(str(int(v)) for v in row))
        for key, value in self.config.items():
            lines.append(f"config.{key}={value}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        return json.dumps(
            {
                "oa": self.oa,
                "aa": self.aa,
                "kappa": self.kappa,
                "confusion": self.confusion.astype(int).tolist(),
                "per_class_acc": self.per_class_acc.tolist(),
                "elapsed_s": self.elapsed_s,
                "config": self.config,
            },
            indent=2,
        )


def evaluate(
    predicted: np.ndarray,
    truth: np.ndarray,
    elapsed_s: float = 0.0,
    config: dict | None = None,
) -> EvalReport:
    """Compute OA, AA, and Cohen's kappa; unlabeled truth entries (0) are excluded.

    AA averages per-class recall over classes that actually occur in the
    truth. Kappa uses the chance-agreement correction
    (p_o - p_e) / (1 - p_e); when chance agreement is 1, kappa is defined
    as 1 for perfect agreement and an error otherwise.
    """
    predicted = np.asarray(predicted, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if predicted.shape != truth.shape:
        raise DataFormatError(
            f"length mismatch: {predicted.shape} predictions vs {truth.shape} truth"
        )
    keep = truth > 0
    predicted, truth = predicted[keep], truth[keep]
    total = truth.size
    if total == 0:
        raise DataFormatError("no labeled samples after exclusions")

    n_classes = int(max(truth.max(), predicted.max()))
    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(confusion, (truth - 1, predicted - 1), 1)

    row_sums = confusion.sum(axis=1)
    col_sums = confusion.sum(axis=0)
    diag = np.diag(confusion)

    oa = float(diag.sum() / total)
    present = row_sums > 0
    per_class = np.zeros(n_classes)
    per_class[present] = diag[present] / row_sums[present]
    aa = float(per_class[present].mean())

    p_e = float((row_sums * col_sums).sum() / total**2)
    if p_e >= 1.0:
        if oa == 1.0:
            kappa = 1.0
        else:
            raise ConfigError("kappa undefined: chance agreement is 1 with imperfect OA")
    else:
        kappa = float((oa - p_e) / (1.0 - p_e))

    return EvalReport(
        confusion=confusion,
        per_class_acc=per_class,
        oa=oa,
        aa=aa,
        kappa=kappa,
        elapsed_s=elapsed_s,
        config=config or {},
    )
