"""Mask-level detection metrics: sensitivity, precision, F1, AUROC."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

# Field order of the key=value report.
REPORT_FIELDS = (
    "images", "tp", "fp", "fn", "tn", "sensitivity", "precision", "f1",
    "auroc", "threshold_used", "median_sensitivity", "median_precision",
    "median_f1",
)


@dataclass
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp,
                               self.fn + other.fn, self.tn + other.tn)

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def rates(self) -> tuple[float, float, float]:
        return rates(self)


def _check_dims(a, b):
    if np.shape(a) != np.shape(b):
        raise ValueError(f"dimension mismatch: {np.shape(a)} vs {np.shape(b)}")


def confusion(pred: np.ndarray, gt: np.ndarray) -> ConfusionCounts:
    pred = np.asarray(pred, dtype=bool)
    gt = np.asarray(gt, dtype=bool)
    _check_dims(pred, gt)
    return ConfusionCounts(
        tp=int(np.sum(pred & gt)), fp=int(np.sum(pred & ~gt)),
        fn=int(np.sum(~pred & gt)), tn=int(np.sum(~pred & ~gt)),
    )


def f1_score(sens: float, prec: float) -> float:
    if sens + prec == 0:
        return 0.0
    return 2.0 * sens * prec / (sens + prec)


def rates(c: ConfusionCounts) -> tuple[float, float, float]:
    """Sensitivity, precision, F1; empty denominators count as perfect."""
    sens = c.tp / (c.tp + c.fn) if c.tp + c.fn else 1.0
    prec = c.tp / (c.tp + c.fp) if c.tp + c.fp else 1.0
    return sens, prec, f1_score(sens, prec)


def binary_metrics(pred: np.ndarray, gt: np.ndarray):
    c = confusion(pred, gt)
    return c, *rates(c)


def type_overlaps(pred: np.ndarray, type_masks: dict) -> dict[str, tuple[int, int]]:
    """``{type: (hits, size)}`` for every type with a non-empty mask."""
    pred = np.asarray(pred, dtype=bool)
    out = {}
    for kind, mask in type_masks.items():
        mask = np.asarray(mask, dtype=bool)
        _check_dims(pred, mask)
        size = int(mask.sum())
        if size:
            out[kind] = (int(np.sum(pred & mask)), size)
    return out


def per_type_sensitivity(pred: np.ndarray, type_masks: dict) -> dict[str, float]:
    return {k: hit / size for k, (hit, size) in type_overlaps(pred, type_masks).items()}


def auroc(scores: np.ndarray, gt: np.ndarray) -> float:
    """P(random positive outscores random negative), ties count one half."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    gt = np.asarray(gt, dtype=bool).ravel()
    _check_dims(scores, gt)
    n_pos = int(gt.sum())
    n_neg = gt.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUROC needs both positive and negative cells")
    ranks = rankdata(scores)
    return float((ranks[gt].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


@dataclass
class QCReport:
    counts: ConfusionCounts
    per_type_sensitivity: dict[str, float]
    auroc: float | None = None
    threshold_used: float | None = None
    per_image: list[tuple[float, float, float]] = field(default_factory=list)
    config: dict = field(default_factory=dict)

    @property
    def sensitivity(self) -> float:
        return rates(self.counts)[0]

    @property
    def precision(self) -> float:
        return rates(self.counts)[1]

    @property
    def f1(self) -> float:
        return rates(self.counts)[2]

    def records(self) -> list[tuple[str, object]]:
        med = (np.median(np.array(self.per_image), axis=0)
               if self.per_image else (None, None, None))
        values = {
            "images": len(self.per_image), "tp": self.counts.tp, "fp": self.counts.fp,
            "fn": self.counts.fn, "tn": self.counts.tn, "sensitivity": self.sensitivity,
            "precision": self.precision, "f1": self.f1, "auroc": self.auroc,
            "threshold_used": self.threshold_used, "median_sensitivity": med[0],
            "median_precision": med[1], "median_f1": med[2],
        }
        recs = [(k, values[k]) for k in REPORT_FIELDS]
        recs += [(f"sensitivity.{k}", v) for k, v in sorted(self.per_type_sensitivity.items())]
        recs += [(f"config.{k}", v) for k, v in sorted(self.config.items())]
        return recs

    def to_text(self) -> str:
        def fmt(v):
            if v is None:
                return "na"
            if isinstance(v, (float, np.floating)):
                return repr(float(v))
            return str(v)

        return "".join(f"{k}={fmt(v)}\n" for k, v in self.records())


def pool(samples) -> QCReport:
    """Micro-average over ``(pred, union_mask, type_masks)`` triples."""
    counts = ConfusionCounts()
    hits: dict[str, list[int]] = {}
    per_image = []
    for pred, gt, type_masks in samples:
        c = confusion(pred, gt)
        counts = counts + c
        per_image.append(rates(c))
        for kind, (hit, size) in type_overlaps(pred, type_masks or {}).items():
            acc = hits.setdefault(kind, [0, 0])
            acc[0] += hit
            acc[1] += size
    per_type = {k: h / s for k, (h, s) in hits.items()}
    return QCReport(counts, per_type, per_image=per_image)
