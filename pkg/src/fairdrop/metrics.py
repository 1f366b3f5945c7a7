"""Confusion counts, utility metrics (accuracy, F1) and group-fairness metrics.

All functions operate on plain 0/1 prediction, label and group vectors so the
same code serves the validation phase (driving the search) and the test phase
(reporting).  Group-conditional rates with a zero denominator are *undefined*
and surface as ``None``; they are never silently replaced with 0, and any
metric depending on an undefined rate is itself ``None``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


@dataclass(frozen=True)
class GroupRates:
    """Per-group true-positive, false-positive and positive-prediction rates.

    Each field is a pair indexed by group (0, 1); entries are ``None`` when
    the group has no instances with the relevant label (or no instances at
    all, for ``positive_rate``).
    """

    tpr: tuple[float | None, float | None]
    fpr: tuple[float | None, float | None]
    positive_rate: tuple[float | None, float | None]


@dataclass(frozen=True)
class FairnessReport:
    eod: float | None
    dp_diff: float | None
    eo_diff: float | None
    group_rates: GroupRates

    def to_flat_dict(self) -> dict:
        """Flat metric-name -> value mapping; undefined values as "undefined"."""
        def enc(v):
            return "undefined" if v is None else v
        g = self.group_rates
        return {
            "eod": enc(self.eod),
            "dp_diff": enc(self.dp_diff),
            "eo_diff": enc(self.eo_diff),
            "tpr_0": enc(g.tpr[0]), "tpr_1": enc(g.tpr[1]),
            "fpr_0": enc(g.fpr[0]), "fpr_1": enc(g.fpr[1]),
            "positive_rate_0": enc(g.positive_rate[0]),
            "positive_rate_1": enc(g.positive_rate[1]),
        }


def _as_binary(name: str, values) -> np.ndarray:
    arr = np.asarray(values)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D")
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise ValueError(f"{name} must contain only 0 and 1")
    return arr.astype(np.int64)


def confusion(preds, labels) -> ConfusionCounts:
    p = _as_binary("preds", preds)
    y = _as_binary("labels", labels)
    if len(p) != len(y):
        raise ValueError(f"length mismatch: {len(p)} predictions vs {len(y)} labels")
    if len(p) == 0:
        raise ValueError("need at least one instance")
    tp = int(np.sum((p == 1) & (y == 1)))
    tn = int(np.sum((p == 0) & (y == 0)))
    fp = int(np.sum((p == 1) & (y == 0)))
    fn = int(np.sum((p == 0) & (y == 1)))
    return ConfusionCounts(tp=tp, tn=tn, fp=fp, fn=fn)


def f1(c: ConfusionCounts) -> float:
    """2*TP / (2*TP + FP + FN); 0.0 by convention when the denominator is 0."""
    denom = 2 * c.tp + c.fp + c.fn
    if denom == 0:
        return 0.0
    return 2.0 * c.tp / denom


def accuracy(c: ConfusionCounts) -> float:
    if c.total == 0:
        raise ValueError("accuracy undefined on zero instances")
    return (c.tp + c.tn) / c.total


def _rate(numer: int, denom: int) -> float | None:
    return None if denom == 0 else numer / denom


def fairness(preds, labels, protected) -> FairnessReport:
    """Group-conditional rates and fairness gaps for two protected groups.

    eod     = max(|tpr_0 - tpr_1|, |fpr_0 - fpr_1|)
    dp_diff = |positive_rate_0 - positive_rate_1|
    eo_diff = |tpr_0 - tpr_1|

    A gap is ``None`` whenever one of the rates it uses is undefined (a group
    missing entirely, or missing positive/negative labels).
    """
    p = _as_binary("preds", preds)
    y = _as_binary("labels", labels)
    a = _as_binary("protected", protected)
    if not (len(p) == len(y) == len(a)):
        raise ValueError(f"length mismatch: preds={len(p)}, labels={len(y)}, protected={len(a)}")

    tpr: list[float | None] = []
    fpr: list[float | None] = []
    pos_rate: list[float | None] = []
    for g in (0, 1):
        in_g = a == g
        pos = in_g & (y == 1)
        neg = in_g & (y == 0)
        tpr.append(_rate(int(np.sum(p[pos] == 1)), int(np.sum(pos))))
        fpr.append(_rate(int(np.sum(p[neg] == 1)), int(np.sum(neg))))
        pos_rate.append(_rate(int(np.sum(p[in_g] == 1)), int(np.sum(in_g))))

    eo_diff = None if tpr[0] is None or tpr[1] is None else abs(tpr[0] - tpr[1])
    fpr_gap = None if fpr[0] is None or fpr[1] is None else abs(fpr[0] - fpr[1])
    eod = None if eo_diff is None or fpr_gap is None else max(eo_diff, fpr_gap)
    dp_diff = (None if pos_rate[0] is None or pos_rate[1] is None
               else abs(pos_rate[0] - pos_rate[1]))
    rates = GroupRates(tpr=(tpr[0], tpr[1]), fpr=(fpr[0], fpr[1]),
                       positive_rate=(pos_rate[0], pos_rate[1]))
    return FairnessReport(eod=eod, dp_diff=dp_diff, eo_diff=eo_diff, group_rates=rates)
