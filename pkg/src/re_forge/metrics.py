"""Learning-rate schedule, weighted loss and classification scores.

Score conventions: any 0/0 precision, recall or F1 is 0; macro F1 averages
only classes with gold support; weighted F1 is the support-weighted mean of
per-class F1.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

from .errors import EmptyInput, InvalidDistribution, InvalidStep, LengthMismatch, MalformedRow, ReForgeError
from .model import CprGroup

# Training constants recorded for completeness; no optimizer or training
# loop lives in this package.
LR_FACTOR = 0.0005
WARM_UP = 1000
ADAM_WEIGHT_DECAY = 0.01
EARLY_STOPPING_PATIENCE = 6
EPOCHS = 5
REPEATED_RUNS = 5
TOP_MODEL_HIDDEN = (1024, 1024)

CE_EPSILON = 1e-12


@dataclass(frozen=True)
class ScheduleParams:
    lr_factor: float = LR_FACTOR
    warm_up: int = WARM_UP

    def __post_init__(self):
        if not self.lr_factor > 0:
            raise ReForgeError("lr_factor must be positive")
        if self.warm_up < 1:
            raise ReForgeError("warm_up must be at least 1")


def lr_schedule(step, p: ScheduleParams = ScheduleParams()) -> float:
    """``lr_factor * min(step**-0.5, step * warm_up**-1.5)``.

    The warm-up branch is evaluated as ``(step / warm_up) * warm_up**-0.5``,
    which is the same quantity and makes both branches agree bit-for-bit at
    ``step == warm_up``.
    """
    if step < 1:
        raise InvalidStep(f"step must be >= 1, got {step}")
    decay = step ** -0.5
    warm = (step / p.warm_up) * p.warm_up ** -0.5
    return p.lr_factor * min(decay, warm)


def weighted_loss(losses: Sequence[float], weights: Sequence[float]) -> float:
    if len(losses) != len(weights):
        raise LengthMismatch(f"{len(losses)} losses but {len(weights)} weights")
    if any(w < 0 for w in weights):
        raise ReForgeError("weights must be non-negative")
    return math.fsum(w * l for l, w in zip(losses, weights))


def cross_entropy(probabilities: Sequence[float], gold_index: int) -> float:
    """``-ln(max(p_gold, 1e-12))`` for a proper distribution."""
    if any(p < 0 for p in probabilities) or abs(math.fsum(probabilities) - 1.0) > 1e-9:
        raise InvalidDistribution("probabilities must be non-negative and sum to 1")
    if not 0 <= gold_index < len(probabilities):
        raise InvalidDistribution(f"gold index {gold_index} out of range")
    return -math.log(max(probabilities[gold_index], CE_EPSILON))


@dataclass(frozen=True)
class ClassCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    support: int = 0


def _sort_key(label):
    if isinstance(label, CprGroup):
        return (0, label.value, "")
    if isinstance(label, (int, float)):
        return (1, label, "")
    return (2, 0, str(label))


def confusion(gold: Sequence, pred: Sequence) -> dict:
    """One-vs-rest counts for every label seen in gold or pred, in label order."""
    if len(gold) != len(pred):
        raise LengthMismatch(f"{len(gold)} gold labels but {len(pred)} predictions")
    tp, fp, fn, support = {}, {}, {}, {}
    for label in set(gold) | set(pred):
        tp[label] = fp[label] = fn[label] = support[label] = 0
    for g, p in zip(gold, pred):
        support[g] += 1
        if g == p:
            tp[g] += 1
        else:
            fp[p] += 1
            fn[g] += 1
    return {
        label: ClassCounts(tp[label], fp[label], fn[label], support[label])
        for label in sorted(tp, key=_sort_key)
    }


@dataclass(frozen=True)
class ClassScores:
    precision: float
    recall: float
    f1: float
    support: float


@dataclass
class EvalReport:
    per_class: dict
    micro_f1: float
    macro_f1: float
    weighted_f1: float
    runs: int = 1
    std: Optional[dict] = None

    def to_dict(self) -> dict:
        def name(label):
            return label.label if isinstance(label, CprGroup) else str(label)

        body = {
            "per_class": {
                name(k): {"precision": v.precision, "recall": v.recall, "f1": v.f1, "support": v.support}
                for k, v in self.per_class.items()
            },
            "micro_f1": self.micro_f1,
            "macro_f1": self.macro_f1,
            "weighted_f1": self.weighted_f1,
            "runs": self.runs,
        }
        if self.std is not None:
            body["std"] = {k: (v if not isinstance(v, dict) else {name(c): s for c, s in v.items()})
                           for k, v in self.std.items()}
        return body

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_table(self) -> str:
        """Per-class P/R/F rows with an aggregate footer."""
        def name(label):
            return f"CPR-{label.value}" if isinstance(label, CprGroup) else str(label)

        width = max([len(name(k)) for k in self.per_class] + [11])
        out = [f"{'':<{width}}  {'P':>6}  {'R':>6}  {'F':>6}  {'support':>8}"]
        for label, s in self.per_class.items():
            out.append(f"{name(label):<{width}}  {s.precision:6.4f}  {s.recall:6.4f}  {s.f1:6.4f}  {s.support:8g}")
        out.append("-" * len(out[0]))
        for title, key in (("Micro F1", "micro_f1"), ("Macro F1", "macro_f1"), ("Weighted F1", "weighted_f1")):
            line = f"{title:<{width}}  {getattr(self, key):6.4f}"
            if self.std is not None:
                line += f"  (std dev {self.std[key]:.4f})"
            out.append(line)
        if self.runs > 1:
            out.append(f"averaged over {self.runs} runs")
        return "\n".join(out) + "\n"


def _div(a, b):
    return a / b if b else 0.0


def scores(counts: Mapping) -> EvalReport:
    per_class = {}
    for label, c in counts.items():
        p = _div(c.tp, c.tp + c.fp)
        r = _div(c.tp, c.tp + c.fn)
        f = _div(2 * p * r, p + r)
        per_class[label] = ClassScores(p, r, f, c.support)
    supported = [label for label, c in counts.items() if c.support > 0]
    total = sum(counts[label].support for label in supported)
    macro = _div(math.fsum(per_class[label].f1 for label in supported), len(supported))
    weighted = _div(math.fsum(counts[label].support * per_class[label].f1 for label in supported), total)
    tp = sum(c.tp for c in counts.values())
    fp = sum(c.fp for c in counts.values())
    fn = sum(c.fn for c in counts.values())
    micro = _div(2 * tp, 2 * tp + fp + fn)
    return EvalReport(per_class, micro, macro, weighted)


def evaluate(gold: Sequence, pred: Sequence) -> EvalReport:
    return scores(confusion(gold, pred))


def _mean_std(values):
    n = len(values)
    mean = math.fsum(values) / n
    var = math.fsum((v - mean) ** 2 for v in values) / n
    return mean, math.sqrt(var)


def aggregate_runs(reports: Sequence[EvalReport]) -> EvalReport:
    """Element-wise mean with population standard deviation (divisor n).

    Per-class values are averaged over the runs in which the class appears.
    """
    if not reports:
        raise EmptyInput("aggregate_runs needs at least one report")
    std = {}
    agg = {}
    for key in ("micro_f1", "macro_f1", "weighted_f1"):
        agg[key], std[key] = _mean_std([getattr(r, key) for r in reports])
    labels = []
    for r in reports:
        for label in r.per_class:
            if label not in labels:
                labels.append(label)
    labels.sort(key=_sort_key)
    per_class = {}
    per_class_std = {}
    for label in labels:
        rows = [r.per_class[label] for r in reports if label in r.per_class]
        p, _ = _mean_std([s.precision for s in rows])
        rec, _ = _mean_std([s.recall for s in rows])
        f, f_std = _mean_std([s.f1 for s in rows])
        sup, _ = _mean_std([s.support for s in rows])
        per_class[label] = ClassScores(p, rec, f, sup)
        per_class_std[label] = f_std
    std["per_class_f1"] = per_class_std
    return EvalReport(per_class, agg["micro_f1"], agg["macro_f1"], agg["weighted_f1"], len(reports), std)


# -- prediction files --------------------------------------------------------

def _parse_class(text: str):
    try:
        return CprGroup.parse(text)
    except ValueError:
        return text


def read_labels_tsv(content: str, column: int = 1) -> dict:
    """``instance_id -> label`` from a tab-separated file; CPR labels are parsed."""
    out = {}
    for lineno, line in enumerate(content.replace("\r", "").split("\n"), start=1):
        if not line or line.startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) <= column:
            raise MalformedRow(f"line {lineno}: expected at least {column + 1} columns")
        if cols[0] in out:
            raise MalformedRow(f"line {lineno}: duplicate instance id {cols[0]}")
        out[cols[0]] = _parse_class(cols[column])
    return out


def read_predictions_tsv(content: str):
    """Parse ``instance_id TAB gold TAB pred`` rows into ``(ids, gold, pred)``."""
    gold = read_labels_tsv(content, 1)
    pred = read_labels_tsv(content, 2)
    ids = list(gold)
    return ids, [gold[i] for i in ids], [pred[i] for i in ids]
