"""Rating metrics, selection quality against planted masks, and reward-curve scaling."""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ShapeError

NORMALIZE_EPS = 1e-3


def _pairs(preds, golds):
    preds, golds = list(preds), list(golds)
    if len(preds) != len(golds):
        raise DomainError(f"{len(preds)} predictions for {len(golds)} gold ratings")
    if not preds:
        raise DomainError("no predictions to score")
    return preds, golds


def accuracy(preds, golds) -> float:
    preds, golds = _pairs(preds, golds)
    return sum(int(p == g) for p, g in zip(preds, golds)) / len(preds)


def mse(preds, golds) -> float:
    preds, golds = _pairs(preds, golds)
    return sum((float(p) - float(g)) ** 2 for p, g in zip(preds, golds)) / len(preds)


def _flatten(mask, gold, path="mask"):
    """Yield aligned (pred, gold) bits from two nested 0/1 structures."""
    if isinstance(gold, (list, tuple, np.ndarray)):
        if not isinstance(mask, (list, tuple, np.ndarray)) or len(mask) != len(gold):
            got = len(mask) if isinstance(mask, (list, tuple, np.ndarray)) else "scalar"
            raise ShapeError(f"{path}: predicted length {got} does not match gold {len(gold)}")
        for k, (m, g) in enumerate(zip(mask, gold)):
            yield from _flatten(m, g, f"{path}[{k}]")
    else:
        if isinstance(mask, (list, tuple, np.ndarray)):
            raise ShapeError(f"{path}: predicted is nested where gold is a single bit")
        yield int(bool(mask)), int(bool(gold))


@dataclass(frozen=True)
class SelectionScore:
    precision: float
    recall: float
    f1: float
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def to_dict(self):
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1,
                "tp": self.tp, "fp": self.fp, "fn": self.fn}


def selection_metrics(predicted, gold) -> SelectionScore:
    """Micro-averaged precision, recall and F1 over nested 0/1 masks.

    An empty prediction has precision 0 against a non-empty gold mask and 1
    when both are empty; recall is 1 when there is nothing to find.
    """
    tp = fp = fn = 0
    for p, g in _flatten(predicted, gold):
        tp += p & g
        fp += p & (1 - g)
        fn += (1 - p) & g
    n_pred, n_gold = tp + fp, tp + fn
    if n_pred:
        precision = tp / n_pred
    else:
        precision = 0.0 if n_gold else 1.0
    recall = tp / n_gold if n_gold else 1.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return SelectionScore(precision, recall, f1, tp, fp, fn)


@dataclass
class RewardSeries:
    raw: list[float]
    normalized: list[float]

    def to_dict(self):
        return {"raw": self.raw, "normalized": self.normalized}


def normalize_rewards(series, eps: float = NORMALIZE_EPS) -> RewardSeries:
    """Min-max map onto ``[eps, 1 - eps]``; the raw series is kept alongside."""
    raw = [float(x) for x in series]
    if any(not math.isfinite(x) for x in raw):
        raise DomainError("reward series contains non-finite values")
    if len(set(raw)) < 2:
        raise DomainError("degenerate reward series")
    lo, hi = min(raw), max(raw)
    scale = (1.0 - 2.0 * eps) / (hi - lo)
    return RewardSeries(raw, [eps + (x - lo) * scale for x in raw])


# ------------------------------------------------------------------ evaluation


@dataclass
class EvalResult:
    accuracy: float
    mse: float
    n: int
    num_classes: int
    per_aspect: dict = field(default_factory=dict)
    clause: SelectionScore | None = None
    word: SelectionScore | None = None
    fallback: int = 0
    split: str = ""
    decode: str = "greedy"

    def records(self) -> list[dict]:
        """Line-delimited structured records: one overall, one per aspect."""
        head = {"record": "overall", "split": self.split, "decode": self.decode,
                "rating_scale": self.num_classes, "n": self.n, "accuracy": self.accuracy,
                "mse": self.mse, "fallback_random": self.fallback,
                "clause_selection": self.clause.to_dict() if self.clause else None,
                "word_selection": self.word.to_dict() if self.word else None}
        out = [head]
        for name in sorted(self.per_aspect):
            out.append({"record": "aspect", "aspect": name, **self.per_aspect[name]})
        return out

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.records())

    def summary(self) -> str:
        lines = [f"split {self.split or '-'}  decode {self.decode}  ratings 1-{self.num_classes}",
                 f"{'aspect':<14}{'n':>6}{'acc':>9}{'mse':>9}"]
        for name in sorted(self.per_aspect):
            a = self.per_aspect[name]
            lines.append(f"{name:<14}{a['n']:>6}{a['accuracy']:>9.4f}{a['mse']:>9.4f}")
        lines.append(f"{'all':<14}{self.n:>6}{self.accuracy:>9.4f}{self.mse:>9.4f}")
        for label, s in (("clause", self.clause), ("word", self.word)):
            if s is not None:
                lines.append(f"{label} selection  P {s.precision:.4f}  R {s.recall:.4f}  "
                             f"F1 {s.f1:.4f}")
        lines.append(f"fallback-random predictions: {self.fallback}")
        return "\n".join(lines) + "\n"


def _score_item(model, doc, query, greedy, seed, index):
    rng = np.random.default_rng([seed, index])
    ro = model.rollout(doc, query.aspect, None, rng, greedy=greedy)
    return ro.predicted, ro.fallback, ro.clause_mask, ro.word_masks(doc)


def evaluate(model, docs, greedy: bool = True, seed: int = 0, threads: int = 1,
             split: str = "") -> EvalResult:
    """Decode every aspect query and score ratings and selections.

    Each query draws from its own RNG substream keyed by its position, so
    results do not depend on ``threads``.
    """
    items = [(doc, q) for doc in docs for q in doc.queries]
    if not items:
        raise DomainError("no aspect queries to evaluate")
    if threads < 1:
        raise DomainError("threads must be >= 1")
    # fill the per-document caches up front so workers only read shared state
    for doc in docs:
        model.clause_vectors(doc)
    jobs = [(doc, q, greedy, seed, k) for k, (doc, q) in enumerate(items)]
    if threads == 1:
        outs = [_score_item(model, *j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outs = list(pool.map(lambda j: _score_item(model, *j), jobs))

    preds = [o[0] for o in outs]
    golds = [q.rating for _, q in items]
    per = {}
    for name in sorted({q.aspect for _, q in items}):
        idx = [k for k, (_, q) in enumerate(items) if q.aspect == name]
        p, g = [preds[k] for k in idx], [golds[k] for k in idx]
        per[name] = {"n": len(idx), "accuracy": accuracy(p, g), "mse": mse(p, g)}

    clause = word = None
    with_masks = [k for k, (_, q) in enumerate(items) if q.gold_clause_mask is not None]
    if with_masks:
        clause = selection_metrics([outs[k][2] for k in with_masks],
                                   [items[k][1].gold_clause_mask for k in with_masks])
        wk = [k for k in with_masks if items[k][1].gold_word_masks is not None]
        if wk:
            word = selection_metrics([outs[k][3] for k in wk],
                                     [items[k][1].gold_word_masks for k in wk])
    return EvalResult(accuracy(preds, golds), mse(preds, golds), len(items),
                      model.config.num_classes, per, clause, word,
                      sum(int(o[1]) for o in outs), split, "greedy" if greedy else "sample")
