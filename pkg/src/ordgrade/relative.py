"""Pairwise preference judging with an absolute scorer.

Each side of a pair is scored independently, so the outcome cannot depend
on which response is shown first.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .dataset import featurize_many, iter_jsonl
from .errors import DataValidationError, InvalidInputError, InvalidParameterError
from .scorer import ScorerModel, predict_scores


class Preference(str, enum.Enum):
    A = "A"
    B = "B"
    TIE = "Tie"

    @classmethod
    def parse(cls, value) -> "Preference":
        if isinstance(value, Preference):
            return value
        text = str(value).strip().lower()
        for member in cls:
            if member.value.lower() == text:
                return member
        raise ValueError(f"unknown preference label {value!r}")

    def swapped(self) -> "Preference":
        return {Preference.A: Preference.B, Preference.B: Preference.A}.get(self, self)


@dataclass(frozen=True)
class PreferencePair:
    id: str
    instruction: str
    response_a: str
    response_b: str
    label: Preference
    rubric: Optional[str] = None
    reference_answer: Optional[str] = None

    def side(self, which: str) -> dict:
        return {
            "instruction": self.instruction,
            "response": self.response_a if which == "a" else self.response_b,
            "rubric": self.rubric,
            "reference_answer": self.reference_answer,
        }

    def swapped(self) -> "PreferencePair":
        return PreferencePair(self.id, self.instruction, self.response_b, self.response_a,
                              self.label.swapped(), self.rubric, self.reference_answer)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "instruction": self.instruction,
            "rubric": self.rubric,
            "reference_answer": self.reference_answer,
            "response_a": self.response_a,
            "response_b": self.response_b,
            "label": self.label.value,
        }

    @classmethod
    def from_dict(cls, d: dict, line: Optional[int] = None) -> "PreferencePair":
        if not isinstance(d, dict):
            raise DataValidationError("record must be a JSON object", line)
        for name in ("instruction", "response_a", "response_b"):
            if not isinstance(d.get(name), str) or not d[name]:
                raise DataValidationError(f"{name} must be a non-empty string", line)
        for name in ("rubric", "reference_answer"):
            if d.get(name) is not None and not isinstance(d[name], str):
                raise DataValidationError(f"{name} must be a string or null", line)
        try:
            label = Preference.parse(d.get("label"))
        except ValueError as exc:
            raise DataValidationError(str(exc), line) from None
        return cls(str(d.get("id", f"line-{line}")), d["instruction"], d["response_a"], d["response_b"],
                   label, d.get("rubric"), d.get("reference_answer"))


def load_pairs(path) -> list[PreferencePair]:
    return [PreferencePair.from_dict(rec, lineno) for lineno, rec in iter_jsonl(path)]


@dataclass(frozen=True)
class PreferenceResult:
    predicted: Preference
    score_a: float
    score_b: float

    @property
    def margin(self) -> float:
        return abs(self.score_a - self.score_b)


def decide(score_a: float, score_b: float, tie_epsilon: float = 0.0) -> Preference:
    if tie_epsilon < 0 or math.isnan(tie_epsilon):
        raise InvalidParameterError("tie_epsilon must be >= 0")
    if not (math.isfinite(score_a) and math.isfinite(score_b)):
        raise InvalidInputError("scores must be finite")
    if score_a - score_b > tie_epsilon:
        return Preference.A
    if score_b - score_a > tie_epsilon:
        return Preference.B
    return Preference.TIE


def pairwise_accuracy(predicted: Sequence, gold: Sequence) -> float:
    """Fraction of exact label matches. A predicted tie is right only
    against a gold tie."""
    if len(predicted) == 0:
        raise InvalidInputError("accuracy of an empty set is undefined")
    if len(predicted) != len(gold):
        raise InvalidInputError("predicted and gold lengths differ")
    hits = 0
    for p, g in zip(predicted, gold):
        p = p.predicted if isinstance(p, PreferenceResult) else Preference.parse(p)
        hits += p is Preference.parse(g)
    return hits / len(predicted)


def score_pairs(model: ScorerModel, pairs: Sequence[PreferencePair]) -> tuple[np.ndarray, np.ndarray]:
    if not pairs:
        raise InvalidInputError("no pairs to judge")
    feats_a = featurize_many([p.side("a") for p in pairs], model.input_dim)
    feats_b = featurize_many([p.side("b") for p in pairs], model.input_dim)
    score_a, _ = predict_scores(model, feats_a)
    score_b, _ = predict_scores(model, feats_b)
    return score_a, score_b


def judge_pairs(model: ScorerModel, pairs: Sequence[PreferencePair], tie_epsilon: float = 0.0):
    """Return ``(results, accuracy)`` for ``pairs`` at one tie margin."""
    score_a, score_b = score_pairs(model, pairs)
    results = [PreferenceResult(decide(a, b, tie_epsilon), float(a), float(b)) for a, b in zip(score_a, score_b)]
    return results, pairwise_accuracy(results, [p.label for p in pairs])


def accuracy_by_epsilon(model: ScorerModel, pairs: Sequence[PreferencePair], epsilons=(0.0, 0.25, 0.5)) -> dict[float, float]:
    score_a, score_b = score_pairs(model, pairs)
    gold = [p.label for p in pairs]
    out = {}
    for eps in epsilons:
        preds = [decide(a, b, eps) for a, b in zip(score_a, score_b)]
        out[float(eps)] = pairwise_accuracy(preds, gold)
    return out
