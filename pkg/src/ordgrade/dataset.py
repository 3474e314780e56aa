"""Graded-sample records, splitting, rubric/reference dropout and featurization.

Records are line-delimited JSON objects with the fields ``id``,
``instruction``, ``response``, ``rubric``, ``reference_answer`` and
``score``. Missing or null optional fields mean "absent".

The featurizer is a signed feature-hashing bag of tokens. It stands in for
a language-model encoder so that the heads and losses can be trained and
compared on a CPU.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from ._backend import kernels
from .errors import DataValidationError, InvalidInputError, InvalidParameterError
from .losses import NUM_CLASSES
from .seeding import derive_rng

DEFAULT_DIM = 256
_TOKEN_RE = re.compile(r"[^\W_]+")
_FIELDS = ("instruction", "response", "rubric", "reference_answer")


@dataclass(frozen=True)
class GradedSample:
    id: str
    instruction: str
    response: str
    rubric: Optional[str] = None
    reference_answer: Optional[str] = None
    score: int = 0

    def validate(self, line: Optional[int] = None) -> "GradedSample":
        for name in ("instruction", "response"):
            value = getattr(self, name)
            if not isinstance(value, str) or not value:
                raise DataValidationError(f"{name} must be a non-empty string", line)
        for name in ("rubric", "reference_answer"):
            value = getattr(self, name)
            if value is not None and not isinstance(value, str):
                raise DataValidationError(f"{name} must be a string or null", line)
        if isinstance(self.score, bool) or not isinstance(self.score, int) or not 1 <= self.score <= NUM_CLASSES:
            raise DataValidationError(f"score must be an integer in 1..{NUM_CLASSES}, got {self.score!r}", line)
        return self

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "instruction": self.instruction,
            "response": self.response,
            "rubric": self.rubric,
            "reference_answer": self.reference_answer,
            "score": self.score,
        }

    @classmethod
    def from_dict(cls, d: dict, line: Optional[int] = None) -> "GradedSample":
        if not isinstance(d, dict):
            raise DataValidationError("record must be a JSON object", line)
        score = d.get("score")
        if isinstance(score, float) and score.is_integer():
            score = int(score)
        sample = cls(
            id=str(d.get("id", "" if line is None else f"line-{line}")),
            instruction=d.get("instruction"),
            response=d.get("response"),
            rubric=d.get("rubric"),
            reference_answer=d.get("reference_answer"),
            score=score,
        )
        return sample.validate(line)


def iter_jsonl(path) -> Iterable[tuple[int, dict]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                yield lineno, json.loads(raw)
            except json.JSONDecodeError as exc:
                raise DataValidationError(f"malformed JSON ({exc.msg})", lineno) from None


def load_dataset(path) -> list[GradedSample]:
    return [GradedSample.from_dict(rec, lineno) for lineno, rec in iter_jsonl(path)]


def dump_jsonl(records: Iterable[dict], path) -> None:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=False))
            fh.write("\n")


def write_dataset(samples: Iterable[GradedSample], path) -> None:
    dump_jsonl((s.to_dict() for s in samples), path)


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.95
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise InvalidParameterError("train_fraction must lie strictly between 0 and 1")


def split(samples: Sequence, spec: SplitSpec = SplitSpec()):
    """Seeded shuffle then cut. ``len(train) == round(train_fraction * n)``
    with halves rounded up."""
    n = len(samples)
    if n < 2:
        raise InvalidInputError("need at least 2 samples to split")
    perm = derive_rng(spec.seed, "split").permutation(n)
    n_train = int(math.floor(spec.train_fraction * n + 0.5))
    train = [samples[i] for i in perm[:n_train]]
    validation = [samples[i] for i in perm[n_train:]]
    return train, validation


@dataclass(frozen=True)
class AugmentSpec:
    drop_rubric_prob: float = 0.5
    drop_reference_prob: float = 0.5
    seed: int = 0

    def __post_init__(self):
        for name in ("drop_rubric_prob", "drop_reference_prob"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise InvalidParameterError(f"{name} must lie in [0, 1]")


def augment(samples: Sequence[GradedSample], spec: AugmentSpec = AugmentSpec()) -> list[GradedSample]:
    """Independently drop the rubric and the reference answer of each sample."""
    draws = derive_rng(spec.seed, "augment").random((len(samples), 2))
    out = []
    for sample, (u_rubric, u_ref) in zip(samples, draws):
        changes = {}
        if u_rubric < spec.drop_rubric_prob:
            changes["rubric"] = None
        if u_ref < spec.drop_reference_prob:
            changes["reference_answer"] = None
        out.append(replace(sample, **changes) if changes else sample)
    return out


# ---------------------------------------------------------------------------


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def field_tokens(fields: dict) -> list[bytes]:
    # tokens are namespaced by field so that rubric words and response words hash apart
    out = []
    for name in _FIELDS:
        text = fields.get(name)
        if text is None:
            continue
        out.append(f"{name}:<present>".encode())
        out.extend(f"{name}:{tok}".encode() for tok in tokenize(text))
    return out


def featurize(sample, dim: int = DEFAULT_DIM) -> np.ndarray:
    """Unit-norm hashed bag-of-tokens vector for one sample."""
    if dim < 8:
        raise InvalidParameterError("feature dimension must be at least 8")
    fields = sample if isinstance(sample, dict) else sample.to_dict()
    vec = np.zeros(dim, dtype=np.float64)
    kernels.hash_tokens(field_tokens(fields), vec)
    norm = math.sqrt(float(np.dot(vec, vec)))
    if norm == 0.0:
        vec[0] = 1.0
        return vec
    return vec / norm


def featurize_many(samples: Sequence, dim: int = DEFAULT_DIM) -> np.ndarray:
    out = np.empty((len(samples), dim), dtype=np.float64)
    for i, s in enumerate(samples):
        out[i] = featurize(s, dim)
    return out


def scores_of(samples: Sequence[GradedSample]) -> np.ndarray:
    return np.array([s.score for s in samples], dtype=np.int64)
