"""Synthetic ordinal grading benchmark.

Every sample has a latent quality ``u ~ Uniform(0.5, 5.5)``. Its response
holds ``evidence_tokens`` words, each drawn from a positive word pool with
probability ``(u - 0.5) / 5`` and from a negative pool otherwise, mixed with
filler words. The gold score is ``clamp(round(u + N(0, label_noise)), 1, 5)``,
so the five classes are equally frequent. Instruction, rubric and reference
text carry no quality signal.

Preference pairs share instruction, rubric and reference; their label
follows the latent quality, and the two sides differ by at least
``min_gap``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .dataset import GradedSample
from .losses import NUM_CLASSES
from .relative import Preference, PreferencePair
from .seeding import derive_rng

POSITIVE_WORDS = (
    "accurate clear correct thorough relevant precise helpful complete concise coherent "
    "insightful grounded consistent logical detailed specific rigorous valid factual polished"
).split()
NEGATIVE_WORDS = (
    "vague wrong incomplete irrelevant confusing sloppy misleading shallow rambling incoherent "
    "unsupported inconsistent illogical generic erroneous partial careless invalid fabricated muddled"
).split()
FILLER_WORDS = 300
RUBRIC_WORDS = 60
LOW, HIGH = 0.5, NUM_CLASSES + 0.5


@dataclass(frozen=True)
class SyntheticSpec:
    n: int = 10_000
    seed: int = 0
    evidence_tokens: int = 40
    filler_tokens: int = 10
    label_noise: float = 0.35
    rubric_prob: float = 1.0
    reference_prob: float = 1.0

    def to_dict(self) -> dict:
        return asdict(self)


def _words(rng, prefix, vocab, count):
    return [f"{prefix}{k}" for k in rng.integers(0, vocab, count)]


def _response(rng, u, spec: SyntheticSpec) -> str:
    positive = rng.random(spec.evidence_tokens) < (u - LOW) / (HIGH - LOW)
    pos = rng.integers(0, len(POSITIVE_WORDS), spec.evidence_tokens)
    neg = rng.integers(0, len(NEGATIVE_WORDS), spec.evidence_tokens)
    words = [POSITIVE_WORDS[a] if keep else NEGATIVE_WORDS[b] for keep, a, b in zip(positive, pos, neg)]
    words += _words(rng, "fw", FILLER_WORDS, spec.filler_tokens)
    rng.shuffle(words)
    return " ".join(words)


def _context(rng, spec: SyntheticSpec):
    instruction = " ".join(_words(rng, "iw", FILLER_WORDS, 8))
    rubric = " ".join(_words(rng, "rw", RUBRIC_WORDS, 6)) if rng.random() < spec.rubric_prob else None
    reference = None
    if rng.random() < spec.reference_prob:
        reference = " ".join(_words(rng, "aw", FILLER_WORDS, 8))
    return instruction, rubric, reference


def gold_score(u: float, noise: float) -> int:
    return int(np.clip(np.rint(u + noise), 1, NUM_CLASSES))


def generate_samples(spec: SyntheticSpec = SyntheticSpec()) -> tuple[list[GradedSample], np.ndarray]:
    """Return the samples and their latent qualities."""
    rng = derive_rng(spec.seed, "synthetic-samples")
    samples = []
    latent = np.empty(spec.n)
    for i in range(spec.n):
        u = rng.uniform(LOW, HIGH)
        latent[i] = u
        instruction, rubric, reference = _context(rng, spec)
        samples.append(
            GradedSample(
                id=f"syn-{i:06d}",
                instruction=instruction,
                response=_response(rng, u, spec),
                rubric=rubric,
                reference_answer=reference,
                score=gold_score(u, rng.normal(0.0, spec.label_noise)),
            )
        )
    return samples, latent


def generate_pairs(n: int, seed: int = 0, min_gap: float = 1.0, spec: SyntheticSpec = SyntheticSpec()) -> list[PreferencePair]:
    rng = derive_rng(seed, "synthetic-pairs")
    pairs = []
    for i in range(n):
        while True:
            u_a, u_b = rng.uniform(LOW, HIGH, 2)
            if abs(u_a - u_b) >= min_gap:
                break
        instruction, rubric, reference = _context(rng, spec)
        pairs.append(
            PreferencePair(
                id=f"pair-{i:06d}",
                instruction=instruction,
                response_a=_response(rng, u_a, spec),
                response_b=_response(rng, u_b, spec),
                label=Preference.A if u_a > u_b else Preference.B,
                rubric=rubric,
                reference_answer=reference,
            )
        )
    return pairs
