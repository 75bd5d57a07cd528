"""
Task-sketch analysis: edit distance between primitive sequences, the
compositionality score and the medoid sketch used for transfer.

Every occurrence of an atomic primitive becomes its own token, unique across
all sketches being compared, so atomic actions never count as shared
structure.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from .pamdp import ContractViolation, PrimitiveType, TaskSketch

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SketchToken:
    kind: PrimitiveType
    sketch_id: Optional[int] = None
    occurrence: Optional[int] = None

    def __str__(self):
        if self.kind == PrimitiveType.ATOMIC:
            return f"atomic#{self.sketch_id}.{self.occurrence}"
        return self.kind.label


def tokenize(sketch: TaskSketch, sketch_id: int) -> List[SketchToken]:
    tokens = []
    for i, ptype in enumerate(sketch.tokens):
        if ptype == PrimitiveType.ATOMIC:
            tokens.append(SketchToken(ptype, sketch_id, i))
        else:
            tokens.append(SketchToken(ptype))
    return tokens


def levenshtein(a: Sequence, b: Sequence) -> int:
    """Unit-cost edit distance"""
    previous = list(range(len(b) + 1))
    for i, token_a in enumerate(a, start=1):
        current = [i] + [0] * len(b)
        for j, token_b in enumerate(b, start=1):
            current[j] = min(
                previous[j] + 1,
                current[j - 1] + 1,
                previous[j - 1] + (0 if token_a == token_b else 1),
            )
        previous = current
    return previous[-1]


def pair_score(a: Sequence[SketchToken], b: Sequence[SketchToken]) -> float:
    longest = max(len(a), len(b))
    if longest == 0:
        return 1.0
    return 1.0 - levenshtein(a, b) / longest


def compositionality(sketches: Sequence[TaskSketch]) -> float:
    """
    Average pairwise similarity 1 - d(K_i, K_j) / max(|K_i|, |K_j|) over the
    successful sketches.

    The sum over ordered pairs i != j equals twice the sum over unordered
    pairs, so the unordered mean is returned.

    Raises:
        ContractViolation: If fewer than two successful sketches are given
    """
    successful = [s for s in sketches if s.episode_success]
    if len(successful) < 2:
        raise ContractViolation(f"Compositionality needs at least 2 successful sketches, got {len(successful)}")
    tokenized = [tokenize(s, i) for i, s in enumerate(successful)]
    scores = [
        pair_score(tokenized[i], tokenized[j])
        for i in range(len(tokenized)) for j in range(i + 1, len(tokenized))
    ]
    return float(np.mean(scores))


def extract_medoid(sketches: Sequence[TaskSketch]) -> TaskSketch:
    """Sketch with the smallest summed distance to all others; ties go to shorter, then earlier"""
    if not sketches:
        raise ContractViolation("Cannot extract a medoid from an empty sketch set")
    tokenized = [tokenize(s, i) for i, s in enumerate(sketches)]
    best, best_key = 0, None
    for i, tokens in enumerate(tokenized):
        total = sum(levenshtein(tokens, other) for j, other in enumerate(tokenized) if j != i)
        key = (total, len(tokens), i)
        if best_key is None or key < best_key:
            best, best_key = i, key
    return sketches[best]


@dataclass
class SketchReport:
    task: str
    scores: Dict[int, float]
    medoid: Optional[TaskSketch]
    sketch_count: int
    success_count: int

    @property
    def mean(self) -> float:
        return float(np.mean(list(self.scores.values()))) if self.scores else float('nan')

    @property
    def std(self) -> float:
        return float(np.std(list(self.scores.values()))) if self.scores else float('nan')

    def as_text(self) -> str:
        lines = [
            f"task: {self.task}",
            f"sketches: {self.sketch_count}",
            f"successful: {self.success_count}",
            f"f_comp: {self.mean:.4f} +/- {self.std:.4f}",
        ]
        for seed, score in sorted(self.scores.items()):
            lines.append(f"f_comp[seed={seed}]: {score:.4f}")
        medoid = ' '.join(self.medoid.labels()) if self.medoid else '-'
        lines.append(f"medoid: {medoid}")
        return '\n'.join(lines)


def report(task: str, sketches_by_seed: Dict[int, Sequence[TaskSketch]]) -> SketchReport:
    """Per-seed compositionality plus the medoid over every successful sketch"""
    scores = {}
    successful_all = []
    total = 0
    for seed, sketches in sketches_by_seed.items():
        total += len(sketches)
        successful = [s for s in sketches if s.episode_success]
        successful_all.extend(successful)
        if len(successful) >= 2:
            scores[seed] = compositionality(successful)
        else:
            logger.warning(f"Seed {seed} of {task} has {len(successful)} successful sketches; skipped")
    medoid = extract_medoid(successful_all) if successful_all else None
    return SketchReport(task, scores, medoid, total, len(successful_all))
