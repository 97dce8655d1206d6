"""Numeric features and gain labels for the collaboration-gain regressor.

A training sample concatenates the anchoring learner's short vector, the
partner's short vector, and the domain-block embedding; its label is the
block-normalized difference between the paired score and the independent
baseline score.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Protocol, Sequence

import numpy as np

from .corpus import ExerciseBlock
from .hashing import stable_u64
from .personas import Learner, Persona
from .protocol import PairedResponseRecord, ResponseRecord

SHORT_DIM = 4  # two ternary axes for each side of the pair


class CoverageError(ValueError):
    """A record set does not cover exactly the exercises it must."""


class EmbeddingError(RuntimeError):
    """An embedding provider failed on a specific exercise."""


class EmbeddingProvider(Protocol):
    dim: int

    def embed(self, text: str) -> np.ndarray: ...


class HashingEmbedder:
    """Deterministic fallback embedder: signed feature hashing of character n-grams.

    Each 1-, 2- and 3-gram of the text lands in one of ``dim`` buckets with
    a +/-1 sign, both derived from a seeded 64-bit hash; the result is
    L2-normalized. The same text always maps to the same vector; distinct
    texts collide only if every n-gram contribution coincides, which for
    64-bit hashes is negligible in practice. Works on any script since it
    never tokenizes on whitespace.
    """

    def __init__(self, dim: int = 32, seed: int = 0, ngram_sizes: tuple[int, ...] = (1, 2, 3)):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.dim = dim
        self.seed = seed
        self.ngram_sizes = ngram_sizes

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dim, dtype=np.float64)
        for n in self.ngram_sizes:
            for i in range(len(text) - n + 1):
                h = stable_u64("ngram", str(self.seed), str(n), text[i : i + n])
                sign = 1.0 if h & 1 else -1.0
                vec[(h >> 1) % self.dim] += sign
        norm = float(np.linalg.norm(vec))
        if norm > 0.0:
            vec /= norm
        return vec


def learner_short_vector(persona: Persona) -> np.ndarray:
    """Raw ternary preferences as a length-2 float vector."""
    return np.array([float(persona.subject_pref), float(persona.logic_pref)])


def domain_vector(block: ExerciseBlock, emb: EmbeddingProvider) -> np.ndarray:
    """Mean of the member stems' embeddings; order within the block is irrelevant."""
    rows = []
    for exercise in block.exercises:
        try:
            rows.append(np.asarray(emb.embed(exercise.stem), dtype=np.float64))
        except Exception as exc:
            raise EmbeddingError(f"embedding failed for exercise {exercise.id!r}: {exc}") from exc
    return np.mean(rows, axis=0)


def build_sample_vector(
    learner: Learner,
    partner: Learner,
    block: ExerciseBlock,
    emb: EmbeddingProvider,
    domain_vec: np.ndarray | None = None,
) -> np.ndarray:
    """short(learner) + short(partner) + domain embedding, length 4 + dim."""
    if learner.id == partner.id:
        raise ValueError(f"learner {learner.id!r} cannot be its own partner")
    if domain_vec is None:
        domain_vec = domain_vector(block, emb)
    return np.concatenate(
        [learner_short_vector(learner.persona), learner_short_vector(partner.persona), domain_vec]
    )


def _scores_for_block(
    block: ExerciseBlock, records: Mapping[str, int], what: str
) -> int:
    wanted = [e.id for e in block.exercises]
    missing = [ex_id for ex_id in wanted if ex_id not in records]
    if missing:
        raise CoverageError(f"{what}: missing records for exercises {missing}")
    return sum(records[ex_id] for ex_id in wanted)


def _index_unique(pairs: Iterable[tuple[str, int]], what: str) -> dict[str, int]:
    out: dict[str, int] = {}
    for ex_id, r in pairs:
        if ex_id in out:
            raise CoverageError(f"{what}: duplicate record for exercise {ex_id!r}")
        out[ex_id] = r
    return out


def pair_gain(
    learner: Learner,
    partner: Learner,
    block: ExerciseBlock,
    paired_records: Iterable[PairedResponseRecord],
    solo_records: Iterable[ResponseRecord],
    baseline: str = "self",
) -> float:
    """Block-normalized paired score minus an independent baseline score.

    ``baseline="self"`` subtracts the anchoring learner's own solo score;
    ``baseline="partner"`` subtracts the partner's solo score instead. Both
    record sets must cover exactly the block's exercises for the relevant
    learner.
    """
    if baseline not in ("self", "partner"):
        raise ValueError(f"unknown baseline {baseline!r}")
    base_learner = learner.id if baseline == "self" else partner.id
    paired = _index_unique(
        (
            (rec.exercise_id, rec.r)
            for rec in paired_records
            if rec.learner_id == learner.id and rec.partner_id == partner.id
        ),
        f"paired records of ({learner.id}, {partner.id})",
    )
    solo = _index_unique(
        ((rec.exercise_id, rec.r) for rec in solo_records if rec.learner_id == base_learner),
        f"solo records of {base_learner}",
    )
    paired_sum = _scores_for_block(block, paired, f"paired ({learner.id}, {partner.id}) on {block.domain}")
    solo_sum = _scores_for_block(block, solo, f"solo {base_learner} on {block.domain}")
    return (paired_sum - solo_sum) / len(block)


@dataclass(frozen=True, eq=False)
class Sample:
    """One regression sample with its provenance."""

    x: np.ndarray
    y: float
    learner_id: str
    partner_id: str
    domain: str


def build_dataset(
    cohort: Mapping[str, Learner],
    blocks: Sequence[ExerciseBlock],
    paired_records: Iterable[PairedResponseRecord],
    solo_records: Iterable[ResponseRecord],
    emb: EmbeddingProvider,
    baseline: str = "self",
) -> list[Sample]:
    """One sample per ordered learner pair per block, sorted by (learner, partner, domain)."""
    paired_records = list(paired_records)
    solo_records = list(solo_records)
    domain_vecs = {block.domain: domain_vector(block, emb) for block in blocks}
    samples: list[Sample] = []
    ids = sorted(cohort)
    for learner_id in ids:
        for partner_id in ids:
            if partner_id == learner_id:
                continue
            learner, partner = cohort[learner_id], cohort[partner_id]
            for block in sorted(blocks, key=lambda b: b.domain):
                y = pair_gain(learner, partner, block, paired_records, solo_records, baseline)
                x = build_sample_vector(learner, partner, block, emb, domain_vecs[block.domain])
                samples.append(Sample(x=x, y=y, learner_id=learner_id, partner_id=partner_id, domain=block.domain))
    return samples


def dataset_arrays(samples: Sequence[Sample]) -> tuple[np.ndarray, np.ndarray]:
    X = np.stack([s.x for s in samples])
    y = np.array([s.y for s in samples])
    return X, y


def save_dataset(samples: Sequence[Sample], path: str | Path) -> None:
    """Delimited export; x-column count pins the embedding dimension."""
    if not samples:
        raise ValueError("nothing to export")
    dim = samples[0].x.shape[0] - SHORT_DIM
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["l_id", "ℓ_id", "domain", "y"] + [f"x_{i}" for i in range(SHORT_DIM + dim)])
        for s in samples:
            writer.writerow(
                [s.learner_id, s.partner_id, s.domain, repr(float(s.y))] + [repr(float(v)) for v in s.x]
            )


def load_dataset(path: str | Path) -> list[Sample]:
    with open(path, encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        n_x = len(header) - 4
        samples = []
        for row in reader:
            samples.append(
                Sample(
                    x=np.array([float(v) for v in row[4 : 4 + n_x]]),
                    y=float(row[3]),
                    learner_id=row[0],
                    partner_id=row[1],
                    domain=row[2],
                )
            )
        return samples
