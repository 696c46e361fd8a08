"""Deterministic dataset reduction.

All randomness goes through a PCG64 generator seeded from the policy, so a
(manifest, policy, seed) triple always yields the same subset, byte for
byte. The algorithm identifier ("pcg64") is recorded in subset provenance
so results are auditable.

Interval convention: k sorted edges define k-1 strata, half-open on the
right except the final stratum which is closed; out-of-range scores are
clamped to the nearest stratum and counted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np

from .corpus import Manifest, Utterance

PRNG_ID = "pcg64"

VARIANTS = ("stratified_fraction", "per_speaker_count", "global_fraction",
            "fixed_count", "identity")


@dataclass
class SamplingPolicy:
    variant: str = "identity"
    edges: list[float] | None = None
    fraction: float | None = None
    n: int | None = None
    seed: int = 0

    def validate(self) -> None:
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown sampling variant '{self.variant}'")
        if self.variant == "stratified_fraction":
            if not self.edges or len(self.edges) < 2:
                raise ValueError("stratified_fraction needs >= 2 edges")
            if any(b <= a for a, b in zip(self.edges, self.edges[1:])):
                raise ValueError("edges must be strictly increasing")
            if self.fraction is None or not (0.0 < self.fraction <= 1.0):
                raise ValueError("fraction must be in (0, 1]")
        if self.variant == "global_fraction":
            if self.fraction is None or not (0.0 < self.fraction <= 1.0):
                raise ValueError("fraction must be in (0, 1]")
        if self.variant in ("per_speaker_count", "fixed_count"):
            if self.n is None or self.n < 1:
                raise ValueError("n must be >= 1")

    @classmethod
    def from_dict(cls, d: dict) -> "SamplingPolicy":
        policy = cls(**{k: v for k, v in d.items() if k in
                        ("variant", "edges", "fraction", "n", "seed")})
        policy.validate()
        return policy

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}


def round_half_away(x: float) -> int:
    """round() with halves away from zero (2.5 -> 3), not banker's."""
    return int(math.floor(x + 0.5)) if x >= 0 else -int(math.floor(-x + 0.5))


def stratify(utts: list[Utterance], edges: list[float]) -> tuple[list[list[Utterance]], int]:
    """Bucket utterances by strat score into len(edges)-1 strata.

    Returns (strata, clamped_count). Scores outside [edges[0], edges[-1]]
    are clamped to the nearest stratum and tallied.
    """
    edges_arr = np.asarray(edges, dtype=np.float64)
    k = len(edges) - 1
    strata: list[list[Utterance]] = [[] for _ in range(k)]
    clamped = 0
    for utt in utts:
        if utt.score is None:
            raise ValueError(f"utterance '{utt.id}' missing strat score")
        s = float(utt.score)
        if s < edges_arr[0]:
            strata[0].append(utt)
            clamped += 1
            continue
        if s > edges_arr[-1]:
            strata[-1].append(utt)
            clamped += 1
            continue
        i = int(np.searchsorted(edges_arr, s, side="right")) - 1
        strata[min(i, k - 1)].append(utt)
    return strata, clamped


def _stratum_take(count: int, fraction: float) -> int:
    if count == 0:
        return 0
    return min(count, max(1, round_half_away(fraction * count)))


def sample_stratified(strata: list[list[Utterance]], fraction: float,
                      seed: int) -> tuple[list[Utterance], list[int]]:
    """Per-stratum seeded subsample; returns (subset, per-stratum counts)."""
    rng = np.random.Generator(np.random.PCG64(seed))
    out: list[Utterance] = []
    counts: list[int] = []
    for stratum in strata:
        take = _stratum_take(len(stratum), fraction)
        order = rng.permutation(len(stratum))
        out.extend(stratum[j] for j in order[:take])
        counts.append(take)
    return out, counts


def sample_per_speaker(utts: list[Utterance], n: int, seed: int) -> list[Utterance]:
    """Up to n utterances per speaker; speakers with fewer contribute all."""
    rng = np.random.Generator(np.random.PCG64(seed))
    by_speaker: dict[str, list[Utterance]] = {}
    for utt in utts:
        if utt.speaker is None:
            raise ValueError(f"utterance '{utt.id}' missing speaker_id")
        by_speaker.setdefault(utt.speaker, []).append(utt)
    out: list[Utterance] = []
    for speaker in sorted(by_speaker):
        pool = by_speaker[speaker]
        order = rng.permutation(len(pool))
        out.extend(pool[j] for j in order[: min(n, len(pool))])
    return out


def subsample_count(utts: list[Utterance], n: int, seed: int) -> list[Utterance]:
    """Exactly n items, seeded; identity (with a warning) if n >= len."""
    if n >= len(utts):
        if n > len(utts):
            import warnings
            warnings.warn(f"requested {n} items from {len(utts)}; returning all")
        return list(utts)
    rng = np.random.Generator(np.random.PCG64(seed))
    order = rng.permutation(len(utts))
    return [utts[j] for j in order[:n]]


@dataclass
class SampleInfo:
    policy: dict
    seed: int
    prng: str = PRNG_ID
    input_size: int = 0
    output_size: int = 0
    strata_counts: list[int] = field(default_factory=list)
    clamped: int = 0


def apply_policy(manifest: Manifest, policy: SamplingPolicy) -> tuple[Manifest, SampleInfo]:
    """Run a sampling policy over a manifest; returns subset + provenance."""
    policy.validate()
    utts = list(manifest.utterances)
    info = SampleInfo(policy=policy.to_dict(), seed=policy.seed,
                      input_size=len(utts))

    if policy.variant == "identity":
        subset = utts
    elif policy.variant == "global_fraction":
        take = _stratum_take(len(utts), policy.fraction)
        rng = np.random.Generator(np.random.PCG64(policy.seed))
        order = rng.permutation(len(utts))
        subset = [utts[j] for j in order[:take]]
    elif policy.variant == "stratified_fraction":
        strata, clamped = stratify(utts, policy.edges)
        subset, counts = sample_stratified(strata, policy.fraction, policy.seed)
        info.strata_counts = counts
        info.clamped = clamped
    elif policy.variant == "per_speaker_count":
        subset = sample_per_speaker(utts, policy.n, policy.seed)
    else:  # fixed_count
        subset = subsample_count(utts, policy.n, policy.seed)

    info.output_size = len(subset)
    header = {
        "__header__": "sampled-subset",
        "policy": info.policy,
        "seed": info.seed,
        "prng": info.prng,
        "input_size": info.input_size,
        "output_size": info.output_size,
        "strata_counts": info.strata_counts,
        "clamped": info.clamped,
    }
    return Manifest(subset, header=header), info
