"""Timing and synthetic matching experiments for SOT encryption."""

from __future__ import annotations

import csv
import io
import statistics
import time
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import sot
from .template import FeatureTemplate, Role, biological_distance

__all__ = [
    "BENCH_HEADER",
    "BenchReport",
    "BenchRow",
    "DegenerateNoiseWarning",
    "bench_sot",
    "bench_templates",
    "synthetic_match_experiment",
]

BENCH_HEADER = ("n", "m", "batch", "mean_ms", "stddev_ms")
DEFAULT_NS = (480, 600, 960)


class DegenerateNoiseWarning(UserWarning):
    pass


@dataclass(frozen=True)
class BenchRow:
    n: int
    m: int
    batch: int
    mean_ms: float
    stddev_ms: float


@dataclass
class BenchReport:
    rows: list[BenchRow]
    repetitions: int

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(BENCH_HEADER)
        for r in self.rows:
            writer.writerow([r.n, r.m, r.batch, f"{r.mean_ms:.6f}", f"{r.stddev_ms:.6f}"])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "repetitions": self.repetitions,
            "rows": [dict(zip(BENCH_HEADER, (r.n, r.m, r.batch, r.mean_ms, r.stddev_ms))) for r in self.rows],
        }

    def row(self, n: int, m: int) -> BenchRow:
        for r in self.rows:
            if (r.n, r.m) == (n, m):
                return r
        raise KeyError((n, m))


def bench_templates(n: int, m: int, batch: int, seed: int) -> tuple[sot.SotKey, list[FeatureTemplate]]:
    """The key and template batch a grid cell times; a pure function of its inputs."""
    rng = np.random.default_rng([seed, n, m])
    key = sot.keygen(n, m, rng)
    templates = [FeatureTemplate(v, Role.REFERENCE) for v in rng.standard_normal((batch, n))]
    return key, templates


def bench_sot(
    ns: Sequence[int] = DEFAULT_NS,
    ms: Sequence[int] = (1, 2, 3, 4, 5),
    batch: int = 100,
    repetitions: int = 5,
    seed: int = 0,
) -> BenchReport:
    """Time ``encrypt_reference`` over a template batch for every ``(n, m)`` cell.

    Each cell uses its own key and batch. Reported times are per batch.
    """
    if repetitions < 5:
        raise ValueError("at least 5 repetitions are required")
    if batch < 1:
        raise ValueError("batch must be positive")
    if not ns or not ms:
        raise ValueError("grid must be non-empty")
    for n in ns:
        if n < 1:
            raise ValueError(f"template length must be positive, got {n}")
    for m in ms:
        if not 1 <= m <= sot.MAX_PARAMS:
            raise ValueError(f"parameter count must be in 1..{sot.MAX_PARAMS}, got {m}")

    rows = []
    for n in ns:
        for m in ms:
            key, templates = bench_templates(n, m, batch, seed)
            alpha_rng = np.random.default_rng([seed, n, m, 1])
            sot.encrypt_reference(key, templates[0], rng=alpha_rng)  # warm-up
            times = []
            for _ in range(repetitions):
                start = time.perf_counter()
                for t in templates:
                    sot.encrypt_reference(key, t, rng=alpha_rng)
                times.append((time.perf_counter() - start) * 1e3)
            rows.append(BenchRow(n, m, batch, statistics.fmean(times), statistics.stdev(times)))
    return BenchReport(rows, repetitions)


def synthetic_match_experiment(
    n: int,
    m: int,
    subjects: int,
    noise: float,
    seed: int = 0,
    *,
    probes_per_subject: int = 4,
) -> float:
    """Percentage of correct accept/reject decisions on synthetic subjects.

    Protocol: each subject gets a ground-truth template drawn from
    ``N(0, I_n)``; enrollment and probes add independent ``N(0, noise^2)``
    perturbations. Half the probes of every subject are used to calibrate the
    threshold (midpoint between the worst genuine and best impostor distance
    on that split), the other half are evaluated: one genuine trial and one
    impostor trial per probe, so trials are balanced.
    """
    if subjects < 2:
        raise ValueError("need at least two subjects")
    if noise < 0:
        raise ValueError("noise level must be non-negative")
    if probes_per_subject < 2:
        raise ValueError("need at least two probes per subject")
    rng = np.random.default_rng(seed)
    truth = rng.standard_normal((subjects, n))
    spacing = min(
        float(np.linalg.norm(truth[i] - truth[j])) for i in range(subjects) for j in range(i + 1, subjects)
    )
    if noise * np.sqrt(n) >= spacing:
        warnings.warn(
            f"noise {noise} is at least the inter-subject spacing; expect chance-level results",
            DegenerateNoiseWarning,
            stacklevel=2,
        )
    enrolled = truth + noise * rng.standard_normal(truth.shape)
    probes = truth[:, None, :] + noise * rng.standard_normal((subjects, probes_per_subject, n))
    impostor_of = (np.arange(subjects) + rng.integers(1, subjects, size=subjects)) % subjects

    def dist(i: int, probe: np.ndarray) -> float:
        return biological_distance(enrolled[i], probe)

    half = probes_per_subject // 2
    genuine = [dist(i, probes[i, k]) for i in range(subjects) for k in range(half)]
    impostor = [dist(impostor_of[i], probes[i, k]) for i in range(subjects) for k in range(half)]
    threshold = 0.5 * (max(genuine) + min(impostor))

    key = sot.keygen(n, m, rng, threshold=threshold)
    refs = [sot.encrypt_reference(key, FeatureTemplate(e, Role.REFERENCE), rng=rng) for e in enrolled]
    correct = total = 0
    for i in range(subjects):
        for k in range(half, probes_per_subject):
            enc = sot.encrypt_identification(key, FeatureTemplate(probes[i, k], Role.IDENTIFICATION), rng=rng)
            correct += sot.decide(sot.match_score(refs[i], enc)) is sot.Decision.MATCH
            correct += sot.decide(sot.match_score(refs[impostor_of[i]], enc)) is sot.Decision.NO_MATCH
            total += 2
    return 100.0 * correct / total
