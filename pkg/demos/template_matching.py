"""Match encrypted gait templates: the cloud sees only rotated vectors and a sign."""

import numpy as np

from amsobe import sot
from amsobe.template import FeatureTemplate, Role, biological_distance

rng = np.random.default_rng(7)
n, threshold = 600, 0.1
key = sot.keygen(n, 3, rng, threshold=threshold)

reference = FeatureTemplate(rng.uniform(-1, 1, n) / np.sqrt(n), Role.REFERENCE)
enrolled = sot.encrypt_reference(key, reference, rng=rng)

for label, noise in (("same walker", 0.005), ("someone else", None)):
    values = reference.values + rng.normal(0, noise, n) / np.sqrt(n) if noise else rng.uniform(-1, 1, n) / np.sqrt(n)
    probe = FeatureTemplate(values, Role.IDENTIFICATION)
    score = sot.match_score(enrolled, sot.encrypt_identification(key, probe, rng=rng))
    print(f"{label:13s} distance={biological_distance(reference, probe):.4f} "
          f"score={score:+.4f} -> {sot.decide(score).value}")

print(f"log2 CPA advantage bound at n={n}, lambda=128: {sot.cpa_advantage_bound(n, 128):.2f}")
