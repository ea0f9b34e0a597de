"""Send a message that only opens under a probe close to the enrolled template."""

import random

import numpy as np

from amsobe import bbe, sot
from amsobe.pairing import TransparentGroup
from amsobe.template import FeatureTemplate, Role

rng = np.random.default_rng(11)
group = TransparentGroup()
n = 32
key = sot.keygen(n, 2, rng, threshold=0.1)
reference = FeatureTemplate(rng.uniform(-1, 1, n) / np.sqrt(n), Role.REFERENCE)
probe = FeatureTemplate(reference.values + rng.normal(0, 0.002, n), Role.IDENTIFICATION)

prep = bbe.preprocess(reference, probe, key, group.p, rng=rng)
print("probe accepted:", prep.accepted, f"(distance {prep.distance:.5f})")

pp, msk = bbe.setup(prep.w_ext, group, random.Random(1))
sk = bbe.keygen(msk, prep.z_ext, group, random.Random(2))
print("public params:", pp.element_count, "group elements; private key:", sk.element_count)

sealed = bbe.seal_bytes(pp, b"meet at the north gate", random.Random(3))
print("opened:", bbe.open_bytes(sk, sealed, prep.z_ext, group))

wrong = [(v + 1) % group.p for v in prep.z_ext.values]
try:
    bbe.open_bytes(sk, sealed, wrong, group)
except bbe.TagMismatchError:
    print("a non-orthogonal template cannot open it")
