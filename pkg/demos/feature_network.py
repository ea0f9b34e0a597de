"""Train a tiny attention BLSTM on separable synthetic gait windows and extract a template."""

import numpy as np

from amsobe.ablstm import Dims, extract_template, gradient_check, init_network, train
from amsobe.signal import GaitSignal

rng = np.random.default_rng(5)
dims = Dims(h=2, n=2, T=6, n_c=3)
prototypes = rng.normal(0, 1.5, (3, 6, dims.n, dims.T))
inputs = [prototypes[c] + rng.normal(0, 0.1, prototypes[c].shape) for c in range(3) for _ in range(4)]
labels = [np.eye(3)[c] for c in range(3) for _ in range(4)]

net = init_network(dims, rng)
probe = init_network(Dims(1, 1, 3, 2), np.random.default_rng(0))
print("analytic vs finite-difference gradient, max relative error:",
      f"{gradient_check(probe, rng.standard_normal((6, 1, 3)), [1, 0]):.1e}")

history = train(net, inputs, labels, steps=20, learning_rate=2.0, rng=rng)
print("mean loss by step:", " ".join(f"{v:.3f}" for v in history))

# lay the windows of one sample end to end as a raw recording
recording = GaitSignal(inputs[0].reshape(6, -1))
template = extract_template(net, recording, denoise_signal=False)
print(f"template: {template.n} values, role={template.role.value}")
