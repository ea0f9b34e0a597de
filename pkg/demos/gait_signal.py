"""Denoise a synthetic six-channel walk, estimate its gait cycle, and cut windows."""

import numpy as np

from amsobe.signal import GaitSignal, denoise, dominant_cycle, segment

rng = np.random.default_rng(3)
t = np.arange(1200)
clean = np.stack([np.sin(2 * np.pi * t / 100 + phase) for phase in np.linspace(0, np.pi, 6)])
walk = GaitSignal(clean + rng.normal(0, 0.3, clean.shape))

smooth = denoise(walk)
print("residual noise before/after:",
      round(float(np.std(walk.channels - clean)), 3), round(float(np.std(smooth.channels - clean)), 3))

cycles = [dominant_cycle(channel) for channel in smooth.channels]
print("per-channel cycle length:", cycles)

windows = segment(smooth, cycle=cycles[0])
print("window tensor shape (channels, windows, cycle):", windows.windows.shape)
