"""Time SOT encryption across template lengths and estimate matching success on synthetic subjects."""

from amsobe.bench import bench_sot, synthetic_match_experiment

report = bench_sot(ns=(480, 600, 960), ms=(1, 3, 5), batch=100, repetitions=5)
print(report.to_csv())

for noise in (0.0, 0.01, 0.05):
    pct = synthetic_match_experiment(n=64, m=3, subjects=20, noise=noise, seed=1)
    print(f"noise {noise}: {pct:.1f}% correct decisions")
