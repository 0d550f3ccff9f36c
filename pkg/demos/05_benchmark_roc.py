"""Benchmark several detectors on synthetic scenes and compare ROC
curves, entirely in text.

Scenes cycle through all clutter kinds (sky gradients, terrain texture,
sea glints, clean collimator frames) with PSF-blurred targets, detector
noise and a sprinkle of hot bad pixels.

Run: python3 demos/05_benchmark_roc.py   (about half a minute)
"""

import numpy as np

from nccbank import bench as bn
from nccbank import irdatagen as dg

METHODS = ["hat15-ideal", "gauss-1.2", "hat5-fixed-mad", "mad-ratio"]


def hit_at(curve, fa_budget):
    """Best hit rate achievable at <= fa_budget false alarms per frame."""
    ok = curve.fa_per_frame <= fa_budget
    return float(curve.hit_rates[ok].max()) if ok.any() else 0.0


def main():
    configs = dg.benchmark_scene_configs(12, seed=2000)
    scenes = [dg.synth_scene(c) for c in configs]
    n_truth = sum(len(s.truths) for s in scenes)
    n_bad = sum(len(s.bad_pixels) for s in scenes)
    kinds = sorted({c.clutter_kind for c in configs})
    print(f"{len(scenes)} frames, {n_truth} targets, {n_bad} bad pixels;"
          f" clutter: {', '.join(kinds)}")

    report = bn.run_benchmark(
        [s.image for s in scenes],
        [s.truths for s in scenes],
        METHODS,
        bn.BenchConfig(include_timing=True),
    )

    print()
    print("method            AUC     hit@0.5fa  hit@2fa  ms/frame")
    for r in report.results:
        print(f"{r.name:15s} {r.curve.auc:7.4f}  {hit_at(r.curve, 0.5):9.3f}"
              f"  {hit_at(r.curve, 2.0):7.3f}  {r.ms_per_frame:8.2f}")

    print()
    print("hit rate vs false alarms per frame:")
    budgets = [0.0, 0.25, 0.5, 1.0, 2.0, 5.0, 10.0]
    print("fa/frame       " + "".join(f"{b:>7.2f}" for b in budgets))
    for r in report.results:
        row = "".join(f"{hit_at(r.curve, b):7.3f}" for b in budgets)
        print(f"{r.name:15s}{row}")

    print()
    best = max(report.results, key=lambda r: r.curve.auc)
    print(f"best method here: {best.name}")
    print("the wide hat sees the full annulus around a candidate, so")
    print("glint doublets and bad pixels that fool narrow windows get")
    print("their scores dragged down by the negative surround.")


if __name__ == "__main__":
    main()
