"""
Cross-validated texture classification
======================================

Writes a small synthetic dataset of PGM images to a temporary directory,
describes each image with fuzzy size-zone features and evaluates a one-hidden-layer
network with leave-one-group-out cross-validation. Each group plays the role of
one parent image holding several cells of the same class.
"""

import tempfile
from pathlib import Path

import numpy as np

from fuzzmat import GrayImage, MLPConfig, evaluate_manifest, load_manifest, render_report, save_image

rng = np.random.default_rng(0)


def blocks(size=24):
    # piecewise-constant patches: large flat zones
    coarse = rng.integers(0, 8, size=(size // 6, size // 6))
    return np.kron(coarse, np.ones((6, 6), dtype=int))


def speckle(size=24):
    # smooth ramp plus strong noise: many tiny zones
    ramp = np.linspace(0, 7, size)[None, :].repeat(size, 0)
    return np.clip(np.rint(ramp + rng.normal(0, 1.5, (size, size))), 0, 7).astype(int)


root = Path(tempfile.mkdtemp())
rows = ["path,label,group"]
for group in range(6):
    label, make = ("blocks", blocks) if group % 2 == 0 else ("speckle", speckle)
    for cell in range(5):
        name = f"g{group}_c{cell}.pgm"
        save_image(GrayImage(make(), 8), root / name)
        rows.append(f"{name},{label},parent{group}")
(root / "manifest.csv").write_text("\n".join(rows) + "\n")

manifest = load_manifest(root / "manifest.csv")
pipelines = ["fuzzyszm conn=8 radius=1", "rlm dir=0"]
report = evaluate_manifest(manifest, pipelines, MLPConfig(epochs=300, seed=0), scheme="logo")
print(render_report(report))
