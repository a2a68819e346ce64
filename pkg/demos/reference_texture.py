"""
Crisp and fuzzy matrices on a 4x4 texture
=========================================

Builds every matrix family on a tiny texture small enough to check by eye,
then grows the fuzzy zones and shows how they fill the fuzzy size-zone matrix.
"""

import numpy as np

from fuzzmat import GrayImage, MembershipFunction, com, label_flat_zones, rlm, szm
from fuzzmat.features import run_length_features, size_zone_features
from fuzzmat.fuzzy import extract_fuzzy_zones, fuzzy_szm

texture = GrayImage(np.array([
    [1, 2, 3, 4],
    [1, 3, 4, 4],
    [3, 2, 2, 2],
    [4, 1, 4, 1],
]), levels=5)

# horizontal runs: row g, column l counts the runs of gray g and length l
print(rlm(texture, direction=0).to_csv())

# flat zones under 8-connexity, then the size-zone matrix built from them
for zone in label_flat_zones(texture, conn=8):
    print(f"gray {zone.gray}: {zone.size} pixel(s) starting at {zone.first}")
print(szm(texture, conn=8).to_csv())

# co-occurrence with the right-hand neighbour
print(com(texture, (0, 1)).cells.astype(int))

# Fuzzy zones. With a linear membership of radius 2, a zone started on gray g
# swallows neighbours at gray distance 1 with probability 0.5.
beta = MembershipFunction("linear", radius=2)
for zone in extract_fuzzy_zones(texture, conn=8, fn=beta):
    print(f"start {zone.start} gray {zone.start_gray}: size {zone.size}, "
          f"chi {zone.aggregate:.4f}")

fz = fuzzy_szm(texture, conn=8, fn=beta)
print(fz.to_csv())

# a few descriptors
print(run_length_features(rlm(texture, 0)).as_dict())
print(size_zone_features(szm(texture, 8)).as_dict())
