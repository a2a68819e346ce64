"""Acceptance gate: one test per criterion, each printing a single PASS/FAIL line.

Lines are also repeated in the terminal summary (see conftest.py). Criterion 11 and
the fuzzy/crisp timing ratio are informational and never fail.
"""
import time
from collections import Counter

import numpy as np
import pytest

from fuzzmat import GrayImage, com, rlm, szm
from fuzzmat.features import haralick_features, run_length_features, size_zone_features
from fuzzmat.fuzzy import (MembershipFunction, extract_fuzzy_zones, fcom, frlm, fszm, fuzzy_rlm,
                           fuzzy_szm)
from fuzzmat.harness import MLP, FeatureTable, KFold, MLPConfig, cross_validate, train_mlp
from fuzzmat.matrices import STANDARD_OFFSETS
from fuzzmat.zones import label_flat_zones
from oracles import (TEXTURE, central_differences, enumerate_pairs, merge_flat_zones,
                     zone_histogram)

from conftest import random_images

STARTED = time.perf_counter()
RESULTS = []

TEXTURE_RLM = [[0, 0, 0], [4, 0, 0], [1, 0, 1], [3, 0, 0], [3, 1, 0]]
TEXTURE_SZM = [[0, 0, 0], [2, 1, 0], [1, 0, 1], [0, 0, 1], [2, 0, 1]]
TEXTURE_FUZZY = [(1, 8, 0.75), (2, 11, 0.6818), (3, 12, 0.625), (4, 7, 0.7857), (4, 1, 1.0)]


def record(criterion, ok, detail, blocking=True):
    tag = ("PASS" if ok else "FAIL") if blocking else "INFO"
    label = criterion if isinstance(criterion, str) else f"criterion {criterion}"
    line = f"[{tag}] {label}: {detail}"
    RESULTS.append(line)
    print(line)
    if blocking:
        assert ok, line


@pytest.fixture(scope="module")
def texture():
    return GrayImage(np.array(TEXTURE), 5)


@pytest.fixture(scope="module")
def images200():
    return random_images(200, shape=(8, 8), levels=(4, 8), seed=2024)


def test_criterion_01_rlm_reference(texture):
    m = rlm(texture, 0)
    exact = m.cells.tolist() == TEXTURE_RLM and m.column_values.tolist() == [1, 2, 3]
    times = []
    for _ in range(50):
        t0 = time.perf_counter()
        rlm(texture, 0)
        times.append(time.perf_counter() - t0)
    best = min(times)
    record(1, exact and best < 1e-3,
           f"reference RLM exact={exact}, runtime {best * 1e3:.3f} ms (< 1 ms)")


def test_criterion_02_szm_reference(texture):
    m8 = szm(texture, 8).cells.tolist()
    m4 = szm(texture, 4)
    ref4 = zone_histogram(TEXTURE, 4)
    got4 = Counter({(g, int(m4.column_values[j])): int(m4.cells[g, j])
                    for g, j in zip(*np.nonzero(m4.cells))})
    pinned = [[0, 0, 0], [2, 1, 0], [1, 0, 1], [3, 0, 0], [2, 0, 1]]
    ok = m8 == TEXTURE_SZM and got4 == ref4 and m4.cells.tolist() == pinned and m4.cells.tolist() != m8
    record(2, ok, "reference SZM 8-connexity exact; 4-connexity differs and matches the pinned oracle")


def test_criterion_03_fuzzy_zones_reference(texture):
    zones = extract_fuzzy_zones(texture, 8, MembershipFunction("linear", 2), "mean")
    got = sorted((z.start_gray, z.size, z.aggregate) for z in zones)
    ok = len(zones) == 5 and all(
        g == eg and s == es and abs(chi - echi) <= 5e-4
        for (g, s, chi), (eg, es, echi) in zip(got, sorted(TEXTURE_FUZZY)))
    record(3, ok, f"{len(zones)} fuzzy zones, (gray, size, chi) = "
                  + ", ".join(f"({g},{s},{c:.4f})" for g, s, c in got))


def test_criterion_04_degeneracy(images200):
    crisp = MembershipFunction("linear", 0)
    bad = 0
    for img in images200:
        checks = [np.array_equal(fszm(img, c, crisp).cells, szm(img, c).cells) for c in (4, 8)]
        checks += [np.array_equal(fuzzy_szm(img, c, crisp).cells, szm(img, c).cells) for c in (4, 8)]
        checks += [np.array_equal(fcom(img, o, crisp).cells, com(img, o).cells) for o in STANDARD_OFFSETS]
        for angle in (0, 45, 90, 135):
            checks.append(np.array_equal(frlm(img, angle, crisp).cells, rlm(img, angle).cells))
            checks.append(np.array_equal(fuzzy_rlm(img, angle, crisp).cells, rlm(img, angle).cells))
        bad += not all(checks)
    record(4, bad == 0, f"R=0 degeneracy exact on {len(images200) - bad}/{len(images200)} images")


def test_criterion_05_conservation(images200):
    bad = 0
    for img in images200:
        n = img.pixels.size
        ok = all(int((rlm(img, a).cells * rlm(img, a).column_values).sum()) == n
                 for a in (0, 45, 90, 135))
        ok &= all(int((szm(img, c).cells * szm(img, c).column_values).sum()) == n for c in (4, 8))
        ok &= all(int(com(img, o).cells.sum()) == len(enumerate_pairs(img.pixels.tolist(), o))
                  for o in STANDARD_OFFSETS)
        bad += not ok
    record(5, bad == 0, f"mass conservation exact on {len(images200) - bad}/{len(images200)} images")


def test_criterion_06_symmetry(images200):
    bad = 0
    for img in images200:
        base = szm(img, 8).cells
        ok = all(np.array_equal(szm(GrayImage(np.rot90(img.pixels, k), img.levels), 8).cells, base)
                 for k in (1, 2, 3))
        ok &= np.array_equal(szm(GrayImage(img.pixels.T, img.levels), 8).cells, base)
        rot = GrayImage(np.rot90(img.pixels), img.levels)
        ok &= np.array_equal(rlm(rot, 0).cells, rlm(img, 90).cells)
        bad += not ok
    record(6, bad == 0, f"rotation/transpose symmetry exact on {len(images200) - bad}/{len(images200)} images")


def test_criterion_07_flat_zone_oracle(images200):
    bad = 0
    for img in images200:
        for conn in (4, 8):
            ours = {frozenset(map(tuple, z.pixels.tolist())) for z in label_flat_zones(img, conn)}
            ref = {frozenset(s) for s in merge_flat_zones(img.pixels.tolist(), conn).values()}
            bad += ours != ref
    record(7, bad == 0, f"union-find equals pairwise-merge oracle ({bad} mismatches over 400 labelings)")


def test_criterion_08_monotonicity():
    imgs = random_images(100, shape=(8, 8), levels=(4, 8), seed=77)
    bad = 0
    for img in imgs:
        counts = [len(extract_fuzzy_zones(img, 8, MembershipFunction("linear", r)))
                  for r in (0, 1, 2, 4)]
        bad += any(b > a for a, b in zip(counts, counts[1:]))
    record(8, bad == 0, f"zone count non-increasing in R on {100 - bad}/100 images")


def test_criterion_09_feature_spot_checks(texture):
    r = run_length_features(rlm(texture, 0))
    z = size_zone_features(szm(texture, 8))
    h = haralick_features(com(GrayImage(np.full((5, 5), 3), 8), (0, 1)))
    ok = (abs(r["RP"] - 0.8125) <= 1e-5 and abs(r["SRE"] - 0.87393) <= 1e-5
          and abs(z["ZP"] - 0.5625) <= 1e-5 and abs(z["SZE"] - 0.62037) <= 1e-5
          and h["energy"] == 1 and h["contrast"] == 0)
    record(9, ok, f"RP={r['RP']:.6f} SRE={r['SRE']:.6f} ZP={z['ZP']:.6f} SZE={z['SZE']:.6f} "
                  f"energy={h['energy']:g} contrast={h['contrast']:g}")


def _blobs(seed=0):
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.normal(0, 1, (100, 4)), rng.normal(4, 1, (100, 4))])
    labels = np.array(["a"] * 100 + ["b"] * 100, dtype=object)
    groups = np.array([f"s{i}" for i in range(200)], dtype=object)
    return FeatureTable(X, tuple(f"f{i}" for i in range(4)), labels, groups)


def test_criterion_10_mlp():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(3, 5))
    Y = np.eye(3)[[0, 1, 2]]
    sw = np.array([1.0, 0.5, 2.0])
    net = MLP(5, 11, 3, rng)
    theta = net.theta + rng.normal(scale=0.3, size=net.theta.size)
    _, grad = net.loss_and_grad(theta, X, Y, sw)
    num = np.array(central_differences(lambda t: net.loss_and_grad(np.array(t), X, Y, sw)[0],
                                       theta.tolist()))
    rel = float((np.abs(grad - num) / np.maximum(np.abs(grad) + np.abs(num), 1e-8)).max())

    xor = FeatureTable(np.array([[0.0, 0], [0, 1], [1, 0], [1, 1]]), ("x", "y"),
                       np.array(["0", "1", "1", "0"], dtype=object),
                       np.array(list("abcd"), dtype=object))
    model = train_mlp(xor, MLPConfig(epochs=5000, seed=1))
    xor_acc = np.mean(np.array(model.predict(xor.X)) == xor.labels) * 100

    cfg = MLPConfig(epochs=200, seed=3)
    rep = cross_validate(_blobs(), cfg, KFold(5, seed=0))
    again = cross_validate(_blobs(), cfg, KFold(5, seed=0))
    same = rep.to_json() == again.to_json()
    ok = rel < 1e-4 and xor_acc == 100 and rep.cell.overall > 95 and same
    record(10, ok, f"grad rel err {rel:.2e}, XOR {xor_acc:.0f}%, blobs 5-fold "
                   f"{rep.cell.overall:.1f}%, identical reports={same}")


def _textures(n, rng):
    out = []
    for k in range(n):
        if k % 2 == 0:
            cell = int(rng.integers(2, 6))
            a, b = rng.choice(8, size=2, replace=False)
            board = (np.indices((32, 32)) // cell).sum(axis=0) % 2
            out.append(np.where(board == 0, a, b))
        else:
            field = rng.normal(size=(8, 8))
            field = np.kron(field, np.ones((4, 4)))
            # smooth by box filtering with wrap-around
            acc = sum(np.roll(np.roll(field, i, 0), j, 1) for i in (-2, -1, 0, 1, 2) for j in (-2, -1, 0, 1, 2))
            ranks = np.argsort(np.argsort(acc.ravel())).reshape(acc.shape)
            out.append((ranks * 8) // ranks.size)
    return out


def _l1(a, b):
    a = a / np.abs(a).sum()
    b = b / np.abs(b).sum()
    return float(np.abs(a - b).sum())


def test_criterion_11_noise_robustness_report():
    rng = np.random.default_rng(11)
    fn = MembershipFunction("linear", 2)
    wins = 0
    textures = _textures(50, rng)
    for px in textures:
        noisy = np.clip(px + np.rint(rng.normal(0, 1, px.shape)).astype(int), 0, 7)
        clean_img, noisy_img = GrayImage(px, 8), GrayImage(noisy, 8)
        d_crisp = _l1(run_length_features(rlm(clean_img, 0)).values,
                      run_length_features(rlm(noisy_img, 0)).values)
        d_fuzzy = _l1(run_length_features(fuzzy_rlm(clean_img, 0, fn)).values,
                      run_length_features(fuzzy_rlm(noisy_img, 0, fn)).values)
        wins += d_fuzzy < d_crisp
    record(11, True, f"FuzzyRLM closer to clean than RLM in {wins}/{len(textures)} noisy trials "
                     f"(majority={'yes' if wins > len(textures) / 2 else 'no'})", blocking=False)


def test_fuzzy_szm_timing_ratio_report():
    rng = np.random.default_rng(0)
    img = GrayImage(rng.integers(0, 8, size=(256, 256)), 8)
    fn = MembershipFunction("linear", 2)
    szm(img, 8)
    fuzzy_szm(img, 8, fn)

    def best(f):
        ts = []
        for _ in range(3):
            t0 = time.perf_counter()
            f()
            ts.append(time.perf_counter() - t0)
        return min(ts)

    ratio = best(lambda: fuzzy_szm(img, 8, fn)) / best(lambda: szm(img, 8))
    record("benchmark", True, f"fuzzy_szm / szm time on 256x256, L=8: {ratio:.1f}x", blocking=False)


def test_criterion_10_total_runtime():
    elapsed = time.perf_counter() - STARTED
    record("criterion 10 (runtime)", elapsed < 120, f"acceptance suite ran in {elapsed:.1f} s (< 120 s)")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-s"]))
