import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fuzzmat import GrayImage, com, rlm, szm
from fuzzmat.fuzzy import (MembershipFunction, eval_membership, extract_fuzzy_runs,
                           extract_fuzzy_zones, fcom, fill_level_fuzzify, frlm, fszm,
                           fuzzy_rlm, fuzzy_szm, multi_fuzzy_szm)
from fuzzmat.matrices import STANDARD_OFFSETS, direction_offset
from fuzzmat.zones import label_flat_zones
from oracles import bfs_fuzzy_zones, linear_beta, walk_fuzzy_runs

from conftest import random_images

LIN2 = MembershipFunction("linear", 2)
CRISP = MembershipFunction("linear", 0)


def nonzero_cells(m):
    return {(int(g), int(m.column_values[j])): float(m.cells[g, j])
            for g, j in zip(*np.nonzero(m.cells))}


# ------------------------------------------------------------------ membership


def test_membership_examples():
    assert eval_membership(LIN2, 1) == 0.5
    assert eval_membership(LIN2, 2) == 0.0
    assert eval_membership(LIN2, 3) == 0.0
    for kind in ("binary", "linear", "gaussian"):
        assert eval_membership(MembershipFunction(kind, 3), 0) == 1.0
    assert eval_membership(MembershipFunction("binary", 2), 2) == 1.0
    assert eval_membership(MembershipFunction("gaussian", 3), 1) == pytest.approx(np.exp(-0.5))
    with pytest.raises(ValueError):
        eval_membership(LIN2, -1)


def test_membership_rejects_bad_parameters():
    with pytest.raises(ValueError):
        MembershipFunction("triangle", 2)
    with pytest.raises(ValueError):
        MembershipFunction("linear", -1)


@given(st.sampled_from(["binary", "linear", "gaussian"]), st.floats(0, 20),
       st.lists(st.floats(0, 40), min_size=2, max_size=20))
def test_membership_invariants(kind, radius, xs):
    fn = MembershipFunction(kind, radius)
    xs = np.sort(xs)
    ys = fn(xs)
    assert fn(0) == 1.0
    assert (np.diff(ys) <= 0).all()
    assert (ys[xs > radius] == 0).all()
    if radius == 0:
        assert ((ys == 1) == (xs == 0)).all()


# ------------------------------------------------------------------ fill-level


def test_fcom_single_pair_kernel():
    img = GrayImage(np.array([[5, 5]]), 16)
    m = fcom(img, (0, 1), LIN2).cells
    assert m[5, 5] == 1.0
    for i, j in [(4, 5), (6, 5), (5, 4), (5, 6)]:
        assert m[i, j] == 0.5
    for i, j in [(4, 4), (4, 6), (6, 4), (6, 6)]:
        assert m[i, j] == 0.25
    assert m[3, 5] == m[7, 5] == m[5, 3] == m[3, 3] == 0
    assert m.sum() == pytest.approx(2.0 ** 2)


@pytest.mark.parametrize("fn", [MembershipFunction("linear", 3), MembershipFunction("gaussian", 4),
                                MembershipFunction("binary", 1)])
def test_fcom_interior_mass(fn):
    img = GrayImage(np.array([[8, 7]]), 20)
    row = fn(np.arange(-10, 11)).sum()
    assert fcom(img, (0, 1), fn).cells.sum() == pytest.approx(row ** 2)


def test_fcom_border_mass_dropped():
    img = GrayImage(np.array([[0, 0]]), 8)
    assert fcom(img, (0, 1), LIN2).cells.sum() == pytest.approx(1.5 ** 2)


def test_fill_level_single_event():
    m = fill_level_fuzzify([(3, 3)], LIN2, 5, "FSZM")
    assert nonzero_cells(m) == {(3, 3): 1.0, (2, 3): 0.5, (4, 3): 0.5}
    with pytest.raises(ValueError, match="no events"):
        fill_level_fuzzify([], LIN2, 5, "FSZM")
    with pytest.raises(ValueError):
        fill_level_fuzzify([(3, 3)], LIN2, 5, "FCOM")


def test_fill_level_mass_per_event():
    fn = MembershipFunction("gaussian", 3)
    m = fill_level_fuzzify([(10, 2)], fn, 30, "FRLM")
    assert m.cells.sum() == pytest.approx(fn(np.arange(-10, 11)).sum())


def test_crisp_degeneracy_fill_level(random200):
    for img in random200[:50]:
        for off in STANDARD_OFFSETS:
            np.testing.assert_array_equal(fcom(img, off, CRISP).cells, com(img, off).cells)
        np.testing.assert_array_equal(frlm(img, 45, CRISP).cells, rlm(img, 45).cells)
        np.testing.assert_array_equal(fszm(img, 8, CRISP).cells, szm(img, 8).cells)
        m = szm(img, 4)
        events = [(g, int(m.column_values[j])) for g, j in zip(*np.nonzero(m.cells))
                  for _ in range(int(m.cells[g, j]))]
        np.testing.assert_array_equal(fill_level_fuzzify(events, CRISP, img.levels, "FSZM").cells,
                                      m.cells)


# ------------------------------------------------------------------ fuzzy zones


TEXTURE_FUZZY = {(1, 8): 0.75, (2, 11): 0.6818, (3, 12): 0.625, (4, 7): 0.7857, (4, 1): 1.0}


def test_reference_fuzzy_zones(texture):
    zones = extract_fuzzy_zones(texture, 8, LIN2, "mean")
    assert len(zones) == 5
    got = sorted((z.start_gray, z.size, round(z.aggregate, 4)) for z in zones)
    assert got == sorted((g, s, chi) for (g, s), chi in TEXTURE_FUZZY.items())
    for z in zones:
        assert texture.pixels[z.start] == z.start_gray
        assert (z.chi > 0).all() and (z.chi <= 1).all()


def test_reference_fuzzy_szm(texture):
    m = fuzzy_szm(texture, 8, LIN2, "mean")
    got = nonzero_cells(m)
    assert got.keys() == TEXTURE_FUZZY.keys()
    for k, v in TEXTURE_FUZZY.items():
        assert got[k] == pytest.approx(v, abs=5e-5)
    assert got[(2, 11)] == pytest.approx(7.5 / 11)


def test_crisp_zones_equal_flat_zones(texture):
    zones = extract_fuzzy_zones(texture, 8, CRISP)
    flat = label_flat_zones(texture, 8)
    assert sorted(z.member_set() for z in zones) == \
        sorted(frozenset(map(tuple, f.pixels.tolist())) for f in flat)
    assert all(z.aggregate == 1.0 for z in zones)
    np.testing.assert_array_equal(fuzzy_szm(texture, 8, CRISP).cells, szm(texture, 8).cells)


def test_constant_image_one_zone():
    img = GrayImage(np.full((3, 4), 2), 5)
    zones = extract_fuzzy_zones(img, 4, MembershipFunction("gaussian", 3))
    assert len(zones) == 1 and zones[0].size == 12 and zones[0].aggregate == 1.0
    assert nonzero_cells(fuzzy_szm(img, 8, LIN2)) == {(2, 12): 1.0}


@pytest.mark.parametrize("conn", [4, 8])
@pytest.mark.parametrize("radius", [0, 1, 2, 3])
def test_zones_match_bfs_oracle(conn, radius):
    fn = MembershipFunction("linear", radius)
    beta = linear_beta(radius)
    for img in random_images(25, shape=(6, 6), levels=(4, 6), seed=radius * 10 + conn):
        ours = [(z.start, z.start_gray, z.member_set(), round(z.aggregate, 12))
                for z in extract_fuzzy_zones(img, conn, fn)]
        ref = [(z["start"], z["gray"], z["members"], round(z["chi"], 12))
               for z in bfs_fuzzy_zones(img.pixels.tolist(), conn, beta)]
        assert ours == ref


def test_zones_match_bfs_oracle_with_mask():
    rng = np.random.default_rng(11)
    beta = linear_beta(2)
    for _ in range(20):
        px = rng.integers(0, 5, size=(6, 7))
        mask = rng.random(px.shape) < 0.75
        img = GrayImage(px, 5, mask)
        ours = [(z.start, z.member_set()) for z in extract_fuzzy_zones(img, 8, LIN2)]
        ref = [(z["start"], z["members"]) for z in bfs_fuzzy_zones(px.tolist(), 8, beta, mask.tolist())]
        assert ours == ref


def test_median_aggregation():
    beta = linear_beta(2)
    for img in random_images(15, shape=(5, 5), levels=(5,), seed=4):
        ours = sorted((z.start, z.aggregate) for z in extract_fuzzy_zones(img, 8, LIN2, "median"))
        ref = sorted((z["start"], float(np.median(z["chis"])))
                     for z in bfs_fuzzy_zones(img.pixels.tolist(), 8, beta))
        assert [a for a, _ in ours] == [a for a, _ in ref]
        np.testing.assert_allclose([b for _, b in ours], [b for _, b in ref])
        m = fuzzy_szm(img, 8, LIN2, "median")
        assert m.cells.sum() == pytest.approx(sum(b for _, b in ref))


def test_fuzzy_size_mode(texture):
    m = fuzzy_szm(texture, 8, LIN2, size_mode="fuzzy")
    # sizes become round(sum chi): 6, 7.5 -> 8, 7.5 -> 8, 5.5 -> 6, 1
    assert set(nonzero_cells(m)) == {(1, 6), (2, 8), (3, 8), (4, 6), (4, 1)}
    with pytest.raises(ValueError):
        fuzzy_szm(texture, 8, LIN2, size_mode="area")


def test_bad_aggregation(texture):
    with pytest.raises(ValueError, match="aggregation"):
        fuzzy_szm(texture, 8, LIN2, agg="mode")


def test_zone_properties(random200):
    for img in random200[:40]:
        counts = []
        prev = None
        for radius in (0, 1, 2, 4):
            fn = MembershipFunction("linear", radius)
            zones = extract_fuzzy_zones(img, 8, fn)
            counts.append(len(zones))
            covered = set().union(*(z.member_set() for z in zones))
            assert len(covered) == img.pixels.size
            by_start = zone_of_each_pixel(img, zones)
            if prev is not None:
                for p, members in prev.items():
                    assert members <= by_start[p]
            prev = by_start
            m = fuzzy_szm(img, 8, fn)
            per_cell = {}
            for z in zones:
                key = (z.start_gray, z.size)
                per_cell[key] = per_cell.get(key, 0) + 1
            for key, v in nonzero_cells(m).items():
                assert v <= per_cell[key] + 1e-12
        assert counts == sorted(counts, reverse=True)


def zone_of_each_pixel(img, zones):
    """Member set of the zone grown from every pixel, not only from representatives."""
    out = {}
    for z in zones:
        for p in z.member_set():
            if img.pixels[p] == z.start_gray:
                out[p] = z.member_set()
    return out


# ------------------------------------------------------------------ fuzzy runs


def test_fuzzy_rlm_row_example():
    img = GrayImage(np.array([[1, 2, 1]]), 3)
    runs = extract_fuzzy_runs(img, 0, LIN2)
    assert [(r.start_gray, r.length, round(r.aggregate, 4)) for r in runs] == \
        [(1, 3, 0.8333), (2, 3, 0.6667)]
    got = nonzero_cells(fuzzy_rlm(img, 0, LIN2))
    assert got.keys() == {(1, 3), (2, 3)}
    assert got[(1, 3)] == pytest.approx(2.5 / 3)
    assert got[(2, 3)] == pytest.approx(2 / 3)


def test_fuzzy_rlm_constant_row():
    img = GrayImage(np.full((1, 7), 4), 6)
    assert nonzero_cells(fuzzy_rlm(img, 0, MembershipFunction("gaussian", 2))) == {(4, 7): 1.0}


def test_fuzzy_rlm_crisp_degeneracy(texture, random200):
    np.testing.assert_array_equal(fuzzy_rlm(texture, 0, CRISP).cells, rlm(texture, 0).cells)
    for img in random200[:60]:
        for angle in (0, 45, 90, 135):
            np.testing.assert_array_equal(fuzzy_rlm(img, angle, CRISP).cells, rlm(img, angle).cells)
            np.testing.assert_array_equal(fuzzy_szm(img, 4, CRISP).cells, szm(img, 4).cells)


@pytest.mark.parametrize("angle", [0, 45, 90, 135])
def test_fuzzy_runs_match_walk_oracle(angle):
    step = direction_offset(angle)
    for radius in (1, 2, 3):
        fn = MembershipFunction("linear", radius)
        for img in random_images(15, shape=(5, 6), levels=(5,), seed=angle + radius):
            ours = [(r.start, r.start_gray, r.length, round(r.aggregate, 12))
                    for r in extract_fuzzy_runs(img, angle, fn)]
            ref = [(r["start"], r["gray"], r["length"], round(r["chi"], 12))
                   for r in walk_fuzzy_runs(img.pixels.tolist(), step, linear_beta(radius))]
            assert ours == ref
            m = fuzzy_rlm(img, angle, fn)
            assert m.cells.sum() == pytest.approx(sum(r[3] for r in ref))


def test_fuzzy_runs_stop_at_mask():
    px = np.array([[1, 1, 2, 1, 1]])
    img = GrayImage(px, 3, np.array([[1, 1, 0, 1, 1]]))
    runs = extract_fuzzy_runs(img, 0, LIN2)
    assert [r.length for r in runs] == [2, 2]


# ------------------------------------------------------------------ multiple fuzzy


def test_multi_fuzzy_szm(texture):
    single = fuzzy_szm(texture, 8, LIN2)
    np.testing.assert_allclose(multi_fuzzy_szm(texture, 8, [LIN2]).cells, single.cells)
    np.testing.assert_allclose(multi_fuzzy_szm(texture, 8, [LIN2, LIN2]).cells, 2 * single.cells)
    combo = multi_fuzzy_szm(texture, 8, [LIN2, MembershipFunction("binary", 0)]).cells
    crisp = szm(texture, 8).cells
    expected = single.cells.copy()
    expected[:, :crisp.shape[1]] += crisp
    np.testing.assert_allclose(combo, expected)
    with pytest.raises(ValueError):
        multi_fuzzy_szm(texture, 8, [])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_parallel_safe_determinism(seed):
    img = random_images(1, shape=(7, 7), levels=(6,), seed=seed)[0]
    a = fuzzy_szm(img, 8, LIN2).cells
    b = fuzzy_szm(GrayImage(img.pixels.copy(), img.levels), 8, LIN2).cells
    np.testing.assert_array_equal(a, b)
