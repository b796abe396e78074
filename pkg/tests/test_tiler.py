import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from latentqc.errors import DataError
from latentqc.tiler import plan, stitch

from oracles import accumulate_oracle


def test_single_patch():
    g = plan((256, 256), 256)
    assert g.origins == ((0, 0),) and g.aligned == ((0, 0),)


def test_four_patches():
    g = plan((512, 512), 256, 256)
    assert set(g.origins) == {(0, 0), (0, 256), (256, 0), (256, 256)}
    assert g.origins == tuple(sorted(g.origins))


def test_ragged_image_flush_origins_cover():
    g = plan((300, 300), 256, 256)
    assert set(g.origins) == set(itertools.product((0, 44), (0, 44)))
    covered = np.zeros((300, 300), bool)
    for r, c in g.origins:
        covered[r:r + 256, c:c + 256] = True
    assert covered.all()
    # extraction happens at cell-aligned positions
    assert set(g.aligned) == set(itertools.product((0, 40), (0, 40)))
    assert set(g.shifts) == set(itertools.product((0, 4), (0, 4)))


@given(st.integers(16, 200), st.integers(16, 200), st.sampled_from([16, 32, 64]),
       st.data())
def test_plan_covers_every_cell(rows, cols, patch, data):
    if rows < patch or cols < patch:
        with pytest.raises(DataError):
            plan((rows, cols), patch)
        return
    stride = data.draw(st.integers(1, patch))
    g = plan((rows, cols), patch, stride)
    cells = np.zeros(g.cell_dims, bool)
    n = patch // 8
    for r, c in g.aligned:
        assert r % 8 == 0 and c % 8 == 0
        assert r + patch <= rows and c + patch <= cols
        cells[r // 8:r // 8 + n, c // 8:c // 8 + n] = True
    assert cells.all()
    assert len(set(g.aligned)) == len(g.aligned)


@pytest.mark.parametrize("kw", [{"patch": 12}, {"patch": 0}, {"patch": 64, "stride": 0},
                                {"patch": 64, "stride": 65}])
def test_plan_validation(kw):
    with pytest.raises(ValueError):
        plan((256, 256), **kw)


def test_extract_shapes(rng):
    img = rng.random((300, 280, 3))
    g = plan(img.shape[:2], 256)
    for (r, c), px in g.extract(img):
        assert px.shape == (256, 256, 3)
        np.testing.assert_array_equal(px, img[r:r + 256, c:c + 256])


# ---------------------------------------------------------------- stitch


def test_stitch_single():
    g = plan((64, 64), 64)
    h = np.arange(64.0).reshape(8, 8)
    np.testing.assert_array_equal(stitch([((0, 0), h)], g), h)


def test_stitch_half_overlap_mean():
    g = plan((64, 96), 64, 32)
    assert g.aligned == ((0, 0), (0, 32))
    out = stitch([((0, 0), np.ones((8, 8))), ((0, 32), np.full((8, 8), 3.0))], g)
    np.testing.assert_array_equal(out[:, :4], 1)
    np.testing.assert_array_equal(out[:, 4:8], 2)
    np.testing.assert_array_equal(out[:, 8:], 3)


def test_stitch_matches_oracle(rng):
    g = plan((80, 48), 48, 16)
    assert len(g.aligned) == 3
    items = [(o, rng.random((6, 6))) for o in g.aligned]
    np.testing.assert_allclose(stitch(items, g), accumulate_oracle(items, g.cell_dims),
                               rtol=1e-14)


def test_stitch_permutation_invariant(rng):
    g = plan((120, 136), 48, 20)
    items = [(o, rng.random((6, 6))) for o in g.aligned]
    ref = stitch(items, g)
    for seed in range(5):
        perm = np.random.default_rng(seed).permutation(len(items))
        np.testing.assert_allclose(stitch([items[i] for i in perm], g), ref, rtol=1e-13)


def test_stitch_concatenation_when_tiled_exactly(rng):
    g = plan((128, 64), 64)
    items = [(o, rng.random((8, 8))) for o in g.aligned]
    out = stitch(items, g)
    for (r, c), h in items:
        np.testing.assert_array_equal(out[r // 8:r // 8 + 8, c // 8:c // 8 + 8], h)


def test_stitch_errors():
    g = plan((128, 64), 64)
    with pytest.raises(DataError):
        stitch([((0, 0), np.zeros((8, 8)))], g)
    with pytest.raises(DataError):
        stitch([((0, 0), np.zeros((8, 8))), ((64, 0), np.zeros((9, 8)))], g)
