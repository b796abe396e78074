import numpy as np
import pytest

from latentqc.synth import (
    ARTIFACT_TYPES,
    SynthConfig,
    gen_artifact,
    gen_clean,
    generate_split,
    split_kinds,
)

SIZE = 128


def test_clean_deterministic_and_bounded():
    a, b = gen_clean(3, SIZE), gen_clean(3, SIZE)
    assert a.tobytes() == b.tobytes()
    assert a.shape == (SIZE, SIZE, 3)
    assert a.min() >= 0 and a.max() <= 1


def test_clean_seeds_differ():
    for s in range(20):
        a, b = gen_clean(2 * s, SIZE), gen_clean(2 * s + 1, SIZE)
        differ = np.any(a != b, axis=-1).mean()
        assert differ >= 0.01


def test_clean_not_flat():
    img = gen_clean(0, SIZE)
    assert img.std(axis=(0, 1)).min() > 0.02


@pytest.mark.parametrize("kind", ARTIFACT_TYPES)
def test_artifact_area_in_range(kind):
    lo, hi = 0.08, 0.30
    for s in range(25):
        m = gen_artifact(s, SIZE, kind, (lo, hi)).type_masks[kind]
        assert lo <= m.mean() <= hi, (kind, s, m.mean())


@pytest.mark.parametrize("kind", ARTIFACT_TYPES)
def test_artifact_locality_and_separation(kind):
    for s in range(5):
        smp = gen_artifact(100 + s, SIZE, kind)
        clean = gen_clean(100 + s, SIZE)
        mask = smp.union_mask
        diff = np.abs(smp.image - clean).mean(axis=-1)
        np.testing.assert_array_equal(smp.image[~mask], clean[~mask])
        assert diff[mask].mean() > diff[~mask].mean()
        assert smp.type_masks.keys() == {kind}


def test_artifact_deterministic():
    a, b = gen_artifact(7, SIZE, "fold"), gen_artifact(7, SIZE, "fold")
    assert a.image.tobytes() == b.image.tobytes()
    assert a.union_mask.tobytes() == b.union_mask.tobytes()


def test_unknown_type():
    with pytest.raises(ValueError):
        gen_artifact(0, SIZE, "smudge")


@pytest.mark.parametrize("kw", [
    {"mix": {"oof": 0.5, "penmark": 0.4}},
    {"mix": {"ink": 1.0}},
    {"area": (0.0, 0.2)},
    {"area": (0.3, 0.2)},
    {"area": (0.1, 1.0)},
    {"size": 100},
])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        SynthConfig(**kw)


def test_split_determinism():
    cfg = SynthConfig(seed=4, size=64, test_count=12)
    a = [s.image.tobytes() + s.union_mask.tobytes() for s in generate_split(cfg, "test")]
    b = [s.image.tobytes() + s.union_mask.tobytes() for s in generate_split(cfg, "test")]
    assert a == b


def test_split_kinds():
    cfg = SynthConfig(seed=1, train_count=5, artifact_count=30, test_count=40)
    assert split_kinds(cfg, "train") == ["clean"] * 5
    assert set(split_kinds(cfg, "artifact")) <= set(ARTIFACT_TYPES)
    pen = SynthConfig(mix={"penmark": 1.0}, artifact_count=20)
    assert set(split_kinds(pen, "artifact")) == {"penmark"}


def test_clean_samples_have_empty_masks():
    cfg = SynthConfig(seed=2, size=64, test_count=20)
    for s in generate_split(cfg, "test"):
        if s.kind == "clean":
            assert s.type_masks == {} and not s.union_mask.any()
        else:
            assert s.union_mask.any()
