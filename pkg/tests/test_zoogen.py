import numpy as np
import pytest

from weightsym.netmodels import serialize
from weightsym.zoogen import (Zoo, ZooEntry, augment_zoo, gen_mha_zoo,
                              gen_mlp_zoo, load_zoo, save_zoo)


@pytest.fixture(scope="module")
def small_zoo():
    return gen_mlp_zoo(n=30, seed=42)


def test_deterministic_generation(small_zoo):
    again = gen_mlp_zoo(n=30, seed=42)
    for a, b in zip(small_zoo.entries, again.entries):
        assert a.label == b.label
        assert serialize(a.params) == serialize(b.params)


def test_labels_are_probabilities_with_spread(small_zoo):
    labels = np.array([e.label for e in small_zoo.entries])
    assert np.all((labels >= 0) & (labels <= 1))
    assert labels.max() - labels.min() > 0.2


def test_split_fractions(small_zoo):
    counts = small_zoo.split_counts()
    assert counts["train"] == 21  # round(0.7 * 30)
    assert set(counts) == {"train", "val", "test"}
    assert sum(counts.values()) == 30


def test_augment_inherits_labels_and_splits(small_zoo):
    aug = augment_zoo(small_zoo, factor=3, seed=0, scale_exp=2)
    n = len(small_zoo.entries)
    assert len(aug.entries) == 3 * n
    # originals retained in place
    for a, b in zip(small_zoo.entries, aug.entries[:n]):
        assert a is b
    for copy in aug.entries[n:]:
        src = small_zoo.entries[copy.provenance["source"]]
        assert copy.label == src.label
        assert copy.split == src.split
        assert copy.provenance["origin"] == "augmented"
        assert serialize(copy.params) != serialize(src.params)


def test_augment_factor_one_is_identity(small_zoo):
    aug = augment_zoo(small_zoo, factor=1, seed=0)
    assert len(aug.entries) == len(small_zoo.entries)


def test_augment_rejects_bad_factor(small_zoo):
    with pytest.raises(ValueError):
        augment_zoo(small_zoo, factor=0)


def test_save_load_round_trip(tmp_path, small_zoo):
    path = tmp_path / "zoo.json"
    save_zoo(small_zoo, path, manifest_path=tmp_path / "zoo.csv")
    back = load_zoo(path)
    assert back.arch == small_zoo.arch
    assert len(back.entries) == len(small_zoo.entries)
    for a, b in zip(small_zoo.entries, back.entries):
        assert serialize(a.params) == serialize(b.params)  # bit-exact
        assert a.label == b.label and a.split == b.split
    manifest = (tmp_path / "zoo.csv").read_text().splitlines()
    assert manifest[0] == "index,label,split,origin"
    assert len(manifest) == len(small_zoo.entries) + 1


def test_mha_zoo_generation():
    zoo = gen_mha_zoo(n=10, seed=1)
    assert zoo.arch == "mha"
    labels = [e.label for e in zoo.entries]
    assert all(0 <= v <= 1 for v in labels)
    aug = augment_zoo(zoo, factor=2, seed=2, gl_spread=1.0)
    assert len(aug.entries) == 20


def test_bad_save_target_detected(tmp_path):
    path = tmp_path / "not_zoo.json"
    path.write_text('{"version": "weightsym/1", "kind": "metanet"}')
    with pytest.raises(Exception):
        load_zoo(path)


def test_empty_zoo_rejected():
    with pytest.raises(ValueError):
        gen_mlp_zoo(n=0)
