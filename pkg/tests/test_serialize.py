import numpy as np
import pytest

from sann import serialize
from sann.harness import gen_random_instance
from sann.index import BuildParams, build_forest, tree_fingerprint


@pytest.fixture(scope="module")
def forest():
    inst = gen_random_instance(300, 64, 2.0, 1.0, 10, 2)
    return build_forest(inst.points, BuildParams(seed=5, leaf_cutoff=16), 2), inst


def test_round_trip_is_bit_exact(forest, tmp_path):
    f, inst = forest
    blob = serialize.dumps(f)
    assert blob[:4] == b"SANN" and int.from_bytes(blob[4:6], "little") == serialize.VERSION
    path = tmp_path / "f.sann"
    serialize.save(f, path)
    g = serialize.load(path)
    assert serialize.dumps(g) == blob
    assert g.params == f.params
    np.testing.assert_array_equal(g.points, f.points)
    assert [tree_fingerprint(t) for t in g.trees] == [tree_fingerprint(t) for t in f.trees]
    for q in inst.queries:
        assert g.query(q)[0] == f.query(q)[0]


def test_rejects_bad_files(forest):
    blob = serialize.dumps(forest[0])
    with pytest.raises(serialize.FormatError):
        serialize.loads(b"NOPE" + blob[4:])
    with pytest.raises(serialize.FormatError):
        serialize.loads(blob[:-3])
    with pytest.raises(serialize.FormatError):
        serialize.loads(blob + b"\0")
    bumped = blob[:4] + (99).to_bytes(2, "little") + blob[6:]
    with pytest.raises(serialize.FormatError):
        serialize.loads(bumped)
