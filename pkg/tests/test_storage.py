import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from bregopt.objectives import generate_instance
from bregopt.storage import load_instance, load_matrix, save_instance, save_matrix


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 6)),
              elements=st.floats(allow_nan=False, allow_infinity=False)))
def test_matrix_roundtrip_is_exact(tmp_path_factory, M):
    p = tmp_path_factory.mktemp("m") / "m.txt"
    save_matrix(p, M)
    back = load_matrix(p)
    assert back.shape == M.shape
    assert np.array_equal(back, M)


def test_matrix_header_checks(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("2 2\n1 2\n3\n")
    with pytest.raises(ValueError):
        load_matrix(p)
    p.write_text("")
    with pytest.raises(ValueError):
        load_matrix(p)
    p.write_text("two by two\n")
    with pytest.raises(ValueError):
        load_matrix(p)


def test_instance_roundtrip(tmp_path):
    inst = generate_instance(5, 3, rank=2, lam=0.7, symmetric=False, seed=9, scaling=2.0)
    stem = save_instance(tmp_path / "case.json", inst)
    back = load_instance(stem + ".txt")
    assert np.array_equal(back.A, inst.A)
    assert (back.lam, back.rank, back.symmetric, back.seed, back.scaling) == (0.7, 2, False, 9, 2.0)


def test_instance_missing_metadata(tmp_path):
    save_matrix(tmp_path / "x.txt", np.eye(2))
    (tmp_path / "x.json").write_text('{"rank": 1}')
    with pytest.raises(ValueError):
        load_instance(tmp_path / "x")
