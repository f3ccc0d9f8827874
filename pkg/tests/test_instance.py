import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pha_sk import rng as streams
from pha_sk.instance import (
    SkInstance,
    SkiFormatError,
    SkiTruncatedError,
    SkiVersionError,
    export_csv,
    hamiltonian,
    load_instance,
    sample_instance,
    save_instance,
)


def test_determinism_bitwise():
    a = sample_instance(4, 42)
    b = sample_instance(4, 42)
    assert a.A.tobytes() == b.A.tobytes()
    assert not np.array_equal(a.A, sample_instance(4, 43).A)


def test_single_entry_variance_over_seeds():
    draws = np.array([sample_instance(1, s).A[0, 0] for s in range(10_000)])
    assert abs(draws.var() - 1.0) < 0.05


def test_rejects_empty():
    with pytest.raises(ValueError):
        sample_instance(0, 1)


def test_operator_norm_n2000():
    inst = sample_instance(2000, 7)
    norm = np.linalg.norm(inst.A + inst.A.T, 2)
    assert 2.6 <= norm <= 3.0


def test_semicircle_support():
    inst = sample_instance(2000, 3)
    ev = np.linalg.eigvalsh(2 * inst.A_sym)
    edge = 2 * np.sqrt(2)
    assert ev.min() >= -edge - 0.15 and ev.max() <= edge + 0.15


def test_goe_diagonal_variance():
    d = np.concatenate([np.diag(sample_instance(200, s, diag="goe").A) for s in range(20)])
    assert abs(d.var() * 200 - 2.0) < 0.2
    with pytest.raises(ValueError):
        sample_instance(3, 0, diag="bogus")


def test_instance_is_read_only():
    inst = sample_instance(3, 0)
    with pytest.raises(ValueError):
        inst.A[0, 0] = 1.0


def test_hamiltonian_examples():
    inst = SkInstance(n=2, A=np.array([[0.0, 1.0], [1.0, 0.0]]), seed=0)
    assert hamiltonian(inst, np.ones(2)) == 2.0
    assert hamiltonian(inst, np.zeros(2)) == 0.0
    with pytest.raises(ValueError):
        hamiltonian(inst, np.ones(3))


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 40), st.integers(0, 2**32 - 1))
def test_symmetrization_identity(n, seed):
    inst = sample_instance(n, seed)
    s = streams.stream(seed, streams.BENCH).uniform(-1, 1, n)
    h = hamiltonian(inst, s)
    h_sym = float(s @ inst.A_sym @ s)
    assert abs(h - h_sym) <= 1e-12 * max(1.0, abs(h))


def test_round_trip(tmp_path):
    inst = sample_instance(8, 1)
    path = tmp_path / "a.ski"
    save_instance(inst, path)
    back = load_instance(path)
    assert back.A.tobytes() == inst.A.tobytes()
    assert (back.n, back.seed, back.diag) == (8, 1, "iid")
    goe = sample_instance(5, 2, diag="goe")
    save_instance(goe, path)
    assert load_instance(path).diag == "goe"


def test_file_errors(tmp_path):
    inst = sample_instance(8, 1)
    path = tmp_path / "a.ski"
    save_instance(inst, path)
    raw = path.read_bytes()

    (tmp_path / "t.ski").write_bytes(raw[:-8])
    with pytest.raises(SkiTruncatedError):
        load_instance(tmp_path / "t.ski")

    (tmp_path / "m.ski").write_bytes(b"XXX" + raw[3:])
    with pytest.raises(SkiFormatError):
        load_instance(tmp_path / "m.ski")

    (tmp_path / "v.ski").write_bytes(raw.replace(b'"version":1', b'"version":9'))
    with pytest.raises(SkiVersionError):
        load_instance(tmp_path / "v.ski")

    (tmp_path / "j.ski").write_bytes(b"SKI{not json" + raw[12:])
    with pytest.raises(SkiFormatError):
        load_instance(tmp_path / "j.ski")


def test_export_csv(tmp_path):
    inst = sample_instance(5, 9)
    export_csv(inst, tmp_path / "a.csv")
    assert np.array_equal(np.loadtxt(tmp_path / "a.csv", delimiter=","), inst.A)


def test_streams_are_independent():
    a = streams.stream(0, streams.PHA_STEP, 0).standard_normal(4)
    b = streams.stream(0, streams.PHA_STEP, 1).standard_normal(4)
    c = streams.stream(0, streams.PHA_STEP, 0).standard_normal(4)
    assert np.array_equal(a, c) and not np.array_equal(a, b)
