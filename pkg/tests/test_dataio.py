import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from eddpc.dataio import (Dataset, NoiseModel, average_datasets, check_persistency,
                          check_rank_condition, data_matrices, hankel, inject_noise,
                          load_dataset, load_runs, min_samples, save_dataset, save_runs)
from eddpc.errors import DimensionError, ParseError, PreconditionError
from eddpc.simlab.metrics import snr_db
from eddpc.simlab.plants import OL_STABLE, open_loop_data


def _loop_hankel(seq, depth):
    q, N = seq.shape
    out = np.zeros((q * depth, N - depth + 1))
    for i in range(depth):
        for j in range(N - depth + 1):
            out[i * q:(i + 1) * q, j] = seq[:, i + j]
    return out


# --- loading -----------------------------------------------------------------

def test_csv_dimensions_inferred(tmp_path):
    rng = np.random.default_rng(0)
    path = tmp_path / "d.csv"
    rows = rng.normal(size=(21, 5))
    with open(path, "w") as fh:
        fh.write("u1,u2,x1,x2,x3\n")
        for r in rows:
            fh.write(",".join(repr(float(v)) for v in r) + "\n")
    ds = load_dataset(path)
    assert (ds.m, ds.n, ds.T) == (2, 3, 20)
    np.testing.assert_array_equal(ds.inputs, rows[:, :2].T)
    np.testing.assert_array_equal(ds.states, rows[:, 2:].T)


def test_csv_column_order_is_free(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("x2,u1,x1\n1,2,3\n4,5,6\n")
    ds = load_dataset(path)
    np.testing.assert_array_equal(ds.inputs, [[2, 5]])
    np.testing.assert_array_equal(ds.states, [[3, 6], [1, 4]])


def test_empty_file_is_parse_error(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("")
    with pytest.raises(ParseError):
        load_dataset(path)


def test_bad_cell_names_row_and_column(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("u1,x1\n1,2\n3,oops\n")
    with pytest.raises(ParseError) as info:
        load_dataset(path)
    assert info.value.row == 3 and info.value.column == "x1"


def test_ragged_row_is_dimension_error(tmp_path):
    path = tmp_path / "ragged.csv"
    path.write_text("u1,x1\n1,2\n3\n")
    with pytest.raises(DimensionError):
        load_dataset(path)


def test_json_length_mismatch(tmp_path):
    path = tmp_path / "d.json"
    path.write_text('{"m": 1, "n": 1, "T": 2, "u": [[1], [2], [3]], "x": [[1], [2]]}')
    with pytest.raises(DimensionError):
        load_dataset(path)


def test_unknown_format(tmp_path):
    with pytest.raises(ParseError):
        load_dataset(tmp_path / "d.txt")


@settings(max_examples=25, deadline=None)
@given(arrays(np.float64, (2, 6), elements=st.floats(-1e6, 1e6)),
       arrays(np.float64, (3, 6), elements=st.floats(-1e6, 1e6)),
       st.sampled_from(["csv", "json"]))
def test_round_trip_exact(tmp_path_factory, u, x, fmt):
    path = tmp_path_factory.mktemp("rt") / f"d.{fmt}"
    ds = Dataset(u, x)
    save_dataset(ds, path)
    back = load_dataset(path)
    np.testing.assert_array_equal(back.inputs, ds.inputs)
    np.testing.assert_array_equal(back.states, ds.states)


def test_run_directory(tmp_path):
    u = np.arange(6.0)[None, :]
    runs = [Dataset(u, np.full((2, 6), float(k))) for k in range(3)]
    paths = save_runs(runs, tmp_path / "runs")
    assert [p.name for p in paths] == ["run_0001.csv", "run_0002.csv", "run_0003.csv"]
    back = load_runs(tmp_path / "runs")
    assert [float(r.states[0, 0]) for r in back] == [0.0, 1.0, 2.0]
    with pytest.raises(ParseError):
        load_runs(tmp_path)


def test_dataset_invariants():
    with pytest.raises(DimensionError):
        Dataset(np.zeros((1, 4)), np.zeros((2, 5)))
    with pytest.raises(DimensionError):
        Dataset(np.zeros((1, 1)), np.zeros((1, 1)))


# --- Hankel matrices -----------------------------------------------------------

def test_hankel_small():
    np.testing.assert_array_equal(hankel([[1, 2, 3, 4]], 2), [[1, 2, 3], [2, 3, 4]])


def test_hankel_depth_one_is_identity():
    seq = np.arange(10.0).reshape(2, 5)
    np.testing.assert_array_equal(hankel(seq, 1), seq)


def test_hankel_too_deep():
    with pytest.raises(DimensionError):
        hankel(np.zeros((1, 4)), 5)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 12), st.integers(1, 3), st.data())
def test_hankel_matches_loop_builder(T, q, data):
    seq = np.random.default_rng(T * 7 + q).normal(size=(q, T))
    depth = data.draw(st.integers(1, T))
    np.testing.assert_array_equal(hankel(seq, depth), _loop_hankel(seq, depth))


def test_hankel_random_2x11_depth3():
    seq = np.random.default_rng(3).normal(size=(2, 11))
    np.testing.assert_array_equal(hankel(seq, 3), _loop_hankel(seq, 3))


# --- excitation ------------------------------------------------------------------

def test_constant_input_not_pe():
    ds = Dataset(np.ones((1, 21)), np.zeros((2, 21)))
    for order in (2, 3, 5):
        assert not check_persistency(ds, order).is_pe


def test_uniform_input_pe():
    u = np.random.default_rng(1).uniform(-5, 5, (1, 21))
    rep = check_persistency(Dataset(u, np.zeros((2, 21))), 3)
    assert rep.is_pe and rep.rank == 3 and rep.expected_rank == 3


def test_order_beyond_T():
    ds = Dataset(np.ones((1, 6)), np.zeros((1, 6)))
    with pytest.raises(PreconditionError):
        check_persistency(ds, 6)


def test_rank_condition_pass(ol_data):
    rep = check_rank_condition(data_matrices(ol_data))
    assert rep.is_pe and rep.rank == 3


def test_rank_condition_zero_input():
    ds = open_loop_data(OL_STABLE, np.zeros((1, 21)), x0=[1.0, -1.0])
    rep = check_rank_condition(data_matrices(ds))
    assert not rep.is_pe and rep.rank <= 2


def test_rank_condition_length_bound():
    assert min_samples(1, 2) == 5
    T = min_samples(1, 2) - 1
    u = np.random.default_rng(0).uniform(-1, 1, (1, T + 1))
    ds = open_loop_data(OL_STABLE, u)
    with pytest.raises(PreconditionError, match=r"\(m\+1\)n\+m"):
        check_rank_condition(data_matrices(ds))


def test_data_matrices_layout(ol_data):
    dm = data_matrices(ol_data)
    np.testing.assert_array_equal(dm.U01T, ol_data.inputs[:, :-1])
    np.testing.assert_array_equal(dm.X0T, ol_data.states[:, :-1])
    np.testing.assert_array_equal(dm.X1T, ol_data.states[:, 1:])
    np.testing.assert_array_equal(dm.stacked, np.vstack([dm.U01T, dm.X0T]))


# --- averaging and noise --------------------------------------------------------------

def test_average_single_run_identity(ol_data):
    assert average_datasets([ol_data], 1) is ol_data


def test_average_of_two():
    u = np.arange(5.0)[None, :]
    Y = np.random.default_rng(0).normal(size=(2, 5))
    c = np.array([[0.5], [-1.5]])
    out = average_datasets([Dataset(u, Y), Dataset(u, Y + 2 * c)])
    np.testing.assert_allclose(out.states, Y + c, atol=1e-15)
    np.testing.assert_array_equal(out.inputs, u)


def test_average_needs_shared_inputs():
    a = Dataset(np.zeros((1, 4)), np.zeros((1, 4)))
    b = Dataset(np.ones((1, 4)), np.zeros((1, 4)))
    with pytest.raises(PreconditionError, match="same input sequence"):
        average_datasets([a, b])


def test_average_too_many_runs(ol_data):
    with pytest.raises(PreconditionError):
        average_datasets([ol_data], 2)


def test_average_permutation_invariant():
    rng = np.random.default_rng(5)
    u = rng.normal(size=(1, 8))
    runs = [Dataset(u, rng.normal(size=(2, 8)) * 10.0**rng.integers(-3, 3)) for _ in range(9)]
    ref = average_datasets(runs)
    for k in range(5):
        perm = rng.permutation(9)
        np.testing.assert_array_equal(average_datasets([runs[i] for i in perm]).states,
                                      ref.states)


def test_average_preserves_excitation():
    u = np.random.default_rng(2).uniform(-5, 5, (1, 21))
    clean = open_loop_data(OL_STABLE, u)
    runs = [inject_noise(clean, NoiseModel.isotropic(0.1, 2, seed=k)) for k in range(7)]
    for order in (1, 2, 3, 4):
        assert check_persistency(average_datasets(runs), order) == check_persistency(runs[0], order)


def test_average_residual_shrinks_as_sqrt_L():
    u = np.random.default_rng(4).uniform(-5, 5, (1, 21))
    clean = open_loop_data(OL_STABLE, u)
    runs = [inject_noise(clean, NoiseModel.isotropic(0.1, 2, seed=100 + k)) for k in range(400)]
    resid = average_datasets(runs).states - clean.states
    assert 0.003 <= resid.std() <= 0.007


@pytest.mark.parametrize("L", [16, 64, 256])
def test_average_max_error_bound(L):
    u = np.random.default_rng(9).uniform(-5, 5, (1, 11))
    clean = open_loop_data(OL_STABLE, u)
    sigma, fails = 0.1, 0
    for seed in range(20):
        runs = [inject_noise(clean, NoiseModel.isotropic(sigma, 2, seed=seed * 1000 + k))
                for k in range(L)]
        err = np.abs(average_datasets(runs).states - clean.states).max()
        fails += err > 5 * sigma / np.sqrt(L)
    assert fails == 0


def test_noise_zero_covariance(ol_data):
    out = inject_noise(ol_data, NoiseModel(np.zeros((2, 2)), seed=3))
    np.testing.assert_array_equal(out.states, ol_data.states)


def test_noise_deterministic(ol_data):
    nm = NoiseModel.isotropic(0.3, 2, seed=11)
    np.testing.assert_array_equal(inject_noise(ol_data, nm).states,
                                  inject_noise(ol_data, nm).states)


def test_noise_model_rejects_bad_covariance():
    with pytest.raises(PreconditionError):
        NoiseModel(np.array([[1.0, 0.0], [0.0, -0.1]]))
    with pytest.raises(PreconditionError):
        NoiseModel(np.array([[1.0, 0.5], [0.0, 1.0]]))
    with pytest.raises(DimensionError):
        inject_noise(Dataset(np.ones((1, 3)), np.ones((2, 3))), NoiseModel.isotropic(1.0, 3))


def test_two_state_snr_near_20db():
    rng = np.random.default_rng(0)
    vals = []
    for k in range(50):
        clean = open_loop_data(OL_STABLE, rng.uniform(-5, 5, (1, 21)))
        noisy = inject_noise(clean, NoiseModel.isotropic(0.024, 2, seed=k))
        vals.append(snr_db(clean.states, noisy.states))
    # the 0.024 noise level puts this data at roughly 20 dB
    assert 16.0 <= np.mean(vals) <= 22.0
