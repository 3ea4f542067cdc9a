import numpy as np
import pytest

from hsiclust import (
    Dictionary,
    HsiCube,
    NumericError,
    OdlState,
    ParameterError,
    TrainConfig,
    extract_tiles,
    flatten,
    init_dictionary,
    jsr_train,
    odl_step,
    omp,
    resume,
    somp,
    suggested_atom_count,
    train,
)
from hsiclust.dictionary import DIAG_EPS


def fresh_state(atoms, seed=0, allow_undercomplete=True):
    d = Dictionary(atoms, allow_undercomplete=allow_undercomplete)
    return OdlState(
        dictionary=d,
        code_gram=np.zeros((d.k, d.k)),
        data_code_cross=np.zeros((d.m, d.k)),
        steps=0,
        seed=seed,
    )


def two_sparse_data(m, k, n, seed):
    rng = np.random.default_rng(seed)
    atoms = rng.standard_normal((m, k))
    atoms /= np.linalg.norm(atoms, axis=0)
    weights = np.zeros((k, n))
    for j in range(n):
        idx = rng.choice(k, size=2, replace=False)
        weights[idx, j] = rng.standard_normal(2)
    return atoms @ weights


class TestTrainConfig:
    def test_paper_style_grids_are_constructible(self):
        for k in (220, 306, 408):
            for s in (10, 5, 2):
                cfg = TrainConfig(n_atoms=k, sparsity=s, iterations=5000)
                assert cfg.iterations == 5000

    def test_atom_count_heuristic_doubles_dimension(self):
        assert suggested_atom_count(204) == 408
        assert suggested_atom_count(8) == 16

    def test_rejects_bad_values(self):
        with pytest.raises(ParameterError):
            TrainConfig(n_atoms=4, sparsity=0, iterations=10)
        with pytest.raises(ParameterError):
            TrainConfig(n_atoms=4, sparsity=1, iterations=0)
        with pytest.raises(ParameterError):
            TrainConfig(n_atoms=4, sparsity=1, iterations=10, tile=(2, 3))


class TestOdlStateValidation:
    def test_asymmetric_gram_rejected(self):
        d = Dictionary(np.eye(3), allow_undercomplete=True)
        gram = np.zeros((3, 3))
        gram[0, 1] = 1e-6
        with pytest.raises(ParameterError):
            OdlState(dictionary=d, code_gram=gram, data_code_cross=np.zeros((3, 3)))


class TestInitDictionary:
    def test_single_pixel_replacement_path(self):
        x = np.array([[3.0], [4.0]])
        d = init_dictionary(x, 2, seed=0, allow_undercomplete=True)
        expected = np.array([0.6, 0.8])
        assert d.atoms[:, 0] == pytest.approx(expected, abs=1e-15)
        assert d.atoms[:, 1] == pytest.approx(expected, abs=1e-15)

    def test_seed_determinism(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((6, 40))
        a = init_dictionary(x, 12, seed=7)
        b = init_dictionary(x, 12, seed=7)
        assert np.array_equal(a.atoms, b.atoms)

    def test_columns_unit_norm(self):
        rng = np.random.default_rng(1)
        x = 5.0 * rng.standard_normal((6, 40))
        d = init_dictionary(x, 12, seed=3)
        assert np.linalg.norm(d.atoms, axis=0) == pytest.approx(np.ones(12), abs=1e-12)

    def test_empty_matrix_rejected(self):
        with pytest.raises(ParameterError):
            init_dictionary(np.empty((4, 0)), 8, seed=0)


class TestOdlStep:
    def test_single_atom_fixed_point(self):
        x = np.array([3.0, 4.0])
        state = fresh_state((x / 5.0)[:, None])
        before = state.dictionary.atoms.copy()
        odl_step(state, x, 1)
        assert state.dictionary.atoms == pytest.approx(before, abs=1e-12)
        assert state.steps == 1

    def test_unused_atom_untouched(self):
        atoms = np.eye(3)
        state = fresh_state(atoms)
        odl_step(state, np.array([2.0, 0.0, 0.0]), 1)
        # only atom 0 was coded; the others accumulated nothing
        assert state.code_gram[1, 1] <= DIAG_EPS
        assert np.array_equal(state.dictionary.atoms[:, 1], np.eye(3)[:, 1])
        assert np.array_equal(state.dictionary.atoms[:, 2], np.eye(3)[:, 2])

    def test_exactly_representable_data_leaves_atoms_fixed(self):
        rng = np.random.default_rng(4)
        basis, _ = np.linalg.qr(rng.standard_normal((8, 8)))
        state = fresh_state(basis)
        before = state.dictionary.atoms.copy()
        for step in range(5):
            x = 2.5 * basis[:, step % 8]
            odl_step(state, x, 2)
            assert state.dictionary.atoms == pytest.approx(before, abs=1e-10)

    def test_dimension_mismatch_rejected(self):
        state = fresh_state(np.eye(3))
        with pytest.raises(ParameterError):
            odl_step(state, np.ones(4), 1)

    def test_non_finite_signal_rejected(self):
        state = fresh_state(np.eye(3))
        with pytest.raises(ParameterError):
            odl_step(state, np.array([1.0, np.nan, 0.0]), 1)


class TestTrain:
    def test_single_iteration_matches_manual_composition(self):
        x = two_sparse_data(8, 16, 50, seed=2)
        cfg = TrainConfig(n_atoms=16, sparsity=2, iterations=1, seed=5)
        state, trace = train(x, cfg)

        rng = np.random.default_rng(5)
        manual = OdlState(
            dictionary=init_dictionary(x, 16, rng),
            code_gram=np.zeros((16, 16)),
            data_code_cross=np.zeros((8, 16)),
            steps=0,
            seed=5,
        )
        draw = np.random.default_rng([5, 1]).integers(0, 50, size=1)
        odl_step(manual, x[:, draw[0]], 2)
        assert np.array_equal(state.dictionary.atoms, manual.dictionary.atoms)
        assert np.array_equal(state.code_gram, manual.code_gram)
        assert trace.shape == (1,)

    def test_reconstruction_error_drops(self):
        x = two_sparse_data(8, 16, 300, seed=3)
        state, trace = train(x, TrainConfig(n_atoms=16, sparsity=2, iterations=800, seed=0))
        assert trace[-150:].mean() < trace[:150].mean()

    def test_atom_norms_never_exceed_unit(self):
        x = two_sparse_data(8, 16, 200, seed=6)
        state, _ = train(x, TrainConfig(n_atoms=16, sparsity=2, iterations=300, seed=1))
        assert np.linalg.norm(state.dictionary.atoms, axis=0).max() <= 1.0 + 1e-12

    def test_code_gram_stays_symmetric_psd(self):
        x = two_sparse_data(6, 12, 150, seed=7)
        state, _ = train(x, TrainConfig(n_atoms=12, sparsity=2, iterations=200, seed=2))
        assert np.abs(state.code_gram - state.code_gram.T).max() == 0.0
        assert np.linalg.eigvalsh(state.code_gram).min() >= -1e-9

    def test_bitwise_determinism(self):
        x = two_sparse_data(8, 16, 100, seed=8)
        cfg = TrainConfig(n_atoms=16, sparsity=2, iterations=150, seed=9)
        a, trace_a = train(x, cfg)
        b, trace_b = train(x, cfg)
        assert np.array_equal(a.dictionary.atoms, b.dictionary.atoms)
        assert np.array_equal(a.code_gram, b.code_gram)
        assert np.array_equal(trace_a, trace_b)

    def test_tile_config_requires_cube(self):
        x = two_sparse_data(8, 16, 50, seed=1)
        cfg = TrainConfig(n_atoms=16, sparsity=2, iterations=10, tile=(3, 3))
        with pytest.raises(ParameterError):
            train(x, cfg)


class TestResume:
    def test_zero_iterations_is_identity(self):
        x = two_sparse_data(8, 16, 100, seed=10)
        state, _ = train(x, TrainConfig(n_atoms=16, sparsity=2, iterations=50, seed=0))
        atoms = state.dictionary.atoms.copy()
        steps = state.steps
        out, trace = resume(state, x, 0, 2)
        assert out is state
        assert np.array_equal(out.dictionary.atoms, atoms)
        assert out.steps == steps
        assert trace.size == 0

    def test_same_distribution_does_not_degrade(self):
        x = two_sparse_data(8, 16, 400, seed=11)
        state, trace = train(x, TrainConfig(n_atoms=16, sparsity=2, iterations=800, seed=3))
        baseline = trace[-200:].mean()
        _, more = resume(state, x, 200, 2)
        assert more.mean() <= 1.1 * baseline

    def test_dimension_mismatch_rejected(self):
        x = two_sparse_data(8, 16, 100, seed=12)
        state, _ = train(x, TrainConfig(n_atoms=16, sparsity=2, iterations=20, seed=0))
        with pytest.raises(ParameterError):
            resume(state, np.zeros((9, 10)), 5, 2)

    def test_resume_continues_the_training_stream(self):
        x = two_sparse_data(8, 16, 100, seed=13)
        full, _ = train(x, TrainConfig(n_atoms=16, sparsity=2, iterations=120, seed=4))
        part, _ = train(x, TrainConfig(n_atoms=16, sparsity=2, iterations=80, seed=4))
        resumed, _ = resume(part, x, 40, 2)
        assert resumed.steps == full.steps
        assert np.array_equal(resumed.dictionary.atoms, full.dictionary.atoms)


def cube_from(data):
    return HsiCube(data=np.asarray(data, dtype=np.float64))


class TestExtractTiles:
    def test_single_tile_image(self):
        rng = np.random.default_rng(0)
        cube = cube_from(rng.random((3, 3, 4)))
        tiles = list(extract_tiles(cube, 3, 3))
        assert len(tiles) == 1
        tile, center = tiles[0]
        assert center == (1, 1)
        assert tile.shape == (4, 9)
        assert np.array_equal(tile[:, 0], cube.data[0, 0])
        assert np.array_equal(tile[:, 4], cube.data[1, 1])

    def test_tile_count_formula(self):
        rng = np.random.default_rng(1)
        cube = cube_from(rng.random((5, 4, 2)))
        tiles = list(extract_tiles(cube, 3, 3))
        assert len(tiles) == (5 - 3 + 1) * (4 - 3 + 1)
        centers = [c for _, c in tiles]
        assert centers == sorted(centers)  # row-major order

    def test_oversized_tile_rejected(self):
        cube = cube_from(np.zeros((3, 6, 2)))
        with pytest.raises(ParameterError):
            list(extract_tiles(cube, 5, 3))

    def test_even_tile_rejected(self):
        cube = cube_from(np.zeros((5, 5, 2)))
        with pytest.raises(ParameterError):
            list(extract_tiles(cube, 2, 3))


class TestJsrTrain:
    def test_paper_style_config_constructible(self):
        for p in (3, 5, 7, 9, 11):
            cfg = TrainConfig(n_atoms=330, sparsity=2, iterations=100, tile=(p, p))
            assert cfg.tile == (p, p)

    def test_accumulators_stay_symmetric(self):
        rng = np.random.default_rng(2)
        cube = cube_from(rng.random((6, 6, 5)))
        cfg = TrainConfig(n_atoms=10, sparsity=2, iterations=40, seed=1, tile=(3, 3))
        state, trace = jsr_train(cube, cfg, allow_undercomplete=True)
        assert np.abs(state.code_gram - state.code_gram.T).max() == 0.0
        assert trace.shape == (40,)
        assert np.linalg.norm(state.dictionary.atoms, axis=0).max() <= 1.0 + 1e-12

    def test_degenerate_tile_matches_pixel_training(self):
        rng = np.random.default_rng(3)
        cube = cube_from(rng.random((5, 5, 6)))
        cfg_tile = TrainConfig(n_atoms=12, sparsity=2, iterations=60, seed=7, tile=(1, 1))
        cfg_flat = TrainConfig(n_atoms=12, sparsity=2, iterations=60, seed=7)
        tiled, _ = jsr_train(cube, cfg_tile, allow_undercomplete=True)
        pixels, _ = flatten(cube, normalize=True)
        flat, _ = train(pixels, cfg_flat, allow_undercomplete=True)
        assert tiled.dictionary.atoms == pytest.approx(flat.dictionary.atoms, abs=1e-10)

    def test_somp_on_single_column_matches_omp(self):
        rng = np.random.default_rng(4)
        atoms = rng.standard_normal((6, 12))
        atoms /= np.linalg.norm(atoms, axis=0)
        d = Dictionary(atoms)
        for _ in range(10):
            x = rng.standard_normal(6)
            tc = somp(d, x[:, None], 3, shape=(1, 1))
            code = omp(d, x, 3)
            assert list(tc.support) == list(code.indices)
            assert tc.coefficients[:, 0] == pytest.approx(code.values, abs=1e-12)
