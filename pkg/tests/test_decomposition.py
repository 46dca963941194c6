import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from beamscan.channel import simulate
from beamscan.decomposition import (
    AlsOptions,
    align_components,
    correlation_matrix,
    fit_vs_rank,
    free_parameters,
    interleave,
    normalize_factors,
    parafac,
    pca,
    power_matrix,
)
from beamscan.tensor import cp_reconstruct, unfold
from conftest import mini_scenario1, random_tensor
from oracles import best_assignment, planted_factors, power_loops, projection_fit

dims = st.integers(1, 6)


# ---------------------------------------------------------------- power matrix


def test_power_matrix_examples():
    x = np.zeros((3, 2, 2), dtype=complex)
    x[:, 0, 0] = [1, 1j, -1]
    x[1, 1, 1] = 3 + 4j
    np.testing.assert_array_equal(power_matrix(x), [[3, 0], [0, 25]])
    assert power_matrix(np.zeros((4, 3, 2))).shape == (3, 2)


def test_power_matrix_bit_identical_to_loops(rng):
    for _ in range(5):
        shape = tuple(rng.integers(1, 8, size=3))
        x = random_tensor(rng, shape)
        np.testing.assert_array_equal(power_matrix(x), power_loops(x))


@given(shape=st.tuples(dims, dims, dims), seed=st.integers(0, 2**32 - 1))
def test_power_matrix_nonnegative_and_sums_to_energy(shape, seed):
    x = random_tensor(np.random.default_rng(seed), shape)
    p = power_matrix(x)
    assert np.all(p >= 0)
    assert p.sum() == pytest.approx(np.sum(np.abs(x) ** 2), rel=1e-12)


def test_interleave_layout(rng):
    x = random_tensor(rng, (3, 4, 5))
    m = interleave(x)
    assert m.shape == (12, 5)
    for t in range(3):
        for j in range(4):
            np.testing.assert_array_equal(m[t + j * 3], x[t, j])


# ---------------------------------------------------------------- PCA


def test_pca_rank_one_scree(rng):
    d, s, g = planted_factors(rng, (6, 5, 30), 1)
    model = pca(cp_reconstruct(d, s, g), 1)
    assert model.scree[0] == 1.0
    assert np.all(model.scree[1:] <= 1e-12)
    # X = U S V^H, so trajectory V S is conj(g) up to a complex scalar
    corr = correlation_matrix(model.trajectories, np.conj(g))
    assert corr[0, 0] == pytest.approx(1.0, abs=1e-12)


def test_pca_scaling_and_reconstruction(rng):
    x = random_tensor(rng, (4, 3, 10))
    a = pca(x, 2)
    b = pca(3.0 * x, 2)
    np.testing.assert_allclose(b.factors.S, 3 * a.factors.S, rtol=1e-12)
    np.testing.assert_allclose(b.scree, a.scree, rtol=1e-12)
    full = pca(x, 10).reconstruct()
    np.testing.assert_allclose(full, interleave(x), atol=1e-12)


def test_pca_trajectory_is_projection(rng):
    x = random_tensor(rng, (4, 3, 10))
    model = pca(x, 3)
    # V S = X^H U: conjugated projection of each scan on a spatial mode
    proj = interleave(x).conj().T @ model.factors.U[:, :3]
    np.testing.assert_allclose(model.trajectories, proj, atol=1e-12)


@pytest.mark.parametrize("n", [0, 13])
def test_pca_component_range(rng, n):
    with pytest.raises(ValueError, match="n_components"):
        pca(random_tensor(rng, (3, 4, 20)), n)


def test_pca_mixes_independent_blockages():
    """The dominant PCA trajectory reacts to both paths' blockage events."""
    sc = mini_scenario1()
    x, truth = simulate(sc)
    traj = 20 * np.log10(np.abs(pca(x, 1).trajectories[:, 0]))
    base = np.median(traj)
    t = truth.times_s
    for path in sc.paths:
        ev = path.trajectory.events[0]
        hold = (t >= ev.breakpoints[1]) & (t <= ev.breakpoints[2])
        assert base - traj[hold].max() > 3


# ---------------------------------------------------------------- PARAFAC


def test_parafac_rank_one_exact(rng):
    d, s, g = planted_factors(rng, (6, 5, 40), 1)
    model = parafac(cp_reconstruct(d, s, g), 1)
    assert model.fit >= 1 - 1e-9
    assert correlation_matrix(model.g, g)[0, 0] >= 1 - 1e-9


@pytest.mark.parametrize("rank", [2, 3])
def test_parafac_recovers_planted_factors(rank):
    rng = np.random.default_rng(rank)
    planted = planted_factors(rng, (10, 8, 40), rank)
    model = parafac(cp_reconstruct(*planted), rank)
    assert model.fit >= 1 - 1e-6
    for est, true in zip((model.d, model.s, model.g), planted):
        corr = correlation_matrix(est, true)
        perm = best_assignment(corr)
        assert np.all(corr[perm, np.arange(rank)] >= 1 - 1e-6)


def test_parafac_noisy_fit_matches_projection():
    rng = np.random.default_rng(7)
    d, s, g = planted_factors(rng, (10, 8, 60), 2)
    clean = cp_reconstruct(d, s, g).data
    noise = random_tensor(rng, clean.shape)
    noise *= 10 ** (-40 / 20) * np.linalg.norm(clean) / np.linalg.norm(noise)
    x = clean + noise
    model = parafac(x, 2)
    # with d and s at the planted values the best possible fit is the projection fit
    assert model.fit == pytest.approx(projection_fit(x, d, s), abs=1e-3)
    assert model.fit >= projection_fit(x, d, s) - 1e-9


def test_parafac_normalization(rng):
    x = random_tensor(rng, (5, 4, 20))
    model = parafac(x, 3, AlsOptions(n_init=1, max_iter=50))
    for f in (model.d, model.s):
        np.testing.assert_allclose(np.linalg.norm(f, axis=0), 1, atol=1e-12)
        pivots = f[np.argmax(np.abs(f), axis=0), np.arange(3)]
        assert np.all(pivots.real >= 0)
        np.testing.assert_allclose(pivots.imag, 0, atol=1e-15)
    norms = np.linalg.norm(model.g, axis=0)
    assert np.all(np.diff(norms) <= 0)
    resid = np.linalg.norm(x - model.reconstruct().data) / np.linalg.norm(x)
    assert model.fit == pytest.approx(1 - resid, abs=1e-12)
    assert 0 <= model.fit <= 1


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), rank=st.integers(1, 3))
def test_parafac_fit_history_monotone(seed, rank):
    x = random_tensor(np.random.default_rng(seed), (5, 4, 12))
    model = parafac(x, rank, AlsOptions(n_init=2, max_iter=60))
    for _, history in model.runs:
        assert np.all(np.diff(history) >= -1e-12)


def test_normalize_factors_preserves_model(rng):
    d, s, g = planted_factors(rng, (4, 3, 6), 2)
    nd, ns, ng = normalize_factors(d, s, g)
    np.testing.assert_allclose(
        cp_reconstruct(nd, ns, ng).data, cp_reconstruct(d, s, g).data, atol=1e-12
    )


def test_parafac_errors(rng):
    x = random_tensor(rng, (3, 4, 5))
    for bad in (0, 4):
        with pytest.raises(ValueError, match="rank"):
            parafac(x, bad)
    y = x.copy()
    y[0, 0, 0] = np.nan
    with pytest.raises(ValueError, match="non-finite"):
        parafac(y, 1)
    with pytest.raises(ValueError, match="zero"):
        parafac(np.zeros((3, 4, 5)), 1)


def test_parafac_deterministic(rng, monkeypatch):
    x = random_tensor(rng, (5, 4, 15))
    a = parafac(x, 2, AlsOptions(max_iter=40))
    b = parafac(x, 2, AlsOptions(max_iter=40))
    monkeypatch.setenv("BEAMSCAN_THREADS", "4")
    c = parafac(x, 2, AlsOptions(max_iter=40))
    for m in (b, c):
        np.testing.assert_array_equal(a.g, m.g)
        assert a.fit == m.fit


def test_fit_vs_rank_grows(rng):
    d, s, g = planted_factors(rng, (6, 5, 30), 2)
    fits = fit_vs_rank(cp_reconstruct(d, s, g), 3, AlsOptions(n_init=2))
    assert fits[1] >= 1 - 1e-6
    assert fits[0] < fits[1]


def test_parafac_separates_blockage_events():
    sc = mini_scenario1()
    x, truth = simulate(sc)
    model = parafac(x, 2)
    al = align_components(model, truth)
    assert np.all(al.correlations >= 0.95)
    traj = model.trajectory_db()[:, al.permutation]
    t = truth.times_s
    for l, path in enumerate(sc.paths):
        ev = path.trajectory.events[0]
        hold = (t >= ev.breakpoints[1]) & (t <= ev.breakpoints[2])
        base = np.median(traj[:, l])
        assert base - traj[hold, l].max() > 10
        for other, opath in enumerate(sc.paths):
            if other == l:
                continue
            oev = opath.trajectory.events[0]
            ohold = (t >= oev.breakpoints[1]) & (t <= oev.breakpoints[2])
            assert base - traj[ohold, l].min() < 3


# ---------------------------------------------------------------- alignment


def test_align_identity(rng):
    g = random_tensor(rng, (20, 3, 1))[..., 0]
    al = align_components(g, g)
    np.testing.assert_array_equal(al.permutation, [0, 1, 2])
    np.testing.assert_allclose(al.scales, 1)
    np.testing.assert_allclose(al.correlations, 1)


def test_align_swap_and_negate(rng):
    g = random_tensor(rng, (20, 2, 1))[..., 0]
    al = align_components(np.column_stack([g[:, 1], -g[:, 0]]), g)
    np.testing.assert_array_equal(al.permutation, [1, 0])
    np.testing.assert_allclose(al.scales, [-1, 1])
    np.testing.assert_allclose(al.correlations, 1)


def test_align_swap_and_rescale(rng):
    g = random_tensor(rng, (20, 2, 1))[..., 0]
    est = np.column_stack([-2j * g[:, 1], 0.5 * g[:, 0]])
    al = align_components(est, g)
    np.testing.assert_array_equal(al.permutation, [1, 0])
    np.testing.assert_allclose(al.scales, [2.0, 1 / (-2j)])
    np.testing.assert_allclose(est[:, al.permutation] * al.scales, g, atol=1e-12)


@settings(max_examples=30)
@given(seed=st.integers(0, 2**32 - 1), rank=st.integers(1, 4))
def test_align_matches_exhaustive_search(seed, rank):
    rng = np.random.default_rng(seed)
    truth = random_tensor(rng, (30, rank, 1))[..., 0]
    order = rng.permutation(rank)
    est = truth[:, order] + 0.1 * random_tensor(rng, (30, rank, 1))[..., 0]
    al = align_components(est, truth)
    assert sorted(al.permutation) == list(range(rank))
    np.testing.assert_array_equal(al.permutation, best_assignment(correlation_matrix(est, truth)))


def test_align_shape_mismatch(rng):
    with pytest.raises(ValueError, match="mismatch"):
        align_components(np.ones((5, 2)), np.ones((5, 3)))


# ---------------------------------------------------------------- parameter counts


def test_free_parameter_examples():
    assert free_parameters(192, 144, 1750, 2, "pca") == 2 * (192 + 144 * 1750)
    assert free_parameters(192, 144, 1750, 2, "parafac") == 2 * (192 + 144 + 1750)
    assert free_parameters(1, 1, 1, 1, "parafac") == 3
    with pytest.raises(ValueError, match="unknown model"):
        free_parameters(2, 2, 2, 1, "tucker")


@given(i=st.integers(1, 500), j=st.integers(1, 500), k=st.integers(1, 5000), rank=st.integers(1, 10))
def test_parafac_needs_fewer_parameters(i, j, k, rank):
    cp = free_parameters(i, j, k, rank, "parafac")
    full = free_parameters(i, j, k, rank, "pca")
    # j + k < j k exactly when (j - 1)(k - 1) > 1
    if (j - 1) * (k - 1) > 1:
        assert cp < full
    else:
        assert cp >= full


def test_unfolding_consistency_with_cp_model(rng):
    d, s, g = planted_factors(rng, (4, 3, 5), 2)
    x = cp_reconstruct(d, s, g)
    from beamscan.tensor import khatri_rao

    np.testing.assert_allclose(unfold(x, 3), g @ khatri_rao(s, d).T, atol=1e-12)
    np.testing.assert_allclose(interleave(x), khatri_rao(s, d) @ g.T, atol=1e-12)
