"""Tests for the objective families and synthetic generators."""

import math

import numpy as np
import pytest

from dpclip.losses import (
    Dataset,
    QvSpec,
    geometric_median_problem,
    hard_instance_problem,
    heavy_tailed_logistic_dataset,
    load_dataset_csv,
    logistic_grad,
    logistic_grad_norm_exact,
    logistic_loss,
    logistic_problem,
    lower_bound_loss,
    per_sample_lipschitz_logistic,
    planted_logistic_dataset,
    sample_Qv,
    sample_Qv_many,
    sharpness_radius,
)
from dpclip.optimizer import reference_minimum, subgradient_descent


def central_difference(fun, w, step=1e-6):
    grad = np.zeros_like(w)
    for i in range(w.size):
        up = w.copy()
        down = w.copy()
        up[i] += step
        down[i] -= step
        grad[i] = (fun(up) - fun(down)) / (2 * step)
    return grad


# ---------------------------------------------------------------------------
# Dataset plumbing
# ---------------------------------------------------------------------------


def test_dataset_validation_and_bias():
    with pytest.raises(ValueError):
        Dataset(np.ones((3, 2)), np.array([0, 1]))
    with pytest.raises(ValueError):
        Dataset(np.ones((2, 2)), np.array([0, -1]))
    ds = Dataset(np.array([[1.0, 2.0]]), np.array([0]))
    with_bias = ds.with_bias()
    assert with_bias.features.shape == (1, 3)
    assert with_bias.features[0, -1] == 1.0
    with pytest.raises(ValueError):
        with_bias.with_bias()


def test_csv_loader_roundtrip(tmp_path):
    path = tmp_path / "data.csv"
    path.write_text("a,b,label\n1.5,-2.0,1\n0.0,3.25,0\n", encoding="utf-8")
    ds = load_dataset_csv(path)
    assert ds.n == 2 and ds.dim == 2 and not ds.bias_appended
    assert np.allclose(ds.features, [[1.5, -2.0], [0.0, 3.25]])
    assert np.array_equal(ds.labels, [1, 0])
    biased = load_dataset_csv(path, append_bias=True)
    assert biased.dim == 3 and biased.bias_appended
    headerless = tmp_path / "plain.csv"
    headerless.write_text("1.0,2.0,0\n", encoding="utf-8")
    assert load_dataset_csv(headerless).n == 1


def test_csv_loader_errors(tmp_path):
    bad_label = tmp_path / "bad.csv"
    bad_label.write_text("1.0,2.0,0.5\n", encoding="utf-8")
    with pytest.raises(ValueError):
        load_dataset_csv(bad_label)
    ragged = tmp_path / "ragged.csv"
    ragged.write_text("1.0,2.0,0\n1.0,1\n", encoding="utf-8")
    with pytest.raises(ValueError):
        load_dataset_csv(ragged)


# ---------------------------------------------------------------------------
# Logistic regression
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("m", [2, 3, 5])
def test_logistic_loss_uniform_at_zero(m):
    x = np.array([0.7, -1.3, 2.0])
    assert logistic_loss(np.zeros(m * 3), x, m - 1) == pytest.approx(math.log(m), rel=1e-12)


def test_logistic_loss_confident_prediction():
    # logits (+a, -a) for class 0
    a = 20.0
    w = np.array([a, 0.0, -a, 0.0])
    x = np.array([1.0, 0.0])
    assert logistic_loss(w, x, 0) < 1e-12


def test_logistic_shape_errors():
    with pytest.raises(ValueError):
        logistic_loss(np.zeros(5), np.zeros(2), 0)
    with pytest.raises(ValueError):
        logistic_grad(np.zeros(4), np.zeros(2), 3)


def test_logistic_grad_hand_case():
    got = logistic_grad(np.zeros(4), np.array([1.0, 0.0]), 0)
    assert np.allclose(got, [-0.5, 0.0, 0.5, 0.0], atol=1e-15)
    assert np.array_equal(logistic_grad(np.ones(4), np.zeros(2), 1), np.zeros(4))


def test_logistic_grad_finite_differences():
    rng = np.random.default_rng(21)
    for _ in range(50):
        m = int(rng.integers(2, 5))
        d = int(rng.integers(1, 5))
        # moderate logits: near-saturated softmax gradients fall below the
        # precision floor of the central-difference oracle
        w = rng.normal(0, 0.5, size=m * d)
        x = rng.normal(0, 1, size=d)
        y = int(rng.integers(m))
        grad = logistic_grad(w, x, y)
        fd = central_difference(lambda u: logistic_loss(u, x, y), w)
        denom = max(np.linalg.norm(fd), 1e-8)
        assert np.linalg.norm(grad - fd) / denom <= 1e-5


def test_grad_norm_exact_cases():
    assert logistic_grad_norm_exact(np.array([0.5, 0.5]), 0, 1.0) == pytest.approx(
        math.sqrt(0.5), rel=1e-12
    )
    assert logistic_grad_norm_exact(np.array([0.0, 1.0]), 1, 3.0) == 0.0
    # all mass on one wrong class saturates the sqrt(2)||x|| bound
    assert logistic_grad_norm_exact(np.array([0.0, 1.0]), 0, 2.0) == pytest.approx(
        2.0 * math.sqrt(2.0), rel=1e-12
    )
    with pytest.raises(ValueError):
        logistic_grad_norm_exact(np.array([0.5, 0.6]), 0, 1.0)


def test_grad_norm_matches_closed_form():
    rng = np.random.default_rng(22)
    for _ in range(100):
        m = int(rng.integers(2, 6))
        d = int(rng.integers(1, 4))
        w = rng.normal(0, 2, size=m * d)
        x = rng.normal(0, 2, size=d)
        y = int(rng.integers(m))
        logits = w.reshape(m, d) @ x
        z = np.exp(logits - logits.max())
        p = z / z.sum()
        x_norm = float(np.linalg.norm(x))
        expected = logistic_grad_norm_exact(p, y, x_norm)
        got = float(np.linalg.norm(logistic_grad(w, x, y)))
        assert got == pytest.approx(expected, rel=1e-10, abs=1e-12)
        assert got <= math.sqrt(2.0) * x_norm + 1e-12


def test_per_sample_lipschitz_logistic():
    assert per_sample_lipschitz_logistic(np.array([3.0, 4.0])) == pytest.approx(
        math.sqrt(52.0), rel=1e-12
    )
    assert per_sample_lipschitz_logistic(np.zeros(2)) == pytest.approx(
        math.sqrt(2.0), rel=1e-12
    )
    x = np.array([1.0, -2.0])
    doubled = per_sample_lipschitz_logistic(2 * x)
    assert doubled == pytest.approx(math.sqrt(2.0 * (4 * 5 + 1)), rel=1e-12)
    assert doubled < 2 * per_sample_lipschitz_logistic(x)  # appended 1 breaks scaling


def test_logistic_problem_batch_consistency():
    rng = np.random.default_rng(23)
    ds = planted_logistic_dataset(20, 3, 3, rng, 0.5, 2.0).with_bias()
    prob = logistic_problem(ds, 3)
    w = rng.normal(size=prob.dim)
    idx = np.array([0, 5, 11])
    batch_l = prob.losses_at(w, idx)
    batch_g = prob.grads_at(w, idx)
    for row, i in enumerate(idx):
        assert batch_l[row] == pytest.approx(prob.loss(w, int(i)), rel=1e-12)
        assert np.allclose(batch_g[row], prob.grad(w, int(i)), rtol=1e-12, atol=1e-14)
    assert np.allclose(
        prob.lipschitz, math.sqrt(2.0) * np.linalg.norm(ds.features, axis=1)
    )


# ---------------------------------------------------------------------------
# Geometric median
# ---------------------------------------------------------------------------


def test_geometric_median_interpolating_case():
    a = np.array([1.0, -2.0])
    prob = geometric_median_problem(np.stack([a, a, a]))
    assert prob.objective(a) == 0.0
    assert np.array_equal(prob.grad(a, 1), np.zeros(2))
    assert np.array_equal(prob.lipschitz, np.ones(3))
    assert np.array_equal(prob.per_sample_min, np.zeros(3))


def test_geometric_median_1d_flat_minimum():
    prob = geometric_median_problem(np.array([[-1.0], [1.0]]))
    grid = np.linspace(-3.0, 3.0, 1201)
    values = np.array([prob.objective(np.array([w])) for w in grid])
    assert values.min() == pytest.approx(1.0, abs=1e-12)
    inside = (grid >= -1.0) & (grid <= 1.0)
    assert np.allclose(values[inside], 1.0, atol=1e-12)
    assert np.all(values[~inside] > 1.0)


def test_sharpness_radius_formula():
    anchors = np.array([[0.0, 0.0], [2.0, 0.0], [0.0, 2.0]])
    w_star = np.array([0.5, 0.5])
    centroid = anchors.mean(axis=0)
    expected = max(
        2 * np.linalg.norm(centroid - w_star),
        4 * np.mean(np.linalg.norm(anchors - centroid, axis=1)),
    )
    assert sharpness_radius(anchors, w_star) == pytest.approx(expected, rel=1e-12)


def test_geometric_median_sharpness_property():
    rng = np.random.default_rng(24)
    for _ in range(5):
        n = int(rng.integers(2, 21))
        d = int(rng.integers(1, 6))
        anchors = rng.normal(0, 2, size=(n, d))
        prob = geometric_median_problem(anchors)
        centroid = anchors.mean(axis=0)
        # best-iterate subgradient descent from the centroid can only improve
        # on it, which is what the radius bound needs
        w_star, f_star = subgradient_descent(prob, centroid, 0.05, 400)
        radius = sharpness_radius(anchors, w_star)
        for _ in range(200):
            direction = rng.normal(size=d)
            direction /= np.linalg.norm(direction)
            w = w_star + direction * (radius + rng.uniform(0, 5))
            gap = prob.objective(w) - f_star
            assert gap >= 0.25 * np.linalg.norm(w - w_star) - 1e-9


# ---------------------------------------------------------------------------
# Hard instance
# ---------------------------------------------------------------------------


def test_lower_bound_loss_cases():
    w = np.array([0.3, -0.4])
    x = np.array([2.0, 1.0])
    value, sub = lower_bound_loss(w, x)
    assert value == pytest.approx(-float(w @ x), rel=1e-12)
    assert np.array_equal(sub, -x)
    value, _ = lower_bound_loss(np.array([2.0, 0.0]), np.array([1.0, 0.0]))
    assert value == pytest.approx(0.0, abs=1e-15)
    value, sub = lower_bound_loss(np.array([5.0, 5.0]), np.zeros(2))
    assert value == 0.0
    assert np.array_equal(sub, np.zeros(2))


def test_lower_bound_subgradient_finite_differences():
    rng = np.random.default_rng(25)
    checked = 0
    while checked < 30:
        w = rng.normal(0, 2, size=3)
        if abs(np.linalg.norm(w) - 1.0) < 1e-2:
            continue  # kink at the unit sphere
        x = rng.normal(0, 1, size=3)
        _, sub = lower_bound_loss(w, x)
        fd = central_difference(lambda u: lower_bound_loss(u, x)[0], w)
        denom = max(np.linalg.norm(fd), 1e-8)
        assert np.linalg.norm(sub - fd) / denom <= 1e-5
        checked += 1


def test_qv_spec_validation():
    with pytest.raises(ValueError):
        QvSpec(np.array([1.0, 1.0]), 0.2, 2.0)  # too many ones
    with pytest.raises(ValueError):
        QvSpec(np.array([1.0, 0.5]), 0.2, 2.0)  # not binary
    with pytest.raises(ValueError):
        QvSpec(np.array([1.0, 0.0]), 0.5, 2.0)  # p must stay below 1/2
    with pytest.raises(ValueError):
        QvSpec(np.array([1.0, 0.0]), 0.2, 1.0)  # k must exceed 1


def test_qv_heavy_atom_and_two_atom_moment_identity():
    spec = QvSpec(np.array([1.0, 0.0]), 0.25, 2.0)
    assert np.allclose(spec.heavy_atom, [2.0, 0.0], rtol=1e-12)
    # enumeration: (1-p)*0 + p * (p^{-1/k} ||v||)^k = ||v||^k
    v_norm = float(np.linalg.norm(spec.v))
    atom_norm = float(np.linalg.norm(spec.heavy_atom))
    assert spec.p * atom_norm**spec.k == pytest.approx(v_norm**spec.k, rel=1e-12)


def test_sample_qv_support_and_mean():
    spec = QvSpec(np.array([0.0, 1.0, 1.0, 0.0]), 0.3, 1.5)
    rng = np.random.default_rng(26)
    draws = sample_Qv_many(spec, 60_000, rng)
    zero_rows = ~draws.any(axis=1)
    nonzero = draws[~zero_rows]
    assert np.allclose(nonzero, spec.heavy_atom)
    expected = spec.p ** (1.0 - 1.0 / spec.k) * spec.v
    v_norm2 = float(spec.v @ spec.v)
    total_var = spec.p ** (1.0 - 2.0 / spec.k) * (1.0 - spec.p) * v_norm2
    band = 4.0 * math.sqrt(total_var / draws.shape[0])
    assert np.linalg.norm(draws.mean(axis=0) - expected) <= band
    singles = np.stack([sample_Qv(spec, rng) for _ in range(200)])
    assert set(np.linalg.norm(singles, axis=1).round(12)) <= {
        0.0,
        round(float(np.linalg.norm(spec.heavy_atom)), 12),
    }


def test_hard_instance_problem_consistency():
    rng = np.random.default_rng(27)
    xs = np.vstack([np.zeros((3, 4)), rng.normal(size=(5, 4))])
    prob = hard_instance_problem(xs)
    assert np.allclose(prob.lipschitz, 3.0 * np.linalg.norm(xs, axis=1))
    assert np.allclose(prob.per_sample_min, -np.linalg.norm(xs, axis=1))
    for w in (rng.normal(size=4), 3.0 * rng.normal(size=4)):
        idx = np.arange(prob.n)
        batch_l = prob.losses_at(w, idx)
        batch_g = prob.grads_at(w, idx)
        for i in idx:
            value, sub = lower_bound_loss(w, xs[i])
            assert batch_l[i] == pytest.approx(value, rel=1e-12, abs=1e-12)
            assert np.allclose(batch_g[i], sub, rtol=1e-12, atol=1e-14)


@pytest.mark.parametrize("d", [2, 4])
def test_hard_instance_minimizer_location(d):
    from scipy.optimize import minimize

    rng = np.random.default_rng(28)
    v = np.zeros(d)
    v[rng.permutation(d)[: d // 2]] = 1.0
    spec = QvSpec(v, 0.2, 2.0)
    xs = sample_Qv_many(spec, 400, rng)
    assert xs.any(), "need a nonzero empirical mean"
    prob = hard_instance_problem(xs)
    w_star = v / np.linalg.norm(v)
    best_w, best_f = None, math.inf
    for _ in range(8):
        res = minimize(
            prob.objective,
            rng.normal(0, 0.8, size=d),
            method="Nelder-Mead",
            options=dict(xatol=1e-10, fatol=1e-12, maxiter=20_000, maxfev=40_000),
        )
        if res.fun < best_f:
            best_w, best_f = res.x, res.fun
    assert np.linalg.norm(best_w - w_star) <= 1e-6
    # linear growth outside the unit ball
    x_bar = xs.mean(axis=0)
    f_star = prob.objective(w_star)
    for _ in range(100):
        w = rng.normal(size=d)
        w *= (1.0 + 4.0 * rng.random()) / np.linalg.norm(w)
        gap = prob.objective(w) - f_star
        assert gap >= np.linalg.norm(x_bar) * (np.linalg.norm(w) - 1.0) - 1e-9


def test_hard_instance_gradient_moment_bound():
    rng = np.random.default_rng(29)
    v = np.zeros(4)
    v[:2] = 1.0
    spec = QvSpec(v, 0.15, 2.5)
    bound = (3.0 * float(np.linalg.norm(v))) ** spec.k
    for _ in range(100):
        w = rng.normal(0, 2, size=4)
        _, sub = lower_bound_loss(w, spec.heavy_atom)
        moment = spec.p * float(np.linalg.norm(sub)) ** spec.k
        assert moment <= bound * (1 + 1e-12)


# ---------------------------------------------------------------------------
# Synthetic generators
# ---------------------------------------------------------------------------


def test_heavy_tailed_moment_level():
    # E[G^k] = 2^{k/2} E[(r^2+1)^{k/2}] with r Pareto(1, k+1); at k=2 this is
    # 2*(3+1) = 8. The k-th power of the radius has a heavy tail, so a wide
    # band is appropriate even at n = 1e5.
    ds = heavy_tailed_logistic_dataset(100_000, 5, 3, 2.0, np.random.default_rng(0))
    g_sq = 2.0 * (np.sum(ds.features**2, axis=1) + 1.0)
    assert 0.5 * 8.0 <= g_sq.mean() <= 1.5 * 8.0
    assert np.linalg.norm(ds.features, axis=1).max() > 3.0  # unbounded support


def test_heavy_tailed_inf_sentinel():
    ds = heavy_tailed_logistic_dataset(500, 4, 2, math.inf, np.random.default_rng(1))
    assert np.allclose(np.linalg.norm(ds.features, axis=1), 1.0, atol=1e-12)


def test_planted_datasets_are_separable():
    rng = np.random.default_rng(2)
    ds = planted_logistic_dataset(200, 5, 3, rng, 0.5, 4.0).with_bias()
    prob = logistic_problem(ds, 3)
    _, f_best = reference_minimum(prob, np.zeros(prob.dim), [1.0, 3.0, 10.0], 3000)
    assert f_best < 0.05
    norms = np.linalg.norm(ds.features[:, :-1], axis=1)
    assert norms.min() >= 0.5 - 1e-9 and norms.max() <= 4.0 + 1e-9


def test_planted_norm_spread_controls_lipschitz_ratio():
    rng = np.random.default_rng(3)
    ds = planted_logistic_dataset(500, 10, 3, rng, 0.4, 8.0).with_bias()
    prob = logistic_problem(ds, 3)
    ratio = prob.lipschitz.max() / prob.lipschitz.min()
    assert ratio >= 5.0


def test_problem_bundle_invariants_across_families():
    # gradient norms stay below the per-sample constants and per-sample
    # losses stay above the declared minima, at random test points
    rng = np.random.default_rng(40)
    ds = planted_logistic_dataset(30, 4, 3, rng, 0.5, 3.0).with_bias()
    problems = [
        logistic_problem(ds, 3),
        geometric_median_problem(rng.normal(size=(8, 3))),
        hard_instance_problem(rng.normal(size=(10, 3)) * (rng.random((10, 1)) > 0.3)),
    ]
    for prob in problems:
        for _ in range(20):
            w = rng.normal(0, 2, size=prob.dim)
            norms = np.linalg.norm(prob.grads_at(w), axis=1)
            assert np.all(norms <= prob.lipschitz + 1e-9)
            assert np.all(prob.losses_at(w) >= prob.per_sample_min - 1e-12)
