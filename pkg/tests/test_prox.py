import numpy as np
import pytest

from proxmcmc.prox import (
    MoreauEnvelope,
    box_indicator_prox,
    composite_prox,
    image_divergence,
    image_gradient,
    l1_prox,
    my_envelope_gradient,
    project_box,
    prox_tv,
    soft_threshold,
    tv_prox,
    tv_value,
    zero_prox,
)


def test_soft_threshold_examples():
    np.testing.assert_allclose(soft_threshold(np.array([3.0, -0.2, 0.0]), 0.5),
                               [2.5, 0.0, 0.0])
    x = np.array([1.3, -0.7, 0.0, 5.0])
    np.testing.assert_allclose(soft_threshold(x, 0.0), x)
    np.testing.assert_allclose(soft_threshold(np.array([-1.0]), 2.0), [0.0])
    with pytest.raises(ValueError):
        soft_threshold(x, -0.1)


def test_project_box_examples():
    np.testing.assert_allclose(project_box(np.array([2.0]), -1, 1), [1.0])
    np.testing.assert_allclose(project_box(np.array([0.3]), -1, 1), [0.3])
    np.testing.assert_allclose(project_box(np.array([-5.0, 0.2]), 0, np.inf),
                               [0.0, 0.2])
    with pytest.raises(ValueError):
        project_box(np.array([0.0]), 1.0, -1.0)


def test_tv_value_examples():
    assert tv_value(np.full((4, 5), 3.7)) == 0.0
    assert tv_value(np.array([[0.0], [1.0]])) == pytest.approx(1.0)
    rng = np.random.default_rng(3)
    assert tv_value(rng.standard_normal((6, 6))) >= 0.0
    with pytest.raises(ValueError):
        tv_value(np.array([[np.nan, 0.0], [0.0, 0.0]]))


def test_divergence_is_negative_adjoint_of_gradient():
    rng = np.random.default_rng(11)
    for _ in range(20):
        u = rng.standard_normal((7, 5))
        px = rng.standard_normal((7, 5))
        py = rng.standard_normal((7, 5))
        gx, gy = image_gradient(u)
        lhs = np.sum(gx * px) + np.sum(gy * py)
        rhs = -np.sum(u * image_divergence(px, py))
        assert lhs == pytest.approx(rhs, abs=1e-10)


def test_prox_tv_trivial_cases():
    const = np.full((6, 6), 2.5)
    np.testing.assert_allclose(prox_tv(const, 0.7), const, atol=1e-6)
    rng = np.random.default_rng(5)
    img = rng.standard_normal((5, 5))
    np.testing.assert_allclose(prox_tv(img, 0.0), img)
    with pytest.raises(ValueError):
        prox_tv(np.array([[np.inf, 0.0], [0.0, 0.0]]), 0.5)


def _tv_subgradient(u, tau):
    gx, gy = image_gradient(u)
    mag = np.hypot(gx, gy)
    safe = np.where(mag > 1e-12, mag, 1.0)
    px = np.where(mag > 1e-12, gx / safe, 0.0)
    py = np.where(mag > 1e-12, gy / safe, 0.0)
    return -tau * image_divergence(px, py)


def test_prox_tv_matches_subgradient_descent_oracle():
    # Brute-force oracle: subgradient descent on tau TV(u) + ||u - f||^2 / 2
    # with a decaying step, keeping the best iterate seen.
    rng = np.random.default_rng(42)
    f = rng.standard_normal((4, 4))
    tau = 0.5

    def objective(u):
        return tau * tv_value(u) + 0.5 * np.sum((u - f) ** 2)

    u = f.copy()
    best, best_obj = u.copy(), objective(u)
    for k in range(120_000):
        g = _tv_subgradient(u, tau) + (u - f)
        u = u - 0.05 / np.sqrt(k + 1) * g
        obj = objective(u)
        if obj < best_obj:
            best_obj, best = obj, u.copy()

    ours = prox_tv(f, tau, tol=1e-10, max_iter=20_000)
    assert np.abs(ours - best).max() < 1e-3
    # The dual solution should not do worse than the primal oracle.
    assert objective(ours) <= best_obj + 1e-8


def test_prox_tv_descends_the_composite_objective():
    rng = np.random.default_rng(9)
    for _ in range(5):
        f = rng.standard_normal((8, 8)) * 3
        tau = rng.uniform(0.05, 1.0)
        out = prox_tv(f, tau)
        before = tau * tv_value(f)
        after = tau * tv_value(out) + 0.5 * np.sum((out - f) ** 2)
        assert after <= before + 1e-10


@pytest.mark.parametrize("make_op,dim", [
    (lambda: l1_prox(1.3), 12),
    (lambda: box_indicator_prox(-0.5, 2.0), 12),
    (lambda: zero_prox(), 12),
])
def test_prox_nonexpansive_on_random_pairs(make_op, dim):
    op = make_op()
    rng = np.random.default_rng(17)
    for _ in range(200):
        x = rng.standard_normal(dim) * 3
        y = rng.standard_normal(dim) * 3
        lam = rng.uniform(0.01, 2.0)
        dist = np.linalg.norm(op.evaluate(x, lam) - op.evaluate(y, lam))
        assert dist <= np.linalg.norm(x - y) + 1e-9


def test_tv_prox_nonexpansive_within_iterative_slack():
    op = tv_prox(0.8, (5, 5))
    rng = np.random.default_rng(23)
    for _ in range(200):
        x = rng.standard_normal(25)
        y = rng.standard_normal(25)
        lam = rng.uniform(0.05, 1.0)
        dist = np.linalg.norm(op.evaluate(x, lam) - op.evaluate(y, lam))
        assert dist <= np.linalg.norm(x - y) + 1e-4


def test_prox_tends_to_identity_for_small_lambda():
    rng = np.random.default_rng(31)
    x = rng.standard_normal(8)
    assert np.abs(l1_prox(2.0).evaluate(x, 1e-12) - x).max() < 1e-10
    inside = project_box(x, -0.9, 0.9)
    assert np.abs(box_indicator_prox(-1, 1).evaluate(inside, 1e-12) - inside).max() == 0.0


def test_envelope_lower_bounds_and_monotonicity():
    op = l1_prox(1.0)
    rng = np.random.default_rng(41)
    for _ in range(50):
        x = rng.standard_normal(6) * 2
        g = op.penalty_value(x)
        e1 = MoreauEnvelope(op, 0.1).value(x)
        e2 = MoreauEnvelope(op, 0.5).value(x)
        assert e2 <= e1 + 1e-12
        assert e1 <= g + 1e-12


def test_envelope_gradient_lipschitz_bound():
    for op in (l1_prox(1.0), box_indicator_prox(-1, 1)):
        for lam in (0.05, 0.3):
            env = MoreauEnvelope(op, lam)
            rng = np.random.default_rng(53)
            for _ in range(100):
                x = rng.standard_normal(5) * 2
                y = rng.standard_normal(5) * 2
                lhs = np.linalg.norm(env.gradient(x) - env.gradient(y))
                assert lhs <= np.linalg.norm(x - y) / lam * (1 + 1e-12)


def test_l1_envelope_gradient_matches_huber_formula():
    # Analytic oracle: for weight w the envelope of w|x| is the Huber
    # function, with gradient clamp(x / lam, -w, w) componentwise.
    w, lam = 1.7, 0.23
    env = MoreauEnvelope(l1_prox(w), lam)
    rng = np.random.default_rng(61)
    x = rng.standard_normal(40) * 2
    expected = np.clip(x / lam, -w, w)
    np.testing.assert_allclose(env.gradient(x), expected, atol=1e-10)


def test_my_envelope_gradient_examples():
    uniform = MoreauEnvelope(box_indicator_prox(-1, 1), 0.2)
    assert my_envelope_gradient(uniform, np.array([2.0]))[0] == pytest.approx(1 / 0.2)

    l1 = MoreauEnvelope(l1_prox(1.0), 0.1)
    assert my_envelope_gradient(l1, np.array([0.05]))[0] == pytest.approx(0.5)

    # prox fixed point: any point already inside the box
    assert my_envelope_gradient(uniform, np.array([0.3]))[0] == 0.0


def test_composite_prox_applies_in_order_and_sums_penalties():
    comp = composite_prox([l1_prox(1.0), box_indicator_prox(0.0, np.inf)])
    x = np.array([0.5, -3.0])
    out = comp.evaluate(x, 0.2)
    # soft-threshold by 0.2 then clamp below at 0
    np.testing.assert_allclose(out, [0.3, 0.0])
    assert comp.penalty_value(np.array([1.0, 2.0])) == pytest.approx(3.0)
    assert np.isinf(comp.penalty_value(np.array([-1.0, 2.0])))
