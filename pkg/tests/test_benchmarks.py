import math

import numpy as np
import pytest

from chainbo.benchmarks import (
    BRANIN_OPTIMIZERS,
    compute_regret,
    get_objective,
    make_ackley,
    make_branin,
    make_levy1d,
    make_rastrigin,
)


def test_ackley_optimum_and_sign():
    f = make_ackley(dim=3)
    assert f(np.zeros(3)) == pytest.approx(0.0, abs=1e-12)
    rng = np.random.default_rng(0)
    X = rng.uniform(-5, 10, size=(200, 3))
    assert np.all(f.evaluate(X) < 0.0)


def test_ackley_reference_value_two_dims():
    # independent high-precision evaluation of the standard form at (1, 1)
    f = make_ackley(dim=2)
    expected = -(
        -20.0 * math.exp(-0.2 * 1.0) - math.exp(1.0) + 20.0 + math.e
    )
    assert expected == pytest.approx(-3.62538494, abs=1e-8)
    assert f(np.ones(2)) == pytest.approx(expected, abs=1e-12)


def test_rastrigin_reference_values():
    f = make_rastrigin(dim=2)
    assert f(np.zeros(2)) == 0.0
    assert f(np.array([1.0, 0.0])) == pytest.approx(-1.0, abs=1e-12)


def test_rastrigin_integer_lattice_points_head_local_basins():
    # each integer lattice point is a near-stationary local maximum of
    # the negated function: exactly stationary only at the origin (the
    # 2x term shifts the others off-lattice by about |x| / 200), but
    # always above its surroundings within the basin
    f = make_rastrigin(dim=2)
    for point in ([0.0, 0.0], [1.0, 2.0], [-3.0, 0.0], [2.0, -2.0]):
        x = np.array(point)
        center = f(x)
        for i in range(2):
            for step in (-0.3, 0.3):
                e = np.zeros(2)
                e[i] = step
                assert f(x + e) < center
    h = 1e-6
    for i in range(2):
        e = np.zeros(2)
        e[i] = h
        grad = (f(np.zeros(2) + e) - f(np.zeros(2) - e)) / (2 * h)
        assert abs(grad) < 1e-5


def test_branin_known_optima():
    f = make_branin()
    assert f.known_optimum_value == pytest.approx(-0.397887, abs=1e-5)
    values = f.evaluate(BRANIN_OPTIMIZERS)
    np.testing.assert_allclose(values, f.known_optimum_value, atol=1e-6)
    assert np.max(values) - np.min(values) < 1e-6


def test_levy_known_optimum():
    f = make_levy1d()
    assert f(np.array([1.0])) == pytest.approx(0.0, abs=1e-12)


def test_every_objective_is_finite_over_its_box():
    rng = np.random.default_rng(1)
    for objective in (
        make_ackley(6),
        make_rastrigin(6),
        make_branin(),
        make_levy1d(),
    ):
        U = rng.uniform(size=(100_000, objective.dim))
        X = objective.lower + U * (objective.upper - objective.lower)
        values = objective.evaluate(X)
        assert np.all(np.isfinite(values))


def test_negation_convention_at_known_optimizers():
    # internal maximization value is the negated classical value, so the
    # known optimizer must be the arg max over random probes
    rng = np.random.default_rng(2)
    for objective in (make_ackley(4), make_rastrigin(4), make_branin(), make_levy1d()):
        opt = objective(objective.known_optimizer)
        assert opt == pytest.approx(objective.known_optimum_value, abs=1e-9)
        U = rng.uniform(size=(5_000, objective.dim))
        X = objective.lower + U * (objective.upper - objective.lower)
        assert np.all(objective.evaluate(X) <= opt + 1e-9)


def test_objective_registry_lookup():
    assert get_objective("ackley", 7).dim == 7
    assert get_objective("branin").dim == 2
    assert get_objective("rastrigin", 2, lower=-1.0, upper=1.0).upper[0] == 1.0
    with pytest.raises(ValueError, match="unknown objective"):
        get_objective("sphere", 3)
    with pytest.raises(ValueError):
        get_objective("branin", 5)
    with pytest.raises(ValueError):
        get_objective("ackley")


def test_regret_all_evaluations_at_optimum():
    trace = compute_regret(np.zeros(5), 0.0)
    np.testing.assert_array_equal(trace.instantaneous, np.zeros(5))
    assert trace.cumulative == 0.0


def test_regret_arithmetic():
    trace = compute_regret(np.array([-1.0, -3.0]), 0.0)
    np.testing.assert_array_equal(trace.instantaneous, [1.0, 3.0])
    assert trace.cumulative == 4.0


def test_cumulative_regret_is_nondecreasing():
    rng = np.random.default_rng(3)
    values = -np.abs(rng.standard_normal(50))
    trace = compute_regret(values, 0.0)
    running = np.cumsum(trace.instantaneous)
    assert np.all(np.diff(running) >= 0.0)


def test_regret_requires_known_optimum():
    with pytest.raises(ValueError):
        compute_regret(np.array([0.0]), None)
    with pytest.raises(ValueError, match="exceeds"):
        compute_regret(np.array([1.0]), 0.0)
