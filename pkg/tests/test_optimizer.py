import numpy as np
import pytest

from mmgident import optimizer as opt
from mmgident.optimizer import (CMAES, LOG_COLUMNS, BoxPenalty, CmaesSettings, SearchDomain,
                                build_domain, is_rejected, run_with_restarts, seed_trials)
from mmgident.params import P, PARAM_NAMES


def box(n, lo, hi):
    return SearchDomain(np.full(n, float(lo)), np.full(n, float(hi)),
                        tuple(f"x{i}" for i in range(n)))


def sphere(c):
    return lambda X: np.sum((np.atleast_2d(X) - c) ** 2, axis=1)


def rosenbrock(X):
    X = np.atleast_2d(X)
    return np.sum(100 * (X[:, 1:] - X[:, :-1] ** 2) ** 2 + (1 - X[:, :-1]) ** 2, axis=1)


RASTRIGIN_SHIFT = np.array([1.3, -2.1, 0.7, 2.2, -0.4])


def rastrigin(X):
    Y = np.atleast_2d(X) - RASTRIGIN_SHIFT
    return 10 * Y.shape[1] + np.sum(Y ** 2 - 10 * np.cos(2 * np.pi * Y), axis=1)


# domain -------------------------------------------------------------------

def test_domain_examples(theta):
    ref = theta.copy()
    ref[P.X0A_p] = 0.5
    ref[P.Yv_p] = -0.4
    ref[P.mx] = 10.0
    ref[P.tP] = 0.2
    ref[P.A1] = 0.0
    d = build_domain(ref)
    assert (d.lo[P.X0A_p], d.hi[P.X0A_p]) == (-5.0, 5.0)
    assert (d.lo[P.Yv_p], d.hi[P.Yv_p]) == pytest.approx((-4.0, -0.04))
    assert (d.lo[P.mx], d.hi[P.mx]) == pytest.approx((7.0, 13.0))
    assert (d.lo[P.tP], d.hi[P.tP]) == pytest.approx((0.02, 2.0))
    assert (d.lo[P.A1], d.hi[P.A1]) == (-1e-3, 1e-3)


@pytest.mark.parametrize("name", ["mx", "Nr_p", "wP0"])
def test_domain_zero_exception_reference_is_an_error(theta, name):
    ref = theta.copy()
    ref[getattr(P, name)] = 0.0
    with pytest.raises(ValueError, match=name):
        build_domain(ref)


def test_domain_validation():
    with pytest.raises(ValueError):
        SearchDomain(np.array([0.0, 1.0]), np.array([1.0, 1.0]), ("a", "b"))
    with pytest.raises(ValueError):
        build_domain(np.full(57, np.nan))


def test_unit_mapping_round_trip(theta):
    d = build_domain(theta)
    u = d.to_unit(theta)
    assert np.allclose(d.from_unit(u), theta, rtol=1e-14)
    assert np.all((u > 0) & (u < 1))
    assert d.names == PARAM_NAMES


def test_settings_validation():
    with pytest.raises(ValueError):
        CmaesSettings(initial_population=1)
    with pytest.raises(ValueError):
        CmaesSettings(max_population=10)
    with pytest.raises(ValueError):
        CmaesSettings(box_handling="mirror")


# core update --------------------------------------------------------------

def test_fixed_seed_sample_sequence():
    a = CMAES(np.full(5, 0.5), 0.3, 20, np.random.default_rng(3))
    b = CMAES(np.full(5, 0.5), 0.3, 20, np.random.default_rng(3))
    for _ in range(5):
        Xa, Xb = a.ask(), b.ask()
        assert Xa.shape == (20, 5)
        assert np.array_equal(Xa, Xb)
        f = sphere(0.2)(Xa)
        a.tell(Xa, f)
        b.tell(Xb, f)


def test_plateau_keeps_mean_and_adapts_sigma():
    es = CMAES(np.full(4, 0.5), 0.3, 10, np.random.default_rng(0))
    for _ in range(5):
        X = es.ask()
        es.tell(X, np.ones(10))
    assert np.array_equal(es.mean, np.full(4, 0.5))
    assert 0 < es.sigma < 0.3


def test_non_finite_fitness_ranks_worst():
    es = CMAES(np.zeros(3), 1.0, 4, np.random.default_rng(1))
    X = es.ask()
    es.tell(X, np.array([np.nan, 1.0, 2.0, np.inf]))
    assert np.allclose(es.mean, es.weights @ X[[1, 2]])


def test_tell_size_mismatch():
    es = CMAES(np.zeros(3), 1.0, 4, np.random.default_rng(1))
    with pytest.raises(ValueError):
        es.tell(es.ask()[:3], np.zeros(3))


def test_penalty_zero_in_box_and_monotone():
    es = CMAES(np.full(3, 0.5), 0.3, 10, np.random.default_rng(0))
    pen = BoxPenalty(3)
    X = np.array([[0.2, 0.5, 0.9], [1.1, 0.5, 0.5], [1.6, 0.5, 0.5], [-0.3, -0.2, 0.5]])
    R = pen.repair(X)
    assert np.all((R >= 0) & (R <= 1))
    p = pen.penalty(X, R, es)
    assert p[0] == 0.0
    assert np.array_equal(R[1], R[2]) and p[2] > p[1] > 0
    assert p[3] > 0


# restarts -----------------------------------------------------------------

def test_population_schedule():
    # a loose step-size tolerance forces a restart after every iteration
    run = run_with_restarts(sphere(0.3), box(4, 0, 1),
                            CmaesSettings(max_iterations=9, tol_x=10.0, seed=1))
    assert run.populations == [20, 40, 80, 160, 320, 640, 720, 720, 720]
    assert run.restarts == 8
    assert all(r == "tolx" for r in run.stop_reasons[:-1])
    assert [row.popsize for row in run.log[1:]] == run.populations


def test_zero_budget_returns_center():
    d = box(3, -2, 4)
    run = run_with_restarts(sphere(0.0), d, CmaesSettings(max_iterations=0))
    assert len(run.log) == 1 and run.evaluations == 1
    assert np.array_equal(run.best_theta, d.center)
    assert run.best_J == pytest.approx(3.0)


def test_min_so_far_monotone_and_determinism():
    s = CmaesSettings(max_evaluations=6000, seed=4)
    a = run_with_restarts(rastrigin, box(5, -5.12, 5.12), s)
    b = run_with_restarts(rastrigin, box(5, -5.12, 5.12), s)
    mins = [row.J_min_so_far for row in a.log]
    assert all(x >= y for x, y in zip(mins, mins[1:]))
    assert a.log == b.log and np.array_equal(a.best_theta, b.best_theta)
    assert a.evaluations <= 6000
    assert a.best_J == mins[-1]


def test_log_file_columns(tmp_path):
    run = run_with_restarts(sphere(0.3), box(3, 0, 1), CmaesSettings(max_iterations=5))
    path = tmp_path / "log.csv"
    run.write_log(path)
    lines = path.read_text().splitlines()
    assert tuple(lines[0].split(",")) == LOG_COLUMNS
    assert len(lines) == len(run.log) + 1


def test_normalized_search_is_scale_invariant():
    seen = {}
    for key, d in (("small", box(4, -1, 1)), ("big", SearchDomain(
            np.array([0.0, -1e4, 5.0, -3e-6]), np.array([1e-3, 1e4, 6.0, 1e-6]),
            ("a", "b", "c", "d")))):
        trace = []

        def f(X, d=d, trace=trace):
            U = d.to_unit(X)
            trace.append(U)
            return np.sum((U - 0.37) ** 2, axis=1)
        run_with_restarts(f, d, CmaesSettings(max_iterations=30, seed=9))
        seen[key] = np.concatenate(trace)
    np.testing.assert_allclose(seen["small"], seen["big"], rtol=0, atol=1e-9)


def test_resample_mode_stays_in_box():
    inside = []

    def f(X):
        inside.append(np.all((X >= -1) & (X <= 1)))
        return sphere(0.9)(X)
    run = run_with_restarts(f, box(3, -1, 1),
                            CmaesSettings(max_iterations=100, box_handling="resample"))
    assert all(inside)
    assert run.best_J < 1e-6


# benchmarks ---------------------------------------------------------------

def test_sphere_57():
    run = run_with_restarts(sphere(1.0), box(57, -5, 5),
                            CmaesSettings(max_evaluations=60_000, target=1e-10, seed=0))
    assert run.best_J < 1e-10
    assert run.evaluations <= 60_000


def test_rosenbrock_10():
    run = run_with_restarts(rosenbrock, box(10, -5, 5),
                            CmaesSettings(max_evaluations=100_000, target=1e-8, seed=0))
    assert run.best_J < 1e-8


def test_sphere_with_optimum_on_the_boundary():
    c = np.where(np.arange(57) < 10, 7.0, 1.0)
    run = run_with_restarts(sphere(c), box(57, -5, 5),
                            CmaesSettings(max_evaluations=100_000, seed=0))
    expected = np.minimum(c, 5.0)
    assert np.max(np.abs(run.best_theta - expected)) < 1e-6


@pytest.mark.slow
def test_restarts_help_on_rastrigin():
    d = box(5, -5.12, 5.12)
    hits = {True: 0, False: 0}
    for restarts in (True, False):
        for seed in range(20):
            run = run_with_restarts(rastrigin, d, CmaesSettings(
                max_evaluations=200_000, target=1e-8, restarts=restarts, seed=seed))
            hits[restarts] += run.best_J < 1e-8
    assert hits[True] >= 16 and hits[False] <= 8


# trials and rejection -----------------------------------------------------

def test_rejection_rule():
    d = box(3, -1, 2)
    assert not is_rejected([0.0, 2.0, -1.0], d)
    assert not is_rejected([4.0, 0.0, 0.0], d)
    assert not is_rejected([20.0, 0.0, 0.0], d)
    assert is_rejected([22.0, 0.0, 0.0], d)
    assert is_rejected([np.nan, 0.0, 0.0], d)


def _fake_runner(final):
    def fake(objective, domain, settings):
        return opt.OptimizationRun(settings, domain, [], final.copy(), 0.0, final.copy(),
                                   1, 0, [20], ["max_evaluations"])
    return fake


def test_trial_outside_ten_times_the_box_is_rejected(monkeypatch):
    d = box(2, -1, 1)
    monkeypatch.setattr(opt, "run_with_restarts", _fake_runner(np.array([11.0, 0.0])))
    summary = seed_trials(sphere(0.0), d, n_trials=2)
    assert summary.status == "all_rejected"
    assert summary.rejected == [0, 1] and summary.metrics == {}
    assert all(r.trial_status == "rejected" for r in summary.runs)


def test_trial_within_ten_times_is_kept_uncorrected(monkeypatch):
    d = box(2, -1, 1)
    monkeypatch.setattr(opt, "run_with_restarts", _fake_runner(np.array([2.0, 0.0])))
    summary = seed_trials(sphere(0.0), d, n_trials=1)
    assert summary.status == "ok"
    assert np.array_equal(summary.runs[0].estimate, [2.0, 0.0])
    assert summary.metrics["J_train"] == (4.0, 0.0)


def test_identical_seeds_have_zero_spread():
    summary = seed_trials(rosenbrock, box(4, -2, 2), CmaesSettings(max_iterations=40),
                          n_trials=3, seeds=[5, 5, 5])
    mean, std = summary.metrics["J_train"]
    assert std == 0.0 and summary.accepted == [0, 1, 2]


def test_distinct_default_seeds():
    summary = seed_trials(rosenbrock, box(4, -2, 2), CmaesSettings(max_iterations=40, seed=7),
                          n_trials=3)
    assert [r.settings.seed for r in summary.runs] == [7, 8, 9]
    with pytest.raises(ValueError):
        seed_trials(rosenbrock, box(4, -2, 2), n_trials=0)
