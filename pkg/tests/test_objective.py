import math

import numpy as np
import pytest

from mmgident.datagen import ManeuverScript, WindScript, generate_maneuver
from mmgident.dynamics import simulate
from mmgident.objective import (Objective, ObjectiveSpec, Trajectory, evaluate_J, extract_z,
                                segment, standardize)
from mmgident.params import P


def const_traj(duration, label="c", dt=0.1):
    n = int(round(duration / dt)) + 1
    return Trajectory(label, np.arange(n) * dt, np.zeros((n, 6)), np.zeros((n, 2)),
                      np.zeros((n, 2)))


# segmentation -------------------------------------------------------------

@pytest.mark.parametrize("duration, count, last", [(2695, 27, 95.0), (100, 1, 100.0),
                                                  (50, 1, 50.0), (250, 3, 50.0)])
def test_segment_counts(duration, count, last):
    subs = segment(const_traj(duration), 100.0)
    assert len(subs) == count
    assert subs[-1].duration == pytest.approx(last, abs=1e-9)
    assert all(s.duration <= 100.0 + 1e-9 for s in subs)


def test_segmentation_is_a_partition(short_set):
    traj = short_set[0]
    subs = segment(traj, 30.0)
    assert subs[0].start == 0 and subs[-1].stop == len(traj)
    assert all(a.stop == b.start for a, b in zip(subs, subs[1:]))
    assert np.array_equal(np.concatenate([s.traj.states for s in subs]), traj.states)


def test_single_sample_trajectory():
    subs = segment(const_traj(0.0), 100.0)
    assert len(subs) == 1 and len(subs[0].traj) == 1


def test_trajectory_validation():
    with pytest.raises(ValueError, match="increasing"):
        Trajectory("x", [0, 0.1, 0.1], np.zeros((3, 6)), np.zeros((3, 2)), np.zeros((3, 2)))
    with pytest.raises(ValueError, match="uniform"):
        Trajectory("x", [0, 0.1, 0.3], np.zeros((3, 6)), np.zeros((3, 2)), np.zeros((3, 2)))
    with pytest.raises(ValueError, match="rows"):
        Trajectory("x", [0, 0.1], np.zeros((3, 6)), np.zeros((2, 2)), np.zeros((2, 2)))


# state selection and standardization --------------------------------------

def test_extract_z_dimensions_and_heading():
    s = np.array([[1.0, 2.0, math.pi / 2, 0.3, 0.1, 0.01]])
    assert extract_z(s, "J1").tolist() == [[0.3, 0.1, 0.01]]
    z3 = extract_z(s, "J3")[0]
    assert z3[:2].tolist() == [1.0, 2.0]
    assert z3[2] == 1.0 and abs(z3[3]) < 1e-16
    z2 = extract_z(s, "J2")[0]
    assert sorted(z2.tolist()) == sorted(extract_z(s, "J1")[0].tolist() + z3.tolist())


def test_z_channels_constant_on_constant_heading():
    s = np.zeros((50, 6))
    s[:, 2] = 0.4
    s[:, 0] = np.linspace(0, 5, 50)
    z = extract_z(s, "J3")
    assert np.ptp(z[:, 2]) == 0.0 and np.ptp(z[:, 3]) == 0.0


def test_standardize_moments(rng):
    z = rng.normal(3.0, 2.5, (1000, 5)) * [1, 10, 0.01, 1e3, 1]
    zh, mu, sg = standardize(z)
    assert np.all(np.abs(zh.mean(axis=0)) < 1e-12)
    assert np.all(np.abs(zh.var(axis=0) - 1) < 1e-9)


def test_standardize_constant_channel():
    z = np.full((20, 2), 7.5)
    zh, _, sg = standardize(z, sigma_floor=1e-6)
    assert np.all(zh == 0.0) and np.all(sg == 1e-6)


def test_standardize_affine_invariance(rng):
    z = rng.normal(size=(300, 3))
    a = np.array([2.5, 1e-3, 40.0])
    b = np.array([-1.0, 100.0, 0.3])
    np.testing.assert_allclose(standardize(a * z + b)[0], standardize(z)[0], atol=1e-10)


def test_spec_validation():
    with pytest.raises(ValueError):
        ObjectiveSpec("J4")
    with pytest.raises(ValueError):
        ObjectiveSpec(tf=0)


# objective value ----------------------------------------------------------

def reference_J(theta, dataset, spec, cfg):
    """Straight numpy evaluation: simulate, standardize each series, rectangle rule."""
    total = 0.0
    for traj in dataset:
        for sub in segment(traj, spec.tf):
            tr = sub.traj
            sim = simulate(tr.states[0], tr.controls, tr.winds, theta, cfg, tf=spec.tf).states
            zi, mu, sg = standardize(extract_z(tr.states, spec.variant), spec.sigma_floor)
            if spec.standardize_sim_by_input:
                zs = standardize(extract_z(sim, spec.variant), mu=mu, sigma=sg)[0]
            else:
                zs = standardize(extract_z(sim, spec.variant), spec.sigma_floor)[0]
            total += float(np.sum((zi - zs) ** 2)) * cfg.dt
    return total


@pytest.mark.parametrize("variant", ["J1", "J2", "J3"])
@pytest.mark.parametrize("by_input", [False, True])
def test_matches_reference_evaluation(short_set, theta, cfg, variant, by_input):
    rng = np.random.default_rng(4)
    th = theta * (1 + rng.uniform(-0.3, 0.3, theta.size))
    spec = ObjectiveSpec(variant, tf=40.0, standardize_sim_by_input=by_input)
    assert evaluate_J(th, short_set, spec, cfg) == pytest.approx(
        reference_J(th, short_set, spec, cfg), rel=1e-10)


def test_self_generated_data_gives_zero(short_set, theta, cfg):
    for v in ("J1", "J2", "J3"):
        assert evaluate_J(theta, short_set, ObjectiveSpec(v), cfg) < 1e-10


def test_decomposition(short_set, theta, cfg, rng):
    obj = {v: Objective(short_set, ObjectiveSpec(v), cfg) for v in ("J1", "J2", "J3")}
    X = theta * (1 + rng.uniform(-0.5, 0.5, (20, theta.size)))
    j1, j2, j3 = (obj[v].batch(X) for v in ("J1", "J2", "J3"))
    assert np.all(j2 > 0)
    assert np.all(np.abs(j2 - (j1 + j3)) / j2 < 1e-9)


def test_batch_equals_single_calls_and_is_deterministic(short_set, theta, cfg, rng):
    obj = Objective(short_set, ObjectiveSpec("J2", tf=50.0), cfg)
    X = theta * (1 + rng.uniform(-0.5, 0.5, (6, theta.size)))
    batch = obj.batch(X)
    assert np.array_equal(batch, obj.batch(X))
    assert np.array_equal(batch, [obj(x) for x in X])
    assert obj(X[0]) == pytest.approx(obj.per_subsequence(X[0]).sum(), rel=1e-14)


def test_invariant_to_trajectory_order(short_set, theta, cfg, rng):
    th = theta * (1 + rng.uniform(-0.5, 0.5, theta.size))
    a = evaluate_J(th, short_set, cfg=cfg)
    b = evaluate_J(th, short_set[::-1], cfg=cfg)
    assert b == pytest.approx(a, rel=1e-13)


def test_wind_coefficient_perturbation_increases_J(truth, theta, cfg):
    windy = [generate_maneuver(ManeuverScript("random", 200.0, init=(0, 0, 0, 0.3, 0, 0), seed=9),
                               WindScript(mean_speed=3.0, seed=2), truth, "R")]
    wind = [getattr(P, n) for n in ("X0w", "X1w", "X3w", "X5w", "Y1w", "Y3w", "Y5w",
                                    "N1w", "N2w", "N3w")]
    obj = Objective(windy, ObjectiveSpec("J2"), cfg)
    js = []
    for k in (1.0, 2.0, 4.0):
        th = theta.copy()
        th[wind] *= k
        js.append(obj(th))
    assert js[0] < js[1] < js[2]


def test_sampling_mismatch_is_an_error(short_set, cfg):
    with pytest.raises(ValueError, match="sampled"):
        Objective(short_set, ObjectiveSpec(), cfg.with_(dt=0.05))
