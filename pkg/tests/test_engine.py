import numpy as np
import pytest
from scipy import stats

import sdelab as sl
from sdelab import InvalidInputError, NumericalBlowupError, StepPolicy
from sdelab.engine import Barrier, path_entropy, sweep_paths


def test_em_step_examples():
    drift = sl.make_field("constant", sigma0=[[0.0]], b0=[2.0])
    x = sl.em_step(drift, [1.0], 0.5, [0.0])
    assert x[0] == 2.0  # x + c h

    lin = sl.make_field("linear-1d")
    assert sl.em_step(lin, [1.0], 0.01, [0.1])[0] == pytest.approx(1.1)
    assert sl.em_step(lin, [3.0], 0.2, [0.0])[0] == 3.0  # no noise, no drift


def test_em_step_validation():
    lin = sl.make_field("linear-1d")
    with pytest.raises(InvalidInputError):
        sl.em_step(lin, [1.0], -0.1, [0.0])
    with pytest.raises(InvalidInputError):
        sl.em_step(lin, [1.0], 0.1, [0.0, 0.0])
    with pytest.raises(InvalidInputError):
        sl.em_step(lin, [1.0], 0.1, [np.nan])
    with pytest.raises(InvalidInputError):
        sl.em_step(lin, [1.0, 2.0], 0.1, [0.0])


def test_step_policy_validation_and_sizes():
    with pytest.raises(InvalidInputError):
        StepPolicy(kind="bogus")
    with pytest.raises(InvalidInputError):
        StepPolicy(kind="fixed", h_max=1e-4, h_min=1e-3)
    pol = StepPolicy.adaptive(h_max=1e-2, h_min=1e-5, level_fraction=0.1)
    levels = np.array([0.0, 1e-3, 1.0, 100.0])
    h = pol.step_sizes(levels)
    raw = 0.1 * levels / (1 + levels)
    assert np.allclose(h, np.clip(raw, 1e-5, 1e-2))
    assert np.all(StepPolicy.fixed(0.5).step_sizes(levels) == 0.5)


def test_pure_drift_path_hits_exact_grid():
    field = sl.make_field("constant", sigma0=[[0.0]], b0=[1.0])
    path = sl.simulate_path(field, [0.0], 1.0, StepPolicy.fixed(0.25), 1)
    assert np.array_equal(path.times, [0.0, 0.25, 0.5, 0.75, 1.0])
    assert np.array_equal(path.states.ravel(), [0.0, 0.25, 0.5, 0.75, 1.0])


def test_drift_only_matches_euler_ode():
    field = sl.make_field("decay-1d", rate=2.0)
    h = 2.0 ** -6
    path = sl.simulate_path(field, [1.0], 1.0, StepPolicy.fixed(h), 3)
    x = 1.0
    for state in path.states[1:, 0]:
        x = x + (-2.0 * x) * h
        assert state == x


def test_reproducibility_bit_for_bit():
    field = sl.make_field("linear-1d")
    pol = StepPolicy.adaptive(h_max=1e-2, h_min=1e-4, level_fraction=0.1)
    a = sl.simulate_path(field, [1.0], 1.0, pol, 12345)
    b = sl.simulate_path(field, [1.0], 1.0, pol, 12345)
    assert np.array_equal(a.states, b.states)
    assert np.array_equal(a.times, b.times)
    assert np.array_equal(a.increments, b.increments)
    c = sl.simulate_path(field, [1.0], 1.0, pol, 12346)
    assert not np.array_equal(a.states, c.states)


def test_increments_replay_states_exactly():
    # replaying the recorded increments through em_step reproduces the states
    for name in ("linear-1d", "diag-linear"):
        field = sl.make_field(name)
        start = np.full(field.d, 1.0)
        path = sl.simulate_path(field, start, 0.5, StepPolicy.fixed(2.0 ** -6),
                                (9, 4))
        dts = np.diff(path.times)
        for i in range(len(dts)):
            nxt = sl.em_step(field, path.states[i], dts[i],
                             path.increments[i])
            assert np.array_equal(nxt, path.states[i + 1])


def test_increment_variance_matches_step():
    field = sl.make_field("constant", sigma0=[[1.0]], b0=[0.0])
    h = 0.01
    incs = []
    for i in range(50):
        p = sl.simulate_path(field, [0.0], 1.0, StepPolicy.fixed(h),
                             path_entropy(77, i))
        incs.append(p.increments[:, 0])
    incs = np.concatenate(incs)
    # chi-square bounds on the pooled variance at the 1% level
    stat = np.sum(incs ** 2) / h
    lo, hi = stats.chi2.ppf([0.005, 0.995], incs.size)
    assert lo < stat < hi


def test_terminal_law_constant_field():
    # X_T - x0 is exactly Gaussian with variance T for constant sigma
    field = sl.make_field("constant", sigma0=[[1.0]], b0=[0.0])
    res = sweep_paths(field, [0.0], 1.0, StepPolicy.fixed(0.01),
                      [path_entropy(3, i) for i in range(10000)])
    term = res.end_states[:, 0]
    stat = np.sum(term ** 2)  # ~ chi2 with 10000 dof
    lo, hi = stats.chi2.ppf([0.005, 0.995], term.size)
    assert lo < stat < hi


def test_absorption_freezes_path():
    field = sl.make_field("decay-1d", rate=1.0)
    path = sl.simulate_path(field, [1.0], 40.0, StepPolicy.fixed(1e-3), 7)
    assert path.absorbed
    assert path.times[-1] < 40.0
    final_level = sl.level(field, path.states[-1])
    assert final_level <= 1e-12 * max(1.0, sl.level(field, [1.0]))


def test_blowup_raises_with_context():
    field = sl.make_field("constant", sigma0=[[0.0]], b0=[1e16])
    with pytest.raises(NumericalBlowupError) as exc:
        sl.simulate_path(field, [0.0], 1.0, StepPolicy.fixed(1.0), 5)
    assert exc.value.step_index == 0
    assert exc.value.path_index == 0


def test_sweep_split_invariance():
    # simulating [0..n) in one call or in two produces identical results
    field = sl.make_field("diag-linear")
    pol = StepPolicy.fixed(1e-3)
    ent = [path_entropy(31, i) for i in range(40)]
    whole = sweep_paths(field, [1.0, 1.0], 0.5, pol, ent)
    left = sweep_paths(field, [1.0, 1.0], 0.5, pol, ent[:17])
    right = sweep_paths(field, [1.0, 1.0], 0.5, pol, ent[17:])
    assert np.array_equal(whole.end_states,
                          np.vstack([left.end_states, right.end_states]))
    assert np.array_equal(whole.min_levels,
                          np.concatenate([left.min_levels, right.min_levels]))


def test_single_path_matches_batch_row():
    field = sl.make_field("linear-1d")
    pol = StepPolicy.adaptive(h_max=1e-2, h_min=1e-4, level_fraction=0.05)
    res = sweep_paths(field, [1.0], 1.0, pol,
                      [path_entropy(8, i) for i in range(6)])
    for i in range(6):
        p = sl.simulate_path(field, [1.0], 1.0, pol, path_entropy(8, i))
        assert p.states[-1, 0] == res.end_states[i, 0]
        assert p.times[-1] == res.end_times[i]


def test_generator_block_split_assumption():
    # block draws must equal step-by-step draws from the same stream; the
    # whole per-path buffering scheme rests on this
    g1 = np.random.default_rng((5, 2))
    a = g1.standard_normal(64)
    g2 = np.random.default_rng((5, 2))
    b = np.concatenate([g2.standard_normal(13), g2.standard_normal(51)])
    assert np.array_equal(a, b)


def test_sweep_barrier_at_start_and_validation():
    field = sl.make_field("linear-1d")
    pol = StepPolicy.fixed(1e-3)
    res = sweep_paths(field, [1.0], 1.0, pol, [path_entropy(1, 0)],
                      barriers=(Barrier(1.0, "down"),), stop_mode="first")
    assert res.first_time[0] == 0.0
    with pytest.raises(InvalidInputError):
        sweep_paths(field, [1.0], -1.0, pol, [(1, 0)])
    with pytest.raises(InvalidInputError):
        Barrier(-1.0, "down")
    with pytest.raises(InvalidInputError):
        Barrier(1.0, "sideways")
    with pytest.raises(InvalidInputError):
        # bridge needs 1-d with a level inverse
        sweep_paths(sl.make_field("diag-linear"), [1.0, 1.0], 1.0, pol,
                    [(1, 0)], bridge=True)


def test_strong_convergence_to_closed_form():
    res = sl.strong_order_study(n_paths=400, h_exponents=range(4, 10),
                                master_seed=77)
    assert res["satisfied"]
    assert 0.35 <= res["slope"] <= 0.65
    # errors decrease monotonically in h
    assert all(a > b for a, b in zip(res["strong_errors"],
                                     res["strong_errors"][1:]))
