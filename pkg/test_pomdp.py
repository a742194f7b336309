#!/usr/bin/env python3
"""
Tests for finite POMDPs, value iteration, the return oracle, the
assumption check and the dominance certificate

Covers:
  - expected_observed_reward (hand values, Monte Carlo cross-check, index errors)
  - q_value_iteration (geometric sum, myopic case, chain fixture vs oracle)
  - enumerate_policy_return (forward and tree modes, node budget)
  - check_assumption / certify_dominance / certify_pomdp
  - randomized properties: normalization, contraction, value bounds,
    oracle equivalence, dominance soundness, gap tightness
  - fixture parsing diagnostics and writing
"""

import shutil
import sys
import tempfile
from pathlib import Path

import numpy as np
import yaml

from testkit import (dominance_instance, print_info, print_success, print_test,
                     random_pomdp, random_rows, run_suite)

from errors import FixtureError, ResourceError, UsageError
from fixtures import load_fixture, parse_fixture, write_certificate, write_fixture
from pomdp import (Certificate, DominanceSpec, FinitePomdp, RewardMaps,
                   check_assumption, certify_dominance, certify_pomdp,
                   enumerate_policy_return, expected_observed_reward,
                   q_value_iteration)

FIXTURES = Path(__file__).parent / 'fixtures'
RANDOM_TRIALS = 10_000


def single_state(kernel_rows, implemented, discount=0.9):
    """One state, self-loop for every action, kernel rows given per action"""
    kernel = np.array(kernel_rows, dtype=np.float64)
    n_a = kernel.shape[0]
    pomdp = FinitePomdp.from_arrays(np.ones((1, n_a, 1)), kernel[None], discount)
    return pomdp, RewardMaps(implemented, [0.0])


# ============================================================================
# Expected observed reward
# ============================================================================

def test_expected_observed_reward_examples():
    """expected_observed_reward hand-computed values"""
    print_test("expected_observed_reward - hand values")

    pomdp, rewards = single_state([[1.0]], [0.5])
    assert expected_observed_reward(pomdp, rewards, 0, 0) == 0.5
    print_success("Point-mass kernel on R~=0.5 -> 0.5")

    pomdp, rewards = single_state([[0.5, 0.5]], [0.0, 1.0])
    assert expected_observed_reward(pomdp, rewards, 0, 0) == 0.5
    print_success("Kernel (0.5, 0.5) over R~=(0, 1) -> 0.5")

    pomdp, rewards = single_state([[0.2, 0.3, 0.5]], [0.0, 0.5, 1.0])
    value = expected_observed_reward(pomdp, rewards, 0, 0)
    assert abs(value - 0.65) < 1e-12, value
    print_success("Kernel (0.2, 0.3, 0.5) over R~=(0, 0.5, 1) -> 0.65")


def test_expected_observed_reward_monte_carlo():
    """expected_observed_reward agrees with sampling the kernel"""
    print_test("expected_observed_reward - Monte Carlo, 10^6 draws")

    kernel = np.array([0.2, 0.3, 0.5])
    implemented = np.array([0.0, 0.5, 1.0])
    pomdp, rewards = single_state([kernel], implemented)
    exact = expected_observed_reward(pomdp, rewards, 0, 0)

    draws = np.random.default_rng(0).choice(3, size=1_000_000, p=kernel)
    samples = implemented[draws]
    sigma = samples.std() / np.sqrt(samples.size)
    assert abs(samples.mean() - exact) <= 3 * sigma, (samples.mean(), exact, sigma)
    print_success(f"Sample mean {samples.mean():.5f} within 3 sigma ({3 * sigma:.5f}) of {exact}")


def test_expected_observed_reward_index_errors():
    """expected_observed_reward rejects indices out of range"""
    print_test("expected_observed_reward - index errors")
    pomdp, rewards = single_state([[1.0], [1.0]], [0.5])
    for next_state, action in ((1, 0), (0, 2), (-1, 0), (0, 1.5)):
        try:
            expected_observed_reward(pomdp, rewards, next_state, action)
        except UsageError:
            continue
        raise AssertionError(f"({next_state}, {action}) was accepted")
    print_success("Out-of-range and non-integer indices raise UsageError")


# ============================================================================
# Value iteration and the return oracle
# ============================================================================

def test_value_iteration_geometric_sum():
    """Self-loop with reward 1 has Q = 1/(1-gamma)"""
    print_test("q_value_iteration - geometric sum")
    pomdp, rewards = single_state([[1.0]], [1.0], discount=0.9)
    qtable = q_value_iteration(pomdp, rewards)
    assert qtable.converged
    assert qtable.residual <= 1e-9
    assert abs(qtable.values[0, 0] - 10.0) < 1e-7, qtable.values
    print_success(f"Q = {qtable.values[0, 0]:.10f} after {qtable.iterations} iterations")


def test_value_iteration_myopic():
    """gamma = 0 gives the one-step expected observed reward"""
    print_test("q_value_iteration - gamma = 0")
    rng = np.random.default_rng(11)
    for _ in range(50):
        pomdp, rewards = random_pomdp(rng, discount=0.0)
        qtable = q_value_iteration(pomdp, rewards)
        for s in range(pomdp.n_states):
            for a in range(pomdp.n_actions):
                expected = sum(pomdp.transition[s, a, t]
                               * expected_observed_reward(pomdp, rewards, t, a)
                               for t in range(pomdp.n_states))
                assert abs(qtable.values[s, a] - expected) < 1e-12
    print_success("Q(s,a) equals sum_s' T r(s',a) on 50 random instances")


def test_chain_fixture_matches_oracle():
    """chain3 fixture: greedy value matches enumeration at horizon 40"""
    print_test("q_value_iteration - chain3 fixture vs enumerate_policy_return")
    fixture = load_fixture(FIXTURES / 'chain3.json')
    pomdp, rewards = fixture.pomdp, fixture.rewards
    assert pomdp.discount == 0.5

    qtable = q_value_iteration(pomdp, rewards, tolerance=1e-12)
    policy = qtable.greedy_policy()
    bound = 0.5 ** 40 / (1 - 0.5) + 1e-9
    for s in range(pomdp.n_states):
        oracle = enumerate_policy_return(pomdp, rewards, policy, s, horizon=40)
        assert abs(qtable.state_values[s] - oracle) <= bound, (s, qtable.state_values[s], oracle)
    print_success(f"V = {np.round(qtable.state_values, 6).tolist()} matches the oracle")
    print_info(f"Greedy policy: {[pomdp.actions[a] for a in policy]}")


def test_value_iteration_arguments():
    """Bad tolerances are rejected and max_iterations is reported"""
    print_test("q_value_iteration - arguments")
    pomdp, rewards = single_state([[1.0]], [1.0], discount=0.9)
    for tolerance in (0.0, -1.0):
        try:
            q_value_iteration(pomdp, rewards, tolerance=tolerance)
            raise AssertionError(f"tolerance {tolerance} accepted")
        except UsageError:
            pass
    qtable = q_value_iteration(pomdp, rewards, max_iterations=3)
    assert not qtable.converged and qtable.iterations == 3
    assert len(qtable.residual_history) == 3
    print_success("tolerance <= 0 rejected; truncated run reports converged=False")


def test_enumerate_examples():
    """enumerate_policy_return on hand-checkable cases"""
    print_test("enumerate_policy_return - examples")
    pomdp, rewards = single_state([[1.0]], [1.0], discount=0.9)
    for exhaustive in (False, True):
        value = enumerate_policy_return(pomdp, rewards, [0], 0, horizon=2, exhaustive=exhaustive)
        assert abs(value - 1.9) < 1e-12, value
    print_success("Self-loop, reward 1, gamma 0.9, horizon 2 -> 1.9 (both modes)")

    rng = np.random.default_rng(5)
    pomdp, rewards = random_pomdp(rng, discount=0.0)
    policy = {s: 0 for s in range(pomdp.n_states)}
    for s in range(pomdp.n_states):
        value = enumerate_policy_return(pomdp, rewards, policy, s, horizon=1)
        expected = sum(pomdp.transition[s, 0, t] * expected_observed_reward(pomdp, rewards, t, 0)
                       for t in range(pomdp.n_states))
        assert abs(value - expected) < 1e-12
    print_success("gamma 0, horizon 1 -> one-step expected observed reward (dict policy)")


def test_enumerate_tree_matches_forward():
    """Tree walk and forward recursion agree"""
    print_test("enumerate_policy_return - tree vs forward recursion")
    rng = np.random.default_rng(21)
    for _ in range(30):
        pomdp, rewards = random_pomdp(rng, discount=0.9)
        policy = rng.integers(0, pomdp.n_actions, size=pomdp.n_states).tolist()
        start = int(rng.integers(0, pomdp.n_states))
        forward = enumerate_policy_return(pomdp, rewards, policy, start, horizon=5)
        tree = enumerate_policy_return(pomdp, rewards, policy, start, horizon=5, exhaustive=True)
        assert abs(forward - tree) < 1e-12, (forward, tree)
    print_success("30 random instances agree to 1e-12 at horizon 5")


def test_enumerate_budget_and_errors():
    """Node budget and argument checks"""
    print_test("enumerate_policy_return - budget and errors")
    rng = np.random.default_rng(8)
    pomdp, rewards = random_pomdp(rng, max_states=3)
    policy = [0] * pomdp.n_states

    for exhaustive in (False, True):
        try:
            enumerate_policy_return(pomdp, rewards, policy, 0, horizon=50, node_budget=10,
                                    exhaustive=exhaustive)
            raise AssertionError("budget not enforced")
        except ResourceError:
            pass
    print_success("ResourceError when the node budget is exceeded (both modes)")

    for kwargs in ({'horizon': 0}, {'horizon': 3, 'start_state': pomdp.n_states}):
        args = {'start_state': 0, **kwargs}
        try:
            enumerate_policy_return(pomdp, rewards, policy, **args)
            raise AssertionError(f"{kwargs} accepted")
        except UsageError:
            pass
    try:
        enumerate_policy_return(pomdp, rewards, policy + [0], 0, horizon=3)
        raise AssertionError("policy of the wrong length accepted")
    except UsageError:
        pass
    print_success("Bad horizon, start state and policy length raise UsageError")


# ============================================================================
# Assumption and certificate
# ============================================================================

def test_assumption_task_limit_violation():
    """r_task = 0 with a task action worth 0.3 fails the task limit"""
    print_test("check_assumption - task limit witness")
    pomdp, rewards = single_state([[1.0, 0.0], [0.0, 1.0]], [0.3, 1.0])
    report = check_assumption(pomdp, rewards, DominanceSpec((0,), 1, 0.0))
    assert report.manipulation and report.availability
    assert not report.task_limit and not report.holds
    assert report.failed_conditions() == ['task_limit']
    (violation,) = report.violations
    assert (violation.next_state, violation.action) == (0, 0)
    assert abs(violation.value - 0.3) < 1e-12
    print_success("task_limit fails with witness (s0, a0, 0.3)")


def test_assumption_manipulation_violation():
    """broken_manipulation fixture: tampering reaches 0.9, not 1"""
    print_test("check_assumption - manipulation witness")
    fixture = load_fixture(FIXTURES / 'broken_manipulation.json')
    report = check_assumption(fixture.pomdp, fixture.rewards, fixture.dominance)
    assert not report.manipulation and report.task_limit
    (violation,) = report.violations
    expected = expected_observed_reward(fixture.pomdp, fixture.rewards, 0, fixture.dominance.wirehead_action)
    assert abs(violation.value - 0.9) < 1e-12 and violation.value == expected
    print_success("manipulation fails with witness value 0.9")

    report, qtable, certificate = certify_pomdp(fixture.pomdp, fixture.rewards, fixture.dominance)
    assert qtable is None
    assert certificate.status == 'assumption not met' and not certificate.passed
    print_success("certify_pomdp marks the certificate 'assumption not met'")


def test_certificate_refuses_failed_assumption():
    """certify_dominance will not certify without a passing report"""
    print_test("certify_dominance - gated by the assumption")
    fixture = load_fixture(FIXTURES / 'broken_manipulation.json')
    qtable = q_value_iteration(fixture.pomdp, fixture.rewards)
    report = check_assumption(fixture.pomdp, fixture.rewards, fixture.dominance)
    for assumption in (None, report):
        try:
            certify_dominance(qtable, fixture.dominance, assumption=assumption)
            raise AssertionError("certificate issued without a passing assumption")
        except UsageError:
            pass
    print_success("Missing or failed assumption report raises UsageError")


def test_certificate_refuses_other_spec():
    """A passing report only gates the DominanceSpec it was checked against"""
    print_test("certify_dominance - report and spec must match")
    fixture = load_fixture(FIXTURES / 'chain3_dominance.json')
    spec = fixture.dominance
    qtable = q_value_iteration(fixture.pomdp, fixture.rewards)
    report = check_assumption(fixture.pomdp, fixture.rewards, spec)
    assert report.holds and report.task_actions == spec.task_actions
    assert certify_dominance(qtable, spec, assumption=report).passed

    others = [
        DominanceSpec((0,), 2, 0.7),
        DominanceSpec((0, 1), 2, 0.9),
        DominanceSpec((0, 2), 1, 0.7),
    ]
    for other in others:
        try:
            certify_dominance(qtable, other, assumption=report)
            raise AssertionError(f"certificate issued for {other} with a report for {spec}")
        except UsageError as e:
            assert 'different dominance spec' in str(e)
    print_success("Other task actions, r_task or wirehead action raise UsageError")


def test_certificate_examples():
    """Gap bounds at gamma 0.9 with r_task 0.6 and r_task 0"""
    print_test("certify_dominance - bound examples")
    rng = np.random.default_rng(3)
    pomdp, rewards, spec = dominance_instance(rng, r_task=0.6, discount=0.9)
    _, _, certificate = certify_pomdp(pomdp, rewards, spec)
    assert certificate.passed
    assert certificate.min_gap >= 0.4 - certificate.slack
    print_success(f"r_task 0.6: min gap {certificate.min_gap:.6f} >= 0.4 - slack")

    # Task actions only ever see a zero-reward observation
    n_s = 3
    kernel = np.zeros((n_s, 3, 2))
    kernel[:, :2, 0] = 1.0
    kernel[:, 2, 1] = 1.0
    pomdp = FinitePomdp.from_arrays(random_rows(rng, (n_s, 3, n_s)), kernel, 0.9)
    rewards = RewardMaps([0.0, 1.0], [0.0] * n_s)
    _, _, certificate = certify_pomdp(pomdp, rewards, DominanceSpec((0, 1), 2, 0.0))
    assert certificate.passed
    assert certificate.min_gap >= 1.0 - certificate.slack
    print_success(f"r_task 0: min gap {certificate.min_gap:.6f} >= 1 - slack")


def test_chain_dominance_gap_matches_oracle():
    """chain3_dominance gap equals the all-wirehead vs one-step-deviation returns"""
    print_test("certify_dominance - chain3_dominance fixture vs enumeration")
    fixture = load_fixture(FIXTURES / 'chain3_dominance.json')
    pomdp, rewards, spec = fixture.pomdp, fixture.rewards, fixture.dominance
    _, qtable, certificate = certify_pomdp(pomdp, rewards, spec)
    assert certificate.passed

    horizon = 60
    wirehead_policy = [spec.wirehead_action] * pomdp.n_states
    wirehead_value = np.array([
        enumerate_policy_return(pomdp, rewards, wirehead_policy, s, horizon)
        for s in range(pomdp.n_states)
    ])
    gaps = []
    for s in range(pomdp.n_states):
        for a in spec.task_actions:
            deviation = sum(
                pomdp.transition[s, a, t]
                * (expected_observed_reward(pomdp, rewards, t, a)
                   + pomdp.discount * wirehead_value[t])
                for t in range(pomdp.n_states)
            )
            gaps.append(wirehead_value[s] - deviation)
    oracle_gap = min(gaps)

    tail = 2 * pomdp.discount ** horizon / (1 - pomdp.discount)
    assert abs(certificate.min_gap - oracle_gap) <= certificate.slack + tail, \
        (certificate.min_gap, oracle_gap)
    assert abs(certificate.min_gap - 0.3) <= certificate.slack + tail
    assert pomdp.states[certificate.witness_state] in ('s1', 's2')
    print_success(f"min gap {certificate.min_gap:.9f} = oracle {oracle_gap:.9f} = 1 - r_task")


def test_myopic_override_reduces_to_one_step():
    """gamma = 0 override compares 1 against one-step task rewards"""
    print_test("certify - gamma 0 override")
    fixture = load_fixture(FIXTURES / 'chain3_dominance.json', discount=0.0)
    pomdp, rewards, spec = fixture.pomdp, fixture.rewards, fixture.dominance
    assert pomdp.discount == 0.0
    _, qtable, certificate = certify_pomdp(pomdp, rewards, spec)

    best_task = max(
        sum(pomdp.transition[s, a, t] * expected_observed_reward(pomdp, rewards, t, a)
            for t in range(pomdp.n_states))
        for s in range(pomdp.n_states) for a in spec.task_actions
    )
    assert np.allclose(qtable.values[:, spec.wirehead_action], 1.0, atol=1e-12)
    assert abs(certificate.min_gap - (1.0 - best_task)) < 1e-12
    assert certificate.passed
    print_success(f"Q(a_w) = 1, min gap = 1 - {best_task:g}")


# ============================================================================
# Randomized properties
# ============================================================================

def test_normalization_property():
    """Rows are normalized at construction; malformed rows are rejected"""
    print_test("FinitePomdp - normalization")
    rng = np.random.default_rng(1)
    for _ in range(RANDOM_TRIALS):
        pomdp, _ = random_pomdp(rng)
        assert np.all(np.abs(pomdp.transition.sum(axis=-1) - 1.0) <= 1e-12)
        assert np.all(np.abs(pomdp.obs_kernel.sum(axis=-1) - 1.0) <= 1e-12)
    print_success(f"{RANDOM_TRIALS} random POMDPs have rows summing to 1 within 1e-12")

    kernel = [[[1.0]], [[1.0]]]
    nearly = [[[0.5, 0.5000004]], [[0.5, 0.5]]]
    pomdp = FinitePomdp.from_arrays(nearly, kernel, 0.5)
    assert abs(pomdp.transition[0, 0].sum() - 1.0) <= 1e-12
    print_success("Row off by 4e-7 is normalized")

    bad_cases = [
        ([[[0.5, 0.6]], [[0.5, 0.5]]], kernel, 0.5),
        ([[[1.5, -0.5]], [[0.5, 0.5]]], kernel, 0.5),
        ([[[1.0]]], [[[1.0]]], 1.0),
        ([[[1.0]]], [[[np.nan]]], 0.5),
        ([[[1.0]]], [[[0.5, 0.4]]], 0.5),
    ]
    for transition, kernel, discount in bad_cases:
        try:
            FinitePomdp.from_arrays(transition, kernel, discount)
            raise AssertionError(f"accepted {transition}, {kernel}, {discount}")
        except UsageError:
            pass
    try:
        RewardMaps([1.2], [0.0])
        raise AssertionError("reward above 1 accepted")
    except UsageError:
        pass
    print_success("Bad row sums, negative entries, gamma = 1, NaN and rewards > 1 rejected")


def test_contraction_and_value_bounds():
    """Residuals never increase and Q stays in [0, 1/(1-gamma)]"""
    print_test("q_value_iteration - contraction and value bounds")
    rng = np.random.default_rng(2)
    for _ in range(RANDOM_TRIALS):
        pomdp, rewards = random_pomdp(rng)
        qtable = q_value_iteration(pomdp, rewards)
        history = np.array(qtable.residual_history)
        assert np.all(np.diff(history) <= 1e-12), history
        upper = 1.0 / (1.0 - pomdp.discount) + 1e-9
        assert qtable.values.min() >= 0.0 and qtable.values.max() <= upper
    print_success(f"{RANDOM_TRIALS} random instances")


def test_oracle_equivalence():
    """Greedy value matches enumeration at horizon 40 for gamma <= 0.5"""
    print_test("q_value_iteration - oracle equivalence")
    rng = np.random.default_rng(4)
    trials = 1000
    for _ in range(trials):
        pomdp, rewards = random_pomdp(rng)
        qtable = q_value_iteration(pomdp, rewards, tolerance=1e-12)
        policy = qtable.greedy_policy()
        bound = pomdp.discount ** 40 / (1 - pomdp.discount) + 1e-9
        for s in range(pomdp.n_states):
            oracle = enumerate_policy_return(pomdp, rewards, policy, s, horizon=40)
            assert abs(qtable.state_values[s] - oracle) <= bound
    print_success(f"{trials} random instances with |S|,|A|,|O| <= 4")


def test_dominance_soundness():
    """Assumption-satisfying instances certify; broken ones never do"""
    print_test("certify_dominance - 50 random instances per setting")
    rng = np.random.default_rng(6)
    count = 0
    for discount in (0.5, 0.9, 0.99):
        for r_task in (0.3, 0.6, 0.8):
            for _ in range(50):
                pomdp, rewards, spec = dominance_instance(rng, r_task, discount)
                report, qtable, certificate = certify_pomdp(pomdp, rewards, spec)
                assert report.holds
                assert certificate.passed, certificate
                assert certificate.min_gap >= (1 - r_task) - certificate.slack
                assert certificate.wirehead_value_error <= certificate.slack
                count += 1
    print_success(f"{count} certificates pass with min gap >= (1 - r_task) - slack")

    for _ in range(100):
        r_task = float(rng.choice([0.3, 0.6, 0.8]))
        pomdp, rewards, spec = dominance_instance(rng, r_task, 0.9)
        kernel = pomdp.obs_kernel.copy()
        implemented = rewards.implemented.copy()
        if rng.random() < 0.5:
            # manipulation off by 0.1: a tenth of the mass leaks to a zero-reward observation
            implemented[0] = 0.0
            kernel[:, spec.wirehead_action] = 0.0
            kernel[:, spec.wirehead_action, 0] = 0.1
            kernel[:, spec.wirehead_action, -1] = 0.9
        else:
            # one task action reaches the tamper observation
            state = int(rng.integers(0, pomdp.n_states))
            action = spec.task_actions[0]
            kernel[state, action] = 0.0
            kernel[state, action, -1] = 1.0
        broken = FinitePomdp.from_arrays(pomdp.transition, kernel, pomdp.discount)
        report, qtable, certificate = certify_pomdp(broken, RewardMaps(implemented, rewards.intended), spec)
        assert not report.holds and qtable is None
        assert certificate.status == 'assumption not met'
    print_success("100 deliberately broken instances are gated as 'assumption not met'")


def test_gap_tightness():
    """Ceiling-achieving, state-preserving task actions give gap 1 - r_task"""
    print_test("certify_dominance - gap tightness")
    rng = np.random.default_rng(9)
    for _ in range(30):
        n_s = int(rng.integers(1, 6))
        n_a = int(rng.integers(2, 6))
        r_task = float(rng.uniform(0.0, 0.95))
        discount = float(rng.choice([0.5, 0.9, 0.99]))
        transition = np.broadcast_to(np.eye(n_s)[:, None, :], (n_s, n_a, n_s))
        kernel = np.zeros((n_s, n_a, 2))
        kernel[:, :-1, 0] = 1.0
        kernel[:, -1, 1] = 1.0
        pomdp = FinitePomdp.from_arrays(transition, kernel, discount)
        rewards = RewardMaps([r_task, 1.0], rng.random(n_s))
        _, _, certificate = certify_pomdp(pomdp, rewards,
                                          DominanceSpec(tuple(range(n_a - 1)), n_a - 1, r_task))
        assert certificate.passed
        assert abs(certificate.min_gap - (1.0 - r_task)) <= certificate.slack
    print_success("Measured gap equals 1 - r_task within slack on 30 instances")


# ============================================================================
# Fixture files
# ============================================================================

MALFORMED = """\
states: [a, b]
actions: [x]
observations: [o]
discount: 0.5
transition:
  - [[0.5, 0.5]]
  - [[0.7, 0.7]]
obs_kernel:
  - [[1.0]]
  - [[1.0]]
rewards:
  implemented: [1.0]
  intended: [0.0, 1.0]
"""


def test_fixture_diagnostics():
    """Malformed fixtures name the field and line"""
    print_test("parse_fixture - diagnostics")
    try:
        parse_fixture(MALFORMED, source='bad.yaml')
        raise AssertionError("bad row sum accepted")
    except FixtureError as e:
        assert e.field == 'transition.1.0', e.field
        assert e.line == 7, e.line
        assert str(e).startswith("bad.yaml, line 7, field 'transition.1.0'")
    print_success("Bad row sum -> line 7, field transition.1.0")

    good = MALFORMED.replace('[[0.7, 0.7]]', '[[0.3, 0.7]]')
    fixture = parse_fixture(good)
    assert fixture.dominance is None and fixture.pomdp.n_states == 2

    try:
        parse_fixture(good + "extra: 1\n")
        raise AssertionError("unknown key accepted")
    except FixtureError as e:
        assert e.field == 'extra' and e.line == 14, (e.field, e.line)
    print_success("Unknown key -> line 14, field extra")

    try:
        parse_fixture(good.replace("obs_kernel:\n  - [[1.0]]\n  - [[1.0]]\n", ""))
        raise AssertionError("missing obs_kernel accepted")
    except FixtureError as e:
        assert e.field == 'obs_kernel'

    try:
        parse_fixture("states: [a, b\n")
        raise AssertionError("broken YAML accepted")
    except FixtureError as e:
        assert e.line is not None

    dominance = good + "dominance:\n  task_actions: [x]\n  wirehead_action: nope\n  r_task: 0.5\n"
    try:
        parse_fixture(dominance)
        raise AssertionError("unknown action accepted")
    except FixtureError as e:
        assert e.field == 'dominance.wirehead_action' and e.line == 16, (e.field, e.line)
    print_success("Missing field, broken YAML and unknown action references are reported")


def test_fixture_loading_and_writing():
    """Fixtures resolve action names and survive a write/read cycle"""
    print_test("fixtures - load and write")
    fixture = load_fixture(FIXTURES / 'chain3_dominance.json')
    spec = fixture.dominance
    assert spec.task_actions == (0, 1) and spec.wirehead_action == 2 and spec.r_task == 0.7
    print_success("Action names resolve to indices")

    tmp = Path(tempfile.mkdtemp())
    try:
        for name in ('copy.yaml', 'copy.json'):
            path = write_fixture(tmp / name, fixture.pomdp, fixture.rewards, spec, "copy")
            again = load_fixture(path)
            assert again.pomdp.actions == fixture.pomdp.actions
            assert np.array_equal(again.pomdp.transition, fixture.pomdp.transition)
            assert np.array_equal(again.pomdp.obs_kernel, fixture.pomdp.obs_kernel)
            assert again.dominance == spec and again.description == "copy"
        print_success("YAML and JSON copies load back identically")

        _, _, certificate = certify_pomdp(fixture.pomdp, fixture.rewards, spec)
        path = write_certificate(tmp / 'cert.yaml', certificate, fixture.pomdp, source='chain')
        record = yaml.safe_load(path.read_text())
        assert record['status'] == 'pass' and record['fixture'] == 'chain'
        assert record['witness']['action'] in fixture.pomdp.actions
        for key in ('min_gap', 'bound', 'slack', 'residual'):
            assert key in record

        failed = Certificate(passed=False, assumption_met=False)
        record = yaml.safe_load(write_certificate(tmp / 'failed.yaml', failed).read_text())
        assert record['status'] == 'assumption not met' and record['violations'] == []
        print_success("Certificates record status, gap, witness, residual and slack")
    finally:
        shutil.rmtree(tmp)


def main():
    """Run all tests"""
    return run_suite("wirehead-bench - POMDP Test Suite", [
        ("Expected Observed Reward", [
            test_expected_observed_reward_examples,
            test_expected_observed_reward_monte_carlo,
            test_expected_observed_reward_index_errors,
        ]),
        ("Value Iteration & Oracle", [
            test_value_iteration_geometric_sum,
            test_value_iteration_myopic,
            test_chain_fixture_matches_oracle,
            test_value_iteration_arguments,
            test_enumerate_examples,
            test_enumerate_tree_matches_forward,
            test_enumerate_budget_and_errors,
        ]),
        ("Assumption & Certificate", [
            test_assumption_task_limit_violation,
            test_assumption_manipulation_violation,
            test_certificate_refuses_failed_assumption,
            test_certificate_refuses_other_spec,
            test_certificate_examples,
            test_chain_dominance_gap_matches_oracle,
            test_myopic_override_reduces_to_one_step,
        ]),
        ("Randomized Properties", [
            test_normalization_property,
            test_contraction_and_value_bounds,
            test_oracle_equivalence,
            test_dominance_soundness,
            test_gap_tightness,
        ]),
        ("Fixture Files", [
            test_fixture_diagnostics,
            test_fixture_loading_and_writing,
        ]),
    ])


if __name__ == '__main__':
    sys.exit(main())
