"""
Finite POMDPs with observation-based rewards

Exact value iteration over latent states, a brute-force discounted-return
oracle, the reward-channel dominance assumption check and the numeric
dominance certificate built on top of them.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from errors import NumericalError, ResourceError, UsageError

logger = logging.getLogger(__name__)

# Row sums may be off by this much before normalization (text rounding)
NORMALIZE_TOLERANCE = 1e-6
ASSUMPTION_TOLERANCE = 1e-9
DEFAULT_TOLERANCE = 1e-9
DEFAULT_MAX_ITERATIONS = 1_000_000
DEFAULT_NODE_BUDGET = 10_000_000


def _check_index(kind, index, size):
    """Raise UsageError unless 0 <= index < size"""
    if isinstance(index, bool) or not isinstance(index, (int, np.integer)):
        raise UsageError(f"{kind} index must be an integer, got {index!r}")
    if not 0 <= index < size:
        raise UsageError(f"{kind} index {index} out of range [0, {size})")
    return int(index)


def _stochastic_rows(values, name, shape):
    """
    Validate and normalize an array whose last axis holds probability rows

    Args:
        values: Nested sequence or array
        name: Field name used in error messages
        shape: Expected shape

    Returns:
        np.ndarray: Read-only float64 array whose rows sum to 1

    Raises:
        UsageError: Wrong shape, negative or non-finite entries, or a row
            sum further than NORMALIZE_TOLERANCE from 1
    """
    array = np.array(values, dtype=np.float64)
    if array.shape != shape:
        raise UsageError(f"{name} has shape {array.shape}, expected {shape}")
    if not np.all(np.isfinite(array)):
        raise UsageError(f"{name} contains non-finite entries")
    if (array < 0).any():
        index = tuple(int(i) for i in np.argwhere(array < 0)[0])
        raise UsageError(f"{name}{list(index)} is negative")

    sums = array.sum(axis=-1)
    off = np.abs(sums - 1.0) > NORMALIZE_TOLERANCE
    if off.any():
        index = tuple(int(i) for i in np.argwhere(off)[0])
        raise UsageError(
            f"{name}{list(index)} sums to {sums[index]:.9g}, expected 1"
        )

    array = array / sums[..., None]
    array.setflags(write=False)
    return array


def _unit_interval(values, name, size):
    array = np.array(values, dtype=np.float64)
    if array.shape != (size,):
        raise UsageError(f"{name} has shape {array.shape}, expected ({size},)")
    if not np.all(np.isfinite(array)) or (array < 0).any() or (array > 1).any():
        raise UsageError(f"{name} values must lie in [0, 1]")
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class FinitePomdp:
    """
    (S, A, O, T, O-kernel, gamma) with named states, actions and observations

    transition[s][a] is a distribution over next states and
    obs_kernel[s'][a] a distribution over observations. Rows are normalized
    at construction.
    """
    states: tuple
    actions: tuple
    observations: tuple
    transition: np.ndarray
    obs_kernel: np.ndarray
    discount: float

    def __post_init__(self):
        for kind in ('states', 'actions', 'observations'):
            names = tuple(getattr(self, kind))
            if not names:
                raise UsageError(f"POMDP needs at least one entry in {kind}")
            if len(set(names)) != len(names):
                raise UsageError(f"Duplicate names in {kind}")
            object.__setattr__(self, kind, names)

        n_s, n_a, n_o = len(self.states), len(self.actions), len(self.observations)
        object.__setattr__(self, 'transition', _stochastic_rows(
            self.transition, 'transition', (n_s, n_a, n_s)))
        object.__setattr__(self, 'obs_kernel', _stochastic_rows(
            self.obs_kernel, 'obs_kernel', (n_s, n_a, n_o)))

        discount = float(self.discount)
        if not 0.0 <= discount < 1.0:
            raise UsageError(f"discount must lie in [0, 1), got {discount}")
        object.__setattr__(self, 'discount', discount)

    @classmethod
    def from_arrays(cls, transition, obs_kernel, discount):
        """Build a POMDP with generated names (s0.., a0.., o0..)"""
        transition = np.asarray(transition, dtype=np.float64)
        obs_kernel = np.asarray(obs_kernel, dtype=np.float64)
        n_s, n_a = transition.shape[:2]
        n_o = obs_kernel.shape[-1]
        return cls(
            states=tuple(f"s{i}" for i in range(n_s)),
            actions=tuple(f"a{i}" for i in range(n_a)),
            observations=tuple(f"o{i}" for i in range(n_o)),
            transition=transition,
            obs_kernel=obs_kernel,
            discount=discount,
        )

    @property
    def n_states(self):
        return len(self.states)

    @property
    def n_actions(self):
        return len(self.actions)

    @property
    def n_observations(self):
        return len(self.observations)

    def with_discount(self, discount):
        """Copy of this POMDP with another discount factor"""
        return FinitePomdp(self.states, self.actions, self.observations,
                           self.transition, self.obs_kernel, discount)


@dataclass(frozen=True)
class RewardMaps:
    """
    Implemented reward (one value per observation) and intended reward
    (one value per state)

    The intended reward is evaluation-only: nothing agent-facing reads it.
    """
    implemented: np.ndarray
    intended: np.ndarray

    def __post_init__(self):
        implemented = np.array(self.implemented, dtype=np.float64)
        intended = np.array(self.intended, dtype=np.float64)
        object.__setattr__(self, 'implemented', _unit_interval(
            implemented, 'implemented reward', implemented.size))
        object.__setattr__(self, 'intended', _unit_interval(
            intended, 'intended reward', intended.size))

    def check_against(self, pomdp):
        """Raise UsageError unless the maps match the POMDP's sizes"""
        if self.implemented.shape != (pomdp.n_observations,):
            raise UsageError(
                f"implemented reward has {self.implemented.size} entries, "
                f"POMDP has {pomdp.n_observations} observations"
            )
        if self.intended.shape != (pomdp.n_states,):
            raise UsageError(
                f"intended reward has {self.intended.size} entries, "
                f"POMDP has {pomdp.n_states} states"
            )


@dataclass(frozen=True)
class DominanceSpec:
    """Task actions, the wireheading action and the task-reward ceiling"""
    task_actions: tuple
    wirehead_action: int
    r_task: float

    def __post_init__(self):
        task_actions = tuple(int(a) for a in self.task_actions)
        if not task_actions:
            raise UsageError("task_actions must not be empty")
        if len(set(task_actions)) != len(task_actions):
            raise UsageError("task_actions contains duplicates")
        wirehead = int(self.wirehead_action)
        if wirehead in task_actions:
            raise UsageError(
                f"wirehead action {wirehead} is also listed as a task action"
            )
        r_task = float(self.r_task)
        if not 0.0 <= r_task < 1.0:
            raise UsageError(f"r_task must lie in [0, 1), got {r_task}")
        object.__setattr__(self, 'task_actions', task_actions)
        object.__setattr__(self, 'wirehead_action', wirehead)
        object.__setattr__(self, 'r_task', r_task)

    def check_against(self, pomdp):
        for action in self.task_actions:
            _check_index('task action', action, pomdp.n_actions)
        _check_index('wirehead action', self.wirehead_action, pomdp.n_actions)


@dataclass(frozen=True)
class QTable:
    """Result of value iteration: Q[s][a] plus convergence bookkeeping"""
    values: np.ndarray
    residual: float
    iterations: int
    discount: float
    converged: bool
    residual_history: tuple = field(default=(), repr=False)

    @property
    def state_values(self):
        """V[s] = max_a Q[s][a]"""
        return self.values.max(axis=1)

    def greedy_policy(self):
        """Deterministic greedy policy; ties break toward the lowest index"""
        return tuple(int(a) for a in np.argmax(self.values, axis=1))


def observed_reward_matrix(pomdp, rewards):
    """r[s'][a] = sum_o Okernel[s'][a][o] * R~[o] for every pair"""
    rewards.check_against(pomdp)
    return pomdp.obs_kernel @ rewards.implemented


def expected_observed_reward(pomdp, rewards, next_state, action):
    """
    Expected implemented reward of the observation emitted in next_state
    after taking action

    Returns:
        float: sum_o Okernel[next_state][action][o] * R~[o]

    Raises:
        UsageError: Index out of range
    """
    next_state = _check_index('state', next_state, pomdp.n_states)
    action = _check_index('action', action, pomdp.n_actions)
    rewards.check_against(pomdp)
    return float(pomdp.obs_kernel[next_state, action] @ rewards.implemented)


def q_value_iteration(pomdp, rewards, tolerance=DEFAULT_TOLERANCE,
                      max_iterations=DEFAULT_MAX_ITERATIONS):
    """
    Iterate Q(s,a) <- sum_s' T[s][a][s'] (r(s',a) + gamma max_a' Q(s',a'))

    Starts from Q = 0 and stops once the sup-norm change drops to
    `tolerance` or `max_iterations` is reached.

    Returns:
        QTable

    Raises:
        UsageError: tolerance <= 0 or max_iterations < 1
        NumericalError: A non-finite value appeared
    """
    if not tolerance > 0:
        raise UsageError(f"tolerance must be positive, got {tolerance}")
    if max_iterations < 1:
        raise UsageError(f"max_iterations must be >= 1, got {max_iterations}")

    gamma = pomdp.discount
    transition = pomdp.transition
    observed = observed_reward_matrix(pomdp, rewards)
    # Reward attaches to the successor state's observation, weighted by T
    immediate = np.einsum('sat,ta->sa', transition, observed)

    q = np.zeros((pomdp.n_states, pomdp.n_actions))
    history = []
    residual = float('inf')
    converged = False
    iterations = 0

    for iterations in range(1, max_iterations + 1):
        q_next = immediate + gamma * (transition @ q.max(axis=1))
        if not np.all(np.isfinite(q_next)):
            raise NumericalError(
                f"value iteration produced a non-finite value at iteration {iterations}"
            )
        residual = float(np.max(np.abs(q_next - q)))
        history.append(residual)
        q = q_next
        if residual <= tolerance:
            converged = True
            break

    if not converged:
        logger.warning("Value iteration stopped after %d iterations, residual %.3g",
                       iterations, residual)

    q.setflags(write=False)
    return QTable(values=q, residual=residual, iterations=iterations,
                  discount=gamma, converged=converged,
                  residual_history=tuple(history))


def greedy_policy(qtable):
    """argmax_a Q[s][a] per state, ties toward the lowest action index"""
    return qtable.greedy_policy()


def _policy_actions(pomdp, policy):
    """Normalize a state->action map (sequence or dict) to an index array"""
    if isinstance(policy, dict):
        policy = [policy[s] for s in range(pomdp.n_states)]
    actions = [_check_index('policy action', a, pomdp.n_actions) for a in policy]
    if len(actions) != pomdp.n_states:
        raise UsageError(
            f"policy covers {len(actions)} states, POMDP has {pomdp.n_states}"
        )
    return np.array(actions, dtype=np.int64)


def enumerate_policy_return(pomdp, rewards, policy, start_state, horizon,
                            node_budget=DEFAULT_NODE_BUDGET, exhaustive=False):
    """
    Exact expected discounted implemented return of a deterministic policy
    over `horizon` steps

    The default mode pushes the state distribution forward one step at a
    time. With exhaustive=True every branch of the transition tree is
    walked instead, which only suits short horizons.

    Args:
        policy: Sequence (or dict) mapping state index -> action index
        start_state: Initial state index
        horizon: Number of steps, >= 1
        node_budget: Upper bound on visited tree nodes / forward-recursion work
        exhaustive: Walk the full trajectory tree

    Returns:
        float: Truncated return; the tail beyond `horizon` is at most
            gamma**horizon / (1 - gamma)

    Raises:
        UsageError: Bad indices or horizon < 1
        ResourceError: node_budget exceeded
    """
    if horizon < 1:
        raise UsageError(f"horizon must be >= 1, got {horizon}")
    start_state = _check_index('state', start_state, pomdp.n_states)
    actions = _policy_actions(pomdp, policy)
    observed = observed_reward_matrix(pomdp, rewards)
    gamma = pomdp.discount
    n_states = pomdp.n_states

    if exhaustive:
        return _walk_tree(pomdp, observed, actions, start_state, horizon, node_budget)

    work = horizon * n_states * n_states
    if work > node_budget:
        raise ResourceError(
            f"forward recursion needs {work} steps, budget is {node_budget}"
        )

    step_matrix = pomdp.transition[np.arange(n_states), actions]
    step_reward = np.einsum('st,ts->s', step_matrix, observed[:, actions])

    distribution = np.zeros(n_states)
    distribution[start_state] = 1.0
    total = 0.0
    weight = 1.0
    for _ in range(horizon):
        total += weight * float(distribution @ step_reward)
        distribution = distribution @ step_matrix
        weight *= gamma
    return total


def _walk_tree(pomdp, observed, actions, start_state, horizon, node_budget):
    gamma = pomdp.discount
    total = 0.0
    nodes = 0
    stack = [(start_state, 1.0, 0)]

    while stack:
        state, probability, depth = stack.pop()
        action = actions[state]
        row = pomdp.transition[state, action]
        for next_state in np.flatnonzero(row):
            nodes += 1
            if nodes > node_budget:
                raise ResourceError(
                    f"trajectory tree exceeds the node budget of {node_budget}"
                )
            branch = probability * row[next_state]
            total += branch * gamma ** depth * observed[next_state, action]
            if depth + 1 < horizon:
                stack.append((int(next_state), branch, depth + 1))

    return float(total)


@dataclass(frozen=True)
class Violation:
    """One (s', a) pair breaking an assumption condition"""
    condition: str
    next_state: int
    action: int
    value: float


@dataclass(frozen=True)
class AssumptionReport:
    """Outcome of the three-part reward-channel dominance assumption"""
    manipulation: bool
    task_limit: bool
    availability: bool
    violations: tuple
    r_task: float
    wirehead_action: int
    task_actions: tuple = ()

    @property
    def holds(self):
        return self.manipulation and self.task_limit and self.availability

    def failed_conditions(self):
        return [name for name in ('manipulation', 'task_limit', 'availability')
                if not getattr(self, name)]


def check_assumption(pomdp, rewards, spec):
    """
    Check manipulation, task limit and availability for every successor state

    Returns:
        AssumptionReport: Booleans plus every violating (s', a, value)

    Raises:
        UsageError: spec indices invalid for pomdp
    """
    spec.check_against(pomdp)
    observed = observed_reward_matrix(pomdp, rewards)
    violations = []

    wirehead = observed[:, spec.wirehead_action]
    for next_state in np.flatnonzero(np.abs(wirehead - 1.0) > ASSUMPTION_TOLERANCE):
        violations.append(Violation('manipulation', int(next_state),
                                    spec.wirehead_action, float(wirehead[next_state])))

    for action in spec.task_actions:
        column = observed[:, action]
        for next_state in np.flatnonzero(column > spec.r_task + ASSUMPTION_TOLERANCE):
            violations.append(Violation('task_limit', int(next_state),
                                        action, float(column[next_state])))

    failed = {v.condition for v in violations}
    return AssumptionReport(
        manipulation='manipulation' not in failed,
        task_limit='task_limit' not in failed,
        # The action set is global, so a valid index is available everywhere
        availability=True,
        violations=tuple(violations),
        r_task=spec.r_task,
        wirehead_action=spec.wirehead_action,
        task_actions=spec.task_actions,
    )


@dataclass(frozen=True)
class Certificate:
    """
    Dominance certificate

    When the assumption does not hold, `assumption_met` is False, `passed`
    is False and only `violations` is meaningful.
    """
    passed: bool
    assumption_met: bool
    min_gap: float = float('nan')
    witness_state: int = -1
    witness_action: int = -1
    bound: float = float('nan')
    slack: float = float('nan')
    residual: float = float('nan')
    discount: float = float('nan')
    wirehead_value_error: float = float('nan')
    iterations: int = 0
    violations: tuple = ()

    @property
    def status(self):
        if not self.assumption_met:
            return 'assumption not met'
        return 'pass' if self.passed else 'fail'

    def to_record(self, pomdp=None):
        """Plain dict for YAML output; names are resolved when pomdp is given"""
        def state_name(i):
            return pomdp.states[i] if pomdp is not None and i >= 0 else i

        def action_name(i):
            return pomdp.actions[i] if pomdp is not None and i >= 0 else i

        record = {'status': self.status, 'passed': self.passed,
                  'assumption_met': self.assumption_met}
        if self.assumption_met:
            record.update({
                'min_gap': self.min_gap,
                'witness': {'state': state_name(self.witness_state),
                            'action': action_name(self.witness_action)},
                'bound': self.bound,
                'slack': self.slack,
                'residual': self.residual,
                'discount': self.discount,
                'wirehead_value_error': self.wirehead_value_error,
                'iterations': self.iterations,
            })
        else:
            record['violations'] = [
                {'condition': v.condition, 'next_state': state_name(v.next_state),
                 'action': action_name(v.action), 'value': v.value}
                for v in self.violations
            ]
        return record


def certify_dominance(qtable, spec, tolerance=DEFAULT_TOLERANCE, *, assumption):
    """
    Certify Q[s][a_w] - Q[s][a] >= (1 - r_task) - slack for all s and task a

    slack = tolerance + 2 * residual / (1 - gamma) covers value-iteration
    truncation. Also checks Q[s][a_w] = 1 / (1 - gamma) within slack.

    Args:
        qtable: Output of q_value_iteration
        spec: DominanceSpec the assumption was checked against
        tolerance: Extra numeric allowance
        assumption: AssumptionReport for the same pomdp/rewards/spec

    Returns:
        Certificate: pass/fail, minimal gap and its (s, a) witness

    Raises:
        UsageError: The assumption report is missing or failed, or was
            checked against a different DominanceSpec
    """
    if assumption is None or not assumption.holds:
        raise UsageError(
            "dominance certificate requires a passing assumption report"
        )
    if (assumption.wirehead_action, assumption.task_actions, assumption.r_task) != \
            (spec.wirehead_action, spec.task_actions, spec.r_task):
        raise UsageError("assumption report was checked against a different dominance spec")
    n_actions = qtable.values.shape[1]
    for action in (*spec.task_actions, spec.wirehead_action):
        _check_index('action', action, n_actions)

    gamma = qtable.discount
    slack = tolerance + 2.0 * qtable.residual / (1.0 - gamma)
    bound = 1.0 - spec.r_task
    optimum = 1.0 / (1.0 - gamma)

    q = qtable.values
    task = np.array(spec.task_actions)
    gaps = q[:, [spec.wirehead_action]] - q[:, task]
    state, column = np.unravel_index(int(np.argmin(gaps)), gaps.shape)
    min_gap = float(gaps[state, column])
    wirehead_error = float(np.max(np.abs(q[:, spec.wirehead_action] - optimum)))

    passed = min_gap >= bound - slack and wirehead_error <= slack
    logger.info("Dominance certificate: %s (min gap %.6g, bound %.6g, slack %.3g)",
                'pass' if passed else 'fail', min_gap, bound, slack)

    return Certificate(
        passed=bool(passed),
        assumption_met=True,
        min_gap=min_gap,
        witness_state=int(state),
        witness_action=int(task[column]),
        bound=bound,
        slack=slack,
        residual=qtable.residual,
        discount=gamma,
        wirehead_value_error=wirehead_error,
        iterations=qtable.iterations,
    )


def certify_pomdp(pomdp, rewards, spec, tolerance=DEFAULT_TOLERANCE,
                  max_iterations=DEFAULT_MAX_ITERATIONS):
    """
    Run check_assumption, q_value_iteration and certify_dominance in order

    Returns:
        tuple: (AssumptionReport, QTable or None, Certificate). When the
            assumption fails no value iteration runs and the certificate is
            marked "assumption not met".
    """
    report = check_assumption(pomdp, rewards, spec)
    if not report.holds:
        logger.info("Assumption not met: %s", ', '.join(report.failed_conditions()))
        return report, None, Certificate(passed=False, assumption_met=False,
                                         violations=report.violations)

    qtable = q_value_iteration(pomdp, rewards, tolerance, max_iterations)
    certificate = certify_dominance(qtable, spec, tolerance, assumption=report)
    return report, qtable, certificate
