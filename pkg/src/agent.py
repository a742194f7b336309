"""
Tabular REINFORCE agent for two-step (answer, self-grade) generation

The policy keeps one answer-logit row per context and one grade-logit row
per (context, answer), or per context when the grade head ignores the
answer. Updates follow REINFORCE with a shared EMA baseline, global-norm
gradient clipping, optional Adam-style moment scaling and decoupled weight
decay.
"""

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from errors import FixtureError, NumericalError, UsageError
from selfgrade import ActionPair

logger = logging.getLogger(__name__)

DEFAULT_ALPHA = 0.9
PLAIN_LEARNING_RATE = 0.05
ADAPTIVE_LEARNING_RATE = 0.01


def log_softmax(logits, temperature=1.0):
    z = np.asarray(logits, dtype=np.float64) / temperature
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def softmax(logits, temperature=1.0):
    return np.exp(log_softmax(logits, temperature))


def entropy(probabilities):
    """Natural-log entropy of a distribution"""
    p = np.asarray(probabilities, dtype=np.float64)
    nonzero = p[p > 0]
    return float(-(nonzero * np.log(nonzero)).sum())


@dataclass(frozen=True)
class PolicySnapshot:
    """
    Immutable tabular policy parameters

    answer_logits has shape (contexts, answers). grade_logits has shape
    (contexts, answers, grades) when the grade head sees the answer and
    (contexts, 1, grades) otherwise. grade_values are the grid values the
    grade indices stand for.
    """
    answer_logits: np.ndarray
    grade_logits: np.ndarray
    grade_values: tuple
    temperature: float = 1.0
    condition_on_answer: bool = True

    def __post_init__(self):
        answer = np.array(self.answer_logits, dtype=np.float64)
        grade = np.array(self.grade_logits, dtype=np.float64)
        if answer.ndim != 2 or grade.ndim != 3:
            raise UsageError("answer_logits must be 2-D and grade_logits 3-D")
        rows = answer.shape[1] if self.condition_on_answer else 1
        if grade.shape[:2] != (answer.shape[0], rows):
            raise UsageError(
                f"grade_logits has shape {grade.shape}, expected "
                f"({answer.shape[0]}, {rows}, grades)"
            )
        if grade.shape[2] != len(self.grade_values):
            raise UsageError("grade_logits and grade_values disagree on grid size")
        if not (np.all(np.isfinite(answer)) and np.all(np.isfinite(grade))):
            raise NumericalError("policy logits must be finite")
        if not self.temperature > 0:
            raise UsageError(f"temperature must be positive, got {self.temperature}")

        answer.setflags(write=False)
        grade.setflags(write=False)
        object.__setattr__(self, 'answer_logits', answer)
        object.__setattr__(self, 'grade_logits', grade)
        object.__setattr__(self, 'grade_values', tuple(float(g) for g in self.grade_values))
        object.__setattr__(self, 'temperature', float(self.temperature))

    @property
    def context_count(self):
        return self.answer_logits.shape[0]

    @property
    def answer_count(self):
        return self.answer_logits.shape[1]

    @property
    def grid_size(self):
        return len(self.grade_values)

    def check_context(self, context_id):
        if not 0 <= context_id < self.context_count:
            raise UsageError(
                f"context {context_id} out of range [0, {self.context_count})"
            )

    def grade_row(self, answer):
        """Second index of the grade row used after `answer`"""
        return answer if self.condition_on_answer else 0

    def answer_probabilities(self, context_id):
        return softmax(self.answer_logits[context_id], self.temperature)

    def grade_probabilities(self, context_id, answer):
        return softmax(self.grade_logits[context_id, self.grade_row(answer)], self.temperature)


def initial_policy(context_count, answer_count, grade_values, answer_prior=None,
                   grade_prior=None, condition_on_answer=True, temperature=1.0):
    """
    Build a starting policy

    Args:
        answer_prior: (contexts, answers) logits, zeros when omitted
        grade_prior: (grades,) logits copied into every grade row, zeros
            when omitted
    """
    grid_size = len(grade_values)
    answer = np.zeros((context_count, answer_count))
    if answer_prior is not None:
        answer = answer + np.asarray(answer_prior, dtype=np.float64)

    rows = answer_count if condition_on_answer else 1
    grade = np.zeros((context_count, rows, grid_size))
    if grade_prior is not None:
        grade = grade + np.asarray(grade_prior, dtype=np.float64)

    return PolicySnapshot(answer, grade, tuple(grade_values), temperature, condition_on_answer)


def sample_action(policy, context_id, rng, with_grade=True):
    """
    Sample an answer, then (unless with_grade is False) a grade

    Returns:
        tuple: (ActionPair, log_prob_answer, log_prob_grade); the grade log
            probability is 0.0 when no grade is sampled
    """
    policy.check_context(context_id)
    answer_lp = log_softmax(policy.answer_logits[context_id], policy.temperature)
    answer = int(rng.choice(policy.answer_count, p=np.exp(answer_lp)))

    if not with_grade:
        return ActionPair(answer=answer), float(answer_lp[answer]), 0.0

    row = policy.grade_logits[context_id, policy.grade_row(answer)]
    grade_lp = log_softmax(row, policy.temperature)
    grade_index = int(rng.choice(policy.grid_size, p=np.exp(grade_lp)))
    action = ActionPair(answer=answer, grade_index=grade_index,
                        grade=policy.grade_values[grade_index])
    return action, float(answer_lp[answer]), float(grade_lp[grade_index])


def greedy_answers(policy):
    """Argmax answer per context, ties to the lowest index"""
    return tuple(int(a) for a in np.argmax(policy.answer_logits, axis=1))


@dataclass(frozen=True)
class BaselineState:
    value: float = 0.0
    alpha: float = DEFAULT_ALPHA
    initialized: bool = False

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise UsageError(f"alpha must lie in [0, 1], got {self.alpha}")


def update_baseline(state, reward):
    """First reward initializes the baseline; later ones enter the EMA"""
    if not state.initialized:
        return replace(state, value=float(reward), initialized=True)
    value = state.alpha * state.value + (1.0 - state.alpha) * reward
    return replace(state, value=float(value))


def compute_advantage(reward, baseline):
    # An uninitialized baseline counts as 0
    value = baseline.value if baseline.initialized else 0.0
    return float(reward - value)


@dataclass(frozen=True)
class PolicyGradient:
    """Ascent direction with the same shapes as a PolicySnapshot; grade None = untouched head"""
    answer: np.ndarray
    grade: np.ndarray = None

    def arrays(self):
        return [a for a in (self.answer, self.grade) if a is not None]

    def global_norm(self):
        return float(np.sqrt(sum(float(np.sum(a * a)) for a in self.arrays())))

    def is_finite(self):
        return all(np.all(np.isfinite(a)) for a in self.arrays())

    def scaled(self, factor):
        return PolicyGradient(
            self.answer * factor,
            None if self.grade is None else self.grade * factor,
        )


def policy_gradient(policy, context_id, action, advantage, with_grade=None):
    """
    Gradient of advantage * (log pi(y|s) + log pi(g|s,y)) over all logits

    Only the sampled answer row and the grade row it selected are nonzero.
    with_grade defaults to whether the action carries a grade; without one
    the grade head gets no gradient at all.
    """
    policy.check_context(context_id)
    if with_grade is None:
        with_grade = action.grade_index is not None
    scale = advantage / policy.temperature

    answer = np.zeros_like(policy.answer_logits)
    probs = policy.answer_probabilities(context_id)
    answer[context_id] = -scale * probs
    answer[context_id, action.answer] += scale

    if not with_grade:
        return PolicyGradient(answer)

    grade = np.zeros_like(policy.grade_logits)
    row = policy.grade_row(action.answer)
    probs = policy.grade_probabilities(context_id, action.answer)
    grade[context_id, row] = -scale * probs
    grade[context_id, row, action.grade_index] += scale
    return PolicyGradient(answer, grade)


@dataclass(frozen=True)
class OptimizerConfig:
    """
    Update rule settings

    learning_rate defaults to 0.01 with adaptive scaling and 0.05 without.
    """
    learning_rate: float = None
    weight_decay: float = 0.01
    clip_norm: float = 1.0
    adaptive: bool = True
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8

    def __post_init__(self):
        if self.learning_rate is None:
            default = ADAPTIVE_LEARNING_RATE if self.adaptive else PLAIN_LEARNING_RATE
            object.__setattr__(self, 'learning_rate', default)
        if not self.learning_rate > 0:
            raise UsageError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.weight_decay < 0:
            raise UsageError(f"weight_decay must be >= 0, got {self.weight_decay}")
        if not self.clip_norm > 0:
            raise UsageError(f"clip_norm must be positive, got {self.clip_norm}")
        beta1, beta2 = self.betas
        if not (0 <= beta1 < 1 and 0 <= beta2 < 1):
            raise UsageError(f"betas must lie in [0, 1), got {self.betas}")
        object.__setattr__(self, 'betas', (float(beta1), float(beta2)))

    def to_dict(self):
        return {
            'learning_rate': self.learning_rate,
            'weight_decay': self.weight_decay,
            'clip_norm': self.clip_norm,
            'adaptive': self.adaptive,
            'betas': list(self.betas),
            'eps': self.eps,
        }


@dataclass(frozen=True)
class OptimizerState:
    """Step count and first/second moments per head"""
    step: int = 0
    first: dict = field(default_factory=dict)
    second: dict = field(default_factory=dict)

    @classmethod
    def zeros(cls, policy):
        shapes = {'answer': policy.answer_logits.shape, 'grade': policy.grade_logits.shape}
        return cls(0, {k: np.zeros(s) for k, s in shapes.items()},
                   {k: np.zeros(s) for k, s in shapes.items()})


def clip_gradient(gradient, clip_norm):
    """
    Scale the gradient down to global norm clip_norm when it is larger

    Returns:
        tuple: (clipped PolicyGradient, norm before clipping)
    """
    norm = gradient.global_norm()
    if norm > clip_norm:
        return gradient.scaled(clip_norm / norm), norm
    return gradient, norm


def apply_update(policy, gradient, config, optimizer_state):
    """
    One ascent step: clip, optionally moment-scale, step, decay

    theta <- theta + lr * direction - lr * weight_decay * theta, with the
    decay computed on the pre-step parameters. A head with no gradient is
    left untouched.

    Returns:
        tuple: (PolicySnapshot, OptimizerState)

    Raises:
        NumericalError: Non-finite gradient or update; nothing is changed
    """
    if not gradient.is_finite():
        raise NumericalError("non-finite policy gradient")

    clipped, _ = clip_gradient(gradient, config.clip_norm)
    step = optimizer_state.step + 1
    beta1, beta2 = config.betas
    lr = config.learning_rate

    params = {'answer': policy.answer_logits, 'grade': policy.grade_logits}
    grads = {'answer': clipped.answer, 'grade': clipped.grade}
    first = dict(optimizer_state.first)
    second = dict(optimizer_state.second)
    updated = dict(params)

    for name, grad in grads.items():
        if grad is None:
            continue
        if config.adaptive:
            m = beta1 * first.get(name, 0.0) + (1.0 - beta1) * grad
            v = beta2 * second.get(name, 0.0) + (1.0 - beta2) * grad * grad
            first[name], second[name] = m, v
            m_hat = m / (1.0 - beta1 ** step)
            v_hat = v / (1.0 - beta2 ** step)
            direction = m_hat / (np.sqrt(v_hat) + config.eps)
        else:
            direction = grad
        theta = params[name]
        updated[name] = theta + lr * direction - lr * config.weight_decay * theta

    if not all(np.all(np.isfinite(a)) for a in updated.values()):
        raise NumericalError("update produced non-finite logits")

    new_policy = replace(policy, answer_logits=updated['answer'],
                         grade_logits=updated['grade'])
    return new_policy, OptimizerState(step, first, second)


def _objective(policy, context_id, action, advantage):
    total = log_softmax(policy.answer_logits[context_id], policy.temperature)[action.answer]
    if action.grade_index is not None:
        row = policy.grade_logits[context_id, policy.grade_row(action.answer)]
        total += log_softmax(row, policy.temperature)[action.grade_index]
    return advantage * total


def finite_difference_check(policy, context_id, action, advantage, step=1e-5):
    """
    Max relative error between policy_gradient and central differences

    Every logit is perturbed by +/- step. Parameters whose analytic
    gradient is at most 1e-8 in magnitude are skipped.

    Returns:
        float: max |analytic - numeric| / max(|analytic|, |numeric|), 0.0
            when no parameter qualifies
    """
    if not 1e-7 <= step <= 1e-3:
        raise UsageError(f"step must lie in [1e-7, 1e-3], got {step}")

    analytic = policy_gradient(policy, context_id, action, advantage)
    worst = 0.0
    heads = [('answer_logits', analytic.answer)]
    if analytic.grade is not None:
        heads.append(('grade_logits', analytic.grade))

    for name, grad in heads:
        base = getattr(policy, name)
        for index in np.ndindex(base.shape):
            if abs(grad[index]) <= 1e-8:
                continue
            values = []
            for sign in (1.0, -1.0):
                perturbed = base.copy()
                perturbed[index] += sign * step
                values.append(_objective(replace(policy, **{name: perturbed}),
                                         context_id, action, advantage))
            numeric = (values[0] - values[1]) / (2.0 * step)
            error = abs(grad[index] - numeric) / max(abs(grad[index]), abs(numeric))
            worst = max(worst, error)
    return worst


def snapshot_record(policy, baseline=None, config=None, round_index=None):
    """Plain dict for YAML output"""
    record = {
        'round': round_index,
        'temperature': policy.temperature,
        'condition_on_answer': policy.condition_on_answer,
        'grade_values': list(policy.grade_values),
        'answer_logits': policy.answer_logits.tolist(),
        'grade_logits': policy.grade_logits.tolist(),
    }
    if baseline is not None:
        record['baseline'] = {'value': baseline.value, 'alpha': baseline.alpha,
                              'initialized': baseline.initialized}
    if config is not None:
        record['optimizer'] = config.to_dict()
    return record


def save_snapshot(path, policy, baseline=None, config=None, round_index=None):
    """Write a policy snapshot as YAML"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w') as f:
        yaml.safe_dump(snapshot_record(policy, baseline, config, round_index), f,
                       sort_keys=False, default_flow_style=None)
    return path


def load_snapshot(path):
    """
    Read a snapshot written by save_snapshot

    Returns:
        tuple: (PolicySnapshot, BaselineState or None, OptimizerConfig or None, round)

    Raises:
        FixtureError: Missing fields or malformed values
    """
    path = Path(path)
    try:
        with open(path, 'r') as f:
            record = yaml.safe_load(f)
    except (OSError, yaml.YAMLError) as e:
        raise FixtureError(f"cannot read snapshot: {e}", source=str(path))
    if not isinstance(record, dict):
        raise FixtureError("snapshot must be a mapping", source=str(path))

    try:
        policy = PolicySnapshot(
            answer_logits=record['answer_logits'],
            grade_logits=record['grade_logits'],
            grade_values=tuple(record['grade_values']),
            temperature=record.get('temperature', 1.0),
            condition_on_answer=record.get('condition_on_answer', True),
        )
        baseline = BaselineState(**record['baseline']) if record.get('baseline') else None
        optimizer = record.get('optimizer')
        if optimizer:
            optimizer = OptimizerConfig(**{**optimizer, 'betas': tuple(optimizer['betas'])})
    except KeyError as e:
        raise FixtureError("missing required field", field=e.args[0], source=str(path))
    except (TypeError, ValueError) as e:
        raise FixtureError(str(e), source=str(path))

    return policy, baseline, optimizer, record.get('round')
