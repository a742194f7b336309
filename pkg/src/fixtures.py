"""
POMDP fixture files - read and write the structured-text POMDP format

A fixture is a YAML (or JSON, which the YAML loader also reads) mapping:

    states:        [names]
    actions:       [names]
    observations:  [names]
    discount:      gamma in [0, 1)
    transition:    transition[s][a] -> probabilities over states
    obs_kernel:    obs_kernel[s'][a] -> probabilities over observations
    rewards:
      implemented: one value per observation
      intended:    one value per state
    dominance:     (optional)
      task_actions:    [action names or indices]
      wirehead_action: action name or index
      r_task:          ceiling in [0, 1)

See FIXTURES.md for a worked example.
"""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from errors import FixtureError, UsageError
from pomdp import NORMALIZE_TOLERANCE, DominanceSpec, FinitePomdp, RewardMaps

TOP_LEVEL_KEYS = {'states', 'actions', 'observations', 'discount',
                  'transition', 'obs_kernel', 'rewards', 'dominance', 'description'}


@dataclass(frozen=True)
class Fixture:
    """A parsed fixture: the POMDP, its reward maps and optional dominance spec"""
    pomdp: FinitePomdp
    rewards: RewardMaps
    dominance: DominanceSpec = None
    source: str = None
    description: str = ''


class YamlDocument:
    """Wraps parsed data plus the YAML node tree for line diagnostics"""

    def __init__(self, text, source):
        self.source = source
        try:
            self.root = yaml.compose(text)
            self.data = yaml.safe_load(text)
        except yaml.YAMLError as e:
            mark = getattr(e, 'problem_mark', None)
            line = mark.line + 1 if mark is not None else None
            problem = getattr(e, 'problem', None) or str(e)
            raise FixtureError(f"not valid YAML/JSON: {problem}", line=line, source=source)

        if not isinstance(self.data, dict):
            raise FixtureError("document must be a mapping", line=1, source=source)

    def _line(self, path):
        node = self.root
        for key in path:
            if isinstance(node, yaml.MappingNode):
                for key_node, value_node in node.value:
                    if key_node.value == str(key):
                        node = value_node
                        break
                else:
                    break
            elif isinstance(node, yaml.SequenceNode) and isinstance(key, int):
                if key >= len(node.value):
                    break
                node = node.value[key]
            else:
                break
        return node.start_mark.line + 1 if node is not None else None

    def error(self, message, *path):
        field = '.'.join(str(p) for p in path) or None
        return FixtureError(message, field=field, line=self._line(path), source=self.source)

    def get(self, *path, required=True):
        value = self.data
        for key in path:
            if isinstance(value, list) and isinstance(key, int):
                present = 0 <= key < len(value)
            else:
                present = isinstance(value, dict) and key in value
            if not present:
                if required:
                    raise self.error("missing required field", *path)
                return None
            value = value[key]
        return value

    def check_keys(self, allowed, *path):
        """Reject keys outside `allowed` in the mapping at path"""
        value = self.get(*path) if path else self.data
        if not isinstance(value, dict):
            raise self.error("expected a mapping", *path)
        for key in value:
            if key not in allowed:
                raise self.error(f"unknown key '{key}'", *path, key)
        return value

    def names(self, key):
        value = self.get(key)
        if not isinstance(value, list) or not value:
            raise self.error("expected a nonempty list of names", key)
        names = [str(v) for v in value]
        if len(set(names)) != len(names):
            raise self.error("duplicate names", key)
        return names

    def number(self, *path, low=None, high=None):
        value = self.get(*path)
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise self.error(f"expected a number, got {value!r}", *path)
        if (low is not None and value < low) or (high is not None and value > high):
            raise self.error(f"value {value} outside [{low}, {high}]", *path)
        return float(value)

    def array(self, shape, *path):
        value = self.get(*path)
        self._check_shape(value, shape, list(path))
        return np.array(value, dtype=np.float64)

    def _check_shape(self, value, shape, path):
        if not shape:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise self.error(f"expected a number, got {value!r}", *path)
            return
        if not isinstance(value, list) or len(value) != shape[0]:
            found = len(value) if isinstance(value, list) else type(value).__name__
            raise self.error(f"expected {shape[0]} entries, found {found}", *path)
        for i, item in enumerate(value):
            self._check_shape(item, shape[1:], path + [i])

    def stochastic(self, shape, key):
        array = self.array(shape, key)
        negative = np.argwhere(array < 0)
        if negative.size:
            index = [int(i) for i in negative[0]]
            raise self.error("negative probability", key, *index)
        sums = array.sum(axis=-1)
        off = np.argwhere(np.abs(sums - 1.0) > NORMALIZE_TOLERANCE)
        if off.size:
            index = [int(i) for i in off[0]]
            raise self.error(f"row sums to {sums[tuple(index)]:.9g}, expected 1", key, *index)
        return array

    def action_ref(self, actions, *path, value=None):
        value = self.get(*path) if value is None else value
        if isinstance(value, bool):
            raise self.error(f"invalid action reference {value!r}", *path)
        if isinstance(value, int):
            if not 0 <= value < len(actions):
                raise self.error(f"action index {value} out of range", *path)
            return value
        if str(value) not in actions:
            raise self.error(f"unknown action '{value}'", *path)
        return actions.index(str(value))


def parse_fixture(text, source=None, discount=None):
    """
    Parse fixture text

    Args:
        text: YAML or JSON text
        source: Path used in diagnostics
        discount: Optional override of the fixture's discount

    Returns:
        Fixture

    Raises:
        FixtureError: Malformed fixture, with field path and line
    """
    reader = YamlDocument(text, source)

    reader.check_keys(TOP_LEVEL_KEYS)

    states = reader.names('states')
    actions = reader.names('actions')
    observations = reader.names('observations')
    n_s, n_a, n_o = len(states), len(actions), len(observations)

    transition = reader.stochastic((n_s, n_a, n_s), 'transition')
    obs_kernel = reader.stochastic((n_s, n_a, n_o), 'obs_kernel')
    if discount is None:
        discount = reader.number('discount', low=0.0)
        if discount >= 1.0:
            raise reader.error("discount must be < 1", 'discount')

    reader.check_keys({'implemented', 'intended'}, 'rewards')
    implemented = reader.array((n_o,), 'rewards', 'implemented')
    intended = reader.array((n_s,), 'rewards', 'intended')
    for name, values in (('implemented', implemented), ('intended', intended)):
        bad = np.flatnonzero((values < 0) | (values > 1))
        if bad.size:
            raise reader.error("reward outside [0, 1]", 'rewards', name, int(bad[0]))

    try:
        pomdp = FinitePomdp(states, actions, observations, transition, obs_kernel, discount)
        rewards = RewardMaps(implemented, intended)
    except UsageError as e:
        raise FixtureError(str(e), source=source)

    dominance = None
    if reader.get('dominance', required=False) is not None:
        reader.check_keys({'task_actions', 'wirehead_action', 'r_task'}, 'dominance')
        task_refs = reader.get('dominance', 'task_actions')
        if not isinstance(task_refs, list) or not task_refs:
            raise reader.error("expected a nonempty list", 'dominance', 'task_actions')
        task_actions = [reader.action_ref(actions, 'dominance', 'task_actions', i, value=ref)
                        for i, ref in enumerate(task_refs)]
        wirehead = reader.action_ref(actions, 'dominance', 'wirehead_action')
        r_task = reader.number('dominance', 'r_task', low=0.0)
        try:
            dominance = DominanceSpec(tuple(task_actions), wirehead, r_task)
        except UsageError as e:
            raise reader.error(str(e), 'dominance')

    return Fixture(pomdp=pomdp, rewards=rewards, dominance=dominance, source=source,
                   description=str(reader.get('description', required=False) or ''))


def load_fixture(path, discount=None):
    """Read and parse a fixture file (see parse_fixture)"""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise FixtureError(f"cannot read fixture: {e.strerror}", source=str(path))
    return parse_fixture(text, source=str(path), discount=discount)


def fixture_record(pomdp, rewards, spec=None, description=None):
    """Plain dict in fixture layout"""
    record = {}
    if description:
        record['description'] = description
    record.update({
        'states': list(pomdp.states),
        'actions': list(pomdp.actions),
        'observations': list(pomdp.observations),
        'discount': pomdp.discount,
        'transition': pomdp.transition.tolist(),
        'obs_kernel': pomdp.obs_kernel.tolist(),
        'rewards': {
            'implemented': rewards.implemented.tolist(),
            'intended': rewards.intended.tolist(),
        },
    })
    if spec is not None:
        record['dominance'] = {
            'task_actions': [pomdp.actions[a] for a in spec.task_actions],
            'wirehead_action': pomdp.actions[spec.wirehead_action],
            'r_task': spec.r_task,
        }
    return record


def write_fixture(path, pomdp, rewards, spec=None, description=None):
    """Write a fixture; `.json` paths get JSON, anything else YAML"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    record = fixture_record(pomdp, rewards, spec, description)
    with open(path, 'w') as f:
        if path.suffix == '.json':
            json.dump(record, f, indent=2)
            f.write('\n')
        else:
            yaml.safe_dump(record, f, sort_keys=False)
    return path


def write_certificate(path, certificate, pomdp=None, source=None):
    """Write a certificate record as YAML"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    record = {}
    if source:
        record['fixture'] = str(source)
    record.update(certificate.to_record(pomdp))
    with open(path, 'w') as f:
        yaml.safe_dump(record, f, sort_keys=False)
    return path
