"""
Experiment configuration - one YAML file describes a whole sweep
"""

from dataclasses import dataclass, field, replace
from pathlib import Path

import yaml

from agent import DEFAULT_ALPHA, OptimizerConfig
from errors import FixtureError, UsageError
from families import build_family
from fixtures import YamlDocument
from metrics import DEFAULT_WINDOW, DIVERGENCE_THRESHOLD, SATURATION_THRESHOLD
from selfgrade import DEFAULT_EXAMPLE_COUNT, DEFAULT_GRID_SIZE, Condition

FIGURE_KINDS = ('learning_curves', 'inflation_bars', 'reward_vs_accuracy')

TOP_LEVEL_KEYS = {'master_seed', 'seeds', 'rounds', 'examples', 'grade_grid_size',
                  'conditions', 'families', 'agent', 'optimizer', 'metrics',
                  'output', 'workers', 'plots'}
AGENT_KEYS = {'alpha', 'temperature', 'condition_grade_on_answer'}
OPTIMIZER_KEYS = {'learning_rate', 'weight_decay', 'clip_norm', 'adaptive', 'betas', 'eps'}
METRICS_KEYS = {'window', 'saturation', 'divergence'}
PLOT_KEYS = {'enabled', 'figures', 'smoothing'}
FAMILY_KEYS = {'name', 'kind', 'answer_count', 'ambiguity', 'score_ceiling',
               'context_count', 'prior_skill', 'overconfidence'}


@dataclass(frozen=True)
class FamilyConfig:
    """A named task family entry; `name` keys the cell directories"""
    name: str
    kind: str
    params: dict = field(default_factory=dict)

    def build(self):
        return build_family(self.kind, **self.params)

    def to_dict(self):
        return {'name': self.name, 'kind': self.kind, **self.params}


def default_families():
    return [
        FamilyConfig('exact_binary', 'exact_binary'),
        FamilyConfig('exact_multi', 'exact_multi', {'answer_count': 10}),
        FamilyConfig('graded_ambiguous', 'graded_ambiguous',
                     {'score_ceiling': 0.8, 'ambiguity': 0.5}),
    ]


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a sweep needs; defaults mirror the reference training setup"""
    families: list = field(default_factory=default_families)
    conditions: list = field(default_factory=lambda: list(Condition))
    seeds: list = field(default_factory=lambda: [0, 1, 2, 3, 4])
    master_seed: int = 0
    rounds: int = 500
    examples: int = DEFAULT_EXAMPLE_COUNT
    grade_grid_size: int = DEFAULT_GRID_SIZE
    alpha: float = DEFAULT_ALPHA
    temperature: float = 1.0
    condition_grade_on_answer: bool = True
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    window: int = DEFAULT_WINDOW
    saturation: float = SATURATION_THRESHOLD
    divergence: float = DIVERGENCE_THRESHOLD
    output: str = 'runs/default'
    workers: int = 1
    plots_enabled: bool = True
    figures: list = field(default_factory=lambda: list(FIGURE_KINDS))
    smoothing: int = 25

    def __post_init__(self):
        if self.rounds < 1:
            raise UsageError(f"rounds must be >= 1, got {self.rounds}")
        if self.examples < 1:
            raise UsageError(f"examples must be >= 1, got {self.examples}")
        if not self.seeds:
            raise UsageError("at least one seed is required")
        if len(set(self.seeds)) != len(self.seeds):
            raise UsageError("seeds must be unique")
        if any(s < 0 for s in self.seeds) or self.master_seed < 0:
            raise UsageError("seeds must be non-negative")
        if not self.conditions:
            raise UsageError("at least one condition is required")
        if not self.families:
            raise UsageError("at least one task family is required")
        names = [f.name for f in self.families]
        if len(set(names)) != len(names):
            raise UsageError("task family names must be unique")
        if self.workers < 1:
            raise UsageError(f"workers must be >= 1, got {self.workers}")
        if self.window < 1 or self.smoothing < 1:
            raise UsageError("window and smoothing must be >= 1")
        if not self.temperature > 0:
            raise UsageError(f"temperature must be positive, got {self.temperature}")
        for kind in self.figures:
            if kind not in FIGURE_KINDS:
                raise UsageError(
                    f"Unknown figure '{kind}'. Known figures: {', '.join(FIGURE_KINDS)}"
                )
        object.__setattr__(self, 'conditions', [Condition.parse(c) for c in self.conditions])

    def family(self, name):
        """Get (index, FamilyConfig) by name"""
        for index, family in enumerate(self.families):
            if family.name == name:
                return index, family
        raise UsageError(
            f"Task family '{name}' not in config. "
            f"Configured families: {', '.join(f.name for f in self.families)}"
        )

    def with_overrides(self, output=None, master_seed=None, workers=None):
        """Copy with CLI overrides applied (None leaves a value alone)"""
        changes = {}
        if output is not None:
            changes['output'] = str(output)
        if master_seed is not None:
            changes['master_seed'] = int(master_seed)
        if workers is not None:
            changes['workers'] = int(workers)
        return replace(self, **changes)

    def to_dict(self):
        return {
            'master_seed': self.master_seed,
            'seeds': list(self.seeds),
            'rounds': self.rounds,
            'examples': self.examples,
            'grade_grid_size': self.grade_grid_size,
            'conditions': [c.value for c in self.conditions],
            'families': [f.to_dict() for f in self.families],
            'agent': {
                'alpha': self.alpha,
                'temperature': self.temperature,
                'condition_grade_on_answer': self.condition_grade_on_answer,
            },
            'optimizer': self.optimizer.to_dict(),
            'metrics': {
                'window': self.window,
                'saturation': self.saturation,
                'divergence': self.divergence,
            },
            'output': self.output,
            'workers': self.workers,
            'plots': {
                'enabled': self.plots_enabled,
                'figures': list(self.figures),
                'smoothing': self.smoothing,
            },
        }


def _section(doc, name, allowed):
    if doc.get(name, required=False) is None:
        return {}
    return doc.check_keys(allowed, name)


def _families(doc):
    entries = doc.get('families', required=False)
    if entries is None:
        return default_families()
    if not isinstance(entries, list) or not entries:
        raise doc.error("expected a nonempty list of families", 'families')

    families = []
    for i, entry in enumerate(entries):
        doc.check_keys(FAMILY_KEYS, 'families', i)
        if 'kind' not in entry:
            raise doc.error("missing required field", 'families', i, 'kind')
        params = {k: v for k, v in entry.items() if k not in ('name', 'kind')}
        family = FamilyConfig(str(entry.get('name', entry['kind'])), entry['kind'], params)
        try:
            family.build()
        except UsageError as e:
            raise doc.error(str(e), 'families', i)
        families.append(family)
    return families


def parse_config(text, source=None):
    """
    Parse config text into an ExperimentConfig

    Missing keys take their defaults.

    Raises:
        FixtureError: Unknown keys or invalid values, with field and line
    """
    doc = YamlDocument(text, source)
    doc.check_keys(TOP_LEVEL_KEYS)
    data = doc.data
    agent = _section(doc, 'agent', AGENT_KEYS)
    optimizer = _section(doc, 'optimizer', OPTIMIZER_KEYS)
    metrics = _section(doc, 'metrics', METRICS_KEYS)
    plots = _section(doc, 'plots', PLOT_KEYS)

    try:
        optimizer_config = OptimizerConfig(**{
            **optimizer,
            **({'betas': tuple(optimizer['betas'])} if 'betas' in optimizer else {}),
        })
    except (UsageError, TypeError) as e:
        raise doc.error(str(e), 'optimizer')

    values = {
        'families': _families(doc),
        'optimizer': optimizer_config,
    }
    for key in ('master_seed', 'seeds', 'rounds', 'examples', 'grade_grid_size',
                'conditions', 'output', 'workers'):
        if key in data:
            values[key] = data[key]
    for key, value in agent.items():
        values[key] = value
    for key, value in metrics.items():
        values[key] = value
    if 'enabled' in plots:
        values['plots_enabled'] = plots['enabled']
    for key in ('figures', 'smoothing'):
        if key in plots:
            values[key] = plots[key]

    try:
        return ExperimentConfig(**values)
    except (UsageError, TypeError) as e:
        raise FixtureError(str(e), source=source)


def load_config(path):
    """Read and parse a config file (see parse_config)"""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise FixtureError(f"cannot read config: {e.strerror}", source=str(path))
    return parse_config(text, source=str(path))


def write_config(path, config):
    """Write the resolved config next to sweep artifacts"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w') as f:
        yaml.safe_dump(config.to_dict(), f, sort_keys=False)
    return path
