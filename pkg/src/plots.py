"""
Figures - SVG plots drawn from a finished sweep directory

Every number plotted comes from the round logs, cell summaries or the
aggregate table; nothing is re-simulated.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from config import FIGURE_KINDS, load_config  # noqa: E402
from errors import UsageError  # noqa: E402
from manifest import DONE, SweepManifest  # noqa: E402
from metrics import DIVERGENCE_THRESHOLD, moving_average  # noqa: E402
from summary import SummaryManager  # noqa: E402
from telemetry import read_rounds  # noqa: E402

logger = logging.getLogger(__name__)

# Fixed salt and no timestamp keep re-rendered SVGs byte-identical
plt.rcParams['svg.hashsalt'] = 'wirehead-bench'
SVG_METADATA = {'Date': None}

CONDITION_COLORS = {'control': '#1f77b4', 'honest': '#2ca02c', 'selfgrade': '#d62728'}


@dataclass
class PlotReport:
    files: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def warn(self, message):
        logger.warning(message)
        self.warnings.append(message)


class SweepView:
    """Read-only access to a sweep directory"""

    def __init__(self, sweep_dir):
        self.path = Path(sweep_dir)
        if not (self.path / 'manifest.json').exists():
            raise UsageError(f"No sweep manifest in {self.path}")
        self.manifest = SweepManifest(self.path, create=False)
        self.summaries = SummaryManager(self.path)
        config_path = self.path / 'config.yaml'
        self.config = load_config(config_path) if config_path.exists() else None

    @property
    def divergence(self):
        return self.config.divergence if self.config else DIVERGENCE_THRESHOLD

    def families(self):
        return list(dict.fromkeys(e['family'] for e in self.manifest.list_cells()))

    def conditions(self):
        return list(dict.fromkeys(e['condition'] for e in self.manifest.list_cells()))

    def entries(self, family=None, condition=None):
        return [e for e in self.manifest.list_cells()
                if (family is None or e['family'] == family)
                and (condition is None or e['condition'] == condition)]

    def done_entries(self):
        return [e for e in self.manifest.list_cells() if e['status'] == DONE]

    def missing_entries(self):
        return [e for e in self.manifest.list_cells() if e['status'] != DONE]

    def rounds(self, entry):
        path = self.path / entry['path'] / 'rounds.jsonl'
        return read_rounds(path) if path.exists() else None


def learning_curve_series(view, family, smoothing, report=None):
    """
    Seed-averaged, smoothed reward and accuracy per round for each condition

    Returns:
        dict: condition -> {'round': [...], 'reward': [...], 'accuracy': [...]}
    """
    series = {}
    for condition in view.conditions():
        logs = []
        for entry in view.entries(family, condition):
            records = view.rounds(entry) if entry['status'] == DONE else None
            if records is None:
                if report is not None:
                    report.warn(f"learning_curves: no log for {entry['cell_id']}")
                continue
            logs.append(records)
        if not logs:
            continue

        length = min(len(log) for log in logs)
        reward = np.mean([[r.reward for r in log[:length]] for log in logs], axis=0)
        accuracy = np.mean([[r.accuracy for r in log[:length]] for log in logs], axis=0)
        series[condition] = {
            'round': [r.round for r in logs[0][:length]],
            'reward': moving_average(reward, smoothing),
            'accuracy': moving_average(accuracy, smoothing),
        }
    return series


def plot_learning_curves(view, out_dir, smoothing, report):
    """One SVG per family: reward (solid) and accuracy (dashed) per condition"""
    files = []
    for family in view.families():
        series = learning_curve_series(view, family, smoothing, report)
        if not series:
            report.warn(f"learning_curves: no finished cells for {family}")
            continue

        fig, ax = plt.subplots(figsize=(7, 4.5))
        for condition, data in series.items():
            color = CONDITION_COLORS.get(condition)
            ax.plot(data['round'], data['reward'], color=color, label=f"{condition} reward")
            ax.plot(data['round'], data['accuracy'], color=color, linestyle='--',
                    label=f"{condition} accuracy")
        ax.set_xlabel('round')
        ax.set_ylabel(f"moving average (window {smoothing})")
        ax.set_ylim(-0.02, 1.02)
        ax.set_title(f"Learning dynamics: {family}")
        ax.legend(fontsize='small')

        path = out_dir / f"learning_curves_{family}.svg"
        fig.savefig(path, format='svg', metadata=SVG_METADATA)
        plt.close(fig)
        files.append(path)
    return files


def inflation_matrix(view):
    """(condition, family) -> seed-mean grade inflation, from aggregate.csv"""
    return {(row['condition'], row['task_kind']): row['grade_inflation']
            for row in view.summaries.read_aggregates()
            if row['grade_inflation'] is not None}


def plot_inflation_bars(view, out_dir, report):
    """Grouped bars: grade inflation per family for every grading condition"""
    matrix = inflation_matrix(view)
    if not matrix:
        report.warn("inflation_bars: no graded cells in aggregate.csv")
        return []

    families = view.families()
    conditions = [c for c in view.conditions() if any((c, f) in matrix for f in families)]
    for condition in conditions:
        for family in families:
            if (condition, family) not in matrix:
                report.warn(f"inflation_bars: no value for {condition}/{family}")

    fig, ax = plt.subplots(figsize=(7, 4.5))
    width = 0.8 / len(conditions)
    positions = np.arange(len(families))
    for i, condition in enumerate(conditions):
        values = [matrix.get((condition, f), np.nan) for f in families]
        ax.bar(positions + (i - (len(conditions) - 1) / 2) * width, values, width,
               color=CONDITION_COLORS.get(condition), label=condition)
    ax.axhline(0.0, color='black', linewidth=0.8)
    ax.set_xticks(positions)
    ax.set_xticklabels(families)
    ax.set_ylabel('grade inflation (mean grade - mean accuracy)')
    ax.set_title('Grade inflation by task')
    ax.legend(fontsize='small')

    path = out_dir / 'inflation_bars.svg'
    fig.savefig(path, format='svg', metadata=SVG_METADATA)
    plt.close(fig)
    return [path]


def scatter_points(view):
    """
    Final-window (accuracy, reward) per finished cell

    Returns:
        dict: condition -> list of (accuracy, reward, cell_id)
    """
    points = {}
    for entry in view.done_entries():
        summary = view.summaries.load_cell_summary(view.path / entry['path'])
        if summary is None:
            continue
        points.setdefault(entry['condition'], []).append(
            (summary.mean_accuracy, summary.mean_reward, entry['cell_id']))
    return points


def plot_reward_vs_accuracy(view, out_dir, report):
    """Scatter of final reward against final accuracy with the wirehead region shaded"""
    points = scatter_points(view)
    if not points:
        report.warn("reward_vs_accuracy: no finished cells")
        return []

    divergence = view.divergence
    fig, ax = plt.subplots(figsize=(5.5, 5.5))
    edge = np.array([0.0, 1.0 - divergence])
    ax.fill_between(edge, edge + divergence, 1.0, color='#d62728', alpha=0.12,
                    label=f"reward - accuracy >= {divergence:g}")
    ax.plot([0, 1], [0, 1], color='gray', linestyle=':', label='reward = accuracy')
    for condition, cells in points.items():
        ax.scatter([p[0] for p in cells], [p[1] for p in cells],
                   color=CONDITION_COLORS.get(condition), label=condition, s=24)
    ax.set_xlim(-0.02, 1.02)
    ax.set_ylim(-0.02, 1.02)
    ax.set_xlabel('final-window accuracy')
    ax.set_ylabel('final-window reward')
    ax.set_title('Reward vs. accuracy')
    ax.legend(fontsize='small', loc='lower right')

    path = out_dir / 'reward_vs_accuracy.svg'
    fig.savefig(path, format='svg', metadata=SVG_METADATA)
    plt.close(fig)
    return [path]


def render_figures(sweep_dir, kinds=FIGURE_KINDS, smoothing=25):
    """
    Render the requested figures into <sweep_dir>/figures

    Cells that are not done are drawn as gaps and listed in
    figures/report.txt.

    Returns:
        PlotReport

    Raises:
        UsageError: Unknown figure kind, missing manifest, or no finished cell
    """
    for kind in kinds:
        if kind not in FIGURE_KINDS:
            raise UsageError(f"Unknown figure '{kind}'. Known figures: {', '.join(FIGURE_KINDS)}")

    view = SweepView(sweep_dir)
    if not view.done_entries():
        raise UsageError(f"Sweep in {view.path} has no finished cells")

    out_dir = view.path / 'figures'
    out_dir.mkdir(parents=True, exist_ok=True)
    report = PlotReport()
    for entry in view.missing_entries():
        report.warn(f"cell {entry['cell_id']} is {entry['status']}; drawn as a gap")

    renderers = {
        'learning_curves': lambda: plot_learning_curves(view, out_dir, smoothing, report),
        'inflation_bars': lambda: plot_inflation_bars(view, out_dir, report),
        'reward_vs_accuracy': lambda: plot_reward_vs_accuracy(view, out_dir, report),
    }
    for kind in kinds:
        report.files.extend(renderers[kind]())

    with open(out_dir / 'report.txt', 'w') as f:
        f.write(f"figures: {len(report.files)}\n")
        for path in report.files:
            f.write(f"  {path.name}\n")
        f.write(f"warnings: {len(report.warnings)}\n")
        for warning in report.warnings:
            f.write(f"  {warning}\n")
    return report
