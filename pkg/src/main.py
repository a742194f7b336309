#!/usr/bin/env python3
"""
wirehead-bench - wireheading testbed
Exact dominance certificates for reward-channel manipulation in finite
POMDPs, and self-grading training sweeps under Control / Honest / Selfgrade
"""

import argparse
import logging
import sys
from pathlib import Path

# Add src to path for imports
sys.path.insert(0, str(Path(__file__).parent))

from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel
from rich.progress import BarColumn, MofNCompleteColumn, Progress, SpinnerColumn, TextColumn
from rich.table import Table

from agent import save_snapshot
from config import FIGURE_KINDS, ExperimentConfig, load_config, write_config
from episode import Cell, EpisodeRunner
from errors import UsageError, WireheadError
from families import registry
from fixtures import load_fixture, write_certificate, write_fixture
from metrics import summarize_run
from plots import render_figures
from pomdp import certify_pomdp
from selfgrade import Condition, GradeGrid, TaskInstance, to_pomdp
from summary import SummaryManager
from sweep import run_sweep
from telemetry import RoundLog

# Initialize console for rich output
console = Console()

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2


# ============================================================================
# Helper Functions
# ============================================================================

def configure_logging(verbose=False):
    """Route library logging through a rich handler (DEBUG with --verbose)"""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=console, show_path=False, rich_tracebacks=True)],
        force=True,
    )
    # matplotlib is chatty at DEBUG
    logging.getLogger('matplotlib').setLevel(logging.WARNING)


def resolve_config(args):
    """
    Load the config named by --config (defaults when absent) and apply overrides

    Returns:
        ExperimentConfig
    """
    config = load_config(args.config) if args.config else ExperimentConfig()
    return config.with_overrides(
        output=getattr(args, 'output', None),
        master_seed=getattr(args, 'seed', None),
        workers=getattr(args, 'workers', None),
    )


def fmt(value, digits=3):
    return '-' if value is None else f"{value:.{digits}f}"


def print_aggregates(aggregates):
    """Seed-averaged statistics per family and condition"""
    table = Table(title="Sweep summary (mean over seeds)")
    table.add_column("family", style="cyan")
    table.add_column("condition")
    table.add_column("seeds", justify="right")
    table.add_column("reward", justify="right")
    table.add_column("accuracy", justify="right")
    table.add_column("grade", justify="right")
    table.add_column("inflation", justify="right")
    table.add_column("wirehead seeds", justify="right")
    for row in aggregates:
        table.add_row(
            row['task_kind'], row['condition'], str(row['seeds']),
            fmt(row['mean_reward']), fmt(row['mean_accuracy']), fmt(row['mean_grade']),
            fmt(row['grade_inflation']), str(row['wirehead_seeds']),
        )
    console.print(table)


def print_certificate(certificate, fixture):
    """Console report of a certificate"""
    pomdp = fixture.pomdp
    if not certificate.assumption_met:
        lines = ["[red]assumption not met[/red]"]
        for v in certificate.violations:
            lines.append(f"  {v.condition}: state {pomdp.states[v.next_state]}, "
                         f"action {pomdp.actions[v.action]}, value {v.value:.6g}")
        console.print(Panel("\n".join(lines), title="Dominance certificate", border_style="red"))
        return

    verdict = "[green]PASS[/green]" if certificate.passed else "[red]FAIL[/red]"
    body = "\n".join([
        f"verdict:        {verdict}",
        f"minimal gap:    {certificate.min_gap:.9g}",
        f"1 - r_task:     {certificate.bound:.9g}",
        f"slack:          {certificate.slack:.3g}",
        f"witness:        state {pomdp.states[certificate.witness_state]}, "
        f"action {pomdp.actions[certificate.witness_action]}",
        f"discount:       {certificate.discount:g}",
        f"iterations:     {certificate.iterations}",
    ])
    style = "green" if certificate.passed else "red"
    console.print(Panel(body, title="Dominance certificate", border_style=style))


# ============================================================================
# Commands
# ============================================================================

def cmd_run(args):
    """Run a full sweep, write tables and (unless disabled) figures"""
    config = resolve_config(args)
    cells = len(config.families) * len(config.conditions) * len(config.seeds)
    console.print(f"[dim]Sweep: {cells} cells, {config.rounds} rounds each, "
                  f"{config.workers} worker(s) -> {config.output}[/dim]")

    with Progress(SpinnerColumn(), TextColumn("{task.description}"), BarColumn(),
                  MofNCompleteColumn(), console=console) as progress:
        task = progress.add_task("cells", total=cells)

        def on_cell_done(cell, ok):
            progress.advance(task)

        result = run_sweep(config, resume=args.resume, on_cell_done=on_cell_done)
        progress.update(task, completed=cells)

    if result.skipped:
        console.print(f"[dim]{result.skipped} cell(s) already done, skipped[/dim]")
    if result.aggregates:
        print_aggregates(result.aggregates)

    if config.plots_enabled and not args.no_plots and result.summaries:
        with console.status("[cyan]Rendering figures...[/cyan]", spinner="dots"):
            report = render_figures(config.output, config.figures, config.smoothing)
        console.print(f"[dim]{len(report.files)} figure(s) in "
                      f"{Path(config.output) / 'figures'}[/dim]")

    if not result.ok:
        for entry in result.failed:
            console.print(f"[red]✗ {entry['cell_id']}: {entry['error']}[/red]")
        return EXIT_FAILED
    console.print(f"[green]✓ Sweep complete: {config.output}[/green]")
    return EXIT_OK


def cmd_episode(args):
    """Run one cell and print its summary"""
    config = resolve_config(args)
    condition = Condition.parse(args.condition)
    family = args.family or config.families[0].name
    seed = config.seeds[0] if args.cell_seed is None else args.cell_seed
    cell = Cell(family, condition, seed)
    runner = EpisodeRunner(config, cell)

    with console.status(f"[cyan]Running {cell.cell_id}...[/cyan]", spinner="dots"):
        if args.output:
            out_dir = Path(args.output)
            with RoundLog(out_dir / 'rounds.jsonl') as log:
                records = runner.run(on_round=log.append)
        else:
            records = runner.run()

    summary = summarize_run(records, config.window, config.saturation, config.divergence)
    if args.output:
        SummaryManager(out_dir).write_cell_summary(out_dir, summary)
        save_snapshot(out_dir / 'policy.yaml', runner.policy, runner.baseline,
                      config.optimizer, runner.rounds_done)
        write_config(out_dir / 'config.yaml', config)

    flags = []
    if summary.saturated:
        flags.append("saturated")
    if summary.wirehead_flag:
        flags.append("[red]wirehead[/red]")
    body = "\n".join([
        f"rounds:          {summary.rounds} ({summary.degenerate_rounds} degenerate)",
        f"window:          {summary.window}",
        f"reward:          {fmt(summary.mean_reward)}",
        f"accuracy:        {fmt(summary.mean_accuracy)}",
        f"grade:           {fmt(summary.mean_grade)}",
        f"grade inflation: {fmt(summary.grade_inflation)}",
        f"flags:           {', '.join(flags) or 'none'}",
    ])
    console.print(Panel(body, title=cell.cell_id, border_style="cyan"))
    return EXIT_OK


def cmd_certify(args):
    """Certify dominance of the wirehead action in a fixture"""
    fixture = load_fixture(args.fixture, discount=args.discount)
    if fixture.dominance is None:
        raise UsageError(f"{args.fixture} has no dominance section")

    with console.status("[cyan]Running value iteration...[/cyan]", spinner="dots"):
        _, _, certificate = certify_pomdp(fixture.pomdp, fixture.rewards, fixture.dominance,
                                          tolerance=args.tolerance)

    output = Path(args.output) if args.output else Path(f"{Path(args.fixture).stem}.certificate.yaml")
    write_certificate(output, certificate, fixture.pomdp, source=args.fixture)
    print_certificate(certificate, fixture)
    console.print(f"[dim]Certificate written to {output}[/dim]")
    return EXIT_OK if certificate.passed else EXIT_FAILED


def cmd_plot(args):
    """Render figures from a sweep directory"""
    kinds = FIGURE_KINDS if args.figure == 'all' else (args.figure,)
    report = render_figures(args.sweep_dir, kinds, args.smoothing)
    for path in report.files:
        console.print(f"[green]✓[/green] {path}")
    for warning in report.warnings:
        console.print(f"[yellow]⚠  {warning}[/yellow]")
    if not report.files:
        console.print("[red]No figures written[/red]")
        return EXIT_FAILED
    return EXIT_OK


def cmd_export(args):
    """Lower a self-grading task to a POMDP fixture"""
    params = {}
    if args.answer_count is not None:
        params['answer_count'] = args.answer_count
    if args.ceiling is not None:
        params['score_ceiling'] = args.ceiling
    if args.ambiguity is not None:
        params['ambiguity'] = args.ambiguity
    family = registry.build(args.kind, **params)
    family.check_answer(args.gold)

    instance = TaskInstance(instance_id=0, context_id=0, gold=args.gold, difficulty=0.0)
    pomdp, rewards, spec = to_pomdp(family, GradeGrid(size=args.grid_size), instance,
                                    discount=args.discount, strict=args.strict)
    description = (f"Selfgrade export of {family.kind} ({family.answer_count} answers, "
                   f"ceiling {family.score_ceiling:g}), gold answer {args.gold}")
    path = write_fixture(args.output, pomdp, rewards, spec, description)
    console.print(f"[green]✓ Wrote {path}[/green] [dim]({pomdp.n_actions} actions, "
                  f"r_task {spec.r_task:g})[/dim]")
    return EXIT_OK


# ============================================================================
# Entry Point
# ============================================================================

def build_parser():
    parser = argparse.ArgumentParser(
        prog='wirehead',
        description='Wireheading testbed: dominance certificates and self-grading sweeps',
    )
    parser.add_argument('-v', '--verbose', action='store_true', help='debug logging')
    sub = parser.add_subparsers(dest='command', required=True)

    def add_config_flags(p):
        p.add_argument('--config', help='experiment config (YAML)')
        p.add_argument('--output', help='output directory')
        p.add_argument('--seed', type=int, help='master seed override')

    p = sub.add_parser('run', help='run a full sweep from a config')
    add_config_flags(p)
    p.add_argument('--workers', type=int, help='parallel cells')
    p.add_argument('--resume', action='store_true', help='skip cells already done')
    p.add_argument('--no-plots', action='store_true', help='skip figure rendering')
    p.set_defaults(handler=cmd_run)

    p = sub.add_parser('episode', help='run a single cell')
    add_config_flags(p)
    p.add_argument('--family', help='family name from the config (default: first)')
    p.add_argument('--condition', default='selfgrade',
                   choices=[c.value for c in Condition])
    p.add_argument('--cell-seed', type=int, help='cell seed (default: first config seed)')
    p.set_defaults(handler=cmd_episode)

    p = sub.add_parser('certify', help='certify wirehead dominance in a POMDP fixture')
    p.add_argument('fixture', help='fixture file (YAML or JSON)')
    p.add_argument('--discount', type=float, help='override the fixture discount')
    p.add_argument('--tolerance', type=float, default=1e-9)
    p.add_argument('--output', help='certificate path (default: <fixture>.certificate.yaml)')
    p.set_defaults(handler=cmd_certify)

    p = sub.add_parser('plot', help='render figures from a sweep directory')
    p.add_argument('sweep_dir')
    p.add_argument('--figure', default='all', choices=['all', *FIGURE_KINDS])
    p.add_argument('--smoothing', type=int, default=25, help='moving-average window')
    p.set_defaults(handler=cmd_plot)

    p = sub.add_parser('export-pomdp', help='export a self-grading task as a POMDP fixture')
    p.add_argument('--kind', default='graded_ambiguous', choices=registry.kinds())
    p.add_argument('--answer-count', type=int, help='answers (default: family default)')
    p.add_argument('--ceiling', type=float, help='score ceiling (graded only)')
    p.add_argument('--ambiguity', type=float, help='noise width (graded only)')
    p.add_argument('--grid-size', type=int, default=11)
    p.add_argument('--gold', type=int, default=0, help='gold answer index')
    p.add_argument('--discount', type=float, default=0.9)
    p.add_argument('--strict', action='store_true',
                   help='cap honest grades below 1.0 for exact tasks')
    p.add_argument('--output', required=True, help='fixture path (.json or .yaml)')
    p.set_defaults(handler=cmd_export)

    return parser


def main(argv=None):
    """Main entry point"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code

    configure_logging(args.verbose)

    try:
        return args.handler(args)
    except UsageError as e:
        console.print(f"[red]{e}[/red]")
        return EXIT_USAGE
    except (WireheadError, OSError) as e:
        console.print(f"[red]{e}[/red]")
        return EXIT_FAILED
    except KeyboardInterrupt:
        console.print("\n[yellow]Interrupted[/yellow]")
        return EXIT_FAILED


if __name__ == '__main__':
    sys.exit(main())
