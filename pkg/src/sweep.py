"""
Sweeps - run every (family, condition, seed) cell of a config
"""

import logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from pathlib import Path

from agent import save_snapshot
from config import write_config
from episode import Cell, EpisodeRunner
from manifest import DONE, FAILED, RUNNING, SweepManifest
from metrics import summarize_run
from summary import SummaryManager
from telemetry import RoundLog

logger = logging.getLogger(__name__)


@dataclass
class SweepResult:
    manifest: SweepManifest
    summaries: list
    aggregates: list
    executed: int
    skipped: int

    @property
    def failed(self):
        return self.manifest.failed_cells()

    @property
    def ok(self):
        return not self.failed


def enumerate_cells(config):
    """All cells in family, condition, seed order"""
    return [Cell(family.name, condition, seed)
            for family in config.families
            for condition in config.conditions
            for seed in config.seeds]


def run_cell(config, cell, manifest, summaries):
    """
    Run one cell and persist its round log, summary and final policy

    Failures are recorded in the manifest rather than raised; whatever part
    of the round log was written stays on disk.

    Returns:
        bool: True if the cell finished
    """
    cell_dir = manifest.cell_dir(cell)
    manifest.mark(cell, RUNNING)
    logger.info("Starting cell %s", cell.cell_id)

    runner = None
    try:
        cell_dir.mkdir(parents=True, exist_ok=True)
        runner = EpisodeRunner(config, cell)
        with RoundLog(cell_dir / 'rounds.jsonl') as log:
            records = runner.run(on_round=log.append)
        summary = summarize_run(records, config.window, config.saturation, config.divergence)
        summaries.write_cell_summary(cell_dir, summary)
        save_snapshot(cell_dir / 'policy.yaml', runner.policy, runner.baseline,
                      config.optimizer, runner.rounds_done)
    except Exception as e:
        rounds = runner.rounds_done if runner is not None else 0
        logger.error("Cell %s failed after %d rounds: %s", cell.cell_id, rounds, e)
        manifest.mark(cell, FAILED, error=f"{type(e).__name__}: {e}", rounds=rounds)
        return False

    manifest.mark(cell, DONE, rounds=len(records))
    logger.info("Finished cell %s (reward %.3f, accuracy %.3f)", cell.cell_id,
                summary.mean_reward, summary.mean_accuracy)
    return True


def run_sweep(config, resume=False, on_cell_done=None):
    """
    Run every cell of `config` under config.output

    Args:
        config: ExperimentConfig
        resume: Skip cells the manifest already lists as done
        on_cell_done: Optional callback (cell, ok) after each executed cell

    Returns:
        SweepResult
    """
    output = Path(config.output)
    output.mkdir(parents=True, exist_ok=True)
    write_config(output / 'config.yaml', config)

    manifest = SweepManifest(output)
    summaries = SummaryManager(output)
    cells = enumerate_cells(config)
    for cell in cells:
        manifest.add_cell(cell)

    pending = [cell for cell in cells if not (resume and manifest.is_done(cell))]
    skipped = len(cells) - len(pending)
    if skipped:
        logger.info("Resuming: %d of %d cells already done", skipped, len(cells))

    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        futures = {pool.submit(run_cell, config, cell, manifest, summaries): cell
                   for cell in pending}
        for future in as_completed(futures):
            if on_cell_done is not None:
                on_cell_done(futures[future], future.result())

    finished = summaries.load_summaries(manifest)
    aggregates = summaries.write_tables(
        finished,
        conditions=[c.value for c in config.conditions],
        families=[f.name for f in config.families],
    )
    return SweepResult(manifest, finished, aggregates, len(pending), skipped)
