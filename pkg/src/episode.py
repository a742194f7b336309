"""
One training episode: a (family, condition, seed) cell run round by round
"""

import logging
from dataclasses import dataclass

import numpy as np

from agent import (BaselineState, OptimizerState, apply_update, compute_advantage,
                   entropy, initial_policy, policy_gradient, sample_action,
                   update_baseline)
from errors import NumericalError
from metrics import RoundRecord
from selfgrade import Condition, GradeGrid, build_dataset, prior_logits, step

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Cell:
    """One unit of sweep work"""
    family: str
    condition: Condition
    seed: int

    @property
    def cell_id(self):
        return f"{self.family}/{self.condition.value}/seed-{self.seed}"


def cell_streams(master_seed, family_index, seed):
    """
    Random streams of a cell: (dataset seed sequence, training generator)

    SeedSequence([master_seed, family_index, seed]) is spawned into two
    children. The condition is not part of the key, so seed-matched cells
    of different conditions see the same dataset and the same draws.
    """
    root = np.random.SeedSequence([master_seed, family_index, seed])
    dataset_seq, training_seq = root.spawn(2)
    return dataset_seq, np.random.default_rng(training_seq)


class EpisodeRunner:
    """
    Runs a cell and keeps its final policy, baseline and optimizer state

    Each runner owns its state and random stream; runners for different
    cells can run in parallel.
    """

    def __init__(self, config, cell):
        self.config = config
        self.cell = Cell(cell.family, Condition.parse(cell.condition), cell.seed)
        family_index, family_config = config.family(self.cell.family)
        self.family = family_config.build()
        self.grid = GradeGrid(size=config.grade_grid_size)

        dataset_seq, self.rng = cell_streams(config.master_seed, family_index, self.cell.seed)
        self.dataset = build_dataset(self.family, config.examples, dataset_seq)

        answer_prior, grade_prior = prior_logits(self.family, self.dataset, self.grid)
        self.policy = initial_policy(
            self.family.context_count,
            self.family.answer_count,
            self.grid.values,
            answer_prior=answer_prior,
            grade_prior=grade_prior,
            condition_on_answer=config.condition_grade_on_answer,
            temperature=config.temperature,
        )
        self.baseline = BaselineState(alpha=config.alpha)
        self.optimizer_state = OptimizerState()
        self.rounds_done = 0

    def run_round(self):
        """Play and learn from one round; returns its RoundRecord"""
        round_index = self.rounds_done + 1
        condition = self.cell.condition
        instance = self.dataset[(round_index - 1) % len(self.dataset)]
        context = instance.context_id
        policy = self.policy

        action, _, _ = sample_action(policy, context, self.rng, with_grade=condition.grades)
        outcome = step(self.family, instance, action, condition, self.rng)
        self.baseline = update_baseline(self.baseline, outcome.reward)
        advantage = compute_advantage(outcome.reward, self.baseline)

        degenerate = False
        try:
            gradient = policy_gradient(policy, context, action, advantage)
            self.policy, self.optimizer_state = apply_update(
                policy, gradient, self.config.optimizer, self.optimizer_state)
        except NumericalError as e:
            degenerate = True
            logger.warning("Degenerate round %d in %s: %s", round_index, self.cell.cell_id, e)

        self.rounds_done = round_index
        return RoundRecord(
            round=round_index,
            condition=condition.value,
            task_kind=self.cell.family,
            seed=self.cell.seed,
            instance_id=instance.instance_id,
            context_id=context,
            answer=action.answer,
            reward=outcome.reward,
            accuracy=outcome.accuracy,
            baseline=self.baseline.value,
            advantage=advantage,
            answer_entropy=entropy(policy.answer_probabilities(context)),
            grade=outcome.grade,
            grade_index=action.grade_index,
            grade_entropy=(entropy(policy.grade_probabilities(context, action.answer))
                           if condition.grades else None),
            degenerate=degenerate,
        )

    def run(self, on_round=None):
        """
        Run every remaining round

        Args:
            on_round: Optional callback receiving each RoundRecord as it is
                produced (used to stream the round log)

        Returns:
            list: RoundRecord in round order
        """
        records = []
        while self.rounds_done < self.config.rounds:
            record = self.run_round()
            if on_round is not None:
                on_round(record)
            records.append(record)
        return records


def run_episode(config, cell, on_round=None):
    """Run one cell from scratch and return its round records"""
    return EpisodeRunner(config, cell).run(on_round)
