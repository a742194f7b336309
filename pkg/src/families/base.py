"""
Base task family interface
"""

from abc import ABC, abstractmethod

from errors import UsageError


class BaseTaskFamily(ABC):
    """
    Base class for synthetic task families

    A family fixes the answer alphabet, how an answer is scored against the
    gold answer, and the pretrained priors an agent starts from.
    """

    kind = None
    exact = True
    default_prior_skill = 0.0
    default_overconfidence = 0.0

    def __init__(self, answer_count, ambiguity=0.0, score_ceiling=1.0,
                 context_count=4, prior_skill=None, overconfidence=None):
        if answer_count < 2:
            raise UsageError(f"{self.kind} needs at least 2 answers, got {answer_count}")
        if not 0.0 <= ambiguity <= 1.0:
            raise UsageError(f"ambiguity must lie in [0, 1], got {ambiguity}")
        if not 0.0 < score_ceiling <= 1.0:
            raise UsageError(f"score_ceiling must lie in (0, 1], got {score_ceiling}")
        if context_count < 1:
            raise UsageError(f"context_count must be >= 1, got {context_count}")

        self.answer_count = int(answer_count)
        self.ambiguity = float(ambiguity)
        self.score_ceiling = float(score_ceiling)
        self.context_count = int(context_count)
        self.prior_skill = float(self.default_prior_skill if prior_skill is None else prior_skill)
        self.overconfidence = float(
            self.default_overconfidence if overconfidence is None else overconfidence
        )
        if self.prior_skill < 0:
            raise UsageError(f"prior_skill must be >= 0, got {self.prior_skill}")

    def check_answer(self, answer):
        """Raise UsageError unless answer is a valid index"""
        if not 0 <= answer < self.answer_count:
            raise UsageError(
                f"answer {answer} out of range for {self.kind} "
                f"({self.answer_count} answers)"
            )

    @abstractmethod
    def score(self, answer, gold, noise_draw):
        """
        Intended score of `answer` against `gold`

        Args:
            answer: Answer index
            gold: Gold answer index
            noise_draw: Uniform [0, 1) draw, ignored by exact families

        Returns:
            float: Score in [0, score_ceiling]
        """
        pass

    def expected_score(self, answer, gold):
        """Mean intended score over the noise draw"""
        return self.score(answer, gold, 0.5)

    def best_score(self):
        """Highest intended score any answer can reach"""
        return self.score_ceiling

    def to_dict(self):
        return {
            'kind': self.kind,
            'answer_count': self.answer_count,
            'ambiguity': self.ambiguity,
            'score_ceiling': self.score_ceiling,
            'context_count': self.context_count,
            'prior_skill': self.prior_skill,
            'overconfidence': self.overconfidence,
        }

    def __repr__(self):
        return (f"<{self.__class__.__name__} answers={self.answer_count} "
                f"ambiguity={self.ambiguity} ceiling={self.score_ceiling}>")
