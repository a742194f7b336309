"""
Exact-match task families (sentiment and single-digit arithmetic analogues)
"""

from errors import UsageError
from .base import BaseTaskFamily


class ExactFamily(BaseTaskFamily):
    """Binary intended reward: 1.0 for the gold answer, 0.0 otherwise"""

    default_overconfidence = 0.5

    def __init__(self, answer_count, ambiguity=0.0, score_ceiling=1.0, **kwargs):
        if ambiguity:
            raise UsageError(f"{self.kind} is exact; ambiguity must be 0, got {ambiguity}")
        # Exact matches always score 1.0, whatever ceiling was configured
        super().__init__(answer_count, 0.0, 1.0, **kwargs)

    def score(self, answer, gold, noise_draw=None):
        return 1.0 if answer == gold else 0.0


class ExactBinaryFamily(ExactFamily):
    """Two answers, like positive/negative sentiment"""

    kind = 'exact_binary'
    default_prior_skill = 6.0

    def __init__(self, answer_count=2, **kwargs):
        if answer_count != 2:
            raise UsageError(f"exact_binary has exactly 2 answers, got {answer_count}")
        super().__init__(answer_count, **kwargs)


class ExactMultiFamily(ExactFamily):
    """Ten answers by default, like single-digit arithmetic"""

    kind = 'exact_multi'
    default_prior_skill = 8.0

    def __init__(self, answer_count=10, **kwargs):
        super().__init__(answer_count, **kwargs)
