"""
Graded task family with ambiguous scoring (summarization analogue)
"""

from .base import BaseTaskFamily


class GradedAmbiguousFamily(BaseTaskFamily):
    """
    Similarity-ramp scoring with mean-preserving noise

    The noiseless score falls linearly with index distance from gold, from
    score_ceiling down to 0 at the farthest answer. The noise factor
    u = 1 - beta + 2 * beta * draw scales the margin to the nearer end of
    [0, score_ceiling], so the noisy score stays in range and has the
    noiseless score as its mean.
    """

    kind = 'graded_ambiguous'
    exact = False
    default_overconfidence = 3.0

    def __init__(self, answer_count=10, ambiguity=0.5, score_ceiling=0.8, **kwargs):
        super().__init__(answer_count, ambiguity, score_ceiling, **kwargs)

    def base_score(self, answer, gold):
        distance = abs(answer - gold) / (self.answer_count - 1)
        return self.score_ceiling * (1.0 - distance)

    def expected_score(self, answer, gold):
        return self.base_score(answer, gold)

    def score(self, answer, gold, noise_draw):
        base = self.base_score(answer, gold)
        factor = 1.0 - self.ambiguity + 2.0 * self.ambiguity * noise_draw
        margin = min(base, self.score_ceiling - base)
        return min(max(base + (factor - 1.0) * margin, 0.0), self.score_ceiling)
