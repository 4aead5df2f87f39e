from dataclasses import dataclass
from enum import Enum


class BicCategory(Enum):
    """Evidence categories of a BIC difference (Raftery's scale)."""

    EXTREMELY_NEGATIVE = "extremely negative"
    STRONGLY_NEGATIVE = "strongly negative"
    NEGATIVE = "negative"
    NEUTRAL = "neutral"
    POSITIVE = "positive"
    STRONGLY_POSITIVE = "strongly positive"
    EXTREMELY_POSITIVE = "extremely positive"


def categorize(delta: float) -> BicCategory:
    """Map a score difference to its category; boundaries at 2, 6 and 10 belong to the weaker side."""
    magnitude = abs(delta)
    if magnitude <= 2:
        return BicCategory.NEUTRAL
    positive = delta > 0
    if magnitude <= 6:
        return BicCategory.POSITIVE if positive else BicCategory.NEGATIVE
    if magnitude <= 10:
        return BicCategory.STRONGLY_POSITIVE if positive else BicCategory.STRONGLY_NEGATIVE
    return BicCategory.EXTREMELY_POSITIVE if positive else BicCategory.EXTREMELY_NEGATIVE


@dataclass(frozen=True)
class DeltaBicReport:
    score_before: float
    score_after: float
    delta: float
    category: BicCategory

    def format(self) -> str:
        return (f"score before: {self.score_before:.6f}\n"
                f"score after:  {self.score_after:.6f}\n"
                f"delta BIC:    {self.delta:.6f} ({self.category.value})")


def delta_bic(before: float, after: float) -> DeltaBicReport:
    delta = after - before
    return DeltaBicReport(before, after, delta, categorize(delta))
