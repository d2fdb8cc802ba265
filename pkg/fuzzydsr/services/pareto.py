from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass
from itertools import groupby


@dataclass(frozen=True)
class ParetoPoint:
    complexity: int
    reward: float
    expression: str


def dominates(q: ParetoPoint, p: ParetoPoint) -> bool:
    return (q.complexity <= p.complexity and q.reward > p.reward) or (
        q.complexity < p.complexity and q.reward >= p.reward
    )


def pareto_front(points: Iterable[ParetoPoint]) -> list[ParetoPoint]:
    """Non-dominated points by complexity ascending; rewards strictly increase along the result.

    Points tied on (complexity, reward) collapse to the one with the smallest expression string.
    """
    ordered = sorted(points, key=lambda p: (p.complexity, -p.reward, p.expression))
    front: list[ParetoPoint] = []
    for _, same_complexity in groupby(ordered, key=lambda p: p.complexity):
        # The last kept point has the best reward among all simpler points.
        leader = next(same_complexity)
        if not front or not dominates(front[-1], leader):
            front.append(leader)
    return front
