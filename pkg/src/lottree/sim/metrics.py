"""Contribution and participation metrics for field campaigns."""

from __future__ import annotations

import math
from typing import Sequence


def treasure_contribution(duration_minutes: float, distance_meters: float, found: bool = False, include_find_bonus: bool = False) -> float:
    """Half a point per minute searching, 0.05 per metre walked, 120 for a find."""
    if duration_minutes < 0 or distance_meters < 0:
        raise ValueError("duration and distance must be non-negative")
    score = 0.5 * duration_minutes + 0.5 * 0.1 * distance_meters
    if include_find_bonus and found:
        score += 120.0
    return score


def rpr(participants: int, active_users: int) -> float:
    """Relative participation ratio: participants over active non-participants."""
    if participants < 0:
        raise ValueError("participant count must be non-negative")
    if active_users <= participants:
        raise ValueError("rpr is undefined unless active users outnumber participants")
    return participants / (active_users - participants)


def tcp(contributions: Sequence[float]) -> float:
    """Total contribution of participants."""
    return math.fsum(contributions)


def acp(contributions: Sequence[float]) -> float:
    """Average contribution per participant (0 with nobody)."""
    return tcp(contributions) / len(contributions) if len(contributions) else 0.0
