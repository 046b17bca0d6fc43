"""Exact two-sided sign test on paired comparisons."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import comb

ALPHA = 0.05


@dataclass(frozen=True)
class SignTestResult:
    wins: int
    ties: int
    losses: int
    p_value: float
    significant_at_05: bool


def binomial_tail(x, n):
    """Exact ``P(X <= x)`` for ``X ~ Binomial(n, 1/2)``."""
    return Fraction(sum(comb(n, i) for i in range(x + 1)), 2**n)


def sign_test(wins, ties, losses):
    """Ties are discarded; ``p = min(1, 2 P(X <= min(wins, losses)))``."""
    if min(wins, ties, losses) < 0:
        raise ValueError("counts must be non-negative")
    n = wins + losses
    p = 1.0 if n == 0 else float(min(Fraction(1), 2 * binomial_tail(min(wins, losses), n)))
    return SignTestResult(wins, ties, losses, p, p < ALPHA)


def win_tie_loss(a, b, eps=1e-9):
    """Count paired outcomes of ``a`` against ``b`` with a scaled tolerance."""
    wins = ties = losses = 0
    for x, y in zip(a, b):
        tol = eps * max(1.0, abs(x), abs(y))
        if x - y > tol:
            wins += 1
        elif y - x > tol:
            losses += 1
        else:
            ties += 1
    return wins, ties, losses
