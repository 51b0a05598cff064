"""Zero-sum matrix games: values, optimal mixtures, equilibrium checks.

The row player maximises ``y' C z`` over the probability simplex while the
column player minimises.  Both game values come from the standard
value-variable linear program (the inner optimum over mixed strategies is
attained at a pure strategy, so pure-strategy constraints suffice).
Payoffs are scaled to [-1, 1] before solving to keep solver tolerances
meaningful.  Checks are pure functions; batches parallelise trivially.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog


@dataclass(frozen=True)
class MatrixGame:
    """Finite zero-sum game given by the row player's payoff matrix."""

    payoff: np.ndarray

    def __post_init__(self) -> None:
        payoff = np.asarray(self.payoff, dtype=float)
        if payoff.ndim != 2 or payoff.size == 0:
            raise ValueError("payoff must be a non-empty 2-D matrix")
        if not np.isfinite(payoff).all():
            raise ValueError("payoff entries must be finite")
        object.__setattr__(self, "payoff", payoff)

    @property
    def shape(self) -> tuple[int, int]:
        return self.payoff.shape


def _solve_lp(c, a_ub, b_ub, a_eq, b_eq, bounds):
    result = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq,
                     bounds=bounds, method="highs")
    if not result.success:
        raise RuntimeError(f"game LP failed: {result.message}")
    return result


def value_maximin(game: MatrixGame) -> tuple[float, np.ndarray]:
    """Row player's guaranteed value and an optimal mixed strategy.

    Solves ``max v`` subject to ``C' y >= v`` per pure column, ``y`` on the
    simplex.
    """
    payoff = game.payoff
    m, n = payoff.shape
    scale = float(np.abs(payoff).max())
    if scale == 0.0:
        return 0.0, np.full(m, 1.0 / m)
    c_s = payoff / scale
    # Variables: [y_1..y_m, v]; minimise -v.
    cost = np.zeros(m + 1)
    cost[-1] = -1.0
    a_ub = np.hstack([-c_s.T, np.ones((n, 1))])
    b_ub = np.zeros(n)
    a_eq = np.hstack([np.ones((1, m)), np.zeros((1, 1))])
    result = _solve_lp(cost, a_ub, b_ub, a_eq, np.array([1.0]),
                       [(0.0, None)] * m + [(None, None)])
    y = np.clip(result.x[:m], 0.0, None)
    y /= y.sum()
    return float(result.x[-1] * scale), y


def value_minimax(game: MatrixGame) -> tuple[float, np.ndarray]:
    """Column player's guaranteed cap and an optimal mixed strategy."""
    payoff = game.payoff
    m, n = payoff.shape
    scale = float(np.abs(payoff).max())
    if scale == 0.0:
        return 0.0, np.full(n, 1.0 / n)
    c_s = payoff / scale
    # Variables: [z_1..z_n, v]; minimise v.
    cost = np.zeros(n + 1)
    cost[-1] = 1.0
    a_ub = np.hstack([c_s, -np.ones((m, 1))])
    b_ub = np.zeros(m)
    a_eq = np.hstack([np.ones((1, n)), np.zeros((1, 1))])
    result = _solve_lp(cost, a_ub, b_ub, a_eq, np.array([1.0]),
                       [(0.0, None)] * n + [(None, None)])
    z = np.clip(result.x[:n], 0.0, None)
    z /= z.sum()
    return float(result.x[-1] * scale), z


def verify_saddle(game: MatrixGame, y: np.ndarray, z: np.ndarray,
                  tol: float = 1e-6) -> bool:
    """Check the saddle inequalities of a strategy pair.

    ``y' C z*`` must not beat the pair value for any ``y`` and ``y*' C z``
    must not undercut it for any ``z``; by bilinearity it is enough to test
    pure strategies.
    """
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    value = float(y @ game.payoff @ z)
    best_row = float((game.payoff @ z).max())
    best_col = float((y @ game.payoff).min())
    return best_row <= value + tol and value <= best_col + tol


def verify_weak_duality(game: MatrixGame, tol: float = 1e-6) -> bool:
    """The guaranteed floor never exceeds the guaranteed cap."""
    v1, _ = value_maximin(game)
    v2, _ = value_minimax(game)
    return v1 <= v2 + tol


def verify_minimax_theorem(game: MatrixGame, tol: float = 1e-6) -> bool:
    """Both game values coincide (a mixed equilibrium exists)."""
    v1, _ = value_maximin(game)
    v2, _ = value_minimax(game)
    return abs(v1 - v2) <= tol


@dataclass(frozen=True)
class GameReport:
    """Verification summary of one game."""

    v1: float
    v2: float
    gap: float
    weak_duality: bool
    minimax: bool
    saddle: bool


def verify_game(game: MatrixGame, tol: float = 1e-6) -> GameReport:
    v1, y = value_maximin(game)
    v2, z = value_minimax(game)
    return GameReport(
        v1=v1,
        v2=v2,
        gap=abs(v1 - v2),
        weak_duality=v1 <= v2 + tol,
        minimax=abs(v1 - v2) <= tol,
        saddle=verify_saddle(game, y, z, tol),
    )


def empirical_game(protagonist_checkpoints: list, adversary_checkpoints: list,
                   env, seeds: list[int]) -> MatrixGame:
    """Payoff matrix of trained agents: mean protagonist return per pairing.

    Entry (i, j) is the mean protagonist episode return of protagonist
    checkpoint ``i`` against adversary checkpoint ``j`` over the fixed seed
    set; identical seeds across entries keep pairings comparable.  The
    adversary's payoff is the entrywise negation by zero-sum bookkeeping.
    """
    from .learn.training import play_adversarial_episode

    if len(protagonist_checkpoints) < 2 or len(adversary_checkpoints) < 2:
        raise ValueError("need at least two checkpoints per side")
    payoff = np.zeros((len(protagonist_checkpoints), len(adversary_checkpoints)))
    for i, prot in enumerate(protagonist_checkpoints):
        for j, adv in enumerate(adversary_checkpoints):
            returns = [
                play_adversarial_episode(env, prot, adv, seed=seed).protagonist_return
                for seed in seeds
            ]
            payoff[i, j] = float(np.mean(returns))
    return MatrixGame(payoff)
