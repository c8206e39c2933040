"""Linear-quadratic norm-transmission game between social groups.

Each group takes a costly action whose marginal benefit is its intrinsic
interest plus a weighted sum of the other groups' previous actions. Best
responses are linear in lagged actions, so group dynamics form a one-lag
linear system; the mapping between game parameters and that system's
coefficients is exposed in both directions.

Group ``i``'s per-period payoff from action ``a`` given last period's
action profile ``prev``:

    a * (b[i] + lam[i] @ prev) - c[i] / 2 * a**2

with ``c[i] > 0`` so the problem is strictly concave.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, TextIO

import numpy as np

from . import kernels

DIVERGENCE_LIMIT = 1e12


class GameError(Exception):
    pass


class InvalidGameError(GameError):
    pass


class SingularSystemError(GameError):
    pass


@dataclass(frozen=True, eq=False)
class GroupGame:
    group_names: tuple[str, ...]
    b: np.ndarray
    c: np.ndarray
    lam: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "group_names", tuple(self.group_names))
        object.__setattr__(self, "b", np.asarray(self.b, dtype=np.float64))
        object.__setattr__(self, "c", np.asarray(self.c, dtype=np.float64))
        object.__setattr__(self, "lam", np.asarray(self.lam, dtype=np.float64))
        r = len(self.group_names)
        if r < 1:
            raise InvalidGameError("need at least one group")
        if self.b.shape != (r,) or self.c.shape != (r,):
            raise InvalidGameError(f"b and c must have shape ({r},)")
        if self.lam.shape != (r, r):
            raise InvalidGameError(f"lambda matrix must have shape ({r}, {r})")
        for arr, name in ((self.b, "b"), (self.c, "c"), (self.lam, "lambda")):
            if not np.all(np.isfinite(arr)):
                raise InvalidGameError(f"{name} contains non-finite entries")
        if np.any(self.c <= 0):
            raise InvalidGameError("cost slopes c must be strictly positive")

    @property
    def n_groups(self) -> int:
        return len(self.group_names)


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    actions: np.ndarray
    diverged: bool = False


@dataclass(frozen=True, eq=False)
class SteadyState:
    """Fixed point of the best-response map, or a divergence verdict."""

    values: np.ndarray | None
    spectral_radius: float

    @property
    def divergent(self) -> bool:
        return self.values is None


def utility(g: GroupGame, i: int, a_i: float, a_prev: Sequence[float]) -> float:
    a_prev = np.asarray(a_prev, dtype=np.float64)
    return float(
        a_i * (g.b[i] + g.lam[i] @ a_prev) - g.c[i] / 2.0 * a_i * a_i
    )


def to_var_params(g: GroupGame) -> tuple[np.ndarray, np.ndarray]:
    """One-lag linear-system coefficients (constants, lag matrix) of the game.

    Constants are ``b/c`` and the lag matrix rows are ``lam[i]/c[i]``; the
    best-response dynamics and this system produce identical paths.
    """
    const = g.b / g.c
    pi1 = g.lam / g.c[:, None]
    return const, pi1


def from_var_params(
    constants: Sequence[float],
    pi1: Sequence[Sequence[float]],
    group_names: Sequence[str] | None = None,
) -> GroupGame:
    """Game with unit costs reproducing the given one-lag system.

    Only the ratios ``b/c`` and ``lam/c`` are identified from dynamics, so
    costs are normalized to 1 and the coefficients are read back directly.
    """
    constants = np.asarray(constants, dtype=np.float64)
    pi1 = np.asarray(pi1, dtype=np.float64)
    r = constants.shape[0]
    if pi1.shape != (r, r):
        raise InvalidGameError(f"lag matrix must be {r}x{r}, got {pi1.shape}")
    names = (
        tuple(group_names)
        if group_names is not None
        else tuple(f"g{i + 1}" for i in range(r))
    )
    if len(names) != r:
        raise InvalidGameError("group_names length mismatch")
    return GroupGame(names, constants.copy(), np.ones(r), pi1.copy())


def best_response(g: GroupGame, a_prev: Sequence[float]) -> np.ndarray:
    """Utility-maximizing action per group given last period's profile."""
    const, pi1 = to_var_params(g)
    a_prev = np.asarray(a_prev, dtype=np.float64)
    if a_prev.shape != (g.n_groups,):
        raise ValueError(f"a_prev must have shape ({g.n_groups},)")
    path, _, _ = kernels.affine_steps(const, pi1[None, :, :], a_prev[None, :], 1)
    return path[0]


def spectral_radius(g: GroupGame) -> float:
    _, pi1 = to_var_params(g)
    return float(np.max(np.abs(np.linalg.eigvals(pi1))))


def simulate(
    g: GroupGame, a0: Sequence[float], T: int, limit: float = DIVERGENCE_LIMIT
) -> Trajectory:
    """Iterate best responses for T periods from the profile ``a0``.

    If any action's magnitude passes ``limit`` the trajectory is flagged
    diverged and truncated at that step, so stored values stay finite.
    """
    a0 = np.asarray(a0, dtype=np.float64)
    if a0.shape != (g.n_groups,):
        raise ValueError(f"a0 must have shape ({g.n_groups},)")
    if T < 0:
        raise ValueError("T must be non-negative")
    const, pi1 = to_var_params(g)
    path, n_done, diverged = kernels.affine_steps(
        const, pi1[None, :, :], a0[None, :], T, limit=limit
    )
    actions = np.vstack([a0[None, :], path[:n_done]])
    return Trajectory(np.arange(n_done + 1), actions, diverged)


def steady_state(g: GroupGame) -> SteadyState:
    """Solve for the fixed point of the best-response map.

    Unique when the cost-scaled interaction matrix has spectral radius
    below 1; otherwise the dynamics do not contract and the result is
    classified divergent, carrying the radius.
    """
    const, pi1 = to_var_params(g)
    radius = spectral_radius(g)
    if radius >= 1.0:
        return SteadyState(None, radius)
    system = np.eye(g.n_groups) - pi1
    try:
        values = np.linalg.solve(system, const)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(
            f"(I - lag matrix) is singular at spectral radius {radius}"
        ) from exc
    return SteadyState(values, radius)


# ---------------------------------------------------------------------------
# External interfaces: game config JSON, trajectory CSV
# ---------------------------------------------------------------------------


def game_from_dict(raw: dict) -> GroupGame:
    try:
        return GroupGame(
            group_names=tuple(raw["groups"]),
            b=np.asarray(raw["b"], dtype=np.float64),
            c=np.asarray(raw["c"], dtype=np.float64),
            lam=np.asarray(raw["lambda"], dtype=np.float64),
        )
    except KeyError as exc:
        raise InvalidGameError(f"game config missing key {exc}") from None


def load_game(path: str | Path) -> GroupGame:
    with open(path, encoding="utf-8") as f:
        return game_from_dict(json.load(f))


def game_to_dict(g: GroupGame) -> dict:
    return {
        "groups": list(g.group_names),
        "b": g.b.tolist(),
        "c": g.c.tolist(),
        "lambda": g.lam.tolist(),
    }


def write_trajectory_csv(
    g: GroupGame, traj: Trajectory, f: TextIO, metadata: Sequence[str] = ()
) -> None:
    for line in metadata:
        f.write(f"# {line}\n")
    writer = csv.writer(f, lineterminator="\n")
    writer.writerow(["t"] + list(g.group_names))
    for t, row in zip(traj.times, traj.actions):
        writer.writerow([int(t)] + [repr(float(v)) for v in row])
