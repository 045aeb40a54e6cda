"""Deterministic, seedable desk-scale environments behind one step/reset interface.

Observations are float64 numpy arrays: grids produce a 4-channel image
(walls incl. the boundary ring, goal, agent position, agent direction as
dir/3 at the agent cell); classic control produces the flat physical state.
All randomness flows through the numpy Generator passed to reset().
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, EpisodeError

GRID_ACTIONS = ("turn_left", "turn_right", "forward")
TURN_LEFT, TURN_RIGHT, FORWARD = 0, 1, 2

# direction index -> (drow, dcol); 0 = east, clockwise
_DIR_VEC = ((0, 1), (1, 0), (0, -1), (-1, 0))


@dataclass(frozen=True)
class StepResult:
    observation: np.ndarray
    reward: float
    terminated: bool
    truncated: bool

    @property
    def done(self) -> bool:
        return self.terminated or self.truncated


@dataclass(frozen=True)
class GridConfig:
    size: int
    layout: str = "empty"

    def __post_init__(self):
        if self.layout not in ("empty", "four_rooms"):
            raise ConfigError(f"unknown grid layout {self.layout!r}")
        if self.size < 5:
            raise ConfigError(f"grid size must be >= 5, got {self.size}")
        if self.layout == "four_rooms" and self.size % 2 == 0:
            raise ConfigError("four_rooms needs an odd size so the dividing walls center")


def four_rooms_walls(size: int) -> set[tuple[int, int]]:
    """Interior wall cells of the four-rooms layout (interior coordinates).

    One dividing row and column through the middle, with a doorway in the
    middle of each half-wall.
    """
    mid = size // 2
    doors = (mid // 2, mid + 1 + mid // 2)
    walls = {(mid, c) for c in range(size) if c not in doors}
    walls |= {(r, mid) for r in range(size) if r not in doors}
    return walls


class GridEnv:
    """Turtle-style gridworld: turn left/right, move forward, reach the goal.

    The agent starts at the top-left interior cell facing east; the goal is
    re-drawn uniformly over free non-start cells on every reset. Rewards:
    -0.01 per step plus +1.0 on the step that reaches the goal. Episodes
    truncate after 4 * size^2 steps.
    """

    n_actions = len(GRID_ACTIONS)
    STEP_REWARD = -0.01
    GOAL_REWARD = 1.0

    def __init__(self, config: GridConfig):
        self.config = config
        n = config.size + 2  # canvas includes the boundary wall ring
        self._canvas = n
        wall = np.zeros((n, n))
        wall[0, :] = wall[-1, :] = wall[:, 0] = wall[:, -1] = 1.0
        interior_walls = four_rooms_walls(config.size) if config.layout == "four_rooms" else set()
        for r, c in interior_walls:
            wall[r + 1, c + 1] = 1.0
        self._wall = wall
        self.start = (1, 1)
        self.start_dir = 0
        self.max_steps = 4 * config.size * config.size
        self.goal_cells = [
            (r, c)
            for r in range(1, n - 1)
            for c in range(1, n - 1)
            if wall[r, c] == 0.0 and (r, c) != self.start
        ]
        self._pos = None
        self._dir = 0
        self._goal = None
        self._steps = 0
        self._done = True

    @property
    def observation_shape(self):
        return (4, self._canvas, self._canvas)

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        self._goal = self.goal_cells[rng.integers(len(self.goal_cells))]
        self._pos = self.start
        self._dir = self.start_dir
        self._steps = 0
        self._done = False
        return self._observe()

    def step(self, action: int) -> StepResult:
        if self._done:
            raise EpisodeError("step() after the episode ended; call reset() first")
        if action == TURN_LEFT:
            self._dir = (self._dir - 1) % 4
        elif action == TURN_RIGHT:
            self._dir = (self._dir + 1) % 4
        elif action == FORWARD:
            dr, dc = _DIR_VEC[self._dir]
            nr, nc = self._pos[0] + dr, self._pos[1] + dc
            if self._wall[nr, nc] == 0.0:
                self._pos = (nr, nc)
        else:
            raise ConfigError(f"invalid grid action {action}")
        self._steps += 1
        reward = self.STEP_REWARD
        terminated = self._pos == self._goal
        if terminated:
            reward += self.GOAL_REWARD
        truncated = not terminated and self._steps >= self.max_steps
        self._done = terminated or truncated
        return StepResult(self._observe(), reward, terminated, truncated)

    def _observe(self) -> np.ndarray:
        n = self._canvas
        obs = np.zeros((4, n, n))
        obs[0] = self._wall
        obs[1][self._goal] = 1.0
        obs[2][self._pos] = 1.0
        obs[3][self._pos] = self._dir / 3.0
        return obs


class CartPoleEnv:
    """Pole balancing on a cart, explicit Euler at dt=0.02.

    Standard reference constants; +1 reward per step, termination when the
    cart leaves +-2.4 or the pole exceeds 12 degrees, truncation at 500.
    """

    n_actions = 2
    GRAVITY = 9.8
    MASS_CART = 1.0
    MASS_POLE = 0.1
    HALF_LENGTH = 0.5
    FORCE_MAG = 10.0
    DT = 0.02
    X_LIMIT = 2.4
    THETA_LIMIT = 12.0 * math.pi / 180.0
    MAX_STEPS = 500

    def __init__(self):
        self.state = np.zeros(4)  # x, x_dot, theta, theta_dot
        self._steps = 0
        self._done = True

    observation_shape = (4,)

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        self.state = rng.uniform(-0.05, 0.05, size=4)
        self._steps = 0
        self._done = False
        return self.state.copy()

    def accelerations(self, state: np.ndarray, action: int) -> tuple[float, float]:
        _, _, theta, theta_dot = state
        force = self.FORCE_MAG if action == 1 else -self.FORCE_MAG
        total_mass = self.MASS_CART + self.MASS_POLE
        pole_ml = self.MASS_POLE * self.HALF_LENGTH
        cos_t, sin_t = math.cos(theta), math.sin(theta)
        temp = (force + pole_ml * theta_dot**2 * sin_t) / total_mass
        theta_acc = (self.GRAVITY * sin_t - cos_t * temp) / (
            self.HALF_LENGTH * (4.0 / 3.0 - self.MASS_POLE * cos_t**2 / total_mass)
        )
        x_acc = temp - pole_ml * theta_acc * cos_t / total_mass
        return x_acc, theta_acc

    def step(self, action: int) -> StepResult:
        if self._done:
            raise EpisodeError("step() after the episode ended; call reset() first")
        x, x_dot, theta, theta_dot = self.state
        x_acc, theta_acc = self.accelerations(self.state, action)
        x += self.DT * x_dot
        x_dot += self.DT * x_acc
        theta += self.DT * theta_dot
        theta_dot += self.DT * theta_acc
        self.state = np.array([x, x_dot, theta, theta_dot])
        self._steps += 1
        terminated = abs(x) > self.X_LIMIT or abs(theta) > self.THETA_LIMIT
        truncated = not terminated and self._steps >= self.MAX_STEPS
        self._done = terminated or truncated
        return StepResult(self.state.copy(), 1.0, terminated, truncated)


class AcrobotEnv:
    """Two-link underactuated pendulum, RK4 at dt=0.2, torque in {-1, 0, +1}.

    Observation is (cos t1, sin t1, cos t2, sin t2, w1, w2); -1 reward per
    step; terminates when the free end rises past one link length above the
    pivot (-cos t1 - cos(t1 + t2) > 1); truncates at 500 steps.
    """

    n_actions = 3
    GRAVITY = 9.8
    LINK_MASS = 1.0
    LINK_LENGTH = 1.0
    LINK_COM = 0.5
    LINK_INERTIA = 1.0
    DT = 0.2
    MAX_VEL_1 = 4.0 * math.pi
    MAX_VEL_2 = 9.0 * math.pi
    MAX_STEPS = 500

    def __init__(self, dt: float | None = None):
        self.dt = self.DT if dt is None else dt
        self.state = np.zeros(4)  # theta1, theta2, w1, w2
        self._steps = 0
        self._done = True

    observation_shape = (6,)

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        self.state = rng.uniform(-0.1, 0.1, size=4)
        self._steps = 0
        self._done = False
        return self._observe()

    def derivatives(self, state: np.ndarray, torque: float) -> np.ndarray:
        m, l1, lc, inertia, g = self.LINK_MASS, self.LINK_LENGTH, self.LINK_COM, self.LINK_INERTIA, self.GRAVITY
        t1, t2, w1, w2 = state
        d1 = m * lc**2 + m * (l1**2 + lc**2 + 2 * l1 * lc * math.cos(t2)) + 2 * inertia
        d2 = m * (lc**2 + l1 * lc * math.cos(t2)) + inertia
        phi2 = m * lc * g * math.cos(t1 + t2 - math.pi / 2.0)
        phi1 = (
            -m * l1 * lc * w2**2 * math.sin(t2)
            - 2 * m * l1 * lc * w2 * w1 * math.sin(t2)
            + (m * lc + m * l1) * g * math.cos(t1 - math.pi / 2.0)
            + phi2
        )
        a2 = (torque + d2 / d1 * phi1 - m * l1 * lc * w1**2 * math.sin(t2) - phi2) / (
            m * lc**2 + inertia - d2**2 / d1
        )
        a1 = -(d2 * a2 + phi1) / d1
        return np.array([w1, w2, a1, a2])

    def _rk4(self, state: np.ndarray, torque: float, dt: float) -> np.ndarray:
        k1 = self.derivatives(state, torque)
        k2 = self.derivatives(state + 0.5 * dt * k1, torque)
        k3 = self.derivatives(state + 0.5 * dt * k2, torque)
        k4 = self.derivatives(state + dt * k3, torque)
        return state + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)

    @staticmethod
    def at_target(state: np.ndarray) -> bool:
        return -math.cos(state[0]) - math.cos(state[0] + state[1]) > 1.0

    def step(self, action: int) -> StepResult:
        if self._done:
            raise EpisodeError("step() after the episode ended; call reset() first")
        torque = float(action) - 1.0
        s = self._rk4(self.state, torque, self.dt)
        s[0] = _wrap_angle(s[0])
        s[1] = _wrap_angle(s[1])
        s[2] = min(max(s[2], -self.MAX_VEL_1), self.MAX_VEL_1)
        s[3] = min(max(s[3], -self.MAX_VEL_2), self.MAX_VEL_2)
        self.state = s
        self._steps += 1
        terminated = self.at_target(s)
        truncated = not terminated and self._steps >= self.MAX_STEPS
        self._done = terminated or truncated
        return StepResult(self._observe(), -1.0, terminated, truncated)

    def _observe(self) -> np.ndarray:
        t1, t2, w1, w2 = self.state
        return np.array([math.cos(t1), math.sin(t1), math.cos(t2), math.sin(t2), w1, w2])


def _wrap_angle(a: float) -> float:
    return (a + math.pi) % (2.0 * math.pi) - math.pi


ENV_NAMES = ("random_goal", "four_rooms", "cartpole", "acrobot")


def make_env(name: str):
    """Build an environment from its CLI name."""
    if name == "random_goal":
        return GridEnv(GridConfig(size=8, layout="empty"))
    if name == "four_rooms":
        return GridEnv(GridConfig(size=9, layout="four_rooms"))
    if name == "cartpole":
        return CartPoleEnv()
    if name == "acrobot":
        return AcrobotEnv()
    raise ConfigError(f"unknown environment {name!r}; expected one of {ENV_NAMES}")


def is_grid(name: str) -> bool:
    return name in ("random_goal", "four_rooms")
