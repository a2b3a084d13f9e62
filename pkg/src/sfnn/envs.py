"""Deterministic, seedable classic-control environments.

Scalar float64 transcriptions of the standard CartPole-v1, Acrobot-v1 and
MountainCar-v0 definitions: Euler integration for the cart-pole, fourth-order
Runge-Kutta for the two-link arm ("book" dynamics), and the usual clipped
velocity update for the mountain car.  A trajectory is fully determined by
the reset seed and the action sequence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .genome import Genome
from .network import NetworkState, env_step


@dataclass(frozen=True)
class EnvSpec:
    name: str
    obs_dim: int
    n_actions: int
    max_steps: int
    min_score: float
    max_score: float


CARTPOLE = EnvSpec("cartpole", obs_dim=4, n_actions=2, max_steps=500,
                   min_score=0.0, max_score=500.0)
ACROBOT = EnvSpec("acrobot", obs_dim=6, n_actions=3, max_steps=500,
                  min_score=-500.0, max_score=0.0)
MOUNTAINCAR = EnvSpec("mountaincar", obs_dim=2, n_actions=3, max_steps=200,
                      min_score=-200.0, max_score=0.0)

SPECS = {spec.name: spec for spec in (CARTPOLE, ACROBOT, MOUNTAINCAR)}
ENV_ORDER = ("cartpole", "acrobot", "mountaincar")


@dataclass
class EnvState:
    spec: EnvSpec
    phys: tuple  # physical state variables, per environment
    step_count: int
    rng: np.random.Generator
    done: bool = False


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


# -- cart-pole ---------------------------------------------------------------

_CP_GRAVITY = 9.8
_CP_MASSCART = 1.0
_CP_MASSPOLE = 0.1
_CP_TOTAL_MASS = _CP_MASSPOLE + _CP_MASSCART
_CP_LENGTH = 0.5  # half the pole length
_CP_POLEMASS_LENGTH = _CP_MASSPOLE * _CP_LENGTH
_CP_FORCE_MAG = 10.0
_CP_TAU = 0.02
_CP_THETA_THRESHOLD = 12 * 2 * math.pi / 360
_CP_X_THRESHOLD = 2.4


def _cartpole_reset(rng: np.random.Generator):
    phys = tuple(float(v) for v in rng.uniform(-0.05, 0.05, 4))
    return phys, np.array(phys, dtype=np.float64)


def _cartpole_step(phys, action: int):
    x, x_dot, theta, theta_dot = phys
    force = _CP_FORCE_MAG if action == 1 else -_CP_FORCE_MAG
    costheta = math.cos(theta)
    sintheta = math.sin(theta)
    temp = (force + _CP_POLEMASS_LENGTH * theta_dot**2 * sintheta) / _CP_TOTAL_MASS
    thetaacc = (_CP_GRAVITY * sintheta - costheta * temp) / (
        _CP_LENGTH * (4.0 / 3.0 - _CP_MASSPOLE * costheta**2 / _CP_TOTAL_MASS)
    )
    xacc = temp - _CP_POLEMASS_LENGTH * thetaacc * costheta / _CP_TOTAL_MASS
    x = x + _CP_TAU * x_dot
    x_dot = x_dot + _CP_TAU * xacc
    theta = theta + _CP_TAU * theta_dot
    theta_dot = theta_dot + _CP_TAU * thetaacc
    phys = (x, x_dot, theta, theta_dot)
    terminated = (x < -_CP_X_THRESHOLD or x > _CP_X_THRESHOLD
                  or theta < -_CP_THETA_THRESHOLD or theta > _CP_THETA_THRESHOLD)
    return phys, np.array(phys, dtype=np.float64), 1.0, terminated


# -- acrobot -----------------------------------------------------------------

_AB_DT = 0.2
_AB_LINK_LENGTH_1 = 1.0
_AB_LINK_MASS_1 = 1.0
_AB_LINK_MASS_2 = 1.0
_AB_LINK_COM_POS_1 = 0.5
_AB_LINK_COM_POS_2 = 0.5
_AB_LINK_MOI = 1.0
_AB_MAX_VEL_1 = 4 * math.pi
_AB_MAX_VEL_2 = 9 * math.pi
_AB_TORQUES = (-1.0, 0.0, 1.0)


def _acrobot_dsdt(theta1, theta2, dtheta1, dtheta2, torque):
    m1 = _AB_LINK_MASS_1
    m2 = _AB_LINK_MASS_2
    l1 = _AB_LINK_LENGTH_1
    lc1 = _AB_LINK_COM_POS_1
    lc2 = _AB_LINK_COM_POS_2
    i1 = _AB_LINK_MOI
    i2 = _AB_LINK_MOI
    g = 9.8
    d1 = m1 * lc1**2 + m2 * (l1**2 + lc2**2 + 2 * l1 * lc2 * math.cos(theta2)) + i1 + i2
    d2 = m2 * (lc2**2 + l1 * lc2 * math.cos(theta2)) + i2
    phi2 = m2 * lc2 * g * math.cos(theta1 + theta2 - math.pi / 2.0)
    phi1 = (
        -m2 * l1 * lc2 * dtheta2**2 * math.sin(theta2)
        - 2 * m2 * l1 * lc2 * dtheta2 * dtheta1 * math.sin(theta2)
        + (m1 * lc1 + m2 * l1) * g * math.cos(theta1 - math.pi / 2)
        + phi2
    )
    # "book" formulation of the second joint's acceleration
    ddtheta2 = (
        torque + d2 / d1 * phi1 - m2 * l1 * lc2 * dtheta1**2 * math.sin(theta2) - phi2
    ) / (m2 * lc2**2 + i2 - d2**2 / d1)
    ddtheta1 = -(d2 * ddtheta2 + phi1) / d1
    return dtheta1, dtheta2, ddtheta1, ddtheta2


def _rk4_step(y, torque, dt):
    dt2 = dt / 2.0
    k1 = _acrobot_dsdt(y[0], y[1], y[2], y[3], torque)
    k2 = _acrobot_dsdt(y[0] + dt2 * k1[0], y[1] + dt2 * k1[1],
                       y[2] + dt2 * k1[2], y[3] + dt2 * k1[3], torque)
    k3 = _acrobot_dsdt(y[0] + dt2 * k2[0], y[1] + dt2 * k2[1],
                       y[2] + dt2 * k2[2], y[3] + dt2 * k2[3], torque)
    k4 = _acrobot_dsdt(y[0] + dt * k3[0], y[1] + dt * k3[1],
                       y[2] + dt * k3[2], y[3] + dt * k3[3], torque)
    return tuple(
        y[j] + dt / 6.0 * (k1[j] + 2 * k2[j] + 2 * k3[j] + k4[j]) for j in range(4)
    )


def _wrap(x: float, m: float, big: float) -> float:
    diff = big - m
    while x > big:
        x -= diff
    while x < m:
        x += diff
    return x


def _acrobot_obs(phys):
    theta1, theta2, dtheta1, dtheta2 = phys
    return np.array([math.cos(theta1), math.sin(theta1),
                     math.cos(theta2), math.sin(theta2),
                     dtheta1, dtheta2], dtype=np.float64)


def _acrobot_reset(rng: np.random.Generator):
    phys = tuple(float(v) for v in rng.uniform(-0.1, 0.1, 4))
    return phys, _acrobot_obs(phys)


def _acrobot_step(phys, action: int):
    torque = _AB_TORQUES[action]
    ns = _rk4_step(phys, torque, _AB_DT)
    theta1 = _wrap(ns[0], -math.pi, math.pi)
    theta2 = _wrap(ns[1], -math.pi, math.pi)
    dtheta1 = min(max(ns[2], -_AB_MAX_VEL_1), _AB_MAX_VEL_1)
    dtheta2 = min(max(ns[3], -_AB_MAX_VEL_2), _AB_MAX_VEL_2)
    phys = (theta1, theta2, dtheta1, dtheta2)
    terminated = -math.cos(theta1) - math.cos(theta2 + theta1) > 1.0
    reward = 0.0 if terminated else -1.0
    return phys, _acrobot_obs(phys), reward, terminated


# -- mountain car ------------------------------------------------------------

_MC_MIN_POSITION = -1.2
_MC_MAX_POSITION = 0.6
_MC_MAX_SPEED = 0.07
_MC_GOAL_POSITION = 0.5
_MC_GOAL_VELOCITY = 0.0
_MC_FORCE = 0.001
_MC_GRAVITY = 0.0025


def _mountaincar_reset(rng: np.random.Generator):
    phys = (float(rng.uniform(-0.6, -0.4)), 0.0)
    return phys, np.array(phys, dtype=np.float64)


def _mountaincar_step(phys, action: int):
    position, velocity = phys
    velocity += (action - 1) * _MC_FORCE + math.cos(3 * position) * (-_MC_GRAVITY)
    velocity = min(max(velocity, -_MC_MAX_SPEED), _MC_MAX_SPEED)
    position += velocity
    position = min(max(position, _MC_MIN_POSITION), _MC_MAX_POSITION)
    if position == _MC_MIN_POSITION and velocity < 0:
        velocity = 0.0
    phys = (position, velocity)
    terminated = position >= _MC_GOAL_POSITION and velocity >= _MC_GOAL_VELOCITY
    return phys, np.array(phys, dtype=np.float64), -1.0, terminated


_RESET = {
    "cartpole": _cartpole_reset,
    "acrobot": _acrobot_reset,
    "mountaincar": _mountaincar_reset,
}
_STEP = {
    "cartpole": _cartpole_step,
    "acrobot": _acrobot_step,
    "mountaincar": _mountaincar_step,
}


def reset(spec: EnvSpec, seed) -> tuple[EnvState, np.ndarray]:
    """Start an episode; `seed` is an integer or an existing Generator.

    Passing a Generator lets several episodes draw from one lifetime stream.
    """
    rng = _as_rng(seed)
    phys, obs = _RESET[spec.name](rng)
    return EnvState(spec=spec, phys=phys, step_count=0, rng=rng), obs


def step(state: EnvState, action: int) -> tuple[np.ndarray, float, bool]:
    """Advance one timestep; returns (observation, reward, done)."""
    if state.done:
        raise RuntimeError("episode is over; reset before stepping again")
    if not 0 <= action < state.spec.n_actions:
        raise ValueError(f"action {action} outside [0, {state.spec.n_actions})")
    state.phys, obs, reward, terminated = _STEP[state.spec.name](state.phys, int(action))
    state.step_count += 1
    state.done = terminated or state.step_count >= state.spec.max_steps
    return obs, reward, state.done


def episode_rollout(genome: Genome, spec: EnvSpec, net_state: NetworkState,
                    seed) -> float:
    """One episode under the network policy; returns the summed reward.

    The network keeps whatever plastic state it accumulates; the caller owns
    episode-boundary resets of its sensory state.
    """
    env_state, obs = reset(spec, seed)
    total = 0.0
    prev_reward = 0.0
    while True:
        action = env_step(net_state, genome, obs, prev_reward)
        obs, reward, done = step(env_state, action)
        total += reward
        prev_reward = reward
        if done:
            return total


def policy_rollout(spec: EnvSpec, seed, policy: Callable[[np.ndarray, float], int]) -> float:
    """Episode score for an arbitrary (obs, prev_reward) -> action policy."""
    env_state, obs = reset(spec, seed)
    total = 0.0
    prev_reward = 0.0
    while True:
        action = policy(obs, prev_reward)
        obs, reward, done = step(env_state, action)
        total += reward
        prev_reward = reward
        if done:
            return total


def trajectory(spec: EnvSpec, seed, actions) -> list[tuple]:
    """Drive an environment with a fixed action sequence, resetting on done.

    Returns one row per step: (step, *physical_state_after, action, reward).
    Episode resets draw from the same stream, so the whole trajectory is a
    function of (seed, actions).
    """
    state, _ = reset(spec, seed)
    rows = []
    for i, action in enumerate(actions):
        _, reward, done = step(state, int(action))
        rows.append((i, *state.phys, int(action), reward))
        if done:
            state, _ = reset(spec, state.rng)
    return rows
