"""Deterministic plant model of the two-servo, two-thruster superlimb.

Servos approach their targets first-order with a slew-rate limit; thruster
rpm approaches the PWM-commanded speed first-order (exact exponential
discretization, so held commands decay analytically); thrust follows the
signed square law T = c * n * |n|.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .mapper import PWM_NEUTRAL, SuperlimbCommand, speed_from_pwm


@dataclass(frozen=True)
class PlantConfig:
    tau_servo: float = 0.1        # s
    servo_rate_max: float = 180.0  # deg/s
    tau_thruster: float = 0.3     # s
    c_thrust: float = 2.5e-5      # N per rpm^2
    max_speed: float = 1000.0     # rpm
    sim_rate: float = 100.0       # Hz fixed integration step


@dataclass
class SuperlimbState:
    servo_left: float = 0.0
    servo_right: float = 0.0
    rpm_left: float = 0.0
    rpm_right: float = 0.0
    thrust_left: float = 0.0
    thrust_right: float = 0.0
    t: float = 0.0

    def copy(self) -> "SuperlimbState":
        return replace(self)


def _servo_step(angle, target, dt, plant: PlantConfig):
    delta = (target - angle) * (1.0 - math.exp(-dt / plant.tau_servo))
    limit = plant.servo_rate_max * dt
    delta = min(limit, max(-limit, delta))
    return min(90.0, max(-90.0, angle + delta))


def _rpm_step(rpm, target, dt, plant: PlantConfig):
    nxt = target + (rpm - target) * math.exp(-dt / plant.tau_thruster)
    return min(plant.max_speed, max(-plant.max_speed, nxt))


class Superlimb:
    """Stepped simulation holding the latest actuator targets.

    Command fields set new targets; None fields hold the previous target.
    """

    def __init__(self, plant: PlantConfig | None = None, state: SuperlimbState | None = None):
        self.plant = plant or PlantConfig()
        self.state = state.copy() if state else SuperlimbState()
        self.target_servo = [self.state.servo_left, self.state.servo_right]
        self.target_speed = [self.state.rpm_left, self.state.rpm_right]

    def apply(self, command: SuperlimbCommand):
        if command.servo_left is not None:
            self.target_servo[0] = command.servo_left
        if command.servo_right is not None:
            self.target_servo[1] = command.servo_right
        if command.pwm_left is not None:
            self.target_speed[0] = speed_from_pwm(command.pwm_left, self.plant.max_speed)
        elif command.speed_left is not None:
            self.target_speed[0] = command.speed_left
        if command.pwm_right is not None:
            self.target_speed[1] = speed_from_pwm(command.pwm_right, self.plant.max_speed)
        elif command.speed_right is not None:
            self.target_speed[1] = command.speed_right

    def step(self, dt) -> SuperlimbState:
        if dt <= 0:
            raise ValueError("dt must be positive")
        s = self.state
        s.servo_left = _servo_step(s.servo_left, self.target_servo[0], dt, self.plant)
        s.servo_right = _servo_step(s.servo_right, self.target_servo[1], dt, self.plant)
        s.rpm_left = _rpm_step(s.rpm_left, self.target_speed[0], dt, self.plant)
        s.rpm_right = _rpm_step(s.rpm_right, self.target_speed[1], dt, self.plant)
        s.thrust_left = self.plant.c_thrust * s.rpm_left * abs(s.rpm_left)
        s.thrust_right = self.plant.c_thrust * s.rpm_right * abs(s.rpm_right)
        s.t += dt
        return s.copy()

    def command_pwm(self):
        """PWM encoding of the current speed targets (for telemetry/traces)."""
        from .mapper import pwm_from_speed
        return (pwm_from_speed(self.target_speed[0], self.plant.max_speed),
                pwm_from_speed(self.target_speed[1], self.plant.max_speed))


def step(state: SuperlimbState, command: SuperlimbCommand, dt, plant: PlantConfig) -> SuperlimbState:
    """Single pure step: apply the command's targets, integrate dt."""
    limb = Superlimb(plant, state)
    limb.apply(command)
    return limb.step(dt)


TRACE_COLUMNS = ("t", "cmd_servo_l", "cmd_servo_r", "fb_servo_l", "fb_servo_r",
                 "cmd_pwm_l", "cmd_pwm_r", "fb_rpm_l", "fb_rpm_r",
                 "thrust_l", "thrust_r")


@dataclass
class Trace:
    rows: np.ndarray  # (n, len(TRACE_COLUMNS))

    def column(self, name):
        return self.rows[:, TRACE_COLUMNS.index(name)]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(TRACE_COLUMNS)
            for row in self.rows:
                writer.writerow([repr(float(v)) for v in row])

    def __len__(self):
        return len(self.rows)


def run_trace(commands, plant: PlantConfig | None = None, duration=None,
              state: SuperlimbState | None = None) -> Trace:
    """Integrate a timestamped command sequence at the fixed sim rate.

    `commands` is [(t, SuperlimbCommand)] in nondecreasing time order; each
    command is applied at the first step whose time has reached it. Emits one
    row per step with both the command (current targets) and the feedback.
    """
    commands = list(commands)
    times = [t for t, _ in commands]
    if any(b < a for a, b in zip(times, times[1:])):
        raise ValueError("commands must be in nondecreasing time order")
    plant = plant or PlantConfig()
    if duration is None:
        duration = (times[-1] + 2.0) if times else 1.0
    limb = Superlimb(plant, state)
    dt = 1.0 / plant.sim_rate
    n_steps = int(round(duration * plant.sim_rate))
    rows = np.zeros((n_steps, len(TRACE_COLUMNS)))
    idx = 0
    t = limb.state.t
    for k in range(n_steps):
        while idx < len(commands) and commands[idx][0] <= t + 1e-12:
            limb.apply(commands[idx][1])
            idx += 1
        s = limb.step(dt)
        t = s.t
        pwm_l, pwm_r = limb.command_pwm()
        rows[k] = (s.t, limb.target_servo[0], limb.target_servo[1],
                   s.servo_left, s.servo_right, pwm_l, pwm_r,
                   s.rpm_left, s.rpm_right, s.thrust_left, s.thrust_right)
    return Trace(rows=rows)
