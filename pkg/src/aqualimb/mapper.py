"""Token-to-command translation for the three control schemes.

Scheme "head": proportional control from head motions and their Euler
excursions. Scheme "throat": servo angles / thruster speeds from musical
scale, duration class and amplitude. Scheme "multimodal": action vectors
drive incremental thruster speed and absolute servo targets, with the "so"
scale toggling between servo-angle and thruster-speed control.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

from .head_dtw import HeadMotionClass
from .nn import ScaleClass

PWM_NEUTRAL = 1500
PWM_MIN = 1100
PWM_MAX = 1900
SERVO_LIMIT = 90.0

#: fragments shorter than this are "short", at or above it "long"
SHORT_LONG_MS = 500.0


class Duration(Enum):
    SHORT = "short"
    LONG = "long"

    @classmethod
    def from_ms(cls, duration_ms) -> "Duration":
        return cls.SHORT if duration_ms < SHORT_LONG_MS else cls.LONG


class ControlMode(Enum):
    SERVO_ANGLE = "servo_angle"
    THRUSTER_SPEED = "thruster_speed"

    def toggled(self) -> "ControlMode":
        return (ControlMode.THRUSTER_SPEED if self is ControlMode.SERVO_ANGLE
                else ControlMode.SERVO_ANGLE)


@dataclass(frozen=True)
class GainConfig:
    """Scheme gains; the paper names the symbols, the values are tunable."""

    k1: float = 2.0      # rpm per degree of pitch (extension/flexion)
    k2: float = 1.0      # servo degrees per degree of roll (bending)
    k3: float = 1.0      # servo degrees per degree of yaw (rotation)
    k4: float = 90.0     # servo degrees per amplitude unit (Table II)
    k5: float = 1000.0   # rpm per amplitude unit (Table II)
    k_step: float = 200.0    # thruster acceleration step, rpm (Table III)
    max_speed: float = 1000.0  # rpm at the PWM range ends
    reject_confidence: float = 0.5
    head_reject_margin: float = 1.75

    def __post_init__(self):
        for name in ("k1", "k2", "k3", "k4", "k5", "k_step", "max_speed"):
            if getattr(self, name) <= 0:
                raise ValueError(f"gain {name} must be positive")

    def with_value(self, name, value) -> "GainConfig":
        return replace(self, **{name: value})


def pwm_from_speed(speed, max_speed) -> int:
    """Linear symmetric map: -max -> 1100, 0 -> 1500, +max -> 1900; clamps."""
    if max_speed <= 0:
        raise ValueError("max_speed must be positive")
    frac = min(1.0, max(-1.0, speed / max_speed))
    return int(round(PWM_NEUTRAL + 400.0 * frac))


def speed_from_pwm(pwm, max_speed) -> float:
    pwm = min(PWM_MAX, max(PWM_MIN, pwm))
    return (pwm - PWM_NEUTRAL) / 400.0 * max_speed


def clamp_servo(angle) -> float:
    return min(SERVO_LIMIT, max(-SERVO_LIMIT, angle))


@dataclass(frozen=True)
class SuperlimbCommand:
    """Actuator targets; None fields mean hold the previous target.

    Thruster targets carry both the rpm request and its PWM encoding.
    """

    servo_left: float | None = None
    servo_right: float | None = None
    speed_left: float | None = None
    speed_right: float | None = None
    pwm_left: int | None = None
    pwm_right: int | None = None

    def __post_init__(self):
        for v in (self.servo_left, self.servo_right):
            if v is not None and not -SERVO_LIMIT <= v <= SERVO_LIMIT:
                raise ValueError(f"servo target {v} outside +-{SERVO_LIMIT}")
        for v in (self.pwm_left, self.pwm_right):
            if v is not None and not PWM_MIN <= v <= PWM_MAX:
                raise ValueError(f"PWM {v} outside [{PWM_MIN}, {PWM_MAX}]")


HOLD = SuperlimbCommand()


def _thruster_command(speed_left, speed_right, max_speed) -> SuperlimbCommand:
    return SuperlimbCommand(
        speed_left=speed_left,
        speed_right=speed_right,
        pwm_left=None if speed_left is None else pwm_from_speed(speed_left, max_speed),
        pwm_right=None if speed_right is None else pwm_from_speed(speed_right, max_speed),
    )


def map_head_proportional(motion: HeadMotionClass, angle, gains: GainConfig) -> SuperlimbCommand:
    """Table I: flexion/extension drive thruster speeds from pitch, bending
    drives both servos from roll, rotation drives the servos differentially
    from yaw. `angle` is the magnitude of the governing Euler excursion."""
    if angle < 0:
        raise ValueError("angle must be the nonnegative excursion magnitude")
    if motion is HeadMotionClass.FLEXION:
        return _thruster_command(-gains.k1 * angle, -gains.k1 * angle, gains.max_speed)
    if motion is HeadMotionClass.EXTENSION:
        return _thruster_command(gains.k1 * angle, gains.k1 * angle, gains.max_speed)
    if motion is HeadMotionClass.BEND_LEFT:
        v = clamp_servo(gains.k2 * angle)
        return SuperlimbCommand(servo_left=v, servo_right=v)
    if motion is HeadMotionClass.BEND_RIGHT:
        v = clamp_servo(-gains.k2 * angle)
        return SuperlimbCommand(servo_left=v, servo_right=v)
    if motion is HeadMotionClass.ROTATE_LEFT:
        return SuperlimbCommand(servo_left=clamp_servo(-gains.k3 * angle),
                                servo_right=clamp_servo(gains.k3 * angle))
    if motion is HeadMotionClass.ROTATE_RIGHT:
        return SuperlimbCommand(servo_left=clamp_servo(gains.k3 * angle),
                                servo_right=clamp_servo(-gains.k3 * angle))
    raise ValueError(f"unknown head motion {motion}")


def map_throat_table2(scale: ScaleClass, duration_ms, amplitude, gains: GainConfig) -> SuperlimbCommand:
    """Table II: do/re set servo angles, mi sets thruster speeds; the short
    duration class keeps the table's positive-amplitude sense, long flips it."""
    if not 0.0 <= amplitude <= 1.0:
        raise ValueError(f"amplitude must be in [0, 1], got {amplitude}")
    short = duration_ms < SHORT_LONG_MS
    a = amplitude
    if scale is ScaleClass.DO:
        v = clamp_servo(a * gains.k4 if short else -a * gains.k4)
        return SuperlimbCommand(servo_left=v, servo_right=v)
    if scale is ScaleClass.RE:
        v = clamp_servo(a * gains.k4)
        return (SuperlimbCommand(servo_left=-v, servo_right=v) if short
                else SuperlimbCommand(servo_left=v, servo_right=-v))
    if scale is ScaleClass.MI:
        s = a * gains.k5 if short else -a * gains.k5
        return _thruster_command(s, s, gains.max_speed)
    raise ValueError(f"scale {scale.value!r} is not mapped in the throat-only scheme")


@dataclass(frozen=True)
class ActionVector:
    """The fused intention triple; exactly one of (scale+duration) or head."""

    scale: ScaleClass | None = None
    duration: Duration | None = None
    head: HeadMotionClass | None = None

    def __post_init__(self):
        throat = self.scale is not None and self.duration is not None
        half_throat = (self.scale is None) != (self.duration is None)
        if half_throat:
            raise ValueError("scale and duration must be set together")
        if throat == (self.head is not None):
            raise ValueError("exactly one of (scale, duration) or head must be set")

    def __str__(self):
        return "({},{},{})".format(
            self.scale.value if self.scale else "null",
            self.duration.value if self.duration else "null",
            self.head.value.replace("_", " ") if self.head else "null",
        )


@dataclass(frozen=True)
class Table3Outcome:
    """Effect of one action vector: servo targets are absolute, thruster
    entries are rpm increments; stop zeroes both thrusters."""

    servo_left: float | None = None
    servo_right: float | None = None
    accel_left: float | None = None
    accel_right: float | None = None
    stop: bool = False
    mode_switch: bool = False


_TABLE3_SERVO = {
    HeadMotionClass.ROTATE_LEFT: (-90.0, None),
    HeadMotionClass.ROTATE_RIGHT: (90.0, None),
    HeadMotionClass.BEND_LEFT: (90.0, None),
    HeadMotionClass.BEND_RIGHT: (-90.0, None),
    HeadMotionClass.EXTENSION: (-90.0, -90.0),
    HeadMotionClass.FLEXION: (90.0, 90.0),
}


def map_multimodal_table3(vector: ActionVector, mode: ControlMode, gains: GainConfig):
    """Table III. Returns (Table3Outcome, new ControlMode).

    "so" toggles the mode in any duration; thruster rows act only in
    thruster-speed mode and servo rows only in servo-angle mode — rows for
    the inactive mode leave every actuator held.
    """
    if vector.scale is ScaleClass.SO:
        return Table3Outcome(mode_switch=True), mode.toggled()
    if vector.scale is not None:
        if mode is not ControlMode.THRUSTER_SPEED:
            return Table3Outcome(), mode
        k = gains.k_step if vector.duration is Duration.SHORT else -gains.k_step
        if vector.scale is ScaleClass.DO:
            return Table3Outcome(accel_left=k), mode
        if vector.scale is ScaleClass.RE:
            return Table3Outcome(accel_right=k), mode
        if vector.scale is ScaleClass.MI:
            return Table3Outcome(stop=True), mode
        if vector.scale is ScaleClass.FA:
            return Table3Outcome(accel_left=k, accel_right=k), mode
    if mode is not ControlMode.SERVO_ANGLE:
        return Table3Outcome(), mode
    left, right = _TABLE3_SERVO[vector.head]
    return Table3Outcome(servo_left=left, servo_right=right), mode


class CommandMapper:
    """Single-owner state machine turning tokens into absolute commands.

    Holds the control mode and the accumulated thruster speeds that Table
    III's accelerate rows integrate. Tokens must arrive in order.
    """

    def __init__(self, scheme="multimodal", gains: GainConfig | None = None,
                 mode: ControlMode = ControlMode.SERVO_ANGLE):
        if scheme not in ("head", "throat", "multimodal"):
            raise ValueError(f"unknown scheme {scheme!r}")
        self.scheme = scheme
        self.gains = gains or GainConfig()
        self.mode = mode
        self.speed_left = 0.0
        self.speed_right = 0.0

    def set_gain(self, name, value):
        self.gains = self.gains.with_value(name, value)

    def set_mode(self, mode: ControlMode):
        self.mode = mode

    def apply_head(self, motion: HeadMotionClass, angle) -> SuperlimbCommand:
        cmd = map_head_proportional(motion, angle, self.gains)
        self._track_speeds(cmd)
        return cmd

    def apply_throat(self, scale: ScaleClass, duration_ms, amplitude) -> SuperlimbCommand:
        cmd = map_throat_table2(scale, duration_ms, amplitude, self.gains)
        self._track_speeds(cmd)
        return cmd

    def apply_vector(self, vector: ActionVector) -> SuperlimbCommand:
        outcome, self.mode = map_multimodal_table3(vector, self.mode, self.gains)
        if outcome.stop:
            self.speed_left = 0.0
            self.speed_right = 0.0
            return _thruster_command(0.0, 0.0, self.gains.max_speed)
        left = right = None
        if outcome.accel_left is not None:
            self.speed_left = self._clamp_speed(self.speed_left + outcome.accel_left)
            left = self.speed_left
        if outcome.accel_right is not None:
            self.speed_right = self._clamp_speed(self.speed_right + outcome.accel_right)
            right = self.speed_right
        if left is not None or right is not None:
            return _thruster_command(left, right, self.gains.max_speed)
        if outcome.servo_left is not None or outcome.servo_right is not None:
            return SuperlimbCommand(servo_left=outcome.servo_left,
                                    servo_right=outcome.servo_right)
        return HOLD

    def _clamp_speed(self, v):
        return min(self.gains.max_speed, max(-self.gains.max_speed, v))

    def _track_speeds(self, cmd: SuperlimbCommand):
        if cmd.speed_left is not None:
            self.speed_left = self._clamp_speed(cmd.speed_left)
        if cmd.speed_right is not None:
            self.speed_right = self._clamp_speed(cmd.speed_right)
