import numpy as np
import pytest

from aqualimb.head_dtw import HeadMotionClass
from aqualimb.mapper import (
    ActionVector, CommandMapper, ControlMode, Duration, GainConfig,
    SuperlimbCommand, map_head_proportional, map_multimodal_table3,
    map_throat_table2, pwm_from_speed, speed_from_pwm,
)
from aqualimb.nn import ScaleClass

G = GainConfig()


class TestPwm:
    def test_zero_is_neutral(self):
        assert pwm_from_speed(0.0, 1000.0) == 1500

    def test_range_endpoints(self):
        assert pwm_from_speed(1000.0, 1000.0) == 1900
        assert pwm_from_speed(-1000.0, 1000.0) == 1100

    def test_clamps(self):
        assert pwm_from_speed(-2000.0, 1000.0) == 1100
        assert pwm_from_speed(99999.0, 1000.0) == 1900

    def test_inverse(self):
        for s in (-1000.0, -250.0, 0.0, 400.0, 1000.0):
            assert speed_from_pwm(pwm_from_speed(s, 1000.0), 1000.0) == s

    def test_bad_max_speed(self):
        with pytest.raises(ValueError):
            pwm_from_speed(10.0, 0.0)


#: Table I rows: motion, angle symbol value, expected per-side factors
TABLE1_ROWS = [
    (HeadMotionClass.FLEXION, "speed", lambda a, g: (-g.k1 * a, -g.k1 * a)),
    (HeadMotionClass.EXTENSION, "speed", lambda a, g: (g.k1 * a, g.k1 * a)),
    (HeadMotionClass.BEND_LEFT, "servo", lambda a, g: (g.k2 * a, g.k2 * a)),
    (HeadMotionClass.BEND_RIGHT, "servo", lambda a, g: (-g.k2 * a, -g.k2 * a)),
    (HeadMotionClass.ROTATE_LEFT, "servo", lambda a, g: (-g.k3 * a, g.k3 * a)),
    (HeadMotionClass.ROTATE_RIGHT, "servo", lambda a, g: (g.k3 * a, -g.k3 * a)),
]


class TestTable1:
    @pytest.mark.parametrize("motion,kind,expect", TABLE1_ROWS)
    def test_rows_verbatim(self, motion, kind, expect):
        angle = 40.0
        cmd = map_head_proportional(motion, angle, G)
        want_l, want_r = expect(angle, G)
        if kind == "speed":
            assert (cmd.speed_left, cmd.speed_right) == (want_l, want_r)
            assert cmd.servo_left is None and cmd.servo_right is None
        else:
            assert (cmd.servo_left, cmd.servo_right) == (want_l, want_r)
            assert cmd.speed_left is None and cmd.speed_right is None

    def test_flexion_spec_example(self):
        g = GainConfig(k1=2.0)
        cmd = map_head_proportional(HeadMotionClass.FLEXION, 47.0, g)
        assert (cmd.speed_left, cmd.speed_right) == (-94.0, -94.0)

    def test_right_rotation_spec_example(self):
        g = GainConfig(k3=1.0)
        cmd = map_head_proportional(HeadMotionClass.ROTATE_RIGHT, 70.0, g)
        assert (cmd.servo_left, cmd.servo_right) == (70.0, -70.0)

    def test_zero_excursion(self):
        cmd = map_head_proportional(HeadMotionClass.BEND_LEFT, 0.0, G)
        assert (cmd.servo_left, cmd.servo_right) == (0.0, 0.0)

    def test_servo_clamped(self):
        g = GainConfig(k2=2.0)
        cmd = map_head_proportional(HeadMotionClass.BEND_LEFT, 80.0, g)
        assert (cmd.servo_left, cmd.servo_right) == (90.0, 90.0)

    def test_left_right_antisymmetry(self):
        for left, right in [(HeadMotionClass.BEND_LEFT, HeadMotionClass.BEND_RIGHT),
                            (HeadMotionClass.ROTATE_LEFT, HeadMotionClass.ROTATE_RIGHT)]:
            a = map_head_proportional(left, 30.0, G)
            b = map_head_proportional(right, 30.0, G)
            assert a.servo_left == -b.servo_left
            assert a.servo_right == -b.servo_right

    def test_negative_angle_rejected(self):
        with pytest.raises(ValueError):
            map_head_proportional(HeadMotionClass.FLEXION, -1.0, G)


#: Table II rows: scale, duration_ms, expected (kind, left_factor, right_factor)
TABLE2_ROWS = [
    (ScaleClass.DO, 300.0, "servo", lambda a, g: (a * g.k4, a * g.k4)),
    (ScaleClass.DO, 700.0, "servo", lambda a, g: (-a * g.k4, -a * g.k4)),
    (ScaleClass.RE, 300.0, "servo", lambda a, g: (-a * g.k4, a * g.k4)),
    (ScaleClass.RE, 700.0, "servo", lambda a, g: (a * g.k4, -a * g.k4)),
    (ScaleClass.MI, 300.0, "speed", lambda a, g: (a * g.k5, a * g.k5)),
    (ScaleClass.MI, 700.0, "speed", lambda a, g: (-a * g.k5, -a * g.k5)),
]


class TestTable2:
    @pytest.mark.parametrize("scale,dur,kind,expect", TABLE2_ROWS)
    def test_rows_verbatim(self, scale, dur, kind, expect):
        a = 0.5
        cmd = map_throat_table2(scale, dur, a, G)
        want_l, want_r = expect(a, G)
        if kind == "servo":
            assert (cmd.servo_left, cmd.servo_right) == (want_l, want_r)
        else:
            assert (cmd.speed_left, cmd.speed_right) == (want_l, want_r)

    def test_do_short_spec_example(self):
        cmd = map_throat_table2(ScaleClass.DO, 300.0, 0.5, GainConfig(k4=90.0))
        assert (cmd.servo_left, cmd.servo_right) == (45.0, 45.0)

    def test_mi_long_spec_example(self):
        cmd = map_throat_table2(ScaleClass.MI, 700.0, 1.0, GainConfig(k5=1000.0))
        assert (cmd.speed_left, cmd.speed_right) == (-1000.0, -1000.0)
        assert (cmd.pwm_left, cmd.pwm_right) == (1100, 1100)

    def test_zero_amplitude(self):
        cmd = map_throat_table2(ScaleClass.RE, 300.0, 0.0, G)
        assert (cmd.servo_left, cmd.servo_right) == (0.0, 0.0)

    @pytest.mark.parametrize("scale", [ScaleClass.FA, ScaleClass.SO])
    def test_fa_so_rejected(self, scale):
        with pytest.raises(ValueError):
            map_throat_table2(scale, 300.0, 0.5, G)

    def test_duration_boundary(self):
        short = map_throat_table2(ScaleClass.DO, 499.999, 0.5, G)
        long_ = map_throat_table2(ScaleClass.DO, 500.0, 0.5, G)
        assert short.servo_left > 0 > long_.servo_left


def vec(scale=None, dur=None, head=None):
    return ActionVector(scale=scale, duration=dur, head=head)


#: all 16 Table III rows: (vector, mode, expected effect on a fresh mapper)
class TestTable3:
    def test_do_short_accelerates_left(self):
        out, mode = map_multimodal_table3(vec(ScaleClass.DO, Duration.SHORT),
                                          ControlMode.THRUSTER_SPEED, G)
        assert out.accel_left == G.k_step and out.accel_right is None
        assert mode is ControlMode.THRUSTER_SPEED

    def test_do_long_decelerates_left(self):
        out, _ = map_multimodal_table3(vec(ScaleClass.DO, Duration.LONG),
                                       ControlMode.THRUSTER_SPEED, G)
        assert out.accel_left == -G.k_step and out.accel_right is None

    def test_re_rows(self):
        out, _ = map_multimodal_table3(vec(ScaleClass.RE, Duration.SHORT),
                                       ControlMode.THRUSTER_SPEED, G)
        assert out.accel_right == G.k_step and out.accel_left is None
        out, _ = map_multimodal_table3(vec(ScaleClass.RE, Duration.LONG),
                                       ControlMode.THRUSTER_SPEED, G)
        assert out.accel_right == -G.k_step

    @pytest.mark.parametrize("dur", [Duration.SHORT, Duration.LONG])
    def test_mi_stops_both(self, dur):
        out, _ = map_multimodal_table3(vec(ScaleClass.MI, dur),
                                       ControlMode.THRUSTER_SPEED, G)
        assert out.stop

    def test_fa_rows_accelerate_both(self):
        out, _ = map_multimodal_table3(vec(ScaleClass.FA, Duration.SHORT),
                                       ControlMode.THRUSTER_SPEED, G)
        assert (out.accel_left, out.accel_right) == (G.k_step, G.k_step)
        out, _ = map_multimodal_table3(vec(ScaleClass.FA, Duration.LONG),
                                       ControlMode.THRUSTER_SPEED, G)
        assert (out.accel_left, out.accel_right) == (-G.k_step, -G.k_step)

    @pytest.mark.parametrize("dur", [Duration.SHORT, Duration.LONG])
    @pytest.mark.parametrize("mode", list(ControlMode))
    def test_so_switches_mode_no_motion(self, dur, mode):
        out, new_mode = map_multimodal_table3(vec(ScaleClass.SO, dur), mode, G)
        assert out.mode_switch
        assert new_mode is mode.toggled()
        assert out.accel_left is None and out.servo_left is None and not out.stop

    @pytest.mark.parametrize("head,want", [
        (HeadMotionClass.ROTATE_LEFT, (-90.0, None)),
        (HeadMotionClass.ROTATE_RIGHT, (90.0, None)),
        (HeadMotionClass.BEND_LEFT, (90.0, None)),
        (HeadMotionClass.BEND_RIGHT, (-90.0, None)),
        (HeadMotionClass.EXTENSION, (-90.0, -90.0)),
        (HeadMotionClass.FLEXION, (90.0, 90.0)),
    ])
    def test_head_rows_verbatim(self, head, want):
        out, mode = map_multimodal_table3(vec(head=head), ControlMode.SERVO_ANGLE, G)
        assert (out.servo_left, out.servo_right) == want
        assert mode is ControlMode.SERVO_ANGLE

    def test_thruster_rows_held_in_servo_mode(self):
        out, mode = map_multimodal_table3(vec(ScaleClass.DO, Duration.SHORT),
                                          ControlMode.SERVO_ANGLE, G)
        assert out == type(out)()
        assert mode is ControlMode.SERVO_ANGLE

    def test_servo_rows_held_in_thruster_mode(self):
        out, _ = map_multimodal_table3(vec(head=HeadMotionClass.FLEXION),
                                       ControlMode.THRUSTER_SPEED, G)
        assert out == type(out)()

    def test_malformed_vectors_rejected(self):
        with pytest.raises(ValueError):
            ActionVector(scale=ScaleClass.DO, duration=Duration.SHORT,
                         head=HeadMotionClass.FLEXION)
        with pytest.raises(ValueError):
            ActionVector()
        with pytest.raises(ValueError):
            ActionVector(scale=ScaleClass.DO)


class TestModeMachine:
    def test_so_parity(self):
        rng = np.random.default_rng(0)
        for _ in range(30):
            mapper = CommandMapper("multimodal")
            start = mapper.mode
            n_so = 0
            for _ in range(rng.integers(1, 40)):
                if rng.random() < 0.4:
                    mapper.apply_vector(vec(ScaleClass.SO, Duration.SHORT))
                    n_so += 1
                else:
                    scale = rng.choice([ScaleClass.DO, ScaleClass.RE, ScaleClass.MI, ScaleClass.FA])
                    mapper.apply_vector(vec(scale, Duration.SHORT))
            if n_so % 2 == 0:
                assert mapper.mode is start
            else:
                assert mapper.mode is start.toggled()

    def test_non_so_never_changes_mode(self):
        mapper = CommandMapper("multimodal", mode=ControlMode.THRUSTER_SPEED)
        for scale in (ScaleClass.DO, ScaleClass.RE, ScaleClass.MI, ScaleClass.FA):
            for dur in Duration:
                mapper.apply_vector(vec(scale, dur))
                assert mapper.mode is ControlMode.THRUSTER_SPEED
        for head in HeadMotionClass:
            mapper.apply_vector(vec(head=head))
            assert mapper.mode is ControlMode.THRUSTER_SPEED


class TestMapperIntegration:
    def test_do_short_spec_example(self):
        mapper = CommandMapper("multimodal", GainConfig(k_step=200.0),
                               mode=ControlMode.THRUSTER_SPEED)
        cmd = mapper.apply_vector(vec(ScaleClass.DO, Duration.SHORT))
        assert cmd.speed_left == 200.0
        assert cmd.pwm_left == 1580
        assert cmd.pwm_right is None and cmd.speed_right is None

    def test_extension_spec_example(self):
        mapper = CommandMapper("multimodal", mode=ControlMode.SERVO_ANGLE)
        cmd = mapper.apply_vector(vec(head=HeadMotionClass.EXTENSION))
        assert (cmd.servo_left, cmd.servo_right) == (-90.0, -90.0)

    def test_so_holds_everything(self):
        mapper = CommandMapper("multimodal")
        cmd = mapper.apply_vector(vec(ScaleClass.SO, Duration.LONG))
        assert cmd == SuperlimbCommand()

    def test_acceleration_accumulates_and_clamps(self):
        mapper = CommandMapper("multimodal", GainConfig(k_step=400.0, max_speed=1000.0),
                               mode=ControlMode.THRUSTER_SPEED)
        for want in (400.0, 800.0, 1000.0, 1000.0):
            cmd = mapper.apply_vector(vec(ScaleClass.DO, Duration.SHORT))
            assert cmd.speed_left == want
        assert mapper.apply_vector(vec(ScaleClass.DO, Duration.SHORT)).pwm_left == 1900

    def test_stop_zeroes_both(self):
        mapper = CommandMapper("multimodal", mode=ControlMode.THRUSTER_SPEED)
        mapper.apply_vector(vec(ScaleClass.FA, Duration.SHORT))
        cmd = mapper.apply_vector(vec(ScaleClass.MI, Duration.SHORT))
        assert (cmd.pwm_left, cmd.pwm_right) == (1500, 1500)
        assert mapper.speed_left == 0.0 and mapper.speed_right == 0.0

    def test_randomized_commands_respect_ranges(self):
        rng = np.random.default_rng(3)
        mapper = CommandMapper("multimodal")
        scales = list(ScaleClass)
        heads = list(HeadMotionClass)
        for _ in range(500):
            if rng.random() < 0.6:
                v = vec(scales[rng.integers(0, 5)], list(Duration)[rng.integers(0, 2)])
            else:
                v = vec(head=heads[rng.integers(0, 6)])
            cmd = mapper.apply_vector(v)
            for pwm in (cmd.pwm_left, cmd.pwm_right):
                assert pwm is None or 1100 <= pwm <= 1900
            for servo in (cmd.servo_left, cmd.servo_right):
                assert servo is None or -90.0 <= servo <= 90.0

    def test_set_gain_applies_to_next_command(self):
        mapper = CommandMapper("throat")
        before = mapper.apply_throat(ScaleClass.DO, 300.0, 0.5)
        assert before.servo_left == 45.0
        mapper.set_gain("k4", 45.0)
        after = mapper.apply_throat(ScaleClass.DO, 300.0, 0.5)
        assert after.servo_left == 22.5

    def test_gain_validation(self):
        with pytest.raises(ValueError):
            GainConfig(k1=-2.0)
        with pytest.raises(ValueError):
            CommandMapper("sideways")


class TestCommandInvariants:
    def test_command_validates_ranges(self):
        with pytest.raises(ValueError):
            SuperlimbCommand(servo_left=95.0)
        with pytest.raises(ValueError):
            SuperlimbCommand(pwm_left=2000)

    def test_command_index_mapping(self):
        assert [m.command_index for m in (
            HeadMotionClass.BEND_RIGHT, HeadMotionClass.BEND_LEFT,
            HeadMotionClass.EXTENSION, HeadMotionClass.FLEXION,
            HeadMotionClass.ROTATE_LEFT, HeadMotionClass.ROTATE_RIGHT,
        )] == [1, 2, 3, 4, 5, 6]

    def test_duration_from_ms(self):
        assert Duration.from_ms(300.0) is Duration.SHORT
        assert Duration.from_ms(700.0) is Duration.LONG
        assert Duration.from_ms(500.0) is Duration.LONG
