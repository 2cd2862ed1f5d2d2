"""Two-channel diver intention recognition driving a simulated superlimb.

Head motions are classified by DTW against barycenter-averaged templates;
throat hums (five musical scales) by an LSTM over 20x20 MFCC matrices. Three
mapping schemes translate tokens into two-servo / two-thruster commands, and
a deterministic plant model produces the feedback traces.
"""

__version__ = "0.1.0"

from .signal_io import AudioSegment, ImuSample, SlidingWindow, ReplaySource  # noqa: F401
from .preprocess import SegmenterConfig, MotionSegment, EnergyEnvelope  # noqa: F401
from .head_dtw import HeadMotionClass, dtw, dba_average, build_templates, classify_head  # noqa: F401
from .mfcc import MfccConfig, mel_filterbank, mfcc, fix_time_dim, mfcc_matrix  # noqa: F401
from .nn import ScaleClass, TrainConfig, train, predict, lstm_forward, lstm_backward  # noqa: F401
from .mapper import (  # noqa: F401
    ActionVector, CommandMapper, ControlMode, Duration, GainConfig,
    SuperlimbCommand, map_head_proportional, map_multimodal_table3,
    map_throat_table2, pwm_from_speed,
)
from .superlimb_sim import PlantConfig, Superlimb, SuperlimbState, run_trace  # noqa: F401
