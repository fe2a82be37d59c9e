"""Real-time and hardware-in-the-loop control simulation on an emulated ADDA card."""
from .calibration import CalibrationTable, calibrate, corrected_write
from .controllers import (
    DegreeTooHigh,
    PidController,
    PidGains,
    RstController,
    RstDesign,
    SingularSylvester,
    ZeroStaticGain,
    design_rst,
    solve_diophantine,
)
from .executor import (
    Reference,
    RunReport,
    TimeBase,
    TraceRecord,
    pace,
    read_compensated,
    run_loop,
    schedule_steps,
)
from .plant import PlantSpec, first_order, heat_exchanger, make_plant, plant_step, preset, static_gain
from .poly_lti import ContinuousTf, DiscreteLti, Polynomial, c2d_zoh, poly_add, poly_mul, shift
from .scenario import Scenario, ScenarioError, build_peer_law, parse_scenario, run
from .transport import HilClient, HilEndpointConfig, HilFrame, HilPeer, MsgType, decode_frame, encode_frame
from .vdevice import CardConfig, DelayModel, VirtualAddaCard, dac_transfer, dequantize, quantize

__version__ = "0.1.0"
