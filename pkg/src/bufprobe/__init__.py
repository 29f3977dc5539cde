"""Buffer characterization for bottleneck devices with hysteresis drop-tail queues."""

from .errors import BufprobeError, ConfigurationError, NoEstimateError
from .experiment import ExperimentConfig, characterize, infer_unit
from .model import (
    BufferConfig,
    Capture,
    CapturePoint,
    FlowSpec,
    PacketRecord,
    RateProfile,
    Unit,
    build_schedule,
    compute_metrics,
    gap_to_rate,
    rate_to_gap,
)
from .occupancy import analyze_physical, limits_from_occupancy, match_captures, occupancy_samples
from .remote import analyze_remote
from .simulator import SimResult, simulate

__version__ = "0.1.0"
