"""Pupil detection, diameter-trace processing and RAPD scoring for eye sessions."""

from .analysis import Analysis, AnalysisConfig, analyze, format_report
from .detection import DetectionConfig, Frame, PupilMeasurement, Roi, detect_pupil
from .errors import RapdError
from .protocol import (AnalysisWindow, Eye, LedColor, StimulusEvent, StimulusProtocol, WindowConfig,
                       build_swinging_protocol, stimulation_windows, validate_protocol)
from .plot import render_report_plot
from .scoring import Classification, DefectSide, RapdResult, classify, compute_rapd, median, score_session
from .simulator import (BlinkSchedule, PlrParams, RenderConfig, expected_rapd, plr_diameter,
                        render_frame, simulate_session)
from .session_io import memory_session, read_session, write_session
from .trace import DiameterTrace, TraceConfig, assemble_trace, flag_artifacts, interpolate_gaps, low_pass

__version__ = "0.1.0"
