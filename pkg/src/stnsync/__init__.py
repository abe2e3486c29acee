"""Phase-synchronisation channel-pair selection and MKL behaviour classification for STN-LFP."""
from .errors import (BoundaryError, ConfigError, ConvergenceError, DataError, DegenerateError,
                     FormatError, IntegrityError, LabelError, ShapeError, StnSyncError, ValidationError)
from .signal_io import Recording, SynthConfig, load_recording, save_recording, synth_recording
from .sync import SyncReport, select_pair, sync_matrix, sync_measure
from .pipeline import PipelineConfig, prepare

__version__ = "0.1.0"
