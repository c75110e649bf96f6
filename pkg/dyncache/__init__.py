__version__ = "0.1.0"

from .model import Association, NetworkConfig, Strategy, association_from_lengths, validate_config
from .placement import MiniFileIndex, Placement
from .scheduler import Schedule, ScheduleOptions, full_schedule
from .verifier import count_dof, coverage_check, decode_check
from .analytics import dof_closed_form, dof_max_search
from .beamform import maxmin_solve, symmetric_rate, zf_precoders
