from .session import (  # noqa: F401
    ACTIONS,
    CRITERIA_TAGS,
    Decision,
    DecisionError,
    FamilyDef,
    HostLabel,
    RefinementSession,
    start_session,
)
from .report import build_report, read_host_metadata  # noqa: F401
