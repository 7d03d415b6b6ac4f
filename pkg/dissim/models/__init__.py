"""File schemas for dissim."""
from .files import (
    CbeDumpFile,
    GateEntry,
    GcaProblemFile,
    HamiltonianTermEntry,
    JumpEntry,
    KrausPairEntry,
    LindbladSpecFile,
    matrix_from_json,
    matrix_to_json,
)
