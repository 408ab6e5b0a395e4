"""File formats: trajectory text, flow binary, PFM depth, PNG, reports."""

from .flowio import read_flow, write_flow
from .pfmio import read_pfm, write_pfm
from .pngio import read_gray_png, to_uint8, write_gray_png
from .reports import format_float, write_csv, write_json_report, read_json_report
from .trajectory import (
    TrajectoryFile,
    TrajectoryFrame,
    parse_trajectory,
    serialize_trajectory,
)

__all__ = [
    "TrajectoryFile",
    "TrajectoryFrame",
    "parse_trajectory",
    "serialize_trajectory",
    "read_flow",
    "write_flow",
    "read_pfm",
    "write_pfm",
    "read_gray_png",
    "write_gray_png",
    "to_uint8",
    "format_float",
    "write_csv",
    "write_json_report",
    "read_json_report",
]
