"""
Core library: quantizer, pattern-recurrence predictor, process generators and
oracles, the odometer counterexample, the Cesaro harness and the martingale lab.
"""

from core.harness import evaluate, limit_reference, read_report, write_report
from core.predictor import backward_estimate, compute_recurrence_trace, forward_predict, r_k_infinite
from core.processes import parse_spec, sample_path

__all__ = [
    "backward_estimate",
    "compute_recurrence_trace",
    "evaluate",
    "forward_predict",
    "limit_reference",
    "parse_spec",
    "r_k_infinite",
    "read_report",
    "sample_path",
    "write_report",
]
