"""Capped encoders and change point detection.

Thin re-export of the compiled core: series generation, encoder training and
encoding, detection scoring with threshold sweeps, margin F1, MMD statistics
and certification reports.
"""

from ._core import (
    CertificationReport,
    DetectionTrace,
    Encoder,
    EncoderSpec,
    F1Report,
    SplitSeries,
    SweepResult,
    TimeSeries,
    TrainResult,
    certify,
    encoder_spec,
    evenly_spaced_change_points,
    invert_encoder,
    load_series_csv,
    make_elliptical_series,
    make_mean_shift_series,
    margin_f1,
    median_heuristic_sigma,
    mmd2_biased,
    save_series_csv,
    score_series,
    split_series,
    threshold_sweep,
    train_encoder,
)

__all__ = [
    "CertificationReport",
    "DetectionTrace",
    "Encoder",
    "EncoderSpec",
    "F1Report",
    "SplitSeries",
    "SweepResult",
    "TimeSeries",
    "TrainResult",
    "certify",
    "encoder_spec",
    "evenly_spaced_change_points",
    "invert_encoder",
    "load_series_csv",
    "make_elliptical_series",
    "make_mean_shift_series",
    "margin_f1",
    "median_heuristic_sigma",
    "mmd2_biased",
    "save_series_csv",
    "score_series",
    "split_series",
    "threshold_sweep",
    "train_encoder",
]

__version__ = "0.1.0"
