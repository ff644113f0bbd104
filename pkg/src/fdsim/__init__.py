"""fdsim: cycle-level model of a multi-precision fixed-point FFT engine on
banked shared memory, plus a bit-exact I2S/TDM audio bus codec."""

from .fixedpoint import (DataType, FixedComplex, OverflowFlag, ScalingPolicy,
                         butterfly, cmul, dequantize, quantize, sat_round)
from .membank import BankedMemory, CycleStats, Request, bandwidth_bytes_per_s
from .fft import (ConfigurationError, FftJob, FftResultSummary, fft_fixed,
                  fft_reference, spectrum_snr_db, twiddle_lookup, twiddle_table)
from .schedule import (bit_reverse_index, schedule_reorder, schedule_stage,
                       total_cycle_model)

__all__ = [
    "BankedMemory", "ConfigurationError", "CycleStats", "DataType",
    "FftJob", "FftResultSummary", "FixedComplex", "OverflowFlag", "Request",
    "ScalingPolicy", "bandwidth_bytes_per_s", "bit_reverse_index",
    "butterfly", "cmul", "dequantize", "fft_fixed", "fft_reference",
    "quantize", "sat_round", "schedule_reorder", "schedule_stage",
    "spectrum_snr_db", "total_cycle_model", "twiddle_lookup", "twiddle_table",
]
