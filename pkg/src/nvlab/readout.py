"""Readout-window optimization.

The readout laser pulse is sliced into contiguous fixed-width trigger
windows; this module finds the contiguous run of slices maximizing the
photon-counting signal-to-noise ratio

    SNR(s, l) = (S - R) / sqrt(S + R)

where S and R are total signal and reference counts over slices
[s, s + l). The search is exhaustive over every (start, length) pair.
"""

from __future__ import annotations

import math

from .errors import DimensionError


def optimize_readout_window(window_starts, signal_trace, reference_trace, window_counts=1):
    """Best (start, length) on the slice grid, plus the full SNR surface.

    ``signal_trace`` / ``reference_trace`` are per-slice mean counts per
    shot; ``window_counts`` is the number of accumulated shots behind
    each mean, so S and R are true photon totals. Returns
    ``(best_start, best_length, snr_curve)`` where best_start is the
    value from ``window_starts``, best_length is a slice count, and
    ``snr_curve[i][j]`` is the SNR of the window starting at slice i
    with j+1 slices. Ties prefer the shorter window, then the earlier
    start. Zero total counts define SNR = 0.
    """
    starts = list(window_starts)
    signal = [float(v) for v in signal_trace]
    reference = [float(v) for v in reference_trace]
    n = len(signal)
    if len(reference) != n or len(starts) != n:
        raise DimensionError("window_starts and both traces must have equal length")
    if n < 2:
        raise DimensionError("need at least 2 slices")
    if window_counts < 1:
        raise DimensionError("window_counts must be >= 1")

    best = None  # (snr, length, start_index)
    curve: list[list[float]] = []
    for s in range(n):
        row = []
        sig_sum = 0.0
        ref_sum = 0.0
        for length in range(1, n - s + 1):
            sig_sum += signal[s + length - 1] * window_counts
            ref_sum += reference[s + length - 1] * window_counts
            total = sig_sum + ref_sum
            snr = (sig_sum - ref_sum) / math.sqrt(total) if total > 0 else 0.0
            row.append(snr)
            if best is None or snr > best[0] or (
                snr == best[0] and (length, s) < (best[1], best[2])
            ):
                best = (snr, length, s)
        curve.append(row)

    _, best_length, best_index = best
    return starts[best_index], best_length, curve
