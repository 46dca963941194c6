"""Four-state blockage segmentation of gain trajectories.

A trajectory's power in dB is split into a large-scale part (centered moving
average) and small-scale residue. The large-scale part is approximated by a
piecewise-linear fit built bottom-up, and each linear piece is labelled
from its slope and its level relative to the unblocked plateau. All
thresholds are tunable defaults, not calibrated values.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import uniform_filter1d

from .decomposition import trajectory_db


class BlockageState(str, enum.Enum):
    UNBLOCKED = "unblocked"
    ENTERING = "entering"
    BLOCKED = "blocked"
    EXITING = "exiting"


@dataclass
class SegmentOptions:
    window: int = 33  # scans; ~100 ms at 3 ms per scan
    scan_period_s: float = 0.003
    slope_threshold_db_per_s: float = 20.0
    level_threshold_db: float = 3.0
    plateau_percentile: float = 90.0
    max_rmse_db: float = 0.5  # bottom-up merging stops above this fit error


@dataclass(frozen=True)
class Segment:
    start: int  # first scan index
    stop: int  # one past the last scan index
    state: BlockageState
    slope_db_per_s: float
    mean_level_db: float

    @property
    def length(self) -> int:
        return self.stop - self.start


@dataclass
class BlockageSegmentation:
    segments: list[Segment]
    large_scale_db: np.ndarray
    plateau_db: float
    scan_period_s: float = 0.003
    pieces: list[tuple[int, int]] = field(default_factory=list)

    @property
    def states(self) -> list[BlockageState]:
        return [seg.state for seg in self.segments]

    def blocked_spans_s(self) -> list[tuple[float, float]]:
        """(start, stop) times of every maximal run of non-unblocked segments."""
        spans = []
        run_start = None
        for seg in self.segments + [None]:
            busy = seg is not None and seg.state is not BlockageState.UNBLOCKED
            if busy and run_start is None:
                run_start = seg.start
            elif not busy and run_start is not None:
                end = seg.start if seg is not None else self.segments[-1].stop
                spans.append((run_start * self.scan_period_s, end * self.scan_period_s))
                run_start = None
        return spans

    def to_dict(self) -> dict:
        return {
            "plateau_db": self.plateau_db,
            "segments": [
                {
                    "start": s.start,
                    "stop": s.stop,
                    "state": s.state.value,
                    "slope_db_per_s": s.slope_db_per_s,
                    "mean_level_db": s.mean_level_db,
                }
                for s in self.segments
            ],
        }


class _LineFitter:
    """O(1) least-squares line fits over index ranges via prefix sums."""

    def __init__(self, y: np.ndarray):
        n = len(y)
        # centered abscissa keeps the prefix sums well conditioned
        x = np.arange(n, dtype=float) - (n - 1) / 2
        self._sums = [np.concatenate([[0.0], np.cumsum(v)]) for v in (np.ones(n), x, x * x, y, x * y, y * y)]

    def stats(self, a: int, b: int):
        n, sx, sxx, sy, sxy, syy = (c[b] - c[a] for c in self._sums)
        sxx_c = sxx - sx * sx / n
        sxy_c = sxy - sx * sy / n
        syy_c = syy - sy * sy / n
        slope = sxy_c / sxx_c if sxx_c > 0 else 0.0
        sse = max(syy_c - slope * sxy_c, 0.0)
        return slope, sy / n, sse

    def rmse(self, a: int, b: int) -> float:
        return np.sqrt(self.stats(a, b)[2] / (b - a))


def piecewise_linear(y: np.ndarray, max_rmse: float, min_len: int = 2) -> list[tuple[int, int]]:
    """Bottom-up piecewise-linear segmentation of ``y``.

    Starts from pieces of ``min_len`` samples and repeatedly merges the
    adjacent pair whose joint line fit has the lowest RMSE, until every
    candidate merge would exceed ``max_rmse``.
    """
    n = len(y)
    fitter = _LineFitter(np.asarray(y, dtype=float))
    bounds = list(range(0, n, min_len)) + [n]
    if len(bounds) > 2 and bounds[-1] - bounds[-2] < min_len:
        del bounds[-2]
    cost = np.array([fitter.rmse(bounds[i], bounds[i + 2]) for i in range(len(bounds) - 2)])
    while len(cost):
        i = int(np.argmin(cost))
        if cost[i] > max_rmse:
            break
        del bounds[i + 1]
        cost = np.delete(cost, i)
        if i > 0:
            cost[i - 1] = fitter.rmse(bounds[i - 1], bounds[i + 1])
        if i < len(cost):
            cost[i] = fitter.rmse(bounds[i], bounds[i + 2])
    return list(zip(bounds[:-1], bounds[1:]))


def large_scale_db(g, window: int) -> np.ndarray:
    """Centered moving average of ``20 log10 |g|`` (edges padded with the end values)."""
    return uniform_filter1d(trajectory_db(g), size=window, mode="nearest")


def segment_blockage(g, opts: SegmentOptions | None = None) -> BlockageSegmentation:
    """Label each stretch of a gain trajectory as unblocked/entering/blocked/exiting."""
    opts = opts or SegmentOptions()
    g = np.asarray(g).ravel()
    if opts.window < 1:
        raise ValueError("window must be >= 1")
    if len(g) < opts.window:
        raise ValueError(f"trajectory of length {len(g)} is shorter than window {opts.window}")

    level = large_scale_db(g, opts.window)
    plateau = float(np.percentile(level, opts.plateau_percentile))
    pieces = piecewise_linear(level, opts.max_rmse_db)
    fitter = _LineFitter(level)

    def label(slope_per_s: float, mean: float) -> BlockageState:
        if slope_per_s <= -opts.slope_threshold_db_per_s:
            return BlockageState.ENTERING
        if slope_per_s >= opts.slope_threshold_db_per_s:
            return BlockageState.EXITING
        if mean >= plateau - opts.level_threshold_db:
            return BlockageState.UNBLOCKED
        return BlockageState.BLOCKED

    labelled = []
    for a, b in pieces:
        slope, mean, _ = fitter.stats(a, b)
        state = label(slope / opts.scan_period_s, mean)
        if labelled and labelled[-1][2] is state:
            labelled[-1][1] = b
        else:
            labelled.append([a, b, state])

    segments = []
    for a, b, state in labelled:
        slope, mean, _ = fitter.stats(a, b)
        segments.append(Segment(a, b, state, slope / opts.scan_period_s, mean))
    return BlockageSegmentation(
        segments=segments,
        large_scale_db=level,
        plateau_db=plateau,
        scan_period_s=opts.scan_period_s,
        pieces=pieces,
    )
