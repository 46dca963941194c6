"""Synthetic dual phased-array channel sounder.

A scan steers the TX array to each codebook angle in turn and, for every TX
angle, sweeps the RX codebook, acquiring one channel impulse response per
pointing-angle pair. Direction index ``j`` is therefore TX-major:
``j = rx + tx * n_rx`` (zero-based). Scans repeat every ``scan_period_s``.

Each propagation path contributes a single delay tap (or a 3-tap raised
cosine), a spatial signature given by the TX and RX uniform-linear-array
responses, and a time-varying amplitude from its blockage trajectory.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .numerics import fix_column_phase
from .tensor import ChannelTensor

# scenario id -> (blockers, tx rotation)
SCENARIO_TABLE = {0: (0, False), 1: (1, False), 2: (3, False), 3: (0, True), 4: (2, True)}

RAISED_COSINE_TAPS = np.array([0.5, 1.0, 0.5])


@dataclass
class ArrayConfig:
    n_elements: int = 12
    azimuth_range: float = 45.0  # codebook spans [-azimuth_range, +azimuth_range]
    element_spacing: float = 0.5  # wavelengths
    boresight_gain_db: float = 23.0
    codebook_size: int = 12

    def __post_init__(self):
        if self.n_elements < 1:
            raise ValueError("n_elements must be >= 1")
        if self.codebook_size < 1:
            raise ValueError("codebook_size must be >= 1")
        if not 0 <= self.azimuth_range <= 90:
            raise ValueError("azimuth_range must lie in [0, 90] degrees")


@dataclass
class BlockageEvent:
    """Linear-in-dB trapezoid: ramp down, hold at ``-depth_db``, ramp up."""

    start_s: float
    ramp_down_s: float
    hold_s: float
    ramp_up_s: float
    depth_db: float

    def __post_init__(self):
        if min(self.ramp_down_s, self.hold_s, self.ramp_up_s) < 0:
            raise ValueError("event segment durations must be nonnegative")
        if self.depth_db < 0:
            raise ValueError("depth_db must be nonnegative")

    @property
    def end_s(self) -> float:
        return self.start_s + self.ramp_down_s + self.hold_s + self.ramp_up_s

    @property
    def breakpoints(self) -> tuple[float, float, float, float]:
        t1 = self.start_s + self.ramp_down_s
        t2 = t1 + self.hold_s
        return (self.start_s, t1, t2, self.end_s)

    def level_db(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        t0, t1, t2, t3 = self.breakpoints
        down = (t >= t0) & (t < t1)
        hold = (t >= t1) & (t <= t2)
        up = (t > t2) & (t < t3)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.select(
                [down, hold, up],
                [
                    -self.depth_db * (t - t0) / self.ramp_down_s,
                    np.full_like(t, -self.depth_db),
                    -self.depth_db * (t3 - t) / self.ramp_up_s,
                ],
                0.0,
            )


@dataclass
class BlockageTrajectory:
    events: list[BlockageEvent] = field(default_factory=list)

    def __post_init__(self):
        ordered = sorted(self.events, key=lambda e: e.start_s)
        for a, b in zip(ordered, ordered[1:]):
            if b.start_s < a.end_s:
                raise ValueError(
                    f"blockage events overlap: [{a.start_s}, {a.end_s}] and "
                    f"[{b.start_s}, {b.end_s}]"
                )
        self.events = ordered

    def level_db(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        level = np.zeros_like(t)
        for ev in self.events:
            level = level + ev.level_db(t)
        return level

    def __call__(self, t) -> np.ndarray:
        """Amplitude gain in (0, 1]; exactly 1 outside every event."""
        return 10.0 ** (self.level_db(t) / 20.0)


@dataclass
class PathSpec:
    delay_ns: int  # zero-based delay sample, 1 ns per sample
    aod_deg: float
    aoa_deg: float
    gain_db: float = 0.0
    phase_deg: float = 0.0
    trajectory: BlockageTrajectory = field(default_factory=BlockageTrajectory)


@dataclass
class Scenario:
    id: int | None = None
    n_blockers: int = 0
    tx_rotation: bool = False
    rotation_sweep_deg: float = 90.0
    paths: list[PathSpec] = field(default_factory=list)
    n_scan: int = 1750
    scan_period_s: float = 0.003
    n_dly: int = 192
    noise_floor_db: float | None = 40.0  # None disables noise
    seed: int = 0
    array: ArrayConfig = field(default_factory=ArrayConfig)
    dwell_s: float = 6e-6  # per-CIR acquisition time within a scan
    pulse: str = "single"

    @property
    def n_dir(self) -> int:
        return self.array.codebook_size**2

    @property
    def duration_s(self) -> float:
        return self.n_scan * self.scan_period_s

    def validate(self) -> None:
        if self.id is not None:
            if self.id not in SCENARIO_TABLE:
                raise ValueError(f"unknown scenario {self.id}")
            blockers, rotation = SCENARIO_TABLE[self.id]
            if (self.n_blockers, bool(self.tx_rotation)) != (blockers, rotation):
                raise ValueError(
                    f"scenario {self.id} requires {blockers} blockers and "
                    f"rotation={rotation}, got {self.n_blockers} and {self.tx_rotation}"
                )
        if self.n_scan < 1 or self.n_dly < 1:
            raise ValueError("n_scan and n_dly must be >= 1")
        if self.scan_period_s <= 0 or self.dwell_s <= 0:
            raise ValueError("scan_period_s and dwell_s must be positive")
        if self.n_dir * self.dwell_s > self.scan_period_s:
            raise ValueError("one scan does not fit inside the scan period")
        if self.pulse not in ("single", "raised_cosine"):
            raise ValueError(f"unknown pulse shape {self.pulse!r}")
        if self.n_blockers == 0 and any(p.trajectory.events for p in self.paths):
            raise ValueError("blockage events given but n_blockers is 0")
        for p in self.paths:
            if not 0 <= p.delay_ns < self.n_dly:
                raise ValueError(f"path delay {p.delay_ns} outside [0, {self.n_dly})")
            if not np.isfinite([p.gain_db, p.aod_deg, p.aoa_deg, p.phase_deg]).all():
                raise ValueError("path parameters must be finite")


@dataclass
class GroundTruth:
    """Planted CP factors, normalized like :class:`~beamscan.decomposition.CpModel`.

    ``d`` and ``s`` have unit-norm columns whose largest entry is real
    nonnegative; all scale and phase sits in ``g``. Under TX rotation the
    spatial signature changes with time, so ``s`` is the signature at scan 0
    and ``trilinear`` is False.
    """

    d: np.ndarray
    s: np.ndarray
    g: np.ndarray
    times_s: np.ndarray
    trajectories: np.ndarray  # blockage amplitude per path, (n_scan, n_paths)
    trilinear: bool

    @property
    def rank(self) -> int:
        return self.d.shape[1]


def array_response(cfg: ArrayConfig, steer_deg, arrival_deg):
    """Normalized ULA factor; 1 when arrival equals the steering angle.

    Broadcasts over ``steer_deg`` and ``arrival_deg``.
    """
    steer = np.deg2rad(np.asarray(steer_deg, dtype=float))
    arrival = np.deg2rad(np.asarray(arrival_deg, dtype=float))
    psi = 2 * np.pi * cfg.element_spacing * (np.sin(arrival) - np.sin(steer))
    n = np.arange(cfg.n_elements)
    af = np.exp(1j * np.multiply.outer(psi, n)).mean(axis=-1)
    return af if af.ndim else complex(af)


def make_codebook(cfg: ArrayConfig) -> np.ndarray:
    """Steering angles evenly spaced over the azimuth range, endpoints included."""
    if cfg.codebook_size == 1:
        return np.zeros(1)
    return np.linspace(-cfg.azimuth_range, cfg.azimuth_range, cfg.codebook_size)


def scan_schedule(sc: Scenario) -> np.ndarray:
    """Acquisition order as a record array with fields scan, combo, tx, rx, time_s."""
    n_cb = sc.array.codebook_size
    n_dir = sc.n_dir
    scans = np.repeat(np.arange(sc.n_scan), n_dir)
    combos = np.tile(np.arange(n_dir), sc.n_scan)
    out = np.empty(
        sc.n_scan * n_dir,
        dtype=[("scan", "i8"), ("combo", "i8"), ("tx", "i8"), ("rx", "i8"), ("time_s", "f8")],
    )
    out["scan"] = scans
    out["combo"] = combos
    out["tx"] = combos // n_cb
    out["rx"] = combos % n_cb
    out["time_s"] = scans * sc.scan_period_s + combos * sc.dwell_s
    return out


def rotation_offset_deg(sc: Scenario, t) -> np.ndarray:
    """TX orientation offset; constant-rate sweep across the measurement."""
    t = np.asarray(t, dtype=float)
    if not sc.tx_rotation:
        return np.zeros_like(t)
    return -sc.rotation_sweep_deg / 2 + sc.rotation_sweep_deg * t / sc.duration_s


def delay_profile(sc: Scenario, delay: int) -> np.ndarray:
    d = np.zeros(sc.n_dly, dtype=np.complex128)
    if sc.pulse == "single":
        d[delay] = 1.0
    else:
        for off, w in zip((-1, 0, 1), RAISED_COSINE_TAPS):
            if 0 <= delay + off < sc.n_dly:
                d[delay + off] = w
    return d


def _worker_count() -> int:
    try:
        return max(1, int(os.environ.get("BEAMSCAN_THREADS", "1")))
    except ValueError:
        return 1


def _scan_noise(child: np.random.SeedSequence, shape, sigma: float) -> np.ndarray:
    rng = np.random.Generator(np.random.Philox(child))
    z = rng.standard_normal((2, *shape))
    return sigma * (z[0] + 1j * z[1])


def simulate(sc: Scenario) -> tuple[ChannelTensor, GroundTruth]:
    """Generate the measurement tensor and the planted factors for a scenario.

    Noise is circular complex Gaussian with power ``noise_floor_db`` below the
    strongest path's aligned-beam peak. Every scan draws from its own Philox
    stream spawned from ``SeedSequence(seed)``, so scans can be generated in
    any order (or in parallel) with identical results.
    """
    sc.validate()
    cb = make_codebook(sc.array)
    times = np.arange(sc.n_scan) * sc.scan_period_s
    rot = rotation_offset_deg(sc, times)
    antenna_db = 2 * sc.array.boresight_gain_db

    x = np.zeros((sc.n_dly, sc.n_dir, sc.n_scan), dtype=np.complex128)
    n_paths = len(sc.paths)
    d_true = np.zeros((sc.n_dly, n_paths), dtype=np.complex128)
    s_true = np.zeros((sc.n_dir, n_paths), dtype=np.complex128)
    g_true = np.zeros((sc.n_scan, n_paths), dtype=np.complex128)
    traj = np.ones((sc.n_scan, n_paths))
    peak_power = 0.0

    for ell, path in enumerate(sc.paths):
        amp = 10 ** ((path.gain_db + antenna_db) / 20) * np.exp(1j * np.deg2rad(path.phase_deg))
        peak_power = max(peak_power, abs(amp) ** 2)
        traj[:, ell] = path.trajectory(times)
        d_raw = delay_profile(sc, path.delay_ns)
        a_rx = array_response(sc.array, cb, path.aoa_deg)
        # (n_scan, n_tx): TX steering response while the array rotates
        a_tx = array_response(sc.array, cb[None, :], path.aod_deg + rot[:, None])
        s_t = (a_tx[:, :, None] * a_rx[None, None, :]).reshape(sc.n_scan, sc.n_dir)
        x += d_raw[:, None, None] * (amp * traj[:, ell, None] * s_t).T[None, :, :]

        s_raw = s_t[0]
        d_norm, s_norm = np.linalg.norm(d_raw), np.linalg.norm(s_raw)
        d_col = d_raw / d_norm
        s_col = s_raw / s_norm if s_norm > 0 else s_raw
        pd = fix_column_phase(d_col[:, None])[0]
        ps = fix_column_phase(s_col[:, None])[0]
        d_true[:, ell] = d_col * pd
        s_true[:, ell] = s_col * ps
        g_true[:, ell] = amp * traj[:, ell] * d_norm * s_norm / (pd * ps)

    if sc.noise_floor_db is not None:
        ref = peak_power if n_paths else 1.0
        sigma = np.sqrt(ref * 10 ** (-sc.noise_floor_db / 10) / 2)
        children = np.random.SeedSequence(sc.seed).spawn(sc.n_scan)
        shape = (sc.n_dly, sc.n_dir)
        workers = _worker_count()
        if workers > 1:
            with ThreadPoolExecutor(workers) as pool:
                noise = list(pool.map(lambda c: _scan_noise(c, shape, sigma), children))
        else:
            noise = [_scan_noise(c, shape, sigma) for c in children]
        x += np.stack(noise, axis=2)

    truth = GroundTruth(
        d=d_true,
        s=s_true,
        g=g_true,
        times_s=times,
        trajectories=traj,
        trilinear=not sc.tx_rotation,
    )
    return ChannelTensor(x), truth
