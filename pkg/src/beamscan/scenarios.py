"""Built-in scenario presets and the YAML scenario file format.

Canonical file layout (all keys optional except ``paths`` entries' geometry)::

    id: 1
    n_blockers: 1
    tx_rotation: false
    rotation_sweep_deg: 90.0
    n_scan: 1750
    scan_period_s: 0.003
    n_dly: 64
    noise_floor_db: 40.0
    seed: 0
    dwell_s: 6.0e-06
    pulse: single
    array: {n_elements: 12, azimuth_range: 45.0, element_spacing: 0.5,
            boresight_gain_db: 23.0, codebook_size: 6}
    paths:
      - delay_ns: 12
        aod_deg: -9.0
        aoa_deg: 9.0
        gain_db: 0.0
        phase_deg: 0.0
        events:
          - {start_s: 3.0, ramp_down_s: 0.1, hold_s: 0.3, ramp_up_s: 0.1, depth_db: 20.0}

:func:`dump_scenario` writes exactly this layout with keys in this order.
"""
from __future__ import annotations

from dataclasses import asdict, fields

import numpy as np
import yaml

from .channel import (
    SCENARIO_TABLE,
    ArrayConfig,
    BlockageEvent,
    BlockageTrajectory,
    PathSpec,
    Scenario,
)

DESK_N_DLY = 64
DESK_CODEBOOK = 6
FULL_N_DLY = 192
FULL_CODEBOOK = 12

# Two blocking events on two different paths, as seen in one walker's
# measurement: 500 ms starting at 3.0 s, then 350 ms shortly after.
# Ramp length and depth are placeholders, not calibrated values.
SCENARIO1_EVENTS = (
    BlockageEvent(start_s=3.0, ramp_down_s=0.1, hold_s=0.3, ramp_up_s=0.1, depth_db=20.0),
    BlockageEvent(start_s=3.51, ramp_down_s=0.1, hold_s=0.15, ramp_up_s=0.1, depth_db=20.0),
)


def _lab_paths() -> list[PathSpec]:
    """Line-of-sight path plus a strong later reflection off a metal reflector."""
    return [
        PathSpec(delay_ns=12, aod_deg=-9.0, aoa_deg=9.0, gain_db=0.0, phase_deg=0.0),
        PathSpec(delay_ns=31, aod_deg=27.0, aoa_deg=-27.0, gain_db=-1.0, phase_deg=60.0),
    ]


def random_events(
    n_blockers: int, n_paths: int, duration_s: float, seed: int
) -> list[list[BlockageEvent]]:
    """One crossing per blocker, each attenuating one randomly chosen path."""
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, 0xB10C])))
    per_path: list[list[BlockageEvent]] = [[] for _ in range(n_paths)]
    for _ in range(n_blockers):
        for _attempt in range(50):
            ramp = float(rng.uniform(0.05, 0.15))
            hold = float(rng.uniform(0.15, 0.45))
            start = float(rng.uniform(0.3, duration_s - 2 * ramp - hold - 0.3))
            ev = BlockageEvent(start, ramp, hold, ramp, float(rng.uniform(12.0, 25.0)))
            path = int(rng.integers(n_paths))
            if all(ev.end_s < o.start_s or ev.start_s > o.end_s for o in per_path[path]):
                per_path[path].append(ev)
                break
    return per_path


def preset(scenario_id: int, *, full_size: bool = False, seed: int = 0) -> Scenario:
    """Scenario ``0..4`` with blocker count and rotation per ``SCENARIO_TABLE``.

    Desk scale shrinks the delay axis to 64 samples and both codebooks to 6
    angles (36 direction pairs) but keeps 1750 scans at 3 ms so events keep
    their timing.
    """
    if scenario_id not in SCENARIO_TABLE:
        raise ValueError(f"unknown scenario {scenario_id}")
    n_blockers, rotation = SCENARIO_TABLE[scenario_id]
    sc = Scenario(
        id=scenario_id,
        n_blockers=n_blockers,
        tx_rotation=rotation,
        paths=_lab_paths(),
        n_dly=FULL_N_DLY if full_size else DESK_N_DLY,
        seed=seed,
        array=ArrayConfig(codebook_size=FULL_CODEBOOK if full_size else DESK_CODEBOOK),
    )
    if scenario_id == 1:
        for path, ev in zip(sc.paths, SCENARIO1_EVENTS):
            path.trajectory = BlockageTrajectory([ev])
    elif n_blockers:
        events = random_events(n_blockers, len(sc.paths), sc.duration_s, seed)
        for path, evs in zip(sc.paths, events):
            path.trajectory = BlockageTrajectory(evs)
    sc.validate()
    return sc


def scenario_to_dict(sc: Scenario) -> dict:
    out = {}
    for f in fields(Scenario):
        value = getattr(sc, f.name)
        if f.name == "array":
            value = asdict(value)
        elif f.name == "paths":
            value = [
                {
                    "delay_ns": int(p.delay_ns),
                    "aod_deg": float(p.aod_deg),
                    "aoa_deg": float(p.aoa_deg),
                    "gain_db": float(p.gain_db),
                    "phase_deg": float(p.phase_deg),
                    "events": [asdict(e) for e in p.trajectory.events],
                }
                for p in value
            ]
        out[f.name] = value
    return out


def scenario_from_dict(raw: dict) -> Scenario:
    known = {f.name for f in fields(Scenario)}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown scenario keys: {sorted(unknown)}")
    kwargs = dict(raw)
    if "array" in kwargs:
        kwargs["array"] = ArrayConfig(**kwargs["array"])
    paths = []
    for p in kwargs.get("paths", []) or []:
        p = dict(p)
        events = [BlockageEvent(**e) for e in p.pop("events", []) or []]
        paths.append(PathSpec(**p, trajectory=BlockageTrajectory(events)))
    kwargs["paths"] = paths
    sc = Scenario(**kwargs)
    sc.validate()
    return sc


def load_scenario(path) -> Scenario:
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict):
        raise ValueError(f"{path}: scenario file must hold a mapping")
    return scenario_from_dict(raw)


def dump_scenario(sc: Scenario, path) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(scenario_to_dict(sc), fh, sort_keys=False)
