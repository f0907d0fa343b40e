"""Gait event detection and phase normalization.

Events are detected from motion data: a heel strike is a local minimum of
heel height whose forward heel speed has fallen below a threshold, a
toe-off is an upward crossing of the toe vertical velocity.  Curves are
resampled onto a 101-point phase grid (0..100% in 1% steps).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientDataError, ParameterError, SegmentationError

PHASE_GRID = np.linspace(0.0, 1.0, 101)


@dataclass(frozen=True)
class EventThresholds:
    hs_forward_speed: float = 0.2   # m/s
    to_vertical_speed: float = 0.05  # m/s
    min_stance_s: float = 0.2
    min_swing_s: float = 0.15

    def __post_init__(self):
        for f in ("hs_forward_speed", "to_vertical_speed",
                  "min_stance_s", "min_swing_s"):
            if not getattr(self, f) > 0:
                raise ParameterError(f"threshold {f} must be positive")


@dataclass
class SideEvents:
    heel_strikes: np.ndarray  # times, s
    toe_offs: np.ndarray


@dataclass
class GaitEvents:
    """Heel-strike / toe-off times per side, strictly alternating."""

    left: SideEvents | None = field(default=None)
    right: SideEvents | None = field(default=None)

    def side(self, name: str) -> SideEvents:
        ev = getattr(self, name)
        if ev is None:
            raise SegmentationError(f"no events for side {name!r}")
        return ev


def _local_minima(x: np.ndarray) -> list[int]:
    """Indices of strict local minima; a flat plateau counts once, at its
    first sample."""
    out = []
    n = len(x)
    i = 1
    while i < n - 1:
        if x[i] < x[i - 1]:
            j = i
            while j + 1 < n and x[j + 1] == x[j]:
                j += 1
            if j < n - 1 and x[j + 1] > x[j]:
                out.append(i)
            i = j + 1
        else:
            i += 1
    return out


def detect_side_events(time: np.ndarray, heel_z: np.ndarray,
                       toe_z: np.ndarray, heel_vx: np.ndarray,
                       thresholds: EventThresholds | None = None,
                       ) -> SideEvents:
    """Detect heel strikes and toe-offs for one side.

    Inputs are expected to be (lightly) filtered marker series at the
    marker rate.  Alternation is enforced by discarding the weaker of two
    same-kind consecutive detections.
    """
    th = thresholds if thresholds is not None else EventThresholds()
    if len(time) < 3:
        raise SegmentationError("series too short for event detection")
    dt = float(np.median(np.diff(time)))
    toe_vz = np.gradient(toe_z, dt)

    hs_idx = [i for i in _local_minima(heel_z)
              if np.isfinite(heel_vx[i]) and heel_vx[i] < th.hs_forward_speed]
    to_idx = [i for i in range(1, len(time))
              if np.isfinite(toe_vz[i]) and toe_vz[i] > th.to_vertical_speed
              and toe_vz[i - 1] <= th.to_vertical_speed]

    if not hs_idx:
        raise SegmentationError("no heel strikes detected")

    events = sorted([(i, "hs") for i in hs_idx] + [(i, "to") for i in to_idx])
    # drop leading toe-offs so the sequence starts at a heel strike
    while events and events[0][1] == "to":
        events.pop(0)

    def weaker(a: int, b: int, kind: str) -> int:
        if kind == "hs":  # weaker strike = higher heel
            return a if heel_z[a] > heel_z[b] else b
        return b         # keep the first of two toe-offs

    cleaned: list[tuple[int, str]] = []
    for idx, kind in events:
        if cleaned and cleaned[-1][1] == kind:
            drop = weaker(cleaned[-1][0], idx, kind)
            if drop == cleaned[-1][0]:
                cleaned[-1] = (idx, kind)
            continue
        if cleaned:
            prev_idx, prev_kind = cleaned[-1]
            span = time[idx] - time[prev_idx]
            min_span = th.min_stance_s if prev_kind == "hs" else th.min_swing_s
            if span < min_span:
                # too-early opposite event: spurious, drop it
                continue
        cleaned.append((idx, kind))

    hs = np.array([time[i] for i, k in cleaned if k == "hs"])
    to = np.array([time[i] for i, k in cleaned if k == "to"])
    if hs.size == 0:
        raise SegmentationError("no heel strikes survived alternation cleanup")
    ev = SideEvents(heel_strikes=hs, toe_offs=to)
    _check_alternation(ev, time)
    return ev


def _check_alternation(ev: SideEvents, time: np.ndarray) -> None:
    merged = sorted([(t, "hs") for t in ev.heel_strikes]
                    + [(t, "to") for t in ev.toe_offs])
    for (t0, k0), (t1, k1) in zip(merged, merged[1:]):
        if k0 == k1 or t1 <= t0:
            timeline = ", ".join(f"{k.upper()}@{t:.3f}s" for t, k in merged)
            raise SegmentationError(
                f"events do not alternate: {timeline}")


def grf_stance_check(ev: SideEvents, grf_time: np.ndarray, fz: np.ndarray,
                     body_weight: float, fraction: float = 0.05,
                     tol_s: float = 0.05) -> list[str]:
    """Optional cross-check of kinematic heel strikes against the vertical
    force rising through ``fraction`` of body weight.  Returns warnings for
    strikes on the instrumented plate that disagree by more than ``tol_s``."""
    thresh = fraction * body_weight
    rising = np.where((fz[1:] >= thresh) & (fz[:-1] < thresh))[0]
    rise_times = grf_time[rising + 1]
    warnings = []
    for t_hs in ev.heel_strikes:
        if rise_times.size == 0:
            continue
        nearest = rise_times[np.argmin(np.abs(rise_times - t_hs))]
        if abs(nearest - t_hs) <= 0.25 and abs(nearest - t_hs) > tol_s:
            warnings.append(
                f"heel strike at {t_hs:.3f} s is {abs(nearest - t_hs) * 1e3:.0f} ms "
                f"from the GRF onset at {nearest:.3f} s")
    return warnings


@dataclass
class NormalizedCurve:
    """Series resampled onto the 101-point phase grid."""

    grid: np.ndarray
    values: np.ndarray
    phase_kind: str  # "cycle" | "stance"


def phase_normalize(time: np.ndarray, values: np.ndarray,
                    window: tuple[float, float],
                    kind: str = "cycle") -> NormalizedCurve:
    """Resample ``values`` over ``window`` onto the 0..1 phase grid by
    linear interpolation."""
    t0, t1 = window
    if not t0 < t1:
        raise ParameterError(f"empty phase window ({t0}, {t1})")
    if t0 < time[0] - 1e-9 or t1 > time[-1] + 1e-9:
        raise ParameterError(
            f"window ({t0:g}, {t1:g}) s outside series span "
            f"[{time[0]:g}, {time[-1]:g}] s")
    if kind not in ("cycle", "stance"):
        raise ParameterError(f"unknown phase kind {kind!r}")
    t_grid = t0 + PHASE_GRID * (t1 - t0)
    vals = np.interp(t_grid, time, values)
    return NormalizedCurve(grid=PHASE_GRID.copy(), values=vals, phase_kind=kind)


def stance_swing_durations(ev: SideEvents) -> list[dict[str, float]]:
    """Per full cycle: stance/swing durations and the stance fraction.

    stance = TO - HS, swing = next HS - TO, fraction = stance / cycle.
    """
    if len(ev.heel_strikes) < 2:
        raise InsufficientDataError(
            f"need at least 2 heel strikes, got {len(ev.heel_strikes)}")
    out = []
    for hs0, hs1 in zip(ev.heel_strikes, ev.heel_strikes[1:]):
        tos = ev.toe_offs[(ev.toe_offs > hs0) & (ev.toe_offs < hs1)]
        if tos.size != 1:
            raise SegmentationError(
                f"expected one toe-off in cycle [{hs0:.3f}, {hs1:.3f}] s, "
                f"found {tos.size}")
        to = float(tos[0])
        stance = to - hs0
        swing = hs1 - to
        out.append({"stance_s": stance, "swing_s": swing,
                    "stance_fraction": stance / (hs1 - hs0)})
    return out
