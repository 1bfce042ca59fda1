"""Zero-velocity track association.

A static reflector seen by a resting radar yields bitwise-identical
detections frame after frame.  Such detections are associated purely by
equality of position, SNR and noise, with a Doppler of exactly zero, so no
gating threshold is involved.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from brio.types import RadarDetection


def signature(det: RadarDetection) -> tuple:
    """Association key: raw bytes of the position plus SNR and noise."""
    return (np.asarray(det.position, dtype=float).tobytes(), float(det.snr), float(det.noise))


@dataclass
class ZeroVelocityTrack:
    id: int
    position: np.ndarray
    key: tuple
    observations: list[tuple[int, int]] = field(default_factory=list)
    frames_since_seen: int = 0

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float).reshape(3)


def associate_tracks(
    detections: Sequence[RadarDetection],
    tracks: dict[int, ZeroVelocityTrack],
    next_id: int = 0,
):
    """Match zero-Doppler detections against live tracks.

    Returns ``(associations, new_tracks)``.  ``associations`` lists
    ``(detection index, track id)`` for every zero-Doppler detection, including
    those that seed the tracks in ``new_tracks``.  New tracks carry
    ``position = nan`` until the caller places the landmark.  Duplicate
    detections within one frame are associated once.
    """
    by_key = {t.key: t.id for t in tracks.values()}
    associations: list[tuple[int, int]] = []
    new_tracks: list[ZeroVelocityTrack] = []
    used: set[int] = set()
    for m, det in enumerate(detections):
        if det.doppler != 0.0:
            continue
        key = signature(det)
        tid = by_key.get(key)
        if tid is None:
            track = ZeroVelocityTrack(next_id, np.full(3, np.nan), key)
            next_id += 1
            new_tracks.append(track)
            by_key[key] = track.id
            tid = track.id
        if tid in used:
            continue
        used.add(tid)
        associations.append((m, tid))
    return associations, new_tracks


def age_tracks(tracks: dict[int, ZeroVelocityTrack], seen: set[int], discard_after: int) -> list[int]:
    """Advance ``frames_since_seen``; return ids that reached ``discard_after``."""
    dropped = []
    for tid, track in tracks.items():
        if tid in seen:
            track.frames_since_seen = 0
        else:
            track.frames_since_seen += 1
            if track.frames_since_seen >= discard_after:
                dropped.append(tid)
    return dropped
