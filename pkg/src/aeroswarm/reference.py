"""Reference trajectories sampled along the global path.

The sampling speed adapts to obstacle proximity along the path; the sampling
start advances by one reference step whenever the agent has made progress
along the previous reference.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .global_path import GlobalPath

PROGRESS_RESOLUTION = 0.01


@dataclass
class ReferenceTrajectory:
    positions: np.ndarray
    velocities: np.ndarray
    v_samp: float
    h: float = 0.1
    projection_error: float = 0.0

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float).reshape(-1, 3)
        self.velocities = np.asarray(self.velocities, dtype=float).reshape(-1, 3)

    @property
    def start_point(self) -> np.ndarray:
        return self.positions[0]

    @property
    def N(self) -> int:
        return len(self.positions) - 1

    def states(self) -> np.ndarray:
        """Reference states ``[p v 0]`` per step, shape (N+1, 9)."""
        z = np.zeros_like(self.positions)
        return np.hstack([self.positions, self.velocities, z])


def stationary_reference(p, N: int, h: float = 0.1) -> ReferenceTrajectory:
    p = np.asarray(p, float)
    return ReferenceTrajectory(np.tile(p, (N + 1, 1)), np.zeros((N + 1, 3)), 0.0, h)


def adapt_speed(path: GlobalPath, s_d: float, s_o: float, v_min: float, v_max: float) -> float:
    """Minimum over waypoints of ``v_min + alpha_i (v_max - v_min)``."""
    if v_min > v_max:
        raise ConfigurationError(f"v_min {v_min} exceeds v_max {v_max}")
    v = v_max
    for o, d in zip(path.values, path.cum_dist):
        alpha = 1.0 - np.exp(-s_d * d) * (1.0 - np.exp(-s_o * o))
        v = min(v, v_min + alpha * (v_max - v_min))
    return float(v)


def project_onto_path(path: GlobalPath, p):
    """Arc position, closest point and distance of ``p`` to the polyline."""
    p = np.asarray(p, float)
    wps = path.waypoints
    if len(wps) == 1:
        return 0.0, wps[0].copy(), float(np.linalg.norm(p - wps[0]))
    a = wps[:-1]
    ab = wps[1:] - a
    L2 = np.einsum("ij,ij->i", ab, ab)
    t = np.where(L2 > 0, np.einsum("ij,ij->i", p - a, ab) / np.where(L2 > 0, L2, 1.0), 0.0)
    t = np.clip(t, 0.0, 1.0)
    q = a + t[:, None] * ab
    d = np.linalg.norm(q - p, axis=1)
    i = int(np.argmin(d))
    s = path.cum_dist[i] + t[i] * np.sqrt(L2[i])
    return float(s), q[i], float(d[i])


def point_at(path: GlobalPath, s: float) -> np.ndarray:
    wps = path.waypoints
    cd = path.cum_dist
    if s <= 0.0 or len(wps) == 1:
        return wps[0].copy()
    if s >= cd[-1]:
        return wps[-1].copy()
    i = int(np.searchsorted(cd, s, side="right")) - 1
    seg = cd[i + 1] - cd[i]
    t = (s - cd[i]) / seg if seg > 0 else 0.0
    return wps[i] + t * (wps[i + 1] - wps[i])


def sample_reference(path: GlobalPath, p0_ref, v_samp: float, N: int, h: float) -> ReferenceTrajectory:
    """Positions every ``v_samp * h`` of arc length from ``p0_ref``, clamped at the end."""
    if N < 1 or h <= 0:
        raise ConfigurationError("N must be >= 1 and h > 0")
    s0, _, err = project_onto_path(path, p0_ref)
    L = path.length
    arcs = np.minimum(s0 + v_samp * h * np.arange(N + 1), L)
    pos = np.array([point_at(path, s) for s in arcs])
    if err <= 1e-6:
        pos[0] = np.asarray(p0_ref, float)
    vel = np.zeros((N + 1, 3))
    for k in range(N):
        d = pos[k + 1] - pos[k]
        n = np.linalg.norm(d)
        if n > 1e-12:
            vel[k] = v_samp * d / n
    vel[N] = vel[N - 1]
    return ReferenceTrajectory(pos, vel, float(v_samp), h, err)


def _dense_samples(positions: np.ndarray, res: float):
    pts = [positions[0]]
    arcs = [0.0]
    acc = 0.0
    for a, b in zip(positions[:-1], positions[1:]):
        seg = float(np.linalg.norm(b - a))
        if seg <= 0:
            continue
        n = int(np.floor(seg / res))
        for k in range(1, n + 1):
            if k * res < seg:
                pts.append(a + (b - a) * (k * res / seg))
                arcs.append(acc + k * res)
        acc += seg
        pts.append(b.copy())
        arcs.append(acc)
    return np.array(pts), np.array(arcs)


def path_progress(prev_ref: ReferenceTrajectory, agent_pos,
                  resolution: float = PROGRESS_RESOLUTION) -> float:
    """Arc distance from the reference start to its sample nearest the agent."""
    pts, arcs = _dense_samples(prev_ref.positions, resolution)
    d = np.linalg.norm(pts - np.asarray(agent_pos, float), axis=1)
    return float(arcs[int(np.argmin(d))])


def advance_start(prev_ref: ReferenceTrajectory, progress: float) -> np.ndarray:
    if progress < 0:
        raise ConfigurationError("progress must be non-negative")
    if progress > 0.0 and len(prev_ref.positions) > 1:
        return prev_ref.positions[1].copy()
    return prev_ref.start_point.copy()


def path_plan_start(prev_ref: ReferenceTrajectory | None, i_path_start: int,
                    agent_pos=None) -> np.ndarray:
    if prev_ref is None:
        if agent_pos is None:
            raise ConfigurationError("bootstrap needs the agent position")
        return np.asarray(agent_pos, float).copy()
    if not 0 <= i_path_start < len(prev_ref.positions):
        raise ConfigurationError(
            f"i_path_start {i_path_start} outside 0..{len(prev_ref.positions) - 1}")
    return prev_ref.positions[i_path_start].copy()


def dump_reference_csv(ref: ReferenceTrajectory, file) -> None:
    rows = ["k,x,y,z,vx,vy,vz"]
    for k, (p, v) in enumerate(zip(ref.positions, ref.velocities)):
        rows.append(f"{k}," + ",".join(repr(float(x)) for x in (*p, *v)))
    Path(file).write_text("\n".join(rows) + "\n")
