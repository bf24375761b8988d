"""Static top-down SVG of a run: obstacle footprints, speed-colored paths, corridors."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .swarm_sim import World

_CANVAS = 800.0


def _speed_color(frac: float) -> str:
    # blue (slow) to red (fast) through green
    frac = min(max(frac, 0.0), 1.0)
    stops = np.array([[43, 108, 196], [46, 170, 80], [230, 160, 30], [210, 40, 40]], float)
    x = frac * (len(stops) - 1)
    i = min(int(x), len(stops) - 2)
    c = stops[i] + (x - i) * (stops[i + 1] - stops[i])
    return "#%02x%02x%02x" % tuple(int(round(v)) for v in c)


def render_svg(world: World, traj_rows, spawns, goals, corridors=None,
               altitude_band: tuple | None = None) -> str:
    """SVG text; ``traj_rows`` follow the trajectory CSV column order."""
    rows = np.asarray(traj_rows, float).reshape(-1, 14)
    spawns = np.asarray(spawns, float).reshape(-1, 3)
    goals = np.asarray(goals, float).reshape(-1, 3)
    pts = np.vstack([rows[:, 2:4], spawns[:, :2], goals[:, :2]])
    lo = pts.min(axis=0) - 3.0
    hi = pts.max(axis=0) + 3.0
    span = float(max(hi - lo))
    scale = _CANVAS / span
    W = (hi[0] - lo[0]) * scale
    H = (hi[1] - lo[1]) * scale

    def tx(x, y):
        return (x - lo[0]) * scale, (hi[1] - y) * scale

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W:.0f}" height="{H:.0f}" '
           f'viewBox="0 0 {W:.1f} {H:.1f}">',
           f'<rect width="{W:.1f}" height="{H:.1f}" fill="white"/>']
    zlo, zhi = altitude_band if altitude_band else (rows[:, 4].min() - 1, rows[:, 4].max() + 1)
    for c in world.cyl:
        if c[4] < zlo or c[3] > zhi:
            continue
        if not (lo[0] - c[2] <= c[0] <= hi[0] + c[2] and lo[1] - c[2] <= c[1] <= hi[1] + c[2]):
            continue
        x, y = tx(c[0], c[1])
        out.append(f'<circle cx="{x:.1f}" cy="{y:.1f}" r="{c[2] * scale:.1f}" fill="#555"/>')
    for b in world.box:
        if b[5] < zlo or b[2] > zhi:
            continue
        x, y = tx(b[0], b[4])
        out.append(f'<rect x="{x:.1f}" y="{y:.1f}" width="{(b[3] - b[0]) * scale:.1f}" '
                   f'height="{(b[4] - b[1]) * scale:.1f}" fill="#777" opacity="0.6"/>')
    for _, _, polys in corridors or []:
        for A, c in polys:
            # axis-aligned boxes carry rows [I; -I]
            x0, x1 = -c[3], c[0]
            y0, y1 = -c[4], c[1]
            x, y = tx(x0, y1)
            out.append(f'<rect x="{x:.1f}" y="{y:.1f}" width="{(x1 - x0) * scale:.1f}" '
                       f'height="{(y1 - y0) * scale:.1f}" fill="none" stroke="#9b59b6" '
                       f'stroke-width="0.5" opacity="0.5"/>')
    speed = np.linalg.norm(rows[:, 5:8], axis=1)
    vmax = float(speed.max()) if len(speed) and speed.max() > 0 else 1.0
    for i in np.unique(rows[:, 1]).astype(int):
        r = rows[rows[:, 1] == i]
        s = speed[rows[:, 1] == i]
        for k in range(len(r) - 1):
            x0, y0 = tx(r[k, 2], r[k, 3])
            x1, y1 = tx(r[k + 1, 2], r[k + 1, 3])
            col = _speed_color(0.5 * (s[k] + s[k + 1]) / vmax)
            out.append(f'<line x1="{x0:.1f}" y1="{y0:.1f}" x2="{x1:.1f}" y2="{y1:.1f}" '
                       f'stroke="{col}" stroke-width="2"/>')
    for p in spawns:
        x, y = tx(p[0], p[1])
        out.append(f'<circle cx="{x:.1f}" cy="{y:.1f}" r="4" fill="none" stroke="black"/>')
    for p in goals:
        x, y = tx(p[0], p[1])
        out.append(f'<path d="M{x - 4:.1f},{y - 4:.1f} L{x + 4:.1f},{y + 4:.1f} '
                   f'M{x - 4:.1f},{y + 4:.1f} L{x + 4:.1f},{y - 4:.1f}" stroke="black"/>')
    out.append(f'<text x="8" y="{H - 8:.0f}" font-family="sans-serif" font-size="12">'
               f'speed 0 to {vmax:.2f} m/s (blue to red)</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(file, *args, **kw) -> None:
    Path(file).write_text(render_svg(*args, **kw))
