"""Render recorded episodes to SVG and export them as canonical JSON."""

from __future__ import annotations

import json
import math
from pathlib import Path
from xml.sax.saxutils import escape

from .errors import MissingEpisode

STYLE = """
.arena { fill: #fafafa; stroke: #333; stroke-width: 0.08; }
.static { fill: #9e9e9e; stroke: #555; stroke-width: 0.03; }
.obstacle-path { fill: none; stroke: #e57373; stroke-width: 0.04; stroke-opacity: 0.6; }
.obstacle { fill: #ef9a9a; stroke: #c62828; stroke-width: 0.03; }
.robot-path { fill: none; stroke: #1565c0; stroke-width: 0.08; }
.region { fill: none; stroke: #000; stroke-width: 0.04; stroke-dasharray: 0.2 0.12; }
.reference { fill: none; stroke: #2e7d32; stroke-width: 0.05; }
.mpc { fill: none; stroke: #f9a825; stroke-width: 0.04; }
.goal { fill: #fdd835; stroke: #f57f17; stroke-width: 0.04; }
.start { fill: #1565c0; }
"""


def load_archive(path: str | Path) -> dict[int, list[dict]]:
    """Group a traces.jsonl file by its ``episode`` field."""
    episodes: dict[int, list[dict]] = {}
    with Path(path).open() as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                episodes.setdefault(int(rec.get("episode", 0)), []).append(rec)
    return episodes


def _get_episode(archive: dict[int, list[dict]], episode_id: int) -> list[dict]:
    if episode_id not in archive:
        raise MissingEpisode(f"episode {episode_id} not in archive ({len(archive)} episodes)")
    return archive[episode_id]


def _pts(points) -> str:
    return " ".join(f"{x:.4f},{y:.4f}" for x, y in points)


def _star(cx: float, cy: float, r: float) -> list[tuple[float, float]]:
    out = []
    for k in range(10):
        rad = r if k % 2 == 0 else 0.45 * r
        ang = math.pi / 2 + k * math.pi / 5
        out.append((cx + rad * math.cos(ang), cy + rad * math.sin(ang)))
    return out


def sampled_steps(steps: list[dict], every: int) -> list[dict]:
    return [s for s in steps if (s["t"] - 1) % every == 0]


def render_svg(trace: list[dict], every: int = 5, px_per_m: float = 30.0) -> str:
    header = next(r for r in trace if r.get("type") == "episode")
    steps = [r for r in trace if r.get("type") == "step"]
    W, H = header["arena"]
    pad = 0.5
    width = (W + 2 * pad) * px_per_m
    height = (H + 2 * pad) * px_per_m
    # world y grows upward; flip once at the group level
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" height="{height:.0f}" '
        f'viewBox="{-pad} {-pad} {W + 2 * pad} {H + 2 * pad}">',
        f"<style>{STYLE}</style>",
        f'<g transform="translate(0 {H}) scale(1 -1)">',
        f'<rect class="arena" x="0" y="0" width="{W}" height="{H}"/>',
    ]
    for poly in header["static"]:
        out.append(f'<polygon class="static" points="{_pts(poly)}"/>')
    discs = [s["dynamic"] for s in steps]
    for i, (x0, y0, r) in enumerate(header["dynamic"]):
        path = [(x0, y0)] + [(d[i][0], d[i][1]) for d in discs]
        out.append(f'<polyline class="obstacle-path" points="{_pts(path)}"/>')
        xe, ye = path[-1]
        out.append(f'<circle class="obstacle" cx="{xe:.4f}" cy="{ye:.4f}" r="{r:.4f}"/>')
    for s in sampled_steps(steps, every):
        out.append(f'<polygon class="region" data-t="{s["t"]}" points="{_pts(s["region"])}"/>')
    for s in sampled_steps(steps, every):
        refs = s["refs"]
        out.append(f'<polyline class="mpc" data-t="{s["t"]}" points="{_pts(s["q_star"])}"/>')
        out.append(f'<polyline class="reference" data-t="{s["t"]}" points="{_pts([refs["q_short"], refs["q_long"]])}"/>')
    robot = [header["robot"][0:2]] + [s["state"][0:2] for s in steps]
    out.append(f'<polyline class="robot-path" points="{_pts(robot)}"/>')
    sx, sy = header["robot"][0:2]
    out.append(f'<circle class="start" cx="{sx:.4f}" cy="{sy:.4f}" r="{header.get("robot_radius", 0.3):.4f}"/>')
    gx, gy = header["goal"]
    out.append(f'<polygon class="goal" points="{_pts(_star(gx, gy, 0.4))}"/>')
    flags = steps[-1]["flags"] if steps else {}
    label = "success" if flags.get("success") else "collision" if flags.get("collision") else "timeout" if flags.get("timeout") else "running"
    out.append("</g>")
    title = escape(f"stage {header.get('stage')} seed {header.get('seed')} {label}")
    out.append(f"<title>{title}</title>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def export_json(trace: list[dict]) -> str:
    """Canonical JSON: sorted keys, fixed separators, trailing newline."""
    return json.dumps(trace, sort_keys=True, separators=(",", ":")) + "\n"


def replay_export(archive: dict[int, list[dict]] | str | Path, episode_id: int, every: int = 5) -> tuple[str, str]:
    if not isinstance(archive, dict):
        archive = load_archive(archive)
    trace = _get_episode(archive, episode_id)
    return render_svg(trace, every), export_json(trace)


def write_replay(archive, episode_id: int, out_dir: str | Path, every: int = 5) -> tuple[Path, Path]:
    svg, js = replay_export(archive, episode_id, every)
    out = Path(out_dir) / "replays"
    out.mkdir(parents=True, exist_ok=True)
    svg_path = out / f"episode_{episode_id}.svg"
    json_path = out / f"episode_{episode_id}.json"
    svg_path.write_text(svg)
    json_path.write_text(js)
    return svg_path, json_path
