"""Minimal static SVG plots: axes, polylines and sticks."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

_COLORS = ("#1f4e9c", "#b5651d", "#2e8b57", "#8b1a1a", "#6a3d9a", "#444444")


@dataclass
class Series:
    label: str
    x: np.ndarray
    y: np.ndarray
    kind: str = "line"  # "line", "sticks" or "dots"

    def __post_init__(self):
        self.x = np.asarray(self.x, float)
        self.y = np.asarray(self.y, float)


@dataclass
class Plot:
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    series: list[Series] = field(default_factory=list)
    width: int = 640
    height: int = 420

    def add(self, label, x, y, kind="line") -> "Plot":
        self.series.append(Series(label, x, y, kind))
        return self

    def render(self) -> str:
        m_left, m_right, m_top, m_bottom = 70, 20, 35, 50
        pw = self.width - m_left - m_right
        ph = self.height - m_top - m_bottom
        xs = np.concatenate([s.x for s in self.series]) if self.series else np.array([0.0, 1.0])
        ys = np.concatenate([s.y for s in self.series]) if self.series else np.array([0.0, 1.0])
        ys = np.concatenate([ys, [0.0]]) if any(s.kind == "sticks" for s in self.series) else ys
        x0, x1 = _span(xs)
        y0, y1 = _span(ys)

        def px(v):
            return m_left + (v - x0) / (x1 - x0) * pw

        def py(v):
            return m_top + ph - (v - y0) / (y1 - y0) * ph

        out = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" height="{self.height}" '
            f'font-family="sans-serif" font-size="12">',
            f'<rect x="{m_left}" y="{m_top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
            f'<text x="{self.width / 2:.1f}" y="20" text-anchor="middle">{escape(self.title)}</text>',
            f'<text x="{m_left + pw / 2:.1f}" y="{self.height - 10}" text-anchor="middle">'
            f"{escape(self.xlabel)}</text>",
            f'<text x="15" y="{m_top + ph / 2:.1f}" text-anchor="middle" '
            f'transform="rotate(-90 15 {m_top + ph / 2:.1f})">{escape(self.ylabel)}</text>',
        ]
        for t in np.linspace(x0, x1, 5):
            out.append(f'<text x="{px(t):.1f}" y="{m_top + ph + 16}" text-anchor="middle">{t:.3g}</text>')
        for t in np.linspace(y0, y1, 5):
            out.append(f'<text x="{m_left - 6}" y="{py(t) + 4:.1f}" text-anchor="end">{t:.3g}</text>')
        for i, s in enumerate(self.series):
            c = _COLORS[i % len(_COLORS)]
            if s.kind == "sticks":
                for a, b in zip(s.x, s.y):
                    out.append(f'<line x1="{px(a):.2f}" y1="{py(0):.2f}" x2="{px(a):.2f}" '
                               f'y2="{py(b):.2f}" stroke="{c}" stroke-width="2"/>')
            elif s.kind == "dots":
                for a, b in zip(s.x, s.y):
                    out.append(f'<circle cx="{px(a):.2f}" cy="{py(b):.2f}" r="1.5" fill="{c}"/>')
            else:
                pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(s.x, s.y))
                out.append(f'<polyline points="{pts}" fill="none" stroke="{c}" stroke-width="1.5"/>')
            out.append(f'<text x="{m_left + pw - 5}" y="{m_top + 16 + 14 * i}" text-anchor="end" '
                       f'fill="{c}">{escape(s.label)}</text>')
        out.append("</svg>")
        return "\n".join(out) + "\n"

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.write_text(self.render())
        return path


def _span(v: np.ndarray) -> tuple[float, float]:
    v = v[np.isfinite(v)]
    if v.size == 0:
        return 0.0, 1.0
    lo, hi = float(v.min()), float(v.max())
    if hi - lo < 1e-300:
        return lo - 0.5, hi + 0.5
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad
