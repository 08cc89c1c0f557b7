"""Self-contained SVG line and scatter plots for quick inspection of reports."""
import math
import pathlib
from typing import Dict, Optional, Sequence, Tuple
from xml.sax.saxutils import escape

from redlab.exceptions import Unwritable

WIDTH, HEIGHT = 480, 320
MARGIN = 48
COLORS = ('#1f77b4', '#d62728', '#2ca02c', '#9467bd', '#ff7f0e', '#8c564b')

Series = Sequence[Tuple[float, float]]


def _bounds(values):
    finite = [v for v in values if math.isfinite(v)]
    if not finite:
        return 0.0, 1.0
    lo, hi = min(finite), max(finite)
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    return lo, hi


def render_svg(
    series: Dict[str, Series],
    title: str = '',
    xlabel: str = '',
    ylabel: str = '',
    scatter: bool = False,
    classes: Optional[Sequence[int]] = None,
) -> str:
    """SVG document plotting each named series.

    Points with a non-finite coordinate are skipped. With ``scatter`` points
    are drawn as dots, colored by ``classes`` when given.
    """
    points = [p for s in series.values() for p in s]
    x0, x1 = _bounds([p[0] for p in points])
    y0, y1 = _bounds([p[1] for p in points])

    def sx(x):
        return MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2 * MARGIN)

    def sy(y):
        return HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2 * MARGIN)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<line x1="{MARGIN}" y1="{HEIGHT - MARGIN}" x2="{WIDTH - MARGIN}" y2="{HEIGHT - MARGIN}" stroke="black"/>',
        f'<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{HEIGHT - MARGIN}" stroke="black"/>',
        f'<text x="{WIDTH / 2}" y="{MARGIN / 2}" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<text x="{WIDTH / 2}" y="{HEIGHT - 8}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>',
        f'<text x="12" y="{HEIGHT / 2}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 12 {HEIGHT / 2})">{escape(ylabel)}</text>',
        f'<text x="{MARGIN}" y="{HEIGHT - MARGIN + 16}" font-size="10">{x0:.4g}</text>',
        f'<text x="{WIDTH - MARGIN}" y="{HEIGHT - MARGIN + 16}" text-anchor="end" font-size="10">{x1:.4g}</text>',
        f'<text x="{MARGIN - 4}" y="{HEIGHT - MARGIN}" text-anchor="end" font-size="10">{y0:.4g}</text>',
        f'<text x="{MARGIN - 4}" y="{MARGIN + 4}" text-anchor="end" font-size="10">{y1:.4g}</text>',
    ]
    for i, (name, data) in enumerate(series.items()):
        color = COLORS[i % len(COLORS)]
        pts = [(sx(x), sy(y)) for x, y in data if math.isfinite(x) and math.isfinite(y)]
        if scatter:
            for j, (px, py) in enumerate(pts):
                fill = COLORS[classes[j] % len(COLORS)] if classes is not None else color
                out.append(f'<circle cx="{px:.2f}" cy="{py:.2f}" r="2.5" fill="{fill}"/>')
        elif pts:
            path = ' '.join(f'{px:.2f},{py:.2f}' for px, py in pts)
            out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        out.append(
            f'<text x="{WIDTH - MARGIN}" y="{MARGIN + 14 * (i + 1)}" text-anchor="end" font-size="11" '
            f'fill="{color}">{escape(name)}</text>'
        )
    out.append('</svg>')
    return '\n'.join(out) + '\n'


def write_svg(path, series: Dict[str, Series], **kwargs) -> pathlib.Path:
    path = pathlib.Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(render_svg(series, **kwargs), encoding='utf-8')
    except OSError as e:
        raise Unwritable(f'cannot write plot {path}: {e}') from e

    return path
