"""Minimal SVG line plots emitted by direct path construction."""

import math


def _fmt(x):
    return f"{x:.2f}"


def line_plot(series, path, title="", xlabel="", ylabel="", logy=False,
              width=640, height=420):
    """series: list of (label, xs, ys); writes an SVG file."""
    ml, mr, mt, mb = 64, 16, 28, 44
    pw, ph = width - ml - mr, height - mt - mb
    pts = []
    for _, xs, ys in series:
        for x, y in zip(xs, ys):
            if logy:
                if y <= 0:
                    continue
                y = math.log10(y)
            pts.append((x, y))
    if not pts:
        pts = [(0.0, 0.0), (1.0, 1.0)]
    x0 = min(p[0] for p in pts)
    x1 = max(p[0] for p in pts)
    y0 = min(p[1] for p in pts)
    y1 = max(p[1] for p in pts)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0

    def sx(x):
        return ml + pw * (x - x0) / (x1 - x0)

    def sy(y):
        return mt + ph * (1.0 - (y - y0) / (y1 - y0))

    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b"]
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>',
        f'<text x="{width / 2}" y="18" text-anchor="middle" font-size="13">{title}</text>',
        f'<text x="{width / 2}" y="{height - 8}" text-anchor="middle" font-size="11">{xlabel}</text>',
        f'<text x="14" y="{height / 2}" text-anchor="middle" font-size="11" '
        f'transform="rotate(-90 14 {height / 2})">{("log10 " if logy else "") + ylabel}</text>',
    ]
    for k in range(5):
        yv = y0 + (y1 - y0) * k / 4
        out.append(
            f'<text x="{ml - 6}" y="{_fmt(sy(yv))}" text-anchor="end" '
            f'font-size="9">{yv:.3g}</text>'
        )
        xv = x0 + (x1 - x0) * k / 4
        out.append(
            f'<text x="{_fmt(sx(xv))}" y="{height - mb + 14}" text-anchor="middle" '
            f'font-size="9">{xv:.3g}</text>'
        )
    for c, (label, xs, ys) in enumerate(series):
        d = []
        for x, y in zip(xs, ys):
            if logy:
                if y <= 0:
                    continue
                y = math.log10(y)
            d.append(f"{'M' if not d else 'L'}{_fmt(sx(x))},{_fmt(sy(y))}")
        if d:
            out.append(
                f'<path d="{" ".join(d)}" fill="none" '
                f'stroke="{colors[c % len(colors)]}" stroke-width="1.5"/>'
            )
            out.append(
                f'<text x="{ml + 8}" y="{mt + 16 + 14 * c}" font-size="10" '
                f'fill="{colors[c % len(colors)]}">{label}</text>'
            )
    out.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")
