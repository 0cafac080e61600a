"""Braille-dot line charts for the terminal (each character cell holds a 2x4
dot block), used to eyeball training curves without a plotting stack."""

import shutil

from core.ansi import rgb_to_256_ansi

braille_lookup = [
    [0x01, 0x08],
    [0x02, 0x10],
    [0x04, 0x20],
    [0x40, 0x80],
]


def to_braille_block(block):
    bits = 0
    for y in range(4):
        for x in range(2):
            if block[y][x]:
                bits |= braille_lookup[y][x]
    return chr(0x2800 + bits)


def render_braille_bitmap(bitmap, color_func=None):
    h = len(bitmap)
    w = max(len(row) for row in bitmap) if h else 0

    for row in bitmap:
        row.extend([0] * (w - len(row)))

    if h % 4 != 0:
        bitmap += [[0] * w for _ in range(4 - h % 4)]
        h += (4 - h % 4)

    if w % 2 != 0:
        for row in bitmap:
            row.append(0)
        w += 1

    out_lines = []
    for by in range(0, h, 4):
        line = []
        for bx in range(0, w, 2):
            block = [[0]*2 for _ in range(4)]
            for y in range(4):
                for x in range(2):
                    block[y][x] = bitmap[by + y][bx + x]
            braille_char = to_braille_block(block)
            if color_func:
                color = color_func(by // 4, bx // 2)
                if color is not None:
                    braille_char = f"\x1b[38;5;{color}m{braille_char}\x1b[0m"
            line.append(braille_char)
        out_lines.append("".join(line))
    return "\n".join(out_lines)


def series_bitmap(values, width, height, lo=None, hi=None):
    """Rasterise one series into a height x width dot bitmap, resampling it
    to `width` columns and joining consecutive points with vertical runs."""
    values = list(values)
    bitmap = [[0] * width for _ in range(height)]
    if not values:
        return bitmap
    lo = min(values) if lo is None else lo
    hi = max(values) if hi is None else hi
    span = (hi - lo) or 1.0
    previous = None
    for x in range(width):
        v = values[min(len(values) - 1, x * len(values) // width)]
        y = height - 1 - round((min(max(v, lo), hi) - lo) / span * (height - 1))
        top, bottom = (y, y) if previous is None else (min(y, previous), max(y, previous))
        for yy in range(top, bottom + 1):
            bitmap[yy][x] = 1
        previous = y
    return bitmap


def plot_series(values, title, lo=None, hi=None, rows=6, rgb=(52, 235, 131), enable_color=True):
    """Chart of one series, `rows` text lines high and as wide as the
    terminal allows."""
    values = list(values)
    cols = max(10, min(shutil.get_terminal_size((80, 24)).columns - 12, 100))
    bitmap = series_bitmap(values, cols * 2, rows * 4, lo, hi)
    color = rgb_to_256_ansi(*rgb) if enable_color else None
    chart = render_braille_bitmap(bitmap, color_func=(lambda row, col: color) if color else None)
    lo_v = min(values) if lo is None and values else lo
    hi_v = max(values) if hi is None and values else hi
    lines = chart.split("\n")
    label_hi = f"{hi_v:8.4f} " if hi_v is not None else " " * 9
    label_lo = f"{lo_v:8.4f} " if lo_v is not None else " " * 9
    framed = [(label_hi if k == 0 else label_lo if k == len(lines) - 1 else " " * 9) + "┤" + line
              for k, line in enumerate(lines)]
    return f"{title} ({len(values)} iterations)\n" + "\n".join(framed)
