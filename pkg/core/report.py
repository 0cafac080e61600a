"""Boxed, column-aligned text blocks for terminal reports."""

import unicodedata

from wcwidth import wcswidth

from core.ansi import ANSI_ESCAPE, BOLD, RESET, WHITE_FG


class Box:
    BORDER_CHARS = {
        'top_left': '╭', 'top_right': '╮',
        'bottom_left': '╰', 'bottom_right': '╯',
        'horizontal': '─', 'vertical': '│'
    }

    def __init__(self, lines, box_title=None, border_color_code=WHITE_FG, padding_x=1):
        """
        A bordered block of text lines.
        Args:
            lines (list): already formatted text lines (may contain ANSI codes).
            box_title (str, optional): text embedded in the top border.
            border_color_code (str, optional): ANSI colour of border and title.
            padding_x (int, optional): spaces between content and the vertical borders.
        """
        self.lines = list(lines)
        self.box_title = box_title
        self.border_color_code = border_color_code
        self.padding_x = max(0, padding_x)

    @staticmethod
    def _visible_width(text):
        """
        Visible width of a string: ANSI codes stripped, wide characters
        counted twice, control and combining characters ignored.
        """
        no_ansi = ANSI_ESCAPE.sub('', text)
        cleaned = ''.join(
            ch for ch in no_ansi
            if unicodedata.category(ch)[0] != 'C'
            and not unicodedata.combining(ch)
        )
        return max(0, wcswidth(cleaned))

    def render(self, enable_color=True):
        color = self.border_color_code if enable_color else ""
        reset = RESET if enable_color else ""
        chars = self.BORDER_CHARS
        title = f" {self.box_title} " if self.box_title else ""
        inner = max([self._visible_width(line) for line in self.lines] + [self._visible_width(title)])
        width = inner + 2 * self.padding_x

        top_fill = chars['horizontal'] * (width - self._visible_width(title))
        out = [f"{color}{chars['top_left']}{title}{top_fill}{chars['top_right']}{reset}"]
        pad = ' ' * self.padding_x
        for line in self.lines:
            fill = ' ' * (inner - self._visible_width(line))
            out.append(f"{color}{chars['vertical']}{reset}{pad}{line}{fill}{pad}{color}{chars['vertical']}{reset}")
        out.append(f"{color}{chars['bottom_left']}{chars['horizontal'] * width}{chars['bottom_right']}{reset}")
        return "\n".join(out)


def table_lines(rows, header=None, enable_color=True):
    """Left-aligned columns separated by two spaces."""
    rows = [tuple(str(c) for c in row) for row in rows]
    if header:
        rows = [tuple(header)] + rows
    if not rows:
        return []
    widths = [max(Box._visible_width(r[k]) for r in rows) for k in range(len(rows[0]))]
    lines = []
    for n, row in enumerate(rows):
        cells = [c + ' ' * (w - Box._visible_width(c)) for c, w in zip(row, widths)]
        line = "  ".join(cells).rstrip()
        if header and n == 0 and enable_color:
            line = f"{BOLD}{line}{RESET}"
        lines.append(line)
    return lines


def render_comparison(report, title="OTALA vs LSTM", names=("OTALA", "LSTM"), enable_color=True):
    """Boxed side-by-side view of a ComparisonReport."""
    lines = table_lines(report.rows(), header=("", *names), enable_color=enable_color)
    return Box(lines, box_title=title).render(enable_color=enable_color)


def render_confusion(confusion, classes, enable_color=True):
    """Confusion matrix rows (truth) against columns (prediction)."""
    header = ("truth\\pred", *(c.value for c in classes))
    rows = [(c.value, *(int(n) for n in confusion[k])) for k, c in enumerate(classes)]
    return Box(table_lines(rows, header=header, enable_color=enable_color),
               box_title="confusion").render(enable_color=enable_color)
