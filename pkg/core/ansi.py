from functools import lru_cache
import logging
import re

# --- ANSI Escape Codes (for easier reference) ---
RESET = "\x1b[0m"
BOLD = "\x1b[1m"
DIM = "\x1b[2m"

# Foreground Colors
RED_FG = "\x1b[31m"
CYAN_FG = "\x1b[36m"
WHITE_FG = "\x1b[37m"
SUNNY_YELLOW_FG = "\033[38;2;232;222;114m"

ANSI_ESCAPE = re.compile(r'\x1b\[[0-9;]*[a-zA-Z]')


@lru_cache(maxsize=4096)
def rgb_to_256_ansi(r, g, b):
    if r == g == b:
        if r < 8: return 16
        if r > 248: return 231
        return 232 + (r * 23) // 255
    return 16 + 36 * ((r * 5) // 255) + 6 * ((g * 5) // 255) + ((b * 5) // 255)


def colorize(text, color, enabled=True):
    return f"{color}{text}{RESET}" if enabled and color else text


def strip_ansi(text):
    return ANSI_ESCAPE.sub('', text)


# --- Logging ---
class ColorFormatter(logging.Formatter):
    """Prefixes each record with its level, coloured per level."""

    LEVEL_COLORS = {
        logging.DEBUG: DIM,
        logging.INFO: CYAN_FG,
        logging.WARNING: SUNNY_YELLOW_FG,
        logging.ERROR: RED_FG,
        logging.CRITICAL: BOLD + RED_FG,
    }

    def __init__(self, enable_color=True):
        super().__init__("%(levelname)s %(name)s: %(message)s")
        self.enable_color = enable_color

    def format(self, record):
        text = super().format(record)
        return colorize(text, self.LEVEL_COLORS.get(record.levelno, ""), self.enable_color)
