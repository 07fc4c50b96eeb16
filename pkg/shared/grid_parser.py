"""
Grid list parser for benchmark sweeps
Accepts singles and inclusive ranges: "1,3", "3-7", "1, 3, 5-6"
"""

import re
from typing import List, Tuple

GRID_HELP = "Invalid grid. Use ranges (3-7) or singles (5), separated by commas."


class GridParser:
    """Parse integer grid entries such as ``--views 1,3`` or ``--tpc 3-7``"""

    def __init__(self):
        self.ranges: List[Tuple[int, int]] = []
        self.values: List[int] = []

    def _parse_entry(self, entry: str) -> Tuple[int, int]:
        low, sep, high = entry.partition('-')
        if not sep:
            value = int(entry)
            return value, value
        low, high = int(low), int(high)
        if low > high:
            raise ValueError(f"range {entry} runs backwards")
        return low, high

    def parse(self, grid_text: str) -> bool:
        """Fill ``values`` with the sorted distinct integers; False on any bad entry"""
        self.ranges = []
        self.values = []
        entries = [e.strip() for e in re.split(r'[,;]', grid_text or '') if e.strip()]
        try:
            self.ranges = [self._parse_entry(e) for e in entries]
        except ValueError:
            self.ranges = []
            return False
        self.values = sorted({v for low, high in self.ranges for v in range(low, high + 1)})
        return bool(self.values)


def parse_grid(grid_text: str) -> List[int]:
    """Parse grid text or raise ValueError"""
    parser = GridParser()
    if not parser.parse(grid_text):
        raise ValueError(f"{GRID_HELP} (got {grid_text!r})")
    return parser.values
