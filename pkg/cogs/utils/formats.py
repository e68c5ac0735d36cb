import math
from typing import List, Optional, Sequence

import pandas as pd


def plural(count: int, singular: str, plural: Optional[str] = None) -> str:
    """``plural(3, "scene")`` gives ``"3 scenes"``."""
    word = singular if abs(count) == 1 else (plural or f"{singular}s")
    return f"{count} {word}"


def with_delta(value: float, base: float, digits: int = 2) -> str:
    """``"9.02 (-0.34)"``: a value followed by its change from ``base``."""
    if math.isnan(value):
        return "nan"
    return f"{value:.{digits}f} ({value - base:+.{digits}f})"


def _cell(value, float_format: str) -> str:
    return float_format.format(value) if isinstance(value, float) else str(value)


def rst_table(frame: pd.DataFrame, float_format: str = "{:.4f}") -> str:
    """Renders a report frame as an rST grid table, one row per frame row.

    Example:

    +------+--------------+
    | mode |    3 obs     |
    +------+--------------+
    | ocm  | 9.36 (+0.00) |
    | sum  | 9.40 (+0.00) |
    +------+--------------+
    """
    header = [str(c) for c in frame.columns]
    body: List[Sequence[str]] = [[_cell(v, float_format) for v in row] for row in frame.itertuples(index=False)]
    widths = [max(len(line[i]) for line in [header, *body]) + 2 for i in range(len(header))]
    rule = "+" + "+".join("-" * w for w in widths) + "+"

    def line(cells):
        return "|" + "|".join(f"{c:^{w}}" for c, w in zip(cells, widths)) + "|"

    return "\n".join([rule, line(header), rule, *(line(row) for row in body), rule])
