"""
traveling_observer.formatters

Locale-aware rendering of the human-readable reports printed by the
command line.  Machine-readable artifacts (CSV, JSON) never go through
these helpers.
"""
from __future__ import annotations
from datetime import timedelta
from typing import Literal, Mapping, Optional, Union

import pandas as pd
from babel import Locale, UnknownLocaleError, dates, numbers

from .errors import ConfigError
from .metrics import AGGREGATES

DEFAULT_LOCALE = "en_US"
DECIMAL_FORMAT = "#,##0.0000"

TimeDeltaFormats = Literal["narrow", "short", "long"]

LocaleLike = Union[str, Locale]


def get_locale(locale: Optional[LocaleLike] = None) -> Locale:
    """
    Parses ``locale`` (``en_US``, ``de-DE`` ...), defaulting to
    ``en_US``.
    """
    if isinstance(locale, Locale):
        return locale
    identifier = locale or DEFAULT_LOCALE
    try:
        return Locale.parse(identifier, sep="-" if "-" in identifier else "_")
    except (UnknownLocaleError, ValueError) as error:
        raise ConfigError(f"unknown locale {locale!r}: {error}", key="locale") from None


def format_decimal(
        number: float,
        locale: Optional[LocaleLike] = None,
        format: Optional[str] = DECIMAL_FORMAT
) -> str:
    return numbers.format_decimal(number, format=format, locale=get_locale(locale))


def format_percent(
        number: float,
        locale: Optional[LocaleLike] = None,
        format: Optional[str] = "#,##0.00%"
) -> str:
    """
    Formats a percentage given on the 0-100 scale.
    """
    return numbers.format_percent(number / 100.0, format=format, locale=get_locale(locale))


def format_duration(
        delta: timedelta,
        locale: Optional[LocaleLike] = None,
        format: TimeDeltaFormats = "long"
) -> str:
    return dates.format_timedelta(delta, format=format, locale=get_locale(locale))


def format_metric(value: float, metric: str, locale: Optional[LocaleLike] = None) -> str:
    if value != value:
        return "-"
    if metric in ("accuracy", "normalized_acc", "mean_acc", "best_pct", "win_pct"):
        return format_percent(value, locale)
    return format_decimal(value, locale)


def _render(frame: pd.DataFrame) -> str:
    table = frame.astype(str)
    widths = {
        column: max([len(str(column))] + [len(cell) for cell in table[column]])
        for column in table.columns
    }
    header = "  ".join(str(column).ljust(widths[column]) for column in table.columns)
    lines = [header, "  ".join("-" * widths[column] for column in table.columns)]
    for _, row in table.iterrows():
        cells = [
            row[column].rjust(widths[column]) if i else row[column].ljust(widths[column])
            for i, column in enumerate(table.columns)
        ]
        lines.append("  ".join(cells))
    return "\n".join(lines)


def render_suite(suite: pd.DataFrame, locale: Optional[LocaleLike] = None) -> str:
    """
    Renders the aggregate table of :func:`~traveling_observer.metrics.metric_suite`.
    """
    frame = pd.DataFrame({"method": [str(m) for m in suite.index]})
    for name in AGGREGATES:
        if name == "mean_rank":
            frame[name] = [format_decimal(v, locale, "0.00") for v in suite[name]]
        else:
            frame[name] = [format_metric(v, name, locale) for v in suite[name]]
    return _render(frame)


def render_reported(
        reported: Mapping[str, float],
        metric: str,
        locale: Optional[LocaleLike] = None
) -> str:
    """
    Renders one line per task with its reported test metric.
    """
    frame = pd.DataFrame({
        "task": list(reported),
        metric: [format_metric(v, metric, locale) for v in reported.values()],
    })
    return _render(frame)
