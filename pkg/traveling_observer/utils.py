"""
traveling_observer.utils
"""
from __future__ import annotations
import os
import zlib
from datetime import datetime

from pytz import UTC

THREADS_ENV = "TOM_THREADS"


def stable_hash(text: str) -> int:
    """
    Returns a platform independent 32-bit hash of ``text``.  Python's
    builtin :func:`hash` is salted per process and must never feed a
    random stream.
    """
    return zlib.crc32(text.encode("utf-8")) & 0xFFFFFFFF


def get_thread_count() -> int:
    """
    Returns the worker cap from the ``TOM_THREADS`` environment
    variable.  Defaults to 1 so runs stay deterministic.
    """
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        count = int(raw)
    except ValueError:
        return 1
    return max(1, count)


def utc_now() -> datetime:
    """
    Returns the current time as an aware UTC datetime.
    """
    return datetime.now(UTC)


def to_utc_string(dt: datetime) -> str:
    """
    Converts a datetime to an ISO-8601 UTC string.  Naive datetimes are
    assumed to already be in UTC.
    """
    if dt.tzinfo is None:
        dt = UTC.localize(dt)
    return dt.astimezone(UTC).isoformat()
