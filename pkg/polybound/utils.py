import os
from datetime import datetime

from dateutil import tz


def ensure_dir(path):
    """Create directory if it doesn't exist."""
    if path:
        os.makedirs(path, exist_ok=True)


def ensure_parent_dir(path):
    """Create the directory that will hold ``path``."""
    ensure_dir(os.path.dirname(os.path.abspath(path)))


def timestamp_now():
    """
    Current time as an ISO 8601 string with the local UTC offset.

    Returns:
        e.g. ``2026-10-16T09:30:00+02:00``
    """
    return datetime.now(tz.tzlocal()).replace(microsecond=0).isoformat()


def format_number(value, digits=6):
    """
    Short human-readable rendering of a float (``%.6g`` style).

    Args:
        value: Number or None
        digits: Significant digits

    Returns:
        Formatted string; ``-`` for None
    """
    if value is None:
        return "-"
    text = f"{value:.{digits}g}"
    return "0" if text == "-0" else text


def parse_assignments(text, convert=float):
    """
    Parse ``name=value,name=value`` as used by ``--sigma`` and ``--kappa``.

    Args:
        text: Comma separated assignments
        convert: Applied to every value (int for sigma, float for kappa)

    Returns:
        Dict of name to converted value

    Raises:
        ValueError: malformed entry, empty name or duplicate name
    """
    out = {}
    for item in filter(None, (part.strip() for part in text.split(","))):
        name, sep, value = item.partition("=")
        name = name.strip()
        if not sep or not name:
            raise ValueError(f"expected name=value, got '{item}'")
        if name in out:
            raise ValueError(f"'{name}' given twice")
        try:
            out[name] = convert(value.strip())
        except ValueError:
            raise ValueError(f"bad value for {name}: '{value.strip()}'") from None
    return out
