"""Pull numbers, paths and booleans out of free-form model replies."""

from __future__ import annotations

import re
from typing import Sequence


class ParseFailure(ValueError):
    """Nothing usable in a reply.  ``raw`` keeps the text for the audit log."""

    def __init__(self, message: str, raw: str):
        super().__init__(message)
        self.raw = raw


_NUMBER = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_LIST = re.compile(r"\[\s*(" + _NUMBER + r"(?:\s*,\s*" + _NUMBER + r")*)?\s*,?\s*\]")
_BOOL = re.compile(r"(?<![A-Za-z0-9_])(true|false)(?![A-Za-z0-9_])", re.IGNORECASE)


def _lists(text: str) -> list[list[str]]:
    out = []
    for m in _LIST.finditer(text):
        body = m.group(1)
        out.append([] if body is None else [s.strip() for s in body.split(",")])
    return out


def parse_float_array(text: str, expected_len: int) -> list[float]:
    """Last bracketed numeric list with exactly ``expected_len`` entries.

    Surrounding prose and markdown code fences are ignored.
    """
    for items in reversed(_lists(text)):
        if len(items) == expected_len:
            return [float(s) for s in items]
    raise ParseFailure(f"no list of {expected_len} numbers found", text)


def parse_path(text: str) -> list[int]:
    """Last non-empty bracketed list of integers (a proposed state sequence)."""
    for items in reversed(_lists(text)):
        if items and all(re.fullmatch(r"[-+]?\d+", s) for s in items):
            return [int(s) for s in items]
    raise ParseFailure("no list of state ids found", text)


def parse_bool(text: str) -> bool:
    """Last standalone True/False token, case-insensitive."""
    hits = _BOOL.findall(text)
    if not hits:
        raise ParseFailure("no True/False token found", text)
    return hits[-1].lower() == "true"


def format_float_array(values: Sequence[float], digits: int | None = None) -> str:
    """``[a, b, ...]``; exact ``repr`` when ``digits`` is None."""
    if digits is None:
        items = [repr(float(v)) for v in values]
    else:
        items = [format(float(v), f".{digits}g") for v in values]
    return "[" + ", ".join(items) + "]"
