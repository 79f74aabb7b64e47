"""Pull a merge program out of free-form completion text."""

from __future__ import annotations

import re

_FENCE_RE = re.compile(r"```[^\n]*\n(.*?)```", re.DOTALL)


def extract_program(raw: str) -> str | None:
    """Return the first fenced code block containing a ``merge(`` header.

    Fences and surrounding prose are stripped.  Returns None when no such
    block exists (the "no function extracted" filter category).
    """
    for match in _FENCE_RE.finditer(raw):
        body = match.group(1)
        if any(line.lstrip().startswith("merge(") for line in body.splitlines()):
            return body.strip()
    return None
