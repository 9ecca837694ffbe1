"""Plain ``key = value`` configuration files.

Blank lines and ``#`` comments are ignored. Keys use underscores or dashes
interchangeably; values stay strings and are converted by the caller.
"""

from pathlib import Path

from ..errors import ParseError


def read_config(path):
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ParseError(f"{path}:{lineno}: expected 'key = value'", row=lineno)
        values[key.strip().replace("-", "_")] = value.strip()
    return values
