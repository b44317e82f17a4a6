"""Small helpers for reading text from paths, byte strings or streams."""

import io
from typing import Iterator


def iter_lines(source) -> Iterator[str]:
    """Yield decoded lines from a path, ``bytes`` object or (binary or text) stream."""
    if isinstance(source, (bytes, bytearray)):
        yield from io.StringIO(bytes(source).decode("utf-8"))
    elif hasattr(source, "read"):
        data = source.read()
        if isinstance(data, bytes):
            data = data.decode("utf-8")
        yield from io.StringIO(data)
    else:
        with open(source, encoding="utf-8") as fh:
            yield from fh
