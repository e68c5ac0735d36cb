import os
import tempfile
import typing
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from .errors import FormatError


def isbool(input: str) -> bool:
    return input.strip().lower() in ("true", "false", "yes", "no", "on", "off")


def parse_bool(input: str) -> bool:
    return input.strip().lower() in ("true", "yes", "on")


@contextmanager
def atomic_write(path: typing.Union[str, os.PathLike], mode: str = "wb"):
    """Write to a temporary file next to ``path`` and rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, mode) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def write_bytes_atomic(path, payload: bytes) -> None:
    with atomic_write(path, "wb") as fh:
        fh.write(payload)


def write_text_atomic(path, text: str) -> None:
    with atomic_write(path, "w") as fh:
        fh.write(text)


def write_csv_atomic(frame, path) -> None:
    write_text_atomic(path, frame.to_csv(index=False))


class ByteReader:
    """Cursor over a binary payload that fails cleanly on truncation."""

    def __init__(self, payload: bytes, what: str):
        self.payload = payload
        self.offset = 0
        self.what = what

    def take(self, dtype: str, count: int) -> np.ndarray:
        size = np.dtype(dtype).itemsize * count
        if self.offset + size > len(self.payload):
            raise FormatError(
                f"Truncated {self.what}",
                expected=f"{size} more bytes at offset {self.offset}",
                found=f"{len(self.payload) - self.offset} bytes",
            )
        out = np.frombuffer(self.payload, dtype=dtype, count=count, offset=self.offset)
        self.offset += size
        return out

    def raw(self, size: int) -> bytes:
        return self.take("u1", size).tobytes()

    def finish(self) -> None:
        if self.offset != len(self.payload):
            raise FormatError(
                f"Trailing bytes in {self.what}", expected=self.offset, found=len(self.payload)
            )
