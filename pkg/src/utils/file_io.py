import os
import tempfile
from pathlib import Path

from engine.errors import MicrofileIOError


def write_atomic(path, write):
    """
    Write a file through a temp file in the same directory and rename it into place.

    Args:
        path: destination path
        write: callable receiving the temp path and producing the file there
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    os.close(fd)
    try:
        write(tmp)
        os.replace(tmp, path)
    except OSError as e:
        raise MicrofileIOError(f"Could not write {path}: {e}") from e
    finally:
        if os.path.exists(tmp):
            os.remove(tmp)
    return path


def write_text_atomic(path, text):
    def _write(tmp):
        with open(tmp, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)

    return write_atomic(path, _write)
