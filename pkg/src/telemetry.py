"""
Round logs - append-only JSON lines, one RoundRecord per line
"""

import json
from pathlib import Path

from errors import FixtureError
from metrics import RoundRecord


class RoundLog:
    """Writes a cell's round log; every line is flushed as soon as it is written"""

    def __init__(self, path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._file = None
        self.count = 0

    def __enter__(self):
        self._file = open(self.path, 'w')
        return self

    def __exit__(self, exc_type, exc, tb):
        self.close()
        return False

    def append(self, record):
        self._file.write(json.dumps(record.to_dict(), sort_keys=True) + '\n')
        self._file.flush()
        self.count += 1

    def close(self):
        if self._file is not None:
            self._file.close()
            self._file = None


def read_rounds(path):
    """
    Load a round log

    Returns:
        list: RoundRecord in file order

    Raises:
        FixtureError: Unreadable file or malformed line
    """
    path = Path(path)
    records = []
    try:
        with open(path, 'r') as f:
            for line_number, line in enumerate(f, start=1):
                if not line.strip():
                    continue
                try:
                    records.append(RoundRecord.from_dict(json.loads(line)))
                except (ValueError, TypeError) as e:
                    raise FixtureError(str(e), line=line_number, source=str(path))
    except OSError as e:
        raise FixtureError(f"cannot read round log: {e.strerror}", source=str(path))
    return records
