"""
Sweep manifest - index of every cell, its output directory and status
"""

import json
import threading
from datetime import datetime
from pathlib import Path

from errors import FixtureError, UsageError

PENDING = 'pending'
RUNNING = 'running'
DONE = 'done'
FAILED = 'failed'


class SweepManifest:
    """
    Manages manifest.json in a sweep output directory

    Args:
        base_path: Sweep directory
        create: Create cells/ when missing; False opens an existing sweep
            without touching the directory
    """

    def __init__(self, base_path, create=True):
        # Set up storage paths
        self.base_path = Path(base_path)
        self.cells_path = self.base_path / 'cells'
        self.index_path = self.base_path / 'manifest.json'
        self._lock = threading.Lock()

        if create:
            self.cells_path.mkdir(parents=True, exist_ok=True)

        # Load or create index
        self.index = self._load_index()

    def _load_index(self):
        """
        Load manifest index from file

        Raises:
            FixtureError: manifest.json exists but is not a readable index
        """
        if not self.index_path.exists():
            return {'cells': {}}
        try:
            with open(self.index_path, 'r') as f:
                index = json.load(f)
        except json.JSONDecodeError as e:
            raise FixtureError(f"corrupt sweep manifest: {e.msg}", line=e.lineno,
                               source=str(self.index_path))
        except OSError as e:
            raise FixtureError(f"cannot read sweep manifest: {e.strerror}",
                               source=str(self.index_path))
        if not isinstance(index, dict) or not isinstance(index.get('cells'), dict):
            raise FixtureError("corrupt sweep manifest: expected a 'cells' mapping",
                               field='cells', source=str(self.index_path))
        return index

    def _save_index(self):
        """Save manifest index to file"""
        tmp_path = self.index_path.with_suffix('.json.tmp')
        with open(tmp_path, 'w') as f:
            json.dump(self.index, f, indent=2)
        tmp_path.replace(self.index_path)

    def cell_dir(self, cell):
        """Output directory of a cell"""
        return self.cells_path / cell.family / cell.condition.value / f"seed-{cell.seed}"

    def add_cell(self, cell):
        """
        Register a cell, keeping any status it already has

        Returns:
            dict: Cell entry

        Raises:
            UsageError: Another cell already uses this id
        """
        with self._lock:
            entry = self.index['cells'].get(cell.cell_id)
            if entry is not None:
                if (entry['family'], entry['condition'], entry['seed']) != \
                        (cell.family, cell.condition.value, cell.seed):
                    raise UsageError(f"Cell id '{cell.cell_id}' is already taken")
                return entry

            entry = {
                'cell_id': cell.cell_id,
                'family': cell.family,
                'condition': cell.condition.value,
                'seed': cell.seed,
                'path': str(self.cell_dir(cell).relative_to(self.base_path)),
                'status': PENDING,
                'error': None,
                'rounds': 0,
                'updated_at': datetime.now().isoformat(),
            }
            self.index['cells'][cell.cell_id] = entry
            self._save_index()
            return entry

    def mark(self, cell, status, error=None, rounds=None):
        """Record a cell's status"""
        with self._lock:
            entry = self.index['cells'][cell.cell_id]
            entry['status'] = status
            entry['error'] = error
            if rounds is not None:
                entry['rounds'] = rounds
            entry['updated_at'] = datetime.now().isoformat()
            self._save_index()

    def is_done(self, cell):
        entry = self.index['cells'].get(cell.cell_id)
        return entry is not None and entry['status'] == DONE

    def list_cells(self, status=None):
        """
        List cell entries, optionally filtered by status

        Returns:
            list: Entries in registration order
        """
        return [entry for entry in self.index['cells'].values()
                if status is None or entry['status'] == status]

    def failed_cells(self):
        return self.list_cells(FAILED)
