"""
Summary management - per-cell summaries and sweep-level tables
"""

import csv
import json
from pathlib import Path

from metrics import RunSummary, aggregate_runs

SUMMARY_FIELDS = ['task_kind', 'condition', 'seed', 'rounds', 'degenerate_rounds', 'window',
                  'mean_reward', 'mean_accuracy', 'mean_grade', 'grade_inflation',
                  'saturated', 'wirehead_flag']
AGGREGATE_FIELDS = ['task_kind', 'condition', 'seeds', 'mean_reward', 'mean_accuracy',
                    'mean_grade', 'grade_inflation', 'saturated_seeds', 'wirehead_seeds']


class SummaryManager:
    """Writes and reads the summary files of one sweep directory"""

    def __init__(self, base_path):
        self.base_path = Path(base_path)
        self.table_path = self.base_path / 'summary.csv'
        self.aggregate_path = self.base_path / 'aggregate.csv'
        self.inflation_path = self.base_path / 'inflation.csv'

    def write_cell_summary(self, cell_dir, summary):
        """Write summary.json into a cell directory"""
        path = Path(cell_dir) / 'summary.json'
        with open(path, 'w') as f:
            json.dump(summary.to_dict(), f, indent=2, sort_keys=True)
        return path

    def load_cell_summary(self, cell_dir):
        """
        Load a cell's summary

        Returns:
            RunSummary or None if the cell has none
        """
        path = Path(cell_dir) / 'summary.json'
        if not path.exists():
            return None
        with open(path, 'r') as f:
            return RunSummary.from_dict(json.load(f))

    def load_summaries(self, manifest):
        """Summaries of every finished cell in manifest order"""
        summaries = []
        for entry in manifest.list_cells('done'):
            summary = self.load_cell_summary(self.base_path / entry['path'])
            if summary is not None:
                summaries.append(summary)
        return summaries

    def write_tables(self, summaries, conditions=None, families=None):
        """
        Write summary.csv (one row per cell), aggregate.csv (seed means per
        family and condition) and inflation.csv (condition x family matrix)

        Args:
            summaries: RunSummary list
            conditions: Row order for inflation.csv (defaults to first seen)
            families: Column order for inflation.csv (defaults to first seen)

        Returns:
            list: Aggregate rows
        """
        self.base_path.mkdir(parents=True, exist_ok=True)
        with open(self.table_path, 'w', newline='') as f:
            writer = csv.DictWriter(f, fieldnames=SUMMARY_FIELDS)
            writer.writeheader()
            for summary in summaries:
                writer.writerow(summary.to_dict())

        aggregates = aggregate_runs(summaries)
        with open(self.aggregate_path, 'w', newline='') as f:
            writer = csv.DictWriter(f, fieldnames=AGGREGATE_FIELDS)
            writer.writeheader()
            writer.writerows(aggregates)

        conditions = conditions or list(dict.fromkeys(row['condition'] for row in aggregates))
        families = families or list(dict.fromkeys(row['task_kind'] for row in aggregates))
        matrix = {(row['condition'], row['task_kind']): row['grade_inflation']
                  for row in aggregates}
        with open(self.inflation_path, 'w', newline='') as f:
            writer = csv.DictWriter(f, fieldnames=['condition', *families])
            writer.writeheader()
            for condition in conditions:
                row = {'condition': condition}
                for family in families:
                    value = matrix.get((condition, family))
                    row[family] = '' if value is None else value
                writer.writerow(row)

        return aggregates

    def read_aggregates(self):
        """
        Read aggregate.csv back

        Returns:
            list: dicts with numeric fields converted; empty cells become None
        """
        if not self.aggregate_path.exists():
            return []
        rows = []
        with open(self.aggregate_path, 'r', newline='') as f:
            for row in csv.DictReader(f):
                parsed = {'task_kind': row['task_kind'], 'condition': row['condition']}
                for key in AGGREGATE_FIELDS[2:]:
                    value = row[key]
                    if value == '':
                        parsed[key] = None
                    elif key in ('seeds', 'saturated_seeds', 'wirehead_seeds'):
                        parsed[key] = int(value)
                    else:
                        parsed[key] = float(value)
                rows.append(parsed)
        return rows
