"""CSV writers for sweep tables, event logs and oracle tables."""

import csv
from pathlib import Path

from .engine import SweepRow

EVENT_FIELDS = ("time", "particle", "kind", "from", "to")


def _open(path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path.open("w", newline="")


def write_sweep_csv(rows, path):
    with _open(path) as fh:
        w = csv.writer(fh)
        w.writerow(SweepRow.FIELDS)
        for row in rows:
            w.writerow(row.as_list())


def write_events_csv(events, path):
    with _open(path) as fh:
        w = csv.writer(fh)
        w.writerow(EVENT_FIELDS)
        for t, i, kind, x, y in events:
            w.writerow([repr(float(t)), i, kind, x, y])


def write_table(header, rows, path):
    with _open(path) as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
