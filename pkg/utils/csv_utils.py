"""
CSV helpers for experiment artifacts
"""
import os
from typing import Dict, Iterable, Sequence

import numpy as np

import sys
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from config import CSV_FORMAT


def write_columns(path: str, columns: Dict[str, Sequence[float]]) -> str:
    """Write equal-length numeric columns with a header row; returns the path."""
    names = list(columns)
    data = np.column_stack([np.asarray(columns[name], dtype=float) for name in names]) \
        if names else np.empty((0, 0))
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    np.savetxt(path, data, fmt=CSV_FORMAT, delimiter=",", header=",".join(names), comments="")
    return path


def read_columns(path: str) -> Dict[str, np.ndarray]:
    """Read a CSV written by write_columns back into named float arrays."""
    table = np.genfromtxt(path, delimiter=",", names=True, dtype=float)
    table = np.atleast_1d(table)
    return {name: np.asarray(table[name], dtype=float) for name in table.dtype.names}


def format_value(value) -> str:
    """Numbers in the 17-digit CSV format, everything else as text."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return CSV_FORMAT % float(value)
    return str(value)


def write_summary(path: str, items: Dict[str, object]) -> str:
    """Write key,value rows."""
    rows = np.array([[key, format_value(value)] for key, value in items.items()], dtype=object)
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    np.savetxt(path, rows.reshape(-1, 2), fmt="%s", delimiter=",", header="key,value", comments="")
    return path


def write_rows(path: str, header: Iterable[str], rows: Iterable[Iterable[object]]) -> str:
    """Write mixed-type rows (acceptance tables, sweep tables)."""
    header = list(header)
    table = np.array([[format_value(v) for v in row] for row in rows], dtype=object)
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    np.savetxt(path, table.reshape(-1, len(header)), fmt="%s", delimiter=",",
               header=",".join(header), comments="")
    return path
