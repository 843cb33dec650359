import csv
import json
from io import TextIOWrapper
from pathlib import Path
from typing import *

import numpy as np

from .._helpers import InsufficientDataError
from ..sim import SensorStream

__all__ = [
    'write_sensor_log',
    'read_sensor_log',
    'write_table',
    'read_table',
    'write_array_table',
    'read_array_table',
]


def _open(file: Union[str, Path, TextIOWrapper], mode: str):
    if hasattr(file, 'read' if 'r' in mode else 'write'):
        return file, False
    return open(file, mode, encoding='utf-8', newline=''), True


def write_sensor_log(file: Union[str, Path, TextIOWrapper], streams: Mapping[str, SensorStream]):
    """Write sensor streams as JSON Lines.

    The log opens with one `{"stream", "fields"}` header per stream, followed
    by one `{"stream", "t", "values"}` record per reading, ordered by time and
    then by stream order. Floats are written with `repr` precision so a read
    returns identical arrays.

    ### Parameters
        `file` (str, Path, TextIOWrapper): filepath or file object
        `streams` (Mapping[str, SensorStream]): streams keyed by name
    """
    names = list(streams)
    fp, owned = _open(file, 'w')
    try:
        for name in names:
            fp.write(json.dumps({'stream': name, 'fields': list(streams[name].fields)}) + '\n')
        t = np.concatenate([np.asarray(streams[name].t, dtype=float) for name in names])
        which = np.concatenate([np.full(len(streams[name].t), k) for k, name in enumerate(names)])
        row = np.concatenate([np.arange(len(streams[name].t)) for name in names])
        for k in np.lexsort((which, t)):
            stream = streams[names[which[k]]]
            values = np.asarray(stream.values[row[k]], dtype=float)
            fp.write(json.dumps({'stream': stream.name, 't': float(t[k]), 'values': values.tolist()}) + '\n')
    finally:
        if owned:
            fp.close()


def read_sensor_log(file: Union[str, Path, TextIOWrapper], streams: Sequence[str] = None) -> Dict[str, SensorStream]:
    """Read a JSON Lines sensor log written by `write_sensor_log`.

    ### Parameters
        `file` (str, Path, TextIOWrapper): filepath or file object
        `streams` (Sequence[str], optional): streams to keep, default all

    ### Returns
        Dict[str, SensorStream]
    """
    fields, t, values = {}, {}, {}
    fp, owned = _open(file, 'r')
    try:
        for i, line in enumerate(fp):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                name = record['stream']
            except (json.JSONDecodeError, KeyError, TypeError):
                raise InsufficientDataError(f'malformed record on line {i + 1}') from None
            if streams is not None and name not in streams:
                continue
            if 'fields' in record:
                fields[name] = tuple(record['fields'])
                t.setdefault(name, [])
                values.setdefault(name, [])
            else:
                t.setdefault(name, []).append(record['t'])
                values.setdefault(name, []).append(record['values'])
    finally:
        if owned:
            fp.close()
    out = {}
    for name in t:
        n_fields = len(fields.get(name, ())) or (len(values[name][0]) if values[name] else 0)
        out[name] = SensorStream(
            name=name,
            t=np.array(t[name], dtype=float),
            values=np.array(values[name], dtype=float).reshape(len(t[name]), n_fields),
            fields=fields.get(name, tuple(f'v{i}' for i in range(n_fields))),
        )
    return out


def write_table(file: Union[str, Path, TextIOWrapper], rows: Sequence[Mapping[str, Any]], fieldnames: Sequence[str] = None):
    "Write dict rows as CSV; the header defaults to the keys of the first row"
    fieldnames = list(fieldnames if fieldnames is not None else (rows[0].keys() if rows else []))
    fp, owned = _open(file, 'w')
    try:
        writer = csv.DictWriter(fp, fieldnames=fieldnames, lineterminator='\n')
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v) for k, v in row.items()})
    finally:
        if owned:
            fp.close()


def read_table(file: Union[str, Path, TextIOWrapper]) -> List[Dict[str, str]]:
    fp, owned = _open(file, 'r')
    try:
        return list(csv.DictReader(fp))
    finally:
        if owned:
            fp.close()


def write_array_table(file: Union[str, Path, TextIOWrapper], header: Sequence[str], array: np.ndarray):
    "Write a numeric [N, len(header)] array as CSV with `repr` precision"
    array = np.asarray(array, dtype=float)
    assert array.ndim == 2 and array.shape[1] == len(header), f'array of shape {array.shape} does not match {len(header)} columns'
    fp, owned = _open(file, 'w')
    try:
        fp.write(','.join(header) + '\n')
        for row in array:
            fp.write(','.join(repr(float(v)) for v in row) + '\n')
    finally:
        if owned:
            fp.close()


def read_array_table(file: Union[str, Path, TextIOWrapper]) -> Tuple[Tuple[str, ...], np.ndarray]:
    "Inverse of `write_array_table`: (header, [N, d] array)"
    fp, owned = _open(file, 'r')
    try:
        rows = list(csv.reader(fp))
    finally:
        if owned:
            fp.close()
    if not rows:
        raise InsufficientDataError(f'empty table {file}')
    header = tuple(rows[0])
    return header, np.array(rows[1:], dtype=float).reshape(len(rows) - 1, len(header))
