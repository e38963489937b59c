"""Result rows, the CSV/JSON writers, and atomic file output.

Every run emits rows under the fixed header
`experiment,seed,method,metric,value,config_hash`; values are written with
17 significant digits so reruns byte-match. Appending to an existing file is
refused when the config hash differs.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError

RESULT_HEADER = "experiment,seed,method,metric,value,config_hash"


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    seed: int
    method: str
    metric: str
    value: float
    config_hash: str

    def __post_init__(self):
        if not np.isfinite(self.value):
            raise DataError(
                f"non-finite value for {self.experiment}/{self.method}/{self.metric}"
            )

    def to_csv(self) -> str:
        return ",".join([
            self.experiment,
            str(self.seed),
            self.method,
            self.metric,
            format(float(self.value), ".17g"),
            self.config_hash,
        ])


def atomic_write_text(path, text) -> None:
    """Write via a temp file in the same directory plus rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def rows_to_csv(rows) -> str:
    return "\n".join([RESULT_HEADER] + [r.to_csv() for r in rows]) + "\n"


def rows_to_json(rows) -> str:
    payload = [
        {
            "experiment": r.experiment,
            "seed": r.seed,
            "method": r.method,
            "metric": r.metric,
            "value": r.value,
            "config_hash": r.config_hash,
        }
        for r in rows
    ]
    return json.dumps(payload, indent=2)


def read_result_csv(path):
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != RESULT_HEADER:
        raise ConfigError(f"{path} is not a result file")
    rows = []
    for line in lines[1:]:
        cells = line.split(",")
        if len(cells) != 6:
            raise ConfigError(f"malformed result row: {line!r}")
        rows.append(ResultRow(
            experiment=cells[0],
            seed=int(cells[1]),
            method=cells[2],
            metric=cells[3],
            value=float(cells[4]),
            config_hash=cells[5],
        ))
    return rows


def write_results(rows, path, append=False) -> None:
    """Atomically (over)write the result CSV.

    With append=True existing rows are kept, but only if their config hash
    matches the incoming rows' hash; anything else is refused.
    """
    rows = list(rows)
    if append and os.path.exists(path):
        existing = read_result_csv(path)
        old_hashes = {r.config_hash for r in existing}
        new_hashes = {r.config_hash for r in rows}
        if old_hashes and new_hashes and old_hashes != new_hashes:
            raise ConfigError(
                f"refusing to append: config hash mismatch in {path} "
                f"({sorted(old_hashes)} vs {sorted(new_hashes)})"
            )
        rows = existing + rows
    atomic_write_text(path, rows_to_csv(rows))
