import json
import math

import numpy as np

from csnet import settings
from csnet.items import ResultRow


def _plain(value):
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, bool):
        return int(value)
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {key: _plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_plain(item) for item in value]
    return value


def normalize_value(value):
    """Plain JSON/CSV friendly scalars: numpy types unwrapped, bools as 0/1.

    A dict becomes one sorted-key JSON string; dicts nested inside it stay objects.
    """
    value = _plain(value)
    if isinstance(value, dict):
        return json.dumps(value, sort_keys=True)
    return value


class ResultPipeline(object):
    """Stamps schema version, subcommand and timestamp; drops empty values."""

    def process_item(self, item: ResultRow, experiment) -> ResultRow:
        row = ResultRow(schema_version=settings.SCHEMA_VERSION, subcommand=experiment.name)
        for key, value in item.items():
            value = normalize_value(value)
            if isinstance(value, list):
                value = json.dumps(value)
            if value is not None:
                row[key] = value
        if experiment.timestamp:
            row["timestamp"] = experiment.timestamp
        return row
