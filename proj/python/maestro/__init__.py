"""Python access to the maestro router: price law, confidence, selection and run sessions."""

import json

from ._maestro import (
    ConfigError,
    ContractError,
    call_cost,
    conf_adj,
    conf_base,
    extrapolate_price,
    fit_alpha,
    judge,
    normalize_answer,
    price_fit_report,
    select_roles,
)
from . import _maestro

__all__ = [
    "ConfigError",
    "ContractError",
    "Session",
    "arithmetic_tasks",
    "call_cost",
    "conf_adj",
    "conf_base",
    "default_prices",
    "extrapolate_price",
    "fit_alpha",
    "judge",
    "load_dataset",
    "normalize_answer",
    "price_fit_report",
    "select_roles",
]


def default_prices():
    """Returns (alpha, {model: (price_in, price_out, extrapolated)})."""
    return _maestro.default_prices()


def arithmetic_tasks(n, easy_fraction=0.5, seed=0):
    return json.loads(_maestro.arithmetic_tasks_json(n, easy_fraction, seed))


def load_dataset(path):
    return json.loads(_maestro.load_dataset_json(str(path)))


class Session:
    """A runtime built from a JSON run config plus its trainer state."""

    def __init__(self, config_path):
        self._s = _maestro.Session(str(config_path))

    def route(self, query, greedy=True):
        return json.loads(self._s.route(query, greedy))

    def train(self, tasks):
        return json.loads(self._s.train(json.dumps(list(tasks))))

    def evaluate(self, tasks, disable_model_router=False):
        return json.loads(self._s.evaluate(json.dumps(list(tasks)), disable_model_router))

    def split(self, tasks):
        train, test = json.loads(self._s.split(json.dumps(list(tasks))))
        return train, test

    def save(self, path):
        self._s.save(str(path))

    def load(self, path):
        self._s.load(str(path))

    @property
    def step(self):
        return self._s.step
