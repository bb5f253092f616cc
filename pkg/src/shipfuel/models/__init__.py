"""Regression model families and their shared plumbing.

Four families, all implemented here rather than wrapped: closed-form ridge,
bagged CART forest with impurity importance, SMO epsilon-SVR, and
second-order boosted trees. Every estimator follows the fit/predict +
get_params convention, so they drop into generic harnesses unchanged.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

from .boost import BoostRegressor, GradientTree
from .design import DesignMatrix
from .forest import ForestRegressor
from .ridge import RidgeRegressor
from .svr import SvrRegressor, kkt_violations
from .tree import RegressionTree, best_split

FAMILIES = {
    "ridge": RidgeRegressor,
    "svr": SvrRegressor,
    "forest": ForestRegressor,
    "boost": BoostRegressor,
}

# families whose fit consumes a random seed
SEEDED_FAMILIES = ("forest",)


@dataclass
class ModelSpec:
    """Declarative model family + hyperparameters."""

    family: str
    params: dict = field(default_factory=dict)

    def build(self, seed=None):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown model family {self.family!r}; "
                             f"known: {sorted(FAMILIES)}")
        params = dict(self.params)
        if seed is not None and self.family in SEEDED_FAMILIES:
            params["seed"] = int(seed)
        return FAMILIES[self.family](**params)


def family_of(model) -> str:
    for name, cls in FAMILIES.items():
        if type(model) is cls:
            return name
    raise ValueError(f"not a known model type: {type(model).__name__}")


def save_model(model, path) -> None:
    """Self-describing structured-text dump: family tag + params + fitted state."""
    payload = {
        "format": "shipfuel-model/1",
        "family": family_of(model),
        "state": model.to_dict(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")


def load_model(path):
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != "shipfuel-model/1":
        raise ValueError(f"{path}: not a model file")
    family = payload["family"]
    if family not in FAMILIES:
        raise ValueError(f"{path}: unknown family {family!r}")
    return FAMILIES[family].from_dict(payload["state"])


__all__ = [
    "BoostRegressor", "DesignMatrix", "ForestRegressor", "GradientTree",
    "ModelSpec", "RegressionTree", "RidgeRegressor", "SvrRegressor",
    "FAMILIES", "SEEDED_FAMILIES", "best_split", "family_of",
    "kkt_violations", "load_model", "save_model",
]
