"""Model checkpointing: parameter file plus a sidecar describing shapes.

The parameter payload reuses the array container format; the .meta INI
records the model hyperparameters, every registered morphology and the
active task, so a checkpoint reconstructs a model with no other inputs.
"""

from __future__ import annotations

import configparser
from dataclasses import fields
from pathlib import Path

import numpy as np

from ..model.morphology import MorphologySpec
from ..model.network import ModelConfig, OdmModel
from ..numerics.checkpoint import load_arrays, save_arrays


def _mask_str(mask: np.ndarray) -> str:
    return ";".join("".join("1" if v else "0" for v in row) for row in mask)


def _mask_parse(s: str) -> np.ndarray:
    return np.array([[c == "1" for c in row] for row in s.split(";")])


def save_model(path, model: OdmModel) -> Path:
    path = Path(path)
    save_arrays(path, model.store.export_arrays())
    cp = configparser.ConfigParser()
    cp["model"] = {f.name: str(getattr(model.cfg, f.name))
                   for f in fields(ModelConfig)}
    cp["tasks"] = {"order": ",".join(model.specs),
                   "active": model.active_task}
    for name, spec in model.specs.items():
        cp[f"spec.{name}"] = {
            "k": str(spec.K), "n": str(spec.n), "m": str(spec.m),
            "x": str(spec.x),
            "state_mask": _mask_str(spec.state_mask),
            "action_mask": _mask_str(spec.action_mask),
        }
    with open(path.with_suffix(path.suffix + ".meta"), "w") as f:
        cp.write(f)
    return path


def load_model(path) -> OdmModel:
    path = Path(path)
    cp = configparser.ConfigParser()
    with open(path.with_suffix(path.suffix + ".meta")) as f:
        cp.read_file(f)
    cfg = ModelConfig(**{k: int(v) for k, v in cp["model"].items()})
    model = OdmModel(cfg)
    order = [s for s in cp["tasks"]["order"].split(",") if s]
    for name in order:
        s = cp[f"spec.{name}"]
        model.register_task(MorphologySpec(
            name=name, K=int(s["k"]), n=int(s["n"]), m=int(s["m"]),
            x=int(s["x"]), state_mask=_mask_parse(s["state_mask"]),
            action_mask=_mask_parse(s["action_mask"])))
    model.store.load_arrays(load_arrays(path), strict=True)
    active = cp["tasks"]["active"]
    if active:
        model.activate(active)
    return model
