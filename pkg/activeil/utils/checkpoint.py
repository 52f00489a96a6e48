"""
Checkpoints - Model parameters in a single .npz archive

=== LAYOUT ===
- "<model>/<i>"  : i-th array of MlpParams.arrays() ([W0, b0, W1, b1, ...])
- "__meta__"     : JSON text with one "specs" entry per model
                   (layer sizes and activations) plus free-form run metadata
"""
import json
from pathlib import Path
from typing import Any, Dict, Mapping, Tuple, Union

import numpy as np

from activeil.core.exceptions import ShapeError
from activeil.core.numerics import MlpParams, MlpSpec

META_KEY = "__meta__"


def save_checkpoint(path: Union[str, Path], models: Mapping[str, MlpParams], meta: Dict[str, Any] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload: Dict[str, np.ndarray] = {}
    specs = {}
    for name, params in models.items():
        if "/" in name or name == META_KEY:
            raise ValueError(f"Invalid model name for a checkpoint: {name!r}")
        specs[name] = params.spec.to_dict()
        for i, array in enumerate(params.arrays()):
            payload[f"{name}/{i}"] = array
    header = {"specs": specs, "meta": meta or {}}
    payload[META_KEY] = np.array(json.dumps(header, sort_keys=True))
    with open(path, "wb") as fh:
        np.savez(fh, **payload)
    return path


def load_checkpoint(path: Union[str, Path]) -> Tuple[Dict[str, MlpParams], Dict[str, Any]]:
    """Returns ({model name: params}, run metadata)"""
    with np.load(Path(path), allow_pickle=False) as archive:
        header = json.loads(str(archive[META_KEY]))
        models: Dict[str, MlpParams] = {}
        for name, spec_data in header["specs"].items():
            spec = MlpSpec.from_dict(spec_data)
            n_arrays = 2 * spec.n_layers
            keys = [f"{name}/{i}" for i in range(n_arrays)]
            missing = [k for k in keys if k not in archive.files]
            if missing:
                raise ShapeError("Checkpoint is missing arrays", {"model": name, "missing": missing})
            models[name] = MlpParams.from_arrays(spec, [archive[k] for k in keys])
    return models, header["meta"]
