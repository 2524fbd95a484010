# zpgan/training/checkpoint.py
import logging
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np
import torch
from pydantic import ValidationError

from zpgan.core.exceptions import CheckpointError, ShapeMismatchError
from zpgan.nets.schemas import ArchitectureConfig
from zpgan.nets.services import ModelParams, init_params
from zpgan.training.schemas import CheckpointMeta, TensorSpec

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
PARAMS_FILE = "params.bin"
META_FILE = "meta.json"


def save_checkpoint(params: ModelParams, meta: CheckpointMeta, path: PathLike) -> Path:
    """params.bin holds every named tensor as float32 little-endian, in meta.tensors order."""
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    named = params.named_tensors()
    meta = meta.model_copy(update={
        "architecture": params.config,
        "tensors": [TensorSpec(name=n, shape=list(t.shape)) for n, t in named],
    })
    payload = b"".join(
        np.ascontiguousarray(t.detach().cpu().numpy(), dtype="<f4").tobytes() for _, t in named
    )
    (out / PARAMS_FILE).write_bytes(payload)
    (out / META_FILE).write_text(meta.model_dump_json(indent=2))
    logger.debug("checkpoint written to %s (%s tensors)", out, len(named))
    return out


def load_checkpoint(path: PathLike, architecture: Optional[ArchitectureConfig] = None) -> Tuple[ModelParams, CheckpointMeta]:
    """Rebuild parameters; pass `architecture` to insist on a particular layout."""
    src = Path(path)
    try:
        meta = CheckpointMeta.model_validate_json((src / META_FILE).read_text())
    except ValidationError as exc:
        raise CheckpointError(f"corrupt {META_FILE}: {exc}") from exc

    params = init_params(architecture or meta.architecture, meta.seed)
    named = params.named_tensors()
    expected = [(n, list(t.shape)) for n, t in named]
    stored = [(s.name, s.shape) for s in meta.tensors]
    if expected != stored:
        mismatched = next(
            (f"{e[0]} {e[1]} vs {s[0]} {s[1]}" for e, s in zip(expected, stored) if e != s),
            f"{len(expected)} tensors expected, {len(stored)} stored",
        )
        raise ShapeMismatchError(f"checkpoint does not match the architecture: {mismatched}")

    raw = (src / PARAMS_FILE).read_bytes()
    total = sum(int(np.prod(shape)) for _, shape in stored)
    if len(raw) != total * 4:
        raise CheckpointError(f"{PARAMS_FILE}: expected {total * 4} bytes, found {len(raw)}")

    values = np.frombuffer(raw, dtype="<f4")
    offset = 0
    with torch.no_grad():
        for name, tensor in named:
            n = tensor.numel()
            chunk = torch.from_numpy(values[offset:offset + n].astype(np.float32)).view(tensor.shape)
            tensor.copy_(chunk)
            offset += n
    if not all(torch.isfinite(t).all() for _, t in named):
        raise CheckpointError("checkpoint contains non-finite values")
    return params, meta
