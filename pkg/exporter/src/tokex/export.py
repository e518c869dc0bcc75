"""Export jobs: frames to token-grid containers, prompts to embedding
containers, each with a manifest sufficient to reproduce the files."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from .container import ExportError, write_container, write_manifest
from .models import (
    D_T,
    D_V,
    PATCH,
    load_text_encoder,
    load_visual_encoder,
)


@dataclass(frozen=True)
class ExportJob:
    weights_dir: str
    out_dir: str
    resize: int = 224
    inputs: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.resize % PATCH != 0 or self.resize <= 0:
            raise ExportError(f"resize target {self.resize} is not a multiple of {PATCH}")

    @property
    def grid_side(self) -> int:
        return self.resize // PATCH

    @property
    def n_tokens(self) -> int:
        return self.grid_side**2


def load_frame(path: str, resize: int) -> torch.Tensor:
    try:
        with Image.open(path) as img:
            img = img.convert("RGB").resize((resize, resize), Image.BILINEAR)
    except FileNotFoundError:
        raise ExportError(f"{path}: no such image")
    except Exception as exc:  # Pillow raises several decode errors
        raise ExportError(f"{path}: cannot decode image ({exc})")
    arr = np.asarray(img, dtype=np.float32) / 255.0
    return torch.from_numpy(arr).permute(2, 0, 1)


def export_visual_tokens(job: ExportJob) -> list[str]:
    """One [N, d_v] container per input frame plus a run manifest."""
    if not job.inputs:
        raise ExportError("no input frames given")
    encoder = load_visual_encoder(job.weights_dir)
    out = Path(job.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    with torch.no_grad():
        for i, src in enumerate(job.inputs):
            tokens = encoder(load_frame(src, job.resize)).numpy()
            if tokens.shape != (job.n_tokens, D_V):
                raise ExportError(
                    f"{src}: encoder produced {tokens.shape}, expected "
                    f"({job.n_tokens}, {D_V})"
                )
            name = f"frame_{i:04d}.tpk"
            write_container(out / name, tokens)
            written.append(name)
    write_manifest(
        out / "manifest.json",
        {
            "command": "export-visual",
            "model": "tokex-visual-stub",
            "preprocess": {"resize": [job.resize, job.resize], "scale": "1/255"},
            "grid": [job.grid_side, job.grid_side],
            "d_v": D_V,
            "inputs": list(job.inputs),
            "outputs": written,
        },
    )
    return written


def export_text_embedding(prompt: str, job: ExportJob) -> str:
    """Unit-norm [d_t] container for one prompt plus a run manifest."""
    encoder = load_text_encoder(job.weights_dir)
    out = Path(job.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with torch.no_grad():
        vec = encoder(prompt).numpy()
    assert vec.shape == (D_T,)
    name = "text.tpk"
    write_container(out / name, vec)
    write_manifest(
        out / "manifest.json",
        {
            "command": "export-text",
            "model": "tokex-text-stub",
            "prompt": " ".join(prompt.lower().split()),
            "d_t": D_T,
            "outputs": [name],
        },
    )
    return name
