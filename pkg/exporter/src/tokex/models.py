"""Frozen reference encoders.

Two small torch models stand in for production checkpoints: a ViT-style
image encoder that turns a 224x224 frame into a [196, 768] token grid,
and a bag-of-hashed-ngrams text encoder that maps a prompt to a
unit-norm [512] embedding. `make_stub_weights` materializes seeded
checkpoints on disk; the export commands refuse to run without one, the
same contract a real pretrained model would impose.
"""

from __future__ import annotations

import hashlib
from pathlib import Path

import torch
from torch import nn

from .container import ExportError

PATCH = 16
D_V = 768
D_T = 512
TEXT_BUCKETS = 4096

VISUAL_FILE = "visual_encoder.pt"
TEXT_FILE = "text_encoder.pt"


class VisualEncoder(nn.Module):
    """Patchify + two pre-norm transformer blocks, no dropout."""

    def __init__(self) -> None:
        super().__init__()
        self.patch = nn.Conv2d(3, D_V, kernel_size=PATCH, stride=PATCH)
        layer = nn.TransformerEncoderLayer(
            d_model=D_V,
            nhead=8,
            dim_feedforward=2 * D_V,
            dropout=0.0,
            batch_first=True,
            norm_first=True,
        )
        self.blocks = nn.TransformerEncoder(
            layer, num_layers=2, enable_nested_tensor=False
        )

    def forward(self, image: torch.Tensor) -> torch.Tensor:
        """image: (3, H, W) in [0, 1] -> (N, D_V) token grid, row-major."""
        tokens = self.patch(image.unsqueeze(0))  # (1, D_V, h, w)
        tokens = tokens.flatten(2).transpose(1, 2)  # (1, N, D_V)
        return self.blocks(tokens).squeeze(0)


class TextEncoder(nn.Module):
    """Hashed character-trigram bag pooled through a linear head."""

    def __init__(self) -> None:
        super().__init__()
        self.embedding = nn.EmbeddingBag(TEXT_BUCKETS, D_T, mode="mean")

    @staticmethod
    def bucketize(text: str) -> torch.Tensor:
        text = " ".join(text.lower().split())
        if not text:
            raise ExportError("empty prompt")
        grams = [text[i : i + 3] for i in range(max(len(text) - 2, 1))]
        ids = [
            int.from_bytes(hashlib.sha256(g.encode()).digest()[:4], "little")
            % TEXT_BUCKETS
            for g in grams
        ]
        return torch.tensor(ids, dtype=torch.long)

    def forward(self, text: str) -> torch.Tensor:
        pooled = self.embedding(self.bucketize(text).unsqueeze(0)).squeeze(0)
        return pooled / pooled.norm()


def make_stub_weights(weights_dir: str | Path, seed: int = 0) -> dict[str, str]:
    """Write seeded checkpoints for both encoders; returns model ids."""
    out = Path(weights_dir)
    out.mkdir(parents=True, exist_ok=True)
    torch.manual_seed(seed)
    visual = VisualEncoder()
    text = TextEncoder()
    torch.save(visual.state_dict(), out / VISUAL_FILE)
    torch.save(text.state_dict(), out / TEXT_FILE)
    return {
        "visual_model": f"tokex-visual-stub-seed{seed}",
        "text_model": f"tokex-text-stub-seed{seed}",
    }


def _load(module: nn.Module, path: Path) -> nn.Module:
    if not path.exists():
        raise ExportError(
            f"{path}: model weights not found; run `tokex make-stub-weights` "
            "or point --weights at a checkpoint directory"
        )
    module.load_state_dict(torch.load(path, weights_only=True))
    module.eval()
    for p in module.parameters():
        p.requires_grad_(False)
    return module


def load_visual_encoder(weights_dir: str | Path) -> VisualEncoder:
    return _load(VisualEncoder(), Path(weights_dir) / VISUAL_FILE)


def load_text_encoder(weights_dir: str | Path) -> TextEncoder:
    return _load(TextEncoder(), Path(weights_dir) / TEXT_FILE)
