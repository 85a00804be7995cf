"""Tiny byte-level causal language models for CPU-scale loss experiments.

No pretrained weights and no tokenizer files: text is UTF-8 bytes plus
three specials. The point is an exactly checkable sequence loss, not
model quality.
"""

from __future__ import annotations

import torch
from torch import nn

BOS = 256
SEP = 257
EOS = 258
PAD = 259
VOCAB_SIZE = 260


def encode_example(input_text: str, target_text: str) -> tuple:
    """Token ids and a mask selecting the positions the loss applies to."""
    ids = (
        [BOS]
        + list(input_text.encode("utf-8"))
        + [SEP]
        + list(target_text.encode("utf-8"))
        + [EOS]
    )
    target_len = len(target_text.encode("utf-8")) + 1  # target bytes + EOS
    mask = [0] * (len(ids) - target_len) + [1] * target_len
    return ids, mask


def collate(examples) -> tuple:
    """Pad encoded examples into (ids, loss_mask) tensors."""
    width = max(len(ids) for ids, _ in examples)
    ids = torch.full((len(examples), width), PAD, dtype=torch.long)
    mask = torch.zeros((len(examples), width), dtype=torch.float)
    for row, (example_ids, example_mask) in enumerate(examples):
        ids[row, : len(example_ids)] = torch.tensor(example_ids, dtype=torch.long)
        mask[row, : len(example_mask)] = torch.tensor(example_mask, dtype=torch.float)
    return ids, mask


class ByteGRULM(nn.Module):
    def __init__(self, embed_dim: int = 32, hidden_dim: int = 64):
        super().__init__()
        self.embed = nn.Embedding(VOCAB_SIZE, embed_dim, padding_idx=PAD)
        self.rnn = nn.GRU(embed_dim, hidden_dim, batch_first=True)
        self.head = nn.Linear(hidden_dim, VOCAB_SIZE)

    def forward(self, ids: torch.Tensor) -> torch.Tensor:
        hidden, _ = self.rnn(self.embed(ids))
        return self.head(hidden)


class ByteMLPLM(nn.Module):
    """Windowless bag-of-previous-byte model; even smaller, still causal."""

    def __init__(self, embed_dim: int = 32):
        super().__init__()
        self.embed = nn.Embedding(VOCAB_SIZE, embed_dim, padding_idx=PAD)
        self.head = nn.Linear(embed_dim, VOCAB_SIZE)

    def forward(self, ids: torch.Tensor) -> torch.Tensor:
        summed = torch.cumsum(self.embed(ids), dim=1)
        steps = torch.arange(1, ids.shape[1] + 1, device=ids.device).view(1, -1, 1)
        return self.head(summed / steps)


MODEL_BUILDERS = {
    "tiny-gru": ByteGRULM,
    "tiny-mlp": ByteMLPLM,
}


def build_model(model_id: str, seed: int) -> nn.Module:
    if model_id not in MODEL_BUILDERS:
        raise ValueError(f"unknown model_id {model_id!r}; choose from {sorted(MODEL_BUILDERS)}")
    torch.manual_seed(seed)
    return MODEL_BUILDERS[model_id]()


def per_example_loss(model: nn.Module, ids: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """Mean cross-entropy over each example's target positions."""
    logits = model(ids[:, :-1])
    labels = ids[:, 1:]
    label_mask = mask[:, 1:]
    flat = nn.functional.cross_entropy(
        logits.reshape(-1, VOCAB_SIZE), labels.reshape(-1), reduction="none"
    ).view(labels.shape)
    return (flat * label_mask).sum(dim=1) / label_mask.sum(dim=1).clamp(min=1)
