"""Writes the tiny ONNX graphs used by the graph-runtime tests.

The graphs have the same I/O layout as an exported anchor-free detector
((1,3,S,S) -> (1,5,A)) and a small vision transformer ((1,3,224,224) ->
(1,1+P,384) token states with the CLS slot first). Weights are seeded, so
re-running the script reproduces the committed files.
"""
import argparse
import pathlib

import torch
from torch import nn


class TinyDetector(nn.Module):
    def __init__(self, size: int):
        super().__init__()
        self.size = size
        self.stem = nn.Conv2d(3, 8, kernel_size=8, stride=8)
        self.head = nn.Conv2d(8, 5, kernel_size=1)

    def forward(self, x):
        y = self.head(torch.relu(self.stem(x)))
        y = torch.sigmoid(y)
        n = y.shape[2] * y.shape[3]
        y = y.reshape(1, 5, n)
        scale = torch.tensor([self.size, self.size, self.size / 2, self.size / 2, 1.0]).reshape(1, 5, 1)
        return y * scale


class TinyEmbedder(nn.Module):
    def __init__(self, dim: int = 384, patch: int = 14):
        super().__init__()
        self.patch = nn.Conv2d(3, dim, kernel_size=patch, stride=patch)
        self.cls = nn.Parameter(torch.randn(1, 1, dim) * 0.02)
        self.mix = nn.Linear(dim, dim)

    def forward(self, x):
        t = self.patch(x).flatten(2).transpose(1, 2)
        pooled = t.mean(dim=1, keepdim=True)
        cls = self.cls + torch.tanh(self.mix(pooled))
        return torch.cat([cls, t], dim=1)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="tests/data")
    ap.add_argument("--size", type=int, default=64)
    args = ap.parse_args()
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    torch.manual_seed(7)
    det = TinyDetector(args.size).eval()
    torch.onnx.export(det, torch.zeros(1, 3, args.size, args.size), out / "tiny_detector.onnx",
                      input_names=["images"], output_names=["output0"], opset_version=11,
                      dynamo=False)
    emb = TinyEmbedder().eval()
    torch.onnx.export(emb, torch.zeros(1, 3, 224, 224), out / "tiny_embedder.onnx",
                      input_names=["pixel_values"], output_names=["last_hidden_state"],
                      opset_version=11, dynamo=False)


if __name__ == "__main__":
    main()
