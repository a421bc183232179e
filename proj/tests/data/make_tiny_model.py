"""Regenerates tiny_linear.onnx, the model-file backend test fixture.

A flatten + linear layer over 3x8x8 inputs with closed-form weights, so the
C++ tests can recompute the expected embedding without any ML runtime:

    W[i, j] = 0.05 * sin(0.37 * i + 0.11 * j),  b[i] = 0.01 * i

Usage: python3 make_tiny_model.py  (needs torch and onnx)
"""
import json
import math
import pathlib

import torch

HERE = pathlib.Path(__file__).resolve().parent
IN_DIM = 3 * 8 * 8
OUT_DIM = 16


def main() -> None:
    model = torch.nn.Sequential(torch.nn.Flatten(), torch.nn.Linear(IN_DIM, OUT_DIM))
    with torch.no_grad():
        w = torch.tensor([[0.05 * math.sin(0.37 * i + 0.11 * j) for j in range(IN_DIM)]
                          for i in range(OUT_DIM)])
        model[1].weight.copy_(w)
        model[1].bias.copy_(torch.tensor([0.01 * i for i in range(OUT_DIM)]))
    torch.onnx.export(model, torch.zeros(1, 3, 8, 8), str(HERE / "tiny_linear.onnx"),
                      input_names=["pixel_values"], output_names=["embedding"],
                      dynamic_axes={"pixel_values": {0: "N"}, "embedding": {0: "N"}},
                      opset_version=11, dynamo=False)
    sidecar = {
        "model": "tiny_linear.onnx",
        "input_size": 8,
        "resize_short_side": 8,
        "norm_mean": [0.485, 0.456, 0.406],
        "norm_std": [0.229, 0.224, 0.225],
        "embedding_dim": OUT_DIM,
        "pooling": "class_token",
    }
    (HERE / "tiny_preprocess.json").write_text(json.dumps(sidecar, indent=2) + "\n")


if __name__ == "__main__":
    main()
