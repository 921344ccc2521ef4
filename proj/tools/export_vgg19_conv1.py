#!/usr/bin/env python3
"""Export the first two VGG-19 convolutions as a tensor dictionary for the perceptual loss.

The output is readable by the C++ extractor (torch.save zip format with keys
conv1_1.weight, conv1_1.bias, conv1_2.weight, conv1_2.bias). Point the
configuration key perceptual_weights at the written file.
"""

import argparse
import sys

import torch


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("output", help="destination .pt file")
    parser.add_argument("--state-dict", help="local torchvision vgg19 state dict; downloaded when omitted")
    args = parser.parse_args()

    if args.state_dict:
        state = torch.load(args.state_dict, map_location="cpu")
    else:
        import torchvision

        state = torchvision.models.vgg19(weights=torchvision.models.VGG19_Weights.IMAGENET1K_V1).state_dict()

    # torchvision indexes the feature stack: conv1_1 is features.0, conv1_2 is features.2.
    out = {
        "conv1_1.weight": state["features.0.weight"].float().contiguous(),
        "conv1_1.bias": state["features.0.bias"].float().contiguous(),
        "conv1_2.weight": state["features.2.weight"].float().contiguous(),
        "conv1_2.bias": state["features.2.bias"].float().contiguous(),
    }
    torch.save(out, args.output)
    print(f"wrote {args.output}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
