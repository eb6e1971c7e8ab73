"""Export torchvision VGG19 conv weights in the layout read by `cascade.weights_path`.

Usage: python export_vgg19_weights.py OUT.pt [--random]
"""
import argparse

import torch
import torchvision

# torchvision features index -> cascade parameter prefix
MAPPING = {
    0: "level0.0", 2: "level0.2",
    5: "level1.1", 7: "level1.3",
    10: "level2.1", 12: "level2.3",
    14: "level3.0", 16: "level3.2", 19: "level3.5", 21: "level3.7",
    23: "level4.0", 25: "level4.2", 28: "level4.5", 30: "level4.7",
}


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("out")
    parser.add_argument("--random", action="store_true", help="skip the ImageNet download (for testing)")
    args = parser.parse_args()
    weights = None if args.random else torchvision.models.VGG19_Weights.IMAGENET1K_V1
    features = torchvision.models.vgg19(weights=weights).features
    state = {}
    for index, prefix in MAPPING.items():
        layer = features[index]
        state[f"{prefix}.weight"] = layer.weight.detach().clone()
        state[f"{prefix}.bias"] = layer.bias.detach().clone()
    torch.save(state, args.out)


if __name__ == "__main__":
    main()
