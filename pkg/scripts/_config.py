"""Tiny helper: expose a dataclass config as command-line flags."""

import argparse
import dataclasses


def parse(cls, description: str):
    ap = argparse.ArgumentParser(description=description)
    for f in dataclasses.fields(cls):
        kind = type(f.default)
        if kind is tuple:
            ap.add_argument(f"--{f.name.replace('_', '-')}", type=float, nargs="+",
                            default=f.default)
        else:
            ap.add_argument(f"--{f.name.replace('_', '-')}", type=kind, default=f.default)
    args = ap.parse_args()
    return cls(**{f.name: (tuple(getattr(args, f.name)) if type(f.default) is tuple
                           else getattr(args, f.name)) for f in dataclasses.fields(cls)})
