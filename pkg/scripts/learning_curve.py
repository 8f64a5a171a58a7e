"""Test RMSE of the signature-kernel student against a tanh SRNN teacher, by training size."""

from dataclasses import dataclass

import numpy as np

from _config import parse
from responsekit.acceptance import random_smooth_path
from responsekit.kernels import KernelSpec
from responsekit.learn import fit, rmse, training_residual
from responsekit.paths import PolyBasis
from responsekit.rng import derive_seed
from responsekit.srnn import SrnnParams, output_functional


@dataclass(frozen=True)
class Config:
    seed: int = 0
    hidden: int = 8
    sigma: float = 0.1
    samples: int = 10_000
    dt: float = 0.02
    segments: int = 10
    degree: int = 3
    ridge: float = 1e-10
    test: int = 50
    sizes: tuple = (25.0, 50.0, 100.0, 200.0)


def main(cfg: Config):
    sizes = [int(n) for n in cfg.sizes]
    rng = np.random.default_rng(derive_seed(cfg.seed, "learn-paths"))
    teacher = SrnnParams.random_tanh(cfg.hidden, 2, cfg.sigma,
                                     seed=derive_seed(cfg.seed, "teacher") % 2**32)
    paths = [random_smooth_path(rng) for _ in range(max(sizes) + cfg.test)]
    y = np.array([output_functional(teacher, p, 1.0, cfg.dt, cfg.samples,
                                    derive_seed(cfg.seed, f"target-{i}"))[0]
                  for i, p in enumerate(paths)])
    spec = KernelSpec.uniform(cfg.segments, 1.0, basis=PolyBasis("monomial", cfg.degree))
    test, yt = paths[-cfg.test:], y[-cfg.test:]
    print("n,test_rmse,train_residual_rel")
    for n in sizes:
        m = fit(paths[:n], y[:n], spec, cfg.ridge)
        r = training_residual(m, y[:n])
        print(f"{n},{rmse(m.predict_many(test), yt):.6g},"
              f"{np.sqrt(np.mean(r ** 2)) / np.std(y[:n]):.3g}")


if __name__ == "__main__":
    main(parse(Config, __doc__))
