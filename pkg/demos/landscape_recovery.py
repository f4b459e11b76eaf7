"""Does the surrogate learn the true expected-cost landscape?

Trains the attention surrogate on the convex GMM task, then evaluates
g(x, .) and the Monte Carlo ground truth E[f(y, .) | x] on the same
21x21 action grid at a few held-out contexts. Prints the Pearson
correlation per context and writes paired CSV grids next to this
script for plotting.
"""

import os

import numpy as np

from dflkit import evaluation as ev
from dflkit import objectives as ob
from dflkit import simdata as sd
from dflkit import surrogate as sg

OUT_DIR = os.path.join(os.path.dirname(__file__), "out")


def main():
    obj = ob.synthetic_convex()
    gen = sd.make_gmm_generator(p=2, m=2, seed=11, noise_var=0.1,
                                mat_low=-0.6, mat_high=0.6)
    ds = sd.split(sd.generate(gen, 2000, seed=0), (0.7, 0.15, 0.15), seed=0)

    model = sg.make_surrogate(obj, x_dim=2, S=512, d=16, seed=0,
                              hidden=(128,))
    sg.init_attention_points(model, ds, seed=0)
    sg.train(model, ds, sg.TrainConfig(epochs=8, J=100, seed=0, patience=8))

    truth = ev.mc_truth_fn(gen, obj, n_mc=20_000, seed=123)
    X_te, _ = ds.subset("test")
    os.makedirs(OUT_DIR, exist_ok=True)
    for i in range(3):
        x = X_te[i]
        got = ev.landscape_grid(lambda xx, aa: sg.g(model, xx, aa), x,
                                obj.feasible, resolution=21)
        want = ev.landscape_grid(truth, x, obj.feasible, resolution=21)
        r = ev.pearson(got, want)
        ev.save_landscape_csv(got, obj.feasible,
                              os.path.join(OUT_DIR, f"surrogate_x{i}.csv"))
        ev.save_landscape_csv(want, obj.feasible,
                              os.path.join(OUT_DIR, f"truth_x{i}.csv"))
        print(f"x[{i}] = {np.round(x, 3)}  pearson r = {r:.4f}")
    print(f"grids written to {OUT_DIR}/")


if __name__ == "__main__":
    main()
