"""Decision-focused surrogate vs two-stage forecasting, head to head.

Same data, same solver budget, three pipelines:

  df2         attention surrogate trained on decision cost, then solve
  two-stage   C=3 mixture density net by likelihood, then SAA solve
  point-est   C=1 net by MSE, solve against the single predicted y

Every method is scored by Monte Carlo expected cost under the true
generator on draws shared with the oracle, so the printed gap is pure
decision quality. The full multi-seed version with spreads is
`dflkit bench --suite synthetic-convex --seeds 5`.
"""

import numpy as np

from dflkit import baselines as bl
from dflkit import objectives as ob
from dflkit import simdata as sd
from dflkit import surrogate as sg


def main():
    obj = ob.synthetic_convex()
    gen = sd.make_gmm_generator(p=2, m=2, seed=11, noise_var=0.1,
                                mat_low=-0.6, mat_high=0.6)
    ds = sd.split(sd.generate(gen, 600, seed=1000), (0.7, 0.15, 0.15),
                  seed=0)
    X_te, _ = ds.subset("test")

    rng = np.random.default_rng(900)
    draws = np.stack([sd.sample_conditional(gen, x, 2000, rng)
                      for x in X_te])
    A_star = bl.decide_on_sample_grid(draws, obj, iters=300, restarts=4,
                                      seed=900)

    def gap(A):
        n, k, _ = draws.shape
        A_rep = np.repeat(A, k, axis=0)
        v = ob.cost_batch(obj, draws.reshape(n * k, -1),
                          A_rep).reshape(n, k).mean(axis=1)
        vs = ob.cost_batch(obj, draws.reshape(n * k, -1),
                           np.repeat(A_star, k, axis=0)
                           ).reshape(n, k).mean(axis=1)
        return float((v - vs).mean())

    model = sg.make_surrogate(obj, x_dim=2, S=256, d=16, seed=0,
                              hidden=(128,))
    sg.init_attention_points(model, ds, seed=0)
    sg.train(model, ds, sg.TrainConfig(epochs=40, lr=2e-3, J=100, seed=0,
                                       patience=40))
    A_df2, _ = sg.decide_batch(model, X_te, iters=400, restarts=4, seed=0)
    print(f"df2          gap = {gap(A_df2):.4f}")

    fc = bl.make_forecaster(2, 2, C=3, seed=0, hidden=(128,))
    bl.train_two_stage(fc, ds, bl.FitConfig(epochs=50, seed=0, patience=10),
                       loss="nll")
    A_ts = bl.saa_decide_batch(fc, X_te, obj, n_samples=100, seed=0,
                               iters=400, restarts=4)
    print(f"two-stage C3 gap = {gap(A_ts):.4f}")

    pe = bl.make_forecaster(2, 2, C=1, seed=0, hidden=(128,))
    bl.train_two_stage(pe, ds, bl.FitConfig(epochs=50, seed=0, patience=10),
                       loss="mse")
    A_pe = bl.point_estimate_decide_batch(pe, X_te, obj, iters=400,
                                          restarts=4, seed=0)
    print(f"point-est    gap = {gap(A_pe):.4f}")


if __name__ == "__main__":
    main()
