"""Decision-focused learning toolkit.

Learns the expected cost g(x, a) ~ E[f(y, a) | x] directly with an
attention surrogate, solves the downstream constrained decision problem,
and benchmarks decision regret against two-stage baselines.
"""

__version__ = "0.1.0"
