"""Additive GP posterior on a small dependency forest.

A function of four variables that only couples (x1, x2) and (x2, x3),
with x4 on its own. We condition the matching additive GP on a few noisy
samples and look at what each component learned.
"""
import numpy as np
import matplotlib.pyplot as plt

from treebo import Dataset, DependencyForest, HyperParams, PosteriorState, components_of

rng = np.random.default_rng(0)


def f(x):
    return np.sin(6 * x[..., 0] * x[..., 1]) + np.cos(4 * x[..., 1] - 3 * x[..., 2]) + 0.5 * x[..., 3]


forest = DependencyForest.from_edges(4, [(0, 1), (1, 2)])
print(forest)
# groups are edges first, then isolated vertices
print(components_of(forest))

X = rng.random((60, 4))
y = f(X) + 0.05 * rng.standard_normal(60)
params = HyperParams(np.full(4, 0.3), np.full(4, 0.8), noise_std=0.05)
state = PosteriorState(Dataset(X, y), forest, params)

# posterior of the (x1, x2) component on a grid
g = np.linspace(0, 1, 60)
A, B = np.meshgrid(g, g, indexing="ij")
mean, var = state.posterior((0, 1), np.column_stack([A.ravel(), B.ravel()]))

fig, axes = plt.subplots(1, 2, figsize=(9, 4))
im = axes[0].contourf(A, B, mean.reshape(A.shape), 20)
axes[0].scatter(X[:, 0], X[:, 1], s=8, c="k")
axes[0].set_title("mean of the (x1, x2) component")
fig.colorbar(im, ax=axes[0])
im = axes[1].contourf(A, B, np.sqrt(var).reshape(A.shape), 20)
axes[1].set_title("std of the (x1, x2) component")
fig.colorbar(im, ax=axes[1])
fig.tight_layout()
fig.savefig("additive_posterior.png", dpi=100)

# components only see their own coordinates, so their sum is the full mean
Xs = rng.random((5, 4))
total = sum(state.posterior(g, Xs[:, list(g)])[0] for g in state.groups)
print(np.c_[total, f(Xs)])
