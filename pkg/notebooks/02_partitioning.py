# %% [markdown]
# # Synthetic data and non-IID partitioning
#
# Gaussian blobs stand in for image data. Client shards are drawn with
# per-class Dirichlet proportions; smaller beta means more skewed clients.

# %%
import numpy as np

from fedcross.data import make_synthetic, partition_dirichlet, partition_iid, train_test_split

ds = make_synthetic(num_classes=10, dim=32, per_class=500, class_sep=4.0, seed=0)
train, test = train_test_split(ds, 0.2, seed=0)
print(len(train), "train /", len(test), "test samples")

# %% [markdown]
# Class histograms of the first five clients for three levels of skew.

# %%
for beta in (100.0, 0.5, 0.1):
    plan = partition_dirichlet(train, num_clients=50, beta=beta, min_per_client=10, seed=1)
    print(f"beta={beta}")
    for c in range(5):
        print("   ", np.bincount(train.labels[plan.assignments[c]], minlength=10))

# %% [markdown]
# The IID split cuts a shuffled index list into equal pieces.

# %%
iid = partition_iid(train, 50, seed=1)
print("IID shard sizes:", sorted(set(iid.sizes().tolist())))
