# %% [markdown]
# # Model similarity and collaborator selection
#
# Every middleware model picks one collaborator per round. Three rules are
# available: round-robin ("in order"), most similar and least similar by
# cosine similarity of the flattened parameters.

# %%
import numpy as np

from fedcross.aggregation import SelectionStrategy, co_model_select, in_order_partner, similarity_matrix
from fedcross.params import cosine_similarity

# %% [markdown]
# Standard cosine similarity is bounded in [-1, 1] and equals 1 for a vector
# with itself. The literal sum-of-norms variant is kept for comparison; note
# that it does not peak at the vector itself.

# %%
x = np.array([3.0, 4.0])
print("standard :", cosine_similarity(x, x))
print("paper-eq5:", cosine_similarity(x, x, "paper-eq5"))
print("paper-eq5 vs 2x:", cosine_similarity(x, 2 * x, "paper-eq5"))

# %% [markdown]
# A toy pool: model 1 is almost parallel to model 0, model 2 is orthogonal.

# %%
pool = [np.array([1.0, 0.0]), np.array([1.0, 0.01]), np.array([0.0, 1.0])]
print(np.round(similarity_matrix(pool), 4))
for kind in ("highest", "lowest"):
    print(kind, "->", co_model_select(0, 0, pool, SelectionStrategy(kind)))

# %% [markdown]
# Round-robin order meets every other model exactly once every K-1 rounds.

# %%
K = 5
for i in range(K):
    print(i, [in_order_partner(i, r, K) for r in range(K - 1)])
