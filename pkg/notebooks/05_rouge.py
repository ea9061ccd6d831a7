# %% [markdown]
# # ROUGE scoring
#
# Clipped n-gram overlap for ROUGE-1/2 and a single whole-summary LCS for
# ROUGE-L, all with the unweighted harmonic mean. Tokens are lowercased
# and split on whitespace, with no stemming.

# %%
from mmsumm.rouge import evaluate_pairs, rouge_l, rouge_n

print(rouge_n("the cat", "the cat sat", 1))
print(rouge_l("a c", "a b c"))
print(rouge_n("a b", "a", 2))  # too short for a bigram: scored 0 and flagged

# %%
hyps = ["visual visual textual acoustic", "textual textual textual textual", "acoustic"]
refs = ["visual visual textual textual", "textual acoustic textual textual", "acoustic visual"]
report = evaluate_pairs(hyps, refs)
for metric, score in report.mean.items():
    print(f"{metric:7s} P {score.precision:.3f} R {score.recall:.3f} F {score.f1:.3f}")
print("length histogram", report.length_histogram)
