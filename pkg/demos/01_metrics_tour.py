"""A walk through the utility and fairness metrics on a hand-sized example.

Run with: python demos/01_metrics_tour.py
"""

from fairdrop import accuracy, confusion, f1, fairness

# Twelve loan decisions: two groups, known outcomes, a model's predictions.
labels = [1, 1, 1, 0, 0, 0, 1, 1, 1, 0, 0, 0]
group = [0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1]
preds = [1, 1, 0, 0, 1, 0, 1, 0, 0, 0, 0, 1]

counts = confusion(preds, labels)
print(f"confusion: tp={counts.tp} tn={counts.tn} fp={counts.fp} fn={counts.fn}")
print(f"accuracy = {accuracy(counts):.3f}")
print(f"F1       = {f1(counts):.3f}")

report = fairness(preds, labels, group)
rates = report.group_rates
print()
print("per-group rates (group 0 vs group 1):")
print(f"  true-positive rate : {rates.tpr[0]:.3f} vs {rates.tpr[1]:.3f}")
print(f"  false-positive rate: {rates.fpr[0]:.3f} vs {rates.fpr[1]:.3f}")
print(f"  positive-pred rate : {rates.positive_rate[0]:.3f} vs {rates.positive_rate[1]:.3f}")
print()
print(f"equalized-odds difference (max of the two gaps): {report.eod:.3f}")
print(f"equal-opportunity difference (TPR gap only)    : {report.eo_diff:.3f}")
print(f"demographic-parity difference                  : {report.dp_diff:.3f}")

# Why accuracy alone misleads on imbalanced data: an all-negative predictor.
print()
all_neg = confusion([0] * 100, [1] * 12 + [0] * 88)
print(f"all-negative predictor on 12%-positive data: "
      f"accuracy={accuracy(all_neg):.2f} but F1={f1(all_neg):.2f}")

# Undefined rates are flagged, never silently zeroed.
degenerate = fairness([1, 0, 1], [1, 0, 1], [0, 0, 0])  # nobody in group 1
print(f"single-group data: eod={degenerate.eod!r} (undefined, not 0)")
