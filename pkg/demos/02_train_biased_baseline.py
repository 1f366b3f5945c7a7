"""Synthesize a biased dataset, train a classifier on it, and measure how
unfair the result is.

Run with: python demos/02_train_biased_baseline.py
"""

from fairdrop import (MlpArchitecture, TrainConfig, accuracy, confusion, f1, fairness,
                      predict_batch, split, synthesize_biased, train)

# The generator plants two mechanisms: feature 0 is a noisy proxy for group
# membership, and the labeling rule demands a higher score from group 1.
data = synthesize_biased(n_rows=10_000, n_features=10, bias_strength=0.8, seed=7)
for g in (0, 1):
    rate = data.labels[data.protected == g].mean()
    print(f"group {g}: favorable-outcome rate {rate:.1%}")

parts = split(data, seed=11)
print(f"\nsplit: {parts.train.n_rows} train / {parts.validation.n_rows} validation "
      f"/ {parts.test.n_rows} test rows")

model = train(parts, MlpArchitecture((10, 16, 16, 1)),
              TrainConfig(learning_rate=0.3, epochs=30, batch_size=128,
                          train_dropout_prob=0.1, seed=1))

for name, subset in (("validation", parts.validation), ("test", parts.test)):
    preds = predict_batch(model, subset)
    counts = confusion(preds, subset.labels)
    report = fairness(preds, subset.labels, subset.protected)
    print(f"{name:>10}: F1 {f1(counts):.3f}  accuracy {accuracy(counts):.3f}  "
          f"EOD {report.eod:.2%}")

print("\nThe model learned the proxy; its error rates differ by group:")
preds = predict_batch(model, parts.validation)
rates = fairness(preds, parts.validation.labels, parts.validation.protected).group_rates
print(f"validation TPR by group: {rates.tpr[0]:.3f} vs {rates.tpr[1]:.3f}")
print(f"validation FPR by group: {rates.fpr[0]:.3f} vs {rates.fpr[1]:.3f}")
print("the equalized-odds difference is the larger of the two gaps.")
