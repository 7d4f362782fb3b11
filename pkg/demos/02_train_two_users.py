"""
Training two users that share one channel
=========================================

A short run of the default setup: two users, four Gaussian-blob classes,
16-symbol binary codes, training at 0 dB. After training, the users' codes
for the same input point in nearly orthogonal directions, and each decoder
only understands its own user.

Runs in about a minute; ``sfdma train`` does the full 200 epochs.
"""

import numpy as np

from sfdma import data, trainer

config = trainer.TrainConfig(epochs=40)
spec = config.data
train_set, test_set = data.make_split(spec.classes, spec.input_dim,
                                      [spec.per_class, spec.test_per_class], spec.spread, config.seed)

result = trainer.train(config, train_set,
                       log=lambda row: row["epoch"] % 10 == 0 and print(
                           f"epoch {row['epoch']:3d}  loss {row['loss']:.4f}  acc {np.round(row['acc'], 3)}"))

# %%
# Accuracy over Rayleigh fading at a few test SNRs
for snr_db in (0.0, 10.0, 20.0):
    acc = trainer.evaluate_accuracy(result.models, test_set, snr_db, trials=2, seed=1)
    print(f"{snr_db:5.1f} dB  accuracy {np.round(acc.value, 3)}")

# %%
# Orthogonality of the two users' codes for identical inputs
orth = trainer.orthogonality_report(result.models, test_set)[0]
print(f"mean cosine {orth['cosine']:+.3f}, angle {orth['angle_deg']:.1f} deg")

# Decoder i applied to user j's signal; chance is 0.25
cross = trainer.cross_decoding_report(result.models, test_set, 20.0, trials=1, seed=2)
print("cross-decoding accuracy (rows: decoder, columns: sender)")
print(np.round(cross.value, 3))
