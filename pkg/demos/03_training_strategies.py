"""The four ways to train the fused model, compared on one synthetic task.

naive        whole network at once
transfer     pretrain paths, freeze them, train a new head
transfer_ft  pretrain paths, keep them trainable under the new head
interleaved  alternate which path the optimizer touches per mini-batch,
             selected by the parity of (batch_number + epoch_number)

Run:  python3 demos/03_training_strategies.py
"""

import numpy as np

from abusenet.data import synth_groups
from abusenet.evaluation import build_and_fit, encode_fold, evaluate_model
from abusenet.model import ModelConfig
from abusenet.training import TrainingConfig

corpus = synth_groups(n=1200, noise=0.02, seed=1)
n = len(corpus)
split = int(0.8 * n)
train_idx, test_idx = np.arange(split), np.arange(split, n)

model_cfg = ModelConfig(embed_dim=12, units=16, hidden=(32, 16), fusion_dim=16,
                        recurrent_dropout=0.25)

for strategy in ("naive", "transfer", "transfer_ft", "interleaved"):
    config = TrainingConfig(strategy=strategy, batch_size=128, max_epochs=30,
                            patience=6, seed=4)
    train, test, artifacts = encode_fold(corpus, train_idx, test_idx, "WV+TF+UF")
    model, history = build_and_fit(train, config, model_cfg, artifacts)
    metrics = evaluate_model(model, test)
    stages = f" stages={list(history.stages)}" if history.stages else ""
    print(f"{strategy:>12}: auc={metrics['auc']:.3f} acc={metrics['accuracy']:.3f} "
          f"f1={metrics['f1']:.3f} epochs={history.epochs_run}{stages}")
