"""Text path end to end: tokenize, build a vocabulary, encode, train, score.

Run:  python3 demos/02_text_classifier.py
"""

import numpy as np

from abusenet.data import synth_groups
from abusenet.evaluation import build_and_fit, encode_fold, evaluate_model
from abusenet.model import ModelConfig
from abusenet.text import Vocabulary, choose_seq_len, tokenize
from abusenet.training import TrainingConfig

print("tokenize('Check https://t.co #Fair WOW @sam'):")
print(" ", tokenize("Check https://t.co #Fair WOW @sam"))

corpus = synth_groups(n=800, seed=0)
tokens = corpus.tokenized()
vocab = Vocabulary.build(tokens)
spec = choose_seq_len([len(t) for t in tokens])
print(f"vocabulary size {len(vocab)} (hapaxes removed), sequence length {spec.seq_len} "
      "(95th percentile of token counts)")

# mask WV = text only; the fold encoder rebuilds vocab/length on the train split
n = len(corpus)
split = int(0.8 * n)
train, test, artifacts = encode_fold(corpus, np.arange(split), np.arange(split, n), "WV")

model_cfg = ModelConfig(embed_dim=16, units=16, recurrent_dropout=0.25)
config = TrainingConfig(strategy="naive", batch_size=64, max_epochs=25, patience=5, seed=0)
model, history = build_and_fit(train, config, model_cfg, artifacts)
print(f"trained {history.epochs_run} epochs, best validation epoch {history.best_epoch + 1}")
print("held-out metrics:", {k: round(v, 3) for k, v in evaluate_model(model, test).items()})
