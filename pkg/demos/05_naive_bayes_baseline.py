"""The classical reference: multinomial Naive Bayes over TF-IDF weights.

Run:  python3 demos/05_naive_bayes_baseline.py
"""

from abusenet.baseline import TfidfModel, nb_fit, nb_predict, preprocess_baseline
from abusenet.data import synth_groups
from abusenet.metrics import prf1, roc_auc

print("preprocess('The CAT sat on https://x.co #mat'):",
      preprocess_baseline("The CAT sat on https://x.co #mat"))

corpus = synth_groups(n=1000, seed=2)
docs = [preprocess_baseline(t) for t in corpus.texts]
split = int(0.8 * len(docs))

tfidf = TfidfModel(top_k=10000)
train_matrix = tfidf.fit_transform(docs[:split])
test_matrix = tfidf.transform(docs[split:])
print(f"vocabulary {len(tfidf.vocabulary)} terms, idf in "
      f"[{tfidf.idf.min():.2f}, {tfidf.idf.max():.2f}]")

nb = nb_fit(train_matrix, corpus.labels[:split], n_classes=2)
preds, posteriors = nb_predict(nb, test_matrix)
labels = corpus.labels[split:]
quality = prf1(preds, labels, 2)
print(f"auc={roc_auc(posteriors, labels):.3f} acc={quality['accuracy']:.3f} "
      f"f1={quality['f1']:.3f}")
