"""Reference ML-kNN metrics from scikit-multilearn on an exported split.

Usage: python mlknn_reference.py <dir-with-train.csv-and-test.csv> <num_labels>

Features are min-max scaled with the training ranges before fitting, the
same preprocessing the Rust classifier applies. Prints a JSON object.
"""

import json
import sys

import numpy as np
from scipy import sparse
from sklearn.neighbors import NearestNeighbors
from skmultilearn.adapt import MLkNN, mlknn

# scikit-multilearn passes the neighbour count positionally, which newer
# scikit-learn rejects.
mlknn.NearestNeighbors = lambda k: NearestNeighbors(n_neighbors=k)


def load(path, num_labels):
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    return data[:, :-num_labels], data[:, -num_labels:].astype(int)


def main():
    root, num_labels = sys.argv[1], int(sys.argv[2])
    xtr, ytr = load(f"{root}/train.csv", num_labels)
    xte, yte = load(f"{root}/test.csv", num_labels)
    lo, hi = xtr.min(axis=0), xtr.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    xtr, xte = (xtr - lo) / span, (xte - lo) / span

    # exclude each training instance from its own neighbourhood while
    # fitting, but not test instances while predicting
    clf = MLkNN(k=10, s=1.0, ignore_first_neighbours=1)
    clf.fit(xtr, sparse.lil_matrix(ytr))
    clf.ignore_first_neighbours = 0
    z = clf.predict(xte).toarray().astype(int)

    keep = yte.sum(axis=1) > 0
    inter = (yte & z).sum(axis=1)
    union = (yte | z).sum(axis=1)
    accuracy = float(np.mean(inter[keep] / union[keep]))
    exact = float(np.mean((yte == z).all(axis=1)))
    hamming = float(np.mean(yte != z))
    print(json.dumps({"accuracy": accuracy, "exact_match": exact, "hamming_loss": hamming}))


if __name__ == "__main__":
    main()
