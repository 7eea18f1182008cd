"""Classic classifiers used to audit source data and extracted features."""
