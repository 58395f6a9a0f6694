"""Anchored latent-factor topic discovery over binary bag-of-words corpora.

The optimizer learns binary latent factors that explain as much multivariate
dependence in the word-presence data as possible, while user-specified anchor
words pin chosen words to chosen factors so the factors pick up the intended
semantics.
"""

__version__ = "0.1.0"
