"""Batch analytics over tweet archives: keyword trends, LDA topics, TF-IDF/UMAP
maps, changepoints on topic series and retweet-cascade networks."""

__version__ = "0.1.0"
