"""Relation classification for clinical concept pairs.

A small, self-contained CNN classifier over sentences with two marked
concepts: word + position embeddings, windowed convolution, per-segment
max-pooling, concept features, and two loss variants (plain softmax and
a category-masked softmax).  Everything is float64 numpy with hand-written
gradients so the whole model is checkable against finite differences.
"""

__version__ = "0.1.0"
