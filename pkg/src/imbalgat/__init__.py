"""Graph attention networks with a minority attention regularizer for imbalanced node classification."""

__version__ = "0.1.0"
