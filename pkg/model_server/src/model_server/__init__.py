"""Reference HTTP backend over real transformer models, plus fine-tuning scripts."""

__version__ = "0.1.0"
