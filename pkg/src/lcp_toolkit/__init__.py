"""
LCP Toolkit

Lexical complexity prediction: score how hard a target word or two-word
expression is to understand in its context, with transformer regressors
trained by standard, adversarially regularized, two-stage and multi-task
fine-tuning, plus evaluation and output ensembling.
"""

__version__ = "0.1.0"
