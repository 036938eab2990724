"""Minute-level liquidity analytics on tick tapes.

The pipeline: parse a tick tape, keep the trading session, reduce each
ticker-day to one-minute buckets, compute seventeen liquidity metrics per
bucket, label each minute with the next minute's first-trade direction,
split chronologically 70/15/15, and train three classifiers (logistic
regression, linear SVM, random forest) to predict the label. A seedable
synthetic tape generator with a plantable signal closes the loop for
testing and calibration.
"""

from .errors import LiqlabError

__version__ = "0.1.0"

__all__ = ["LiqlabError", "__version__"]
