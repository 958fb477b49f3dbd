"""Kernel-method toolkit for predicting abnormal intraday returns from news.

Subpackages cover kernel construction, an SMO dual SVM solver, multiple
kernel learning (analytic center cutting plane method plus a reduced
gradient baseline), text featurization, market data / event labeling,
and a sliding-window backtest harness, all tied together by a CLI.
"""

__version__ = "0.1.0"

from . import backtest, kernels, market, mkl, svm, text  # noqa: F401
