"""LSTM/GRU price forecasters trained with Adam or Nesterov momentum."""

try:
    from ._rnnopt import (DataError, gradcheck, prepare, rmse, scale, synthetic_series, train,
                          unscale)
except ImportError:  # build-tree layout: extension sits next to, not inside, the package
    from _rnnopt import (DataError, gradcheck, prepare, rmse, scale, synthetic_series, train,
                         unscale)

__all__ = ["DataError", "gradcheck", "prepare", "rmse", "scale", "synthetic_series", "train", "unscale"]
