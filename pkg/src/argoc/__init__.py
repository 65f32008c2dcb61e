"""Clustered search-data nowcasting of influenza-like illness.

Modules: ``timeseries`` (panels, transforms, design windows), ``clustering``
(average linkage), ``sgl`` (sparse group lasso), ``nowcast`` (rolling
forecasts), ``boost`` (cross-regional BLP), ``uncertainty`` (bootstrap
intervals), ``evaluation`` (metrics) and ``cli``.
"""

__version__ = "0.1.0"
