"""Prototype-attention multivariate time series forecasting.

Two phases: offline clustering distills training segments into k
prototypes under a distance + correlation metric; online, a dual-branch
network attends through those prototypes in time linear in the window
length and fuses temporal and cross-entity features behind a learned
gate.
"""

__version__ = "0.1.0"
