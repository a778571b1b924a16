"""Behavioral-marker measurements from recorded infant assessment sessions.

Head-motion signals from tracked facial features, attention-task scoring,
arm-asymmetry measures from 2D skeletons and cloud-model body-pose search
over foreground masks.
"""

__version__ = "0.1.0"
