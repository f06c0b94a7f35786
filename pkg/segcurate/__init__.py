"""
segcurate
Segment-level curation toolkit for mixed-quality robot demonstrations
"""

__version__ = "1.0.0"
__author__ = "segcurate maintainers"
__description__ = "Segment, select and repair imitation-learning demonstrations"
