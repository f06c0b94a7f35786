"""
Pipeline services package
"""

from .curation_service import CurationResult, CurationService, SelectionModel, ablate, curate
from .report_service import ReportService, report_export, report_service

__all__ = [
    "CurationResult", "CurationService", "SelectionModel", "ablate", "curate",
    "ReportService", "report_export", "report_service",
]
