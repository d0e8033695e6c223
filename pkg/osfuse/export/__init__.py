"""Report export: JSON, text, SVG charts and PDF."""

from .report import Report, ReportSection, ReportGenerator

__all__ = ['Report', 'ReportSection', 'ReportGenerator']
