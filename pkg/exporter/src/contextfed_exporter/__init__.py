"""Batch embedding exporter producing contextfed embedding-store files."""

from .export import ExportJob, export, main

__all__ = ["ExportJob", "export", "main"]
