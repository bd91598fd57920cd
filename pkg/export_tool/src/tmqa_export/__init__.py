"""Model-package export tool for tonemap-iqa."""

from .export import export_backbone, verify_export
from .trunk import TAP_NAMES, build_reference

__all__ = ["TAP_NAMES", "build_reference", "export_backbone", "verify_export"]
