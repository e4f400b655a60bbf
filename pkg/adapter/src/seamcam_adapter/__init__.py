"""Backbone exporters emitting engine-compatible proposal bundle files."""

from .backbones import BackboneUnavailable, MockBackbone, available_backbones, make_backbone
from .export import AdapterConfig, export_bundles, load_manifest
from .rle import ConversionError, convert_external_rle, encode_row_major, mask_payload

__all__ = [
    "AdapterConfig",
    "BackboneUnavailable",
    "ConversionError",
    "MockBackbone",
    "available_backbones",
    "convert_external_rle",
    "encode_row_major",
    "export_bundles",
    "load_manifest",
    "make_backbone",
    "mask_payload",
]
