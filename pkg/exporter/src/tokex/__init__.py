"""Feature exporter: frozen reference encoders to TPK1 containers."""

from .container import ExportError, container_bytes, write_container, write_manifest
from .export import ExportJob, export_text_embedding, export_visual_tokens
from .models import TextEncoder, VisualEncoder, make_stub_weights

__version__ = "0.1.0"

__all__ = [
    "ExportError",
    "ExportJob",
    "TextEncoder",
    "VisualEncoder",
    "container_bytes",
    "export_text_embedding",
    "export_visual_tokens",
    "make_stub_weights",
    "write_container",
    "write_manifest",
    "__version__",
]
