"""Per-view image-feature exporter for the chiralis pipeline."""

__version__ = "0.1.0"

from .backends import (BackendUnavailable, DiffusionViTBackend,
                       MockChiralBackend, make_backend)
from .export import ExportResult, export_features
from .job import ExportJob, JobError, load_job
from .rendering import RenderedView, flip_view_horizontal, render_view
