"""primscene: stylize placed primitives into textured meshes and fold them
into a posed-image capture dataset, ready for external radiance-field
retraining.

The public surface is intentionally small; most workflows go through
`integration.insert_objects`, the CLI, or the HTTP service.
"""

__version__ = "0.1.0"
