"""Image manipulation forensics toolkit.

Stage 1 reads metadata (Exif, quantization tables, filename) and consults a
reference database; stage 2 localizes suspicious regions in pixels; stage 3
scans Android filesystem extractions for editor artifacts.
"""

__version__ = "0.1.0"
